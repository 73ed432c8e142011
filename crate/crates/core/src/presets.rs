//! The two reference parameter sets for `M = 4`, `P = 11`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::protocols::ProtocolConfig;

pub const M: u32 = 4;
pub const P: u32 = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Set1,
    Set2,
}

/// Couplings in rad/s. `u0` is the on-site value at the lattice integrability root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub preset: Preset,
    pub u0: f64,
    pub u: f64,
    pub j: f64,
    pub mu: f64,
    /// Scattering length (Bohr radii) of the lattice realization.
    pub scattering_length: f64,
    /// Radial trap frequency of the lattice realization (Hz, not rad/s).
    pub radial_frequency_hz: f64,
    /// `t_m` quoted alongside the set (s).
    pub quoted_t_m: f64,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Set1, Preset::Set2];

    pub fn values(self) -> ParameterSet {
        match self {
            Preset::Set1 => ParameterSet {
                preset: self,
                u0: 161.282,
                u: 75.876,
                j: 24.886,
                mu: 20.870,
                scattering_length: -21.0,
                radial_frequency_hz: 37_078.0,
                quoted_t_m: 36.950,
            },
            Preset::Set2 => ParameterSet {
                preset: self,
                u0: 161.797,
                u: 76.519,
                j: 73.219,
                mu: 15.168,
                scattering_length: -20.85,
                radial_frequency_hz: 31_610.0,
                quoted_t_m: 4.248,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Set1 => "set1",
            Preset::Set2 => "set2",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "set1" | "1" => Ok(Preset::Set1),
            "set2" | "2" => Ok(Preset::Set2),
            _ => Err(Error::InvalidConfig(format!("unknown preset '{s}', expected set1 or set2"))),
        }
    }
}

impl ParameterSet {
    /// Integrable couplings with `U12 = U0 + 4U`, no fields.
    pub fn params(&self) -> ModelParameters<f64> {
        ModelParameters::integrable(self.u0, self.u, self.j)
    }

    /// Protocol inputs with `nu = mu`.
    pub fn protocol_config(&self, p_theta: f64) -> Result<ProtocolConfig<f64>> {
        ProtocolConfig::new(M, P, self.params(), self.mu, self.mu, p_theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("Set1".parse::<Preset>().unwrap(), Preset::Set1);
        assert_eq!("set-2".parse::<Preset>().unwrap(), Preset::Set2);
        assert!("set3".parse::<Preset>().is_err());
    }

    #[test]
    fn presets_are_integrable() {
        for p in Preset::ALL {
            let v = p.values();
            assert!(v.params().is_integrable());
            assert!((v.params().u_scale() - v.u).abs() < 1e-12);
            assert!(v.protocol_config(0.0).is_ok());
        }
    }
}
