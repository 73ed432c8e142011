//! TOML experiment configuration and its resolution against presets and
//! command-line overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use noonsim::lattice::{TrapParameters, DEFAULT_BRACKET, DEFAULT_DISPLACEMENT};
use noonsim::protocols::ExecutionMode;
use noonsim::robustness::{PulseMode, StartSign};
use noonsim::{Error, ModelParameters, Preset, ProtocolConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Spectrum,
    Evolve,
    Protocol1,
    Protocol2,
    Readout,
    Physical,
    Robustness,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Evolve => "evolve",
            Kind::Protocol1 => "protocol1",
            Kind::Protocol2 => "protocol2",
            Kind::Readout => "readout",
            Kind::Physical => "physical",
            Kind::Robustness => "robustness",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Tsv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Kind>,
    /// Reserved; every experiment is deterministic.
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub physical: PhysicalSection,
    #[serde(default)]
    pub robustness: RobustnessSection,
}

/// Couplings in rad/s. Unset values come from the preset (Set 1 by default).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub preset: Option<Preset>,
    pub m: u32,
    pub p: u32,
    pub u0: Option<f64>,
    /// `(U12 - U0) / 4`.
    pub u: Option<f64>,
    pub j: Option<f64>,
    pub mu: Option<f64>,
    /// Defaults to `mu`.
    pub nu: Option<f64>,
    /// Overrides `t_m = pi / (2 Omega)` (s).
    pub t_m: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            preset: None,
            m: noonsim::presets::M,
            p: noonsim::presets::P,
            u0: None,
            u: None,
            j: None,
            mu: None,
            nu: None,
            t_m: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// `U/J` with `U0` and `J` fixed, no fields.
    #[default]
    Coupling,
    /// `mu/J` at the model couplings.
    Field,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub sweep: SweepVariable,
    pub min: f64,
    /// Defaults to 4 for `U/J` and 2 for `mu/J`.
    pub max: Option<f64>,
    pub points: usize,
    /// `nu/J` held fixed during a field sweep.
    pub nu_over_j: f64,
    /// Time points on `[0, t_m]` for the full-versus-effective comparison; 0 skips it.
    pub effective_points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { sweep: SweepVariable::Coupling, min: 0.0, max: None, points: 41, nu_over_j: 0.0, effective_points: 0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    #[default]
    Full,
    Effective,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub points: usize,
    /// Defaults to `t_m` (s).
    pub t_end: Option<f64>,
    pub hamiltonian: HamiltonianKind,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection { points: 101, t_end: None, hamiltonian: HamiltonianKind::Full }
    }
}

/// Shared by protocol1, protocol2 and readout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    /// Evenly spaced `P theta` over `[0, pi]`.
    pub points: usize,
    /// Explicit `P theta` values; replaces `points`.
    pub p_theta: Option<Vec<f64>>,
    pub mode: ExecutionMode,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection { points: 64, p_theta: None, mode: ExecutionMode::Full }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalSection {
    pub trap: TrapParameters,
    /// Bohr radii; one integrability root per entry.
    pub scattering_lengths: Vec<f64>,
    /// Root bracket for `omega_r` (rad/s).
    pub bracket: [f64; 2],
    /// Encoding-beam displacement (m).
    pub displacement: [f64; 2],
    /// `omega_r` range (rad/s) of the coupling scan.
    pub scan: [f64; 2],
    /// 0 skips the scan.
    pub scan_points: usize,
}

impl Default for PhysicalSection {
    fn default() -> Self {
        PhysicalSection {
            trap: TrapParameters::default(),
            scattering_lengths: vec![-21.0, -20.85],
            bracket: [DEFAULT_BRACKET.0, DEFAULT_BRACKET.1],
            displacement: [DEFAULT_DISPLACEMENT.0, DEFAULT_DISPLACEMENT.1],
            scan: [2.0 * PI * 20e3, 2.0 * PI * 60e3],
            scan_points: 41,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Direct,
    Physical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSection {
    /// Explicit `xi/J` values; replaces the evenly spaced grid.
    pub xi_over_j: Option<Vec<f64>>,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// `N_dt`, number of `+xi`/`-xi` oscillations.
    pub oscillations: usize,
    pub modes: Vec<PulseMode>,
    pub source: SourceKind,
    pub start: StartSign,
    /// Used by the physical source.
    pub trap: TrapParameters,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        RobustnessSection {
            xi_over_j: None,
            min: 0.0,
            max: 0.02,
            points: 21,
            oscillations: 100,
            modes: vec![PulseMode::Static, PulseMode::Pulsed],
            source: SourceKind::Direct,
            start: StartSign::Plus,
            trap: TrapParameters::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub grid: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// Model values after applying the preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolvedModel {
    pub preset: Option<Preset>,
    pub m: u32,
    pub p: u32,
    pub u0: f64,
    pub u: f64,
    pub j: f64,
    pub mu: f64,
    pub nu: f64,
    pub t_m: Option<f64>,
}

impl ResolvedModel {
    pub fn params(&self) -> ModelParameters<f64> {
        ModelParameters::integrable(self.u0, self.u, self.j)
    }

    pub fn protocol_config(&self, p_theta: f64) -> noonsim::Result<ProtocolConfig<f64>> {
        let cfg = ProtocolConfig::new(self.m, self.p, self.params(), self.mu, self.nu, p_theta)?;
        match self.t_m {
            Some(t) => cfg.with_t_m(t),
            None => Ok(cfg),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Applies overrides and pins the experiment kind.
    pub fn apply(&mut self, kind: Kind, ov: &Overrides) -> anyhow::Result<()> {
        if let Some(k) = self.experiment {
            if k != kind {
                bail!(Error::InvalidConfig(format!("config declares experiment '{k}' but '{kind}' was requested")));
            }
        }
        self.experiment = Some(kind);
        if ov.preset.is_some() {
            self.model.preset = ov.preset;
        }
        if let Some(fmt) = ov.format {
            self.output.format = fmt;
        }
        if let Some(dir) = &ov.out {
            self.output.dir = Some(dir.clone());
        }
        if let Some(n) = ov.grid {
            match kind {
                Kind::Spectrum => self.spectrum.points = n,
                Kind::Evolve => self.evolve.points = n,
                Kind::Protocol1 | Kind::Protocol2 | Kind::Readout => {
                    self.protocol.points = n;
                    self.protocol.p_theta = None;
                }
                Kind::Physical => self.physical.scan_points = n,
                Kind::Robustness => {
                    self.robustness.points = n;
                    self.robustness.xi_over_j = None;
                }
            }
        }
        Ok(())
    }

    pub fn resolve_model(&self) -> anyhow::Result<ResolvedModel> {
        let m = &self.model;
        let explicit = m.u0.is_some() && m.u.is_some() && m.j.is_some() && m.mu.is_some();
        let preset = m.preset.or(if explicit { None } else { Some(Preset::Set1) });
        let base = preset.map(Preset::values);
        let pick = |v: Option<f64>, name: &str, from: fn(&noonsim::ParameterSet) -> f64| -> anyhow::Result<f64> {
            match v.or(base.as_ref().map(from)) {
                Some(x) if x.is_finite() => Ok(x),
                Some(x) => bail!(Error::InvalidConfig(format!("model.{name} must be finite, got {x}"))),
                None => bail!(Error::InvalidConfig(format!("model.{name} is required without a preset"))),
            }
        };
        let mu = pick(m.mu, "mu", |s| s.mu)?;
        Ok(ResolvedModel {
            preset,
            m: m.m,
            p: m.p,
            u0: pick(m.u0, "u0", |s| s.u0)?,
            u: pick(m.u, "u", |s| s.u)?,
            j: pick(m.j, "j", |s| s.j)?,
            mu,
            nu: m.nu.unwrap_or(mu),
            t_m: m.t_m,
        })
    }

    pub fn p_theta_grid(&self) -> anyhow::Result<Vec<f64>> {
        let grid = match &self.protocol.p_theta {
            Some(v) => v.clone(),
            None => noonsim::protocols::p_theta_grid(self.protocol.points),
        };
        if grid.is_empty() {
            bail!(Error::InvalidConfig("P theta grid is empty".into()));
        }
        Ok(grid)
    }

    pub fn spectrum_grid(&self) -> anyhow::Result<Vec<f64>> {
        let s = &self.spectrum;
        let max = s.max.unwrap_or(match s.sweep {
            SweepVariable::Coupling => 4.0,
            SweepVariable::Field => 2.0,
        });
        linspace(s.min, max, s.points, "spectrum")
    }

    pub fn xi_grid(&self) -> anyhow::Result<Vec<f64>> {
        let r = &self.robustness;
        match &r.xi_over_j {
            Some(v) if v.is_empty() => bail!(Error::InvalidConfig("robustness xi grid is empty".into())),
            Some(v) => Ok(v.clone()),
            None => linspace(r.min, r.max, r.points, "robustness"),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize, what: &str) -> anyhow::Result<Vec<f64>> {
    if points == 0 {
        bail!(Error::InvalidConfig(format!("{what} grid needs at least one point")));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        bail!(Error::InvalidConfig(format!("{what} range [{lo}, {hi}] is invalid")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|k| if k + 1 == points { hi } else { lo + step * k as f64 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("experimnet = \"protocol1\"").is_err());
        assert!(ExperimentConfig::parse("[model]\nU = 3.0").is_err());
        assert!(ExperimentConfig::parse("[physical.trap]\nwaist = 1.0").is_err());
    }

    #[test]
    fn preset_fills_unset_values() {
        let cfg = ExperimentConfig::parse("[model]\npreset = \"set2\"\nmu = 10.0").unwrap();
        let m = cfg.resolve_model().unwrap();
        assert_eq!(m.j, 73.219);
        assert_eq!((m.mu, m.nu), (10.0, 10.0));
        let bare = ExperimentConfig::default().resolve_model().unwrap();
        assert_eq!(bare.preset, Some(Preset::Set1));
    }

    #[test]
    fn explicit_model_needs_no_preset() {
        let cfg = ExperimentConfig::parse("[model]\nu0 = 1.0\nu = 2.0\nj = 0.5\nmu = 0.1").unwrap();
        let m = cfg.resolve_model().unwrap();
        assert_eq!(m.preset, None);
        assert_eq!(m.u, 2.0);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::parse("[protocol]\np_theta = [0.0, 1.0]").unwrap();
        let ov = Overrides { grid: Some(5), preset: Some(Preset::Set2), ..Default::default() };
        cfg.apply(Kind::Protocol2, &ov).unwrap();
        assert_eq!(cfg.p_theta_grid().unwrap().len(), 5);
        assert_eq!(cfg.model.preset, Some(Preset::Set2));
        let mut other = ExperimentConfig::parse("experiment = \"spectrum\"").unwrap();
        assert!(other.apply(Kind::Evolve, &ov).is_err());
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let cfg = ExperimentConfig::load(&path).unwrap();
            assert!(cfg.experiment.is_some(), "{}", path.display());
            if cfg.experiment != Some(Kind::Physical) {
                cfg.resolve_model().unwrap().protocol_config(PI).unwrap();
            }
            seen += 1;
        }
        assert!(seen >= 7);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(0.0, 0.3, 4, "x").unwrap();
        assert_eq!(g.first(), Some(&0.0));
        assert_eq!(g.last(), Some(&0.3));
        assert!(linspace(1.0, 0.0, 3, "x").is_err());
    }
}
