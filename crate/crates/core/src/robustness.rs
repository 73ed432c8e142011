//! Detuning `xi` away from `U0 = U13` and the alternating `±xi` pulse scheme.
//!
//! `H±` adds `±xi (N1 N3 + N2 N4)` to the integrable Hamiltonian. Pulses act
//! only during the integrable segments; the field steps use the Hamiltonian of
//! the starting sign.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_for, project};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, QuantumState, Site};
use crate::lattice::{self, TrapParameters};
use crate::model::{
    build_full_hamiltonian, detuning_operator, field_mu_operator, field_nu_operator, DerivedScales, HermitianOperator,
    ModelParameters,
};
use crate::protocols::{fidelity, ideal_protocol1_output, ideal_protocol2_output, ProtocolConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    /// `H+` throughout.
    Static,
    /// `H+`, `H-`, `H+`, ... over equal slices.
    #[default]
    Pulsed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSign {
    #[default]
    Plus,
    Minus,
}

/// Where the `±xi` couplings come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterSource {
    /// Shift `U13 = U24` by `±xi` with every other coupling fixed.
    #[default]
    Direct,
    /// Re-solve the lattice for the radial frequency where `U13 - U0 = ±xi`;
    /// `J` is kept at the base value.
    Physical { trap: TrapParameters },
}

impl ParameterSource {
    pub fn label(&self) -> &'static str {
        match self {
            ParameterSource::Direct => "direct",
            ParameterSource::Physical { .. } => "physical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Protocol inputs; `p_theta` is replaced by `pi/2`.
    pub base: ProtocolConfig<f64>,
    pub xi_over_j: Vec<f64>,
    /// Number of `+xi`/`-xi` oscillations, `N_dt`; each segment has `2 N_dt` slices.
    pub oscillations: usize,
    pub mode: PulseMode,
    pub source: ParameterSource,
    pub start: StartSign,
}

impl RobustnessConfig {
    pub fn new(base: ProtocolConfig<f64>, xi_over_j: Vec<f64>, oscillations: usize, mode: PulseMode) -> Result<Self> {
        if oscillations == 0 {
            return Err(Error::InvalidConfig("pulse count N_dt must be at least 1".into()));
        }
        if xi_over_j.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("xi grid must be finite".into()));
        }
        Ok(RobustnessConfig {
            base: base.with_p_theta(FRAC_PI_2)?,
            xi_over_j,
            oscillations,
            mode,
            source: ParameterSource::Direct,
            start: StartSign::Plus,
        })
    }

    pub fn with_source(mut self, source: ParameterSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_start(mut self, start: StartSign) -> Self {
        self.start = start;
        self
    }

    pub fn slices(&self) -> usize {
        2 * self.oscillations
    }
}

/// Applies `exp(-i H± dt)` alternately over `slices` equal slices of `total`.
pub fn pulsed_propagator(
    h_plus: &HermitianOperator<f64>,
    h_minus: &HermitianOperator<f64>,
    state: &QuantumState<f64>,
    total: f64,
    slices: usize,
    start: StartSign,
) -> Result<QuantumState<f64>> {
    if slices == 0 {
        return Err(Error::InvalidConfig("at least one pulse slice is required".into()));
    }
    let dt = total / slices as f64;
    let (first, second) = match start {
        StartSign::Plus => (h_plus, h_minus),
        StartSign::Minus => (h_minus, h_plus),
    };
    let mut psi = state.clone();
    for k in 0..slices {
        psi = evolve_for(if k % 2 == 0 { first } else { second }, &psi, dt)?;
    }
    Ok(psi)
}

/// One `xi` point: Protocol I branch statistics and the Protocol II fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub xi_over_j: f64,
    pub xi: f64,
    /// `(r, probability, fidelity)` for `r = 0` and `r = M`.
    pub protocol1: [(u32, f64, f64); 2],
    pub protocol2: f64,
    pub t_m: f64,
    pub t_mu: f64,
    pub t_nu: f64,
}

struct Couplings {
    plus: ModelParameters<f64>,
    minus: ModelParameters<f64>,
    mu: [f64; 2],
    nu: [f64; 2],
}

fn couplings(cfg: &RobustnessConfig, xi: f64) -> Result<Couplings> {
    let base = &cfg.base;
    match &cfg.source {
        ParameterSource::Direct => {
            let shift = |s: f64| {
                let mut p = base.params;
                p.u13 += s * xi;
                p.u24 += s * xi;
                p
            };
            Ok(Couplings { plus: shift(1.0), minus: shift(-1.0), mu: [base.mu; 2], nu: [base.nu; 2] })
        }
        ParameterSource::Physical { trap } => {
            let solve = |s: f64| -> Result<(ModelParameters<f64>, f64)> {
                let root = lattice::solve_detuning(trap, -s * xi, lattice::DEFAULT_BRACKET)?;
                let (dx, dy) = lattice::DEFAULT_DISPLACEMENT;
                let d = lattice::derive(trap, root.omega_r, dx, dy)?;
                Ok((d.model_parameters(base.params.j), d.mu))
            };
            let (plus, mu_p) = solve(1.0)?;
            let (minus, mu_m) = solve(-1.0)?;
            let sign = base.nu.signum();
            Ok(Couplings { plus, minus, mu: [mu_p, mu_m], nu: [sign * mu_p, sign * mu_m] })
        }
    }
}

fn mean(a: &ModelParameters<f64>, b: &ModelParameters<f64>) -> ModelParameters<f64> {
    let m = |x: f64, y: f64| 0.5 * (x + y);
    ModelParameters {
        u0: m(a.u0, b.u0),
        u12: m(a.u12, b.u12),
        u13: m(a.u13, b.u13),
        u14: m(a.u14, b.u14),
        u23: m(a.u23, b.u23),
        u24: m(a.u24, b.u24),
        u34: m(a.u34, b.u34),
        j: m(a.j, b.j),
        mu: 0.0,
        nu: 0.0,
    }
}

/// Fidelities at one detuning.
pub fn robustness_point(cfg: &RobustnessConfig, basis: &Arc<FockBasis>, xi_over_j: f64) -> Result<RobustnessRow> {
    let base = &cfg.base;
    if basis.n_total() != base.n_total() {
        return Err(Error::BasisMismatch(base.n_total(), basis.n_total()));
    }
    let xi = xi_over_j * base.params.j;
    let c = couplings(cfg, xi)?;
    let (t_m, mu_bar, nu_bar) = match cfg.source {
        ParameterSource::Direct => (base.derived.t_m, base.mu, base.nu),
        ParameterSource::Physical { .. } => {
            let t_m = DerivedScales::new(&mean(&c.plus, &c.minus), base.m, base.p)?.t_m;
            (t_m, 0.5 * (c.mu[0] + c.mu[1]), 0.5 * (c.nu[0] + c.nu[1]))
        }
    };
    let t_mu = base.theta() / (2.0 * mu_bar);
    let t_nu = std::f64::consts::PI / (4.0 * f64::from(base.m) * nu_bar.abs());
    if t_mu >= t_m || t_nu >= t_m {
        return Err(Error::InvalidConfig(format!("field steps ({t_mu}, {t_nu}) exceed t_m = {t_m}")));
    }

    let h_plus = build_full_hamiltonian(&c.plus, basis);
    let h_minus = build_full_hamiltonian(&c.minus, basis);
    let h_start = match cfg.start {
        StartSign::Plus => &h_plus,
        StartSign::Minus => &h_minus,
    };
    let with_mu = h_start.plus(mu_bar, &field_mu_operator::<f64>(basis));
    let with_nu = h_start.plus(nu_bar, &field_nu_operator::<f64>(basis));
    [&h_plus, &h_minus, &with_mu, &with_nu].par_iter().for_each(|h| {
        h.eigen();
    });

    let integrable = |psi: &QuantumState<f64>, t: f64| match cfg.mode {
        PulseMode::Static => evolve_for(h_start, psi, t),
        PulseMode::Pulsed => pulsed_propagator(&h_plus, &h_minus, psi, t, cfg.slices(), cfg.start),
    };

    let psi0 = QuantumState::fock(basis, base.initial_state())?;
    let pre = evolve_for(&with_mu, &integrable(&psi0, t_m - t_mu)?, t_mu)?;
    let mut protocol1 = [(0, 0.0, 0.0); 2];
    for (slot, r) in [0, base.m].into_iter().enumerate() {
        let ideal = ideal_protocol1_output(base, basis, r)?;
        protocol1[slot] = match project(&pre, Site::Three, r) {
            Ok(rec) => (r, rec.probability, fidelity(&ideal, &rec.post_state)?),
            Err(Error::ImpossibleOutcome { .. }) => (r, 0.0, 0.0),
            Err(e) => return Err(e),
        };
    }

    let psi2 = evolve_for(&with_nu, &integrable(&psi0, t_m - t_nu)?, t_nu)?;
    let psi4 = evolve_for(&with_mu, &integrable(&psi2, t_m - t_mu)?, t_mu)?;
    let protocol2 = fidelity(&ideal_protocol2_output(base, basis)?, &psi4)?;

    Ok(RobustnessRow { xi_over_j, xi, protocol1, protocol2, t_m, t_mu, t_nu })
}

/// Fidelity table over the configured `xi` grid, in grid order.
pub fn run_robustness(cfg: &RobustnessConfig, basis: &Arc<FockBasis>) -> Result<Vec<RobustnessRow>> {
    cfg.xi_over_j.par_iter().map(|&x| robustness_point(cfg, basis, x)).collect()
}

/// `N1 N3 + N2 N4` scaled by `xi`, the difference `(H+ - H-) / 2`.
pub fn detuning_term(basis: &FockBasis, xi: f64) -> DMatrix<f64> {
    detuning_operator::<f64>(basis) * xi
}
