//! NOON-state Protocols I and II, their idealized target states, fidelities
//! and readout statistics.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{ComplexField, DVector};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_diagonal_phase, evolve_for, measure_distribution, project, MeasurementRecord};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState, QuantumState, Site};
use crate::model::{
    build_effective_hamiltonian_charges, build_full_hamiltonian, DerivedScales, HermitianOperator, ModelParameters,
};
use crate::scalar::{cis, Real};

/// How the integrable segments and field steps are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// Full Hamiltonian; fields act for finite `t_mu`, `t_nu`.
    #[default]
    Full,
    /// Effective Hamiltonian; fields act as instantaneous phase gates.
    Idealized,
}

/// Validated protocol inputs for an initial state `|M, P, 0, 0>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig<T> {
    pub m: u32,
    pub p: u32,
    /// Integrable couplings with zero fields.
    pub params: ModelParameters<T>,
    /// Field on sites 2-4 used in the last step.
    pub mu: T,
    /// Field on sites 1-3 used in Protocol II.
    pub nu: T,
    /// Target encoded phase `P theta` (radians).
    pub p_theta: T,
    pub derived: DerivedScales<T>,
    pub mode: ExecutionMode,
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(m: u32, p: u32, params: ModelParameters<T>, mu: T, nu: T, p_theta: T) -> Result<Self> {
        if (m + p) % 2 == 0 {
            return Err(Error::InvalidConfig(format!("N = M + P must be odd, got {}", m + p)));
        }
        if m.abs_diff(p) < 2 {
            return Err(Error::InvalidConfig(format!("|M - P| >= 2 required, got M={m}, P={p}")));
        }
        if m == 0 || p == 0 {
            return Err(Error::InvalidConfig("M and P must both be positive".into()));
        }
        let params = params.with_fields(T::zero(), T::zero());
        if !params.is_integrable() {
            return Err(Error::InvalidConfig(
                "couplings must satisfy U13 = U24 = U0 and U12 = U23 = U34 = U14".into(),
            ));
        }
        if mu <= T::zero() {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {mu}")));
        }
        if nu == T::zero() {
            return Err(Error::InvalidConfig("nu must be nonzero".into()));
        }
        if p_theta < T::zero() {
            return Err(Error::InvalidConfig(format!("P theta must be non-negative, got {p_theta}")));
        }
        let derived = DerivedScales::new(&params, m, p)?;
        let cfg = ProtocolConfig { m, p, params, mu, nu, p_theta, derived, mode: ExecutionMode::Full };
        cfg.check_times()?;
        Ok(cfg)
    }

    /// Replaces `t_m` by a user-supplied value.
    pub fn with_t_m(mut self, t_m: T) -> Result<Self> {
        self.derived = self.derived.with_t_m(t_m);
        self.check_times()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: ExecutionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_p_theta(mut self, p_theta: T) -> Result<Self> {
        self.p_theta = p_theta;
        self.check_times()?;
        Ok(self)
    }

    fn check_times(&self) -> Result<()> {
        let t_m = self.derived.t_m;
        if t_m <= T::zero() {
            return Err(Error::InvalidConfig(format!("t_m must be positive, got {t_m}")));
        }
        if self.t_mu() >= t_m {
            return Err(Error::InvalidConfig(format!("t_mu = {} must be below t_m = {t_m}", self.t_mu())));
        }
        if self.t_nu() >= t_m {
            return Err(Error::InvalidConfig(format!("t_nu = {} must be below t_m = {t_m}", self.t_nu())));
        }
        Ok(())
    }

    pub fn n_total(&self) -> u32 {
        self.m + self.p
    }

    pub fn beta(&self) -> T {
        T::from_i32(self.derived.beta.expect("odd N")).expect("sign")
    }

    /// `theta = P theta / P`.
    pub fn theta(&self) -> T {
        self.p_theta / T::from_count(self.p)
    }

    /// `t_mu = theta / (2 mu)`.
    pub fn t_mu(&self) -> T {
        self.theta() / (T::lit(2.0) * self.mu)
    }

    /// `t_nu = pi / (4 M |nu|)`.
    pub fn t_nu(&self) -> T {
        T::pi() / (T::lit(4.0) * T::from_count(self.m) * self.nu.abs())
    }

    pub fn initial_state(&self) -> FockState {
        FockState::new(self.m, self.p, 0, 0)
    }

    fn kets(&self) -> [FockState; 4] {
        let (m, p) = (self.m, self.p);
        [FockState::new(m, p, 0, 0), FockState::new(m, 0, 0, p), FockState::new(0, p, m, 0), FockState::new(0, 0, m, p)]
    }
}

/// Evenly spaced `P theta` values over `[0, pi]`.
pub fn p_theta_grid<T: Real>(points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => (0..points)
            .map(|k| T::pi() * T::from_usize(k).unwrap() / T::from_usize(points - 1).unwrap())
            .collect(),
    }
}

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UberNoonStage {
    PreField,
    PostField,
}

/// Four-term uber-NOON state before or after the field step of Protocol I.
pub fn ideal_uber_noon<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>, stage: UberNoonStage) -> Result<QuantumState<T>> {
    let b = cfg.beta();
    let phase = match stage {
        UberNoonStage::PreField => c(T::one()),
        UberNoonStage::PostField => cis(cfg.p_theta),
    };
    let [k0, k1, k2, k3] = cfg.kets();
    QuantumState::superposition(basis, &[(c(b), k0), (phase, k1), (c(T::one()), k2), (-phase * b, k3)])
}

/// Post-measurement target of Protocol I for outcome `r` in `{0, M}`.
pub fn ideal_protocol1_output<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>, r: u32) -> Result<QuantumState<T>> {
    let b = cfg.beta();
    let e = cis(cfg.p_theta);
    let [k0, k1, k2, k3] = cfg.kets();
    if r == 0 {
        QuantumState::superposition(basis, &[(c(b), k0), (e, k1)])
    } else if r == cfg.m {
        QuantumState::superposition(basis, &[(c(T::one()), k2), (-e * b, k3)])
    } else {
        Err(Error::InvalidConfig(format!("ideal Protocol I output exists only for r = 0 or r = M, got {r}")))
    }
}

/// `(|M,P,0,0> + Upsilon |M,0,0,P>)/sqrt 2` with `Upsilon = beta exp(i(P theta - pi/2))`.
pub fn ideal_protocol2_output<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>) -> Result<QuantumState<T>> {
    let upsilon = cis(cfg.p_theta - T::frac_pi_2()) * cfg.beta();
    let [k0, k1, _, _] = cfg.kets();
    QuantumState::superposition(basis, &[(c(T::one()), k0), (upsilon, k1)])
}

/// Idealized states after each of the four steps of Protocol II.
pub fn ideal_protocol2_chain<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>) -> Result<[QuantumState<T>; 4]> {
    let b = cfg.beta();
    let one = c(T::one());
    let i = Complex::new(T::zero(), T::one());
    let [k0, k1, k2, k3] = cfg.kets();
    let psi1 = QuantumState::superposition(basis, &[(c(b), k0), (one, k1), (one, k2), (c(-b), k3)])?;
    let psi2 = QuantumState::superposition(basis, &[(c(b), k0), (one, k1), (i, k2), (-i * b, k3)])?;
    let psi3 = QuantumState::superposition(basis, &[(one, k0), (cis(-T::frac_pi_2()) * b, k1)])?;
    Ok([psi1, psi2, psi3, ideal_protocol2_output(cfg, basis)?])
}

/// Idealized readout state `U_eff(t_m)|Psi>` of a Protocol I branch (`Some(r)`,
/// `r` in `{0, M}`) or of the Protocol II output (`None`).
///
/// Branch `r = 0`: `c (|K0> + beta|K1>) - i s (beta|K2> - |K3>)`; branch `r = M`:
/// `c (|K0> - beta|K1>) - i s (beta|K2> + |K3>)`, with `c = cos(phi/2)`, `s = sin(phi/2)`
/// and `K0..K3 = |M,P,0,0>, |M,0,0,P>, |0,P,M,0>, |0,0,M,P>`. Protocol II is the
/// `r = 0` form with `phi = P theta - pi/2`.
pub fn ideal_readout_state<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>, branch: Option<u32>) -> Result<QuantumState<T>> {
    let b = cfg.beta();
    let (phi, sign) = match branch {
        None => (cfg.p_theta - T::frac_pi_2(), T::one()),
        Some(0) => (cfg.p_theta, T::one()),
        Some(r) if r == cfg.m => (cfg.p_theta, -T::one()),
        Some(r) => {
            return Err(Error::InvalidConfig(format!("readout state exists only for r = 0 or r = M, got {r}")))
        }
    };
    let half = phi / T::lit(2.0);
    let (co, si) = (c(half.cos()), Complex::new(T::zero(), half.sin()));
    let [k0, k1, k2, k3] = cfg.kets();
    QuantumState::superposition(basis, &[(co, k0), (co * b * sign, k1), (-si * b, k2), (si * sign, k3)])
}

/// `|<a|b>|`.
pub fn fidelity<T: Real>(a: &QuantumState<T>, b: &QuantumState<T>) -> Result<T> {
    Ok(a.inner(b)?.modulus())
}

/// `sqrt(<NOON_B| rho_B |NOON_B>)` for the reduced state on sites 2 and 4,
/// with `|NOON_B> = (|P,0> ± beta e^{i P theta} |0,P>)/sqrt 2`.
pub fn noon_fidelity_b<T: Real>(state: &QuantumState<T>, cfg: &ProtocolConfig<T>, symmetric: bool) -> T {
    let sign = if symmetric { T::one() } else { -T::one() };
    reduced_noon_overlap(state, cfg.p, cis(cfg.p_theta) * (cfg.beta() * sign))
}

/// `sqrt(<v| rho_B |v>)` with `|v> = (|P,0> + relative |0,P>)/sqrt 2` on sites 2 and 4.
pub fn reduced_noon_overlap<T: Real>(state: &QuantumState<T>, p: u32, relative: Complex<T>) -> T {
    let inv_sqrt2 = T::one() / T::lit(2.0).sqrt();
    let n = state.basis().n_total();
    // Amplitude contracted with the NOON bra, per configuration of sites 1 and 3.
    let mut contracted = vec![Complex::new(T::zero(), T::zero()); (n as usize + 1).pow(2)];
    for (s, a) in state.basis().states().iter().zip(state.amplitudes().iter()) {
        let weight = match (s.0[1], s.0[3]) {
            (x, 0) if x == p => c(inv_sqrt2),
            (0, y) if y == p => relative.conj() * inv_sqrt2,
            _ => continue,
        };
        contracted[(s.0[0] * (n + 1) + s.0[2]) as usize] += weight * a;
    }
    contracted.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// `arg(<M,0,0,P|phi> / <M,P,0,0|phi>)`.
pub fn relative_phase<T: Real>(state: &QuantumState<T>, cfg: &ProtocolConfig<T>) -> T {
    let [k0, k1, _, _] = cfg.kets();
    (state.amplitude(&k1) / state.amplitude(&k0)).argument()
}

/// Site-3 outcomes kept by post-selection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFilter {
    pub accepted: BTreeSet<u32>,
}

impl OutcomeFilter {
    /// The standard filter `{0, M}`.
    pub fn noon(m: u32) -> Self {
        OutcomeFilter { accepted: [0, m].into_iter().collect() }
    }

    pub fn accepts(&self, r: u32) -> bool {
        self.accepted.contains(&r)
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolReport<T: Real> {
    pub final_state: QuantumState<T>,
    pub ideal_state: QuantumState<T>,
    /// `|<ideal|final>|`.
    pub fidelity: T,
    /// Reduced-state NOON fidelity on sites 2 and 4.
    pub noon_fidelity_b: T,
    /// Protocol I only.
    pub measurement: Option<MeasurementRecord<T>>,
    /// False for Protocol I outcomes rejected by post-selection.
    pub accepted: bool,
    pub elapsed_model_time: T,
}

impl<T: Real> ProtocolReport<T> {
    pub fn outcome(&self) -> Option<u32> {
        self.measurement.as_ref().map(|m| m.outcome)
    }

    pub fn probability(&self) -> T {
        self.measurement.as_ref().map_or(T::one(), |m| m.probability)
    }
}

/// Protocol I: the state before measurement and one report per possible outcome.
#[derive(Clone, Debug)]
pub struct Protocol1Outcome<T: Real> {
    pub p_theta: T,
    pub pre_measurement: QuantumState<T>,
    pub distribution: Vec<(u32, T)>,
    pub branches: Vec<ProtocolReport<T>>,
}

impl<T: Real> Protocol1Outcome<T> {
    pub fn branch(&self, r: u32) -> Option<&ProtocolReport<T>> {
        self.branches.iter().find(|b| b.outcome() == Some(r))
    }

    /// Total probability of accepted outcomes.
    pub fn success_probability(&self) -> T {
        self.branches.iter().filter(|b| b.accepted).fold(T::zero(), |acc, b| acc + b.probability())
    }
}

/// Prebuilt operators for repeated protocol runs at different `P theta`.
pub struct ProtocolEngine<T: Real> {
    cfg: ProtocolConfig<T>,
    basis: Arc<FockBasis>,
    integrable: HermitianOperator<T>,
    with_mu: HermitianOperator<T>,
    with_nu: HermitianOperator<T>,
    effective: HermitianOperator<T>,
    diff_24: DVector<T>,
    diff_13: DVector<T>,
}

impl<T: Real> ProtocolEngine<T> {
    pub fn new(cfg: ProtocolConfig<T>, basis: Arc<FockBasis>) -> Result<Self> {
        if basis.n_total() != cfg.n_total() {
            return Err(Error::BasisMismatch(cfg.n_total(), basis.n_total()));
        }
        let p = cfg.params;
        let diff_24 = DVector::from_iterator(basis.len(), basis.states().iter().map(|s| T::from_count(s.0[1]) - T::from_count(s.0[3])));
        let diff_13 = DVector::from_iterator(basis.len(), basis.states().iter().map(|s| T::from_count(s.0[0]) - T::from_count(s.0[2])));
        Ok(ProtocolEngine {
            integrable: build_full_hamiltonian(&p, &basis),
            with_mu: build_full_hamiltonian(&p.with_fields(cfg.mu, T::zero()), &basis),
            with_nu: build_full_hamiltonian(&p.with_fields(T::zero(), cfg.nu), &basis),
            effective: build_effective_hamiltonian_charges(&basis, cfg.derived.omega),
            diff_24,
            diff_13,
            cfg,
            basis,
        })
    }

    pub fn config(&self) -> &ProtocolConfig<T> {
        &self.cfg
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn integrable_hamiltonian(&self) -> &HermitianOperator<T> {
        &self.integrable
    }

    pub fn effective_hamiltonian(&self) -> &HermitianOperator<T> {
        &self.effective
    }

    fn at(&self, p_theta: T) -> Result<ProtocolConfig<T>> {
        self.cfg.with_p_theta(p_theta)
    }

    /// Integrable evolution for `t` (full H, or H_eff in idealized mode).
    pub fn free_evolve(&self, state: &QuantumState<T>, t: T) -> Result<QuantumState<T>> {
        match self.cfg.mode {
            ExecutionMode::Full => evolve_for(&self.integrable, state, t),
            ExecutionMode::Idealized => evolve_for(&self.effective, state, t),
        }
    }

    /// `U(t_m - t_mu, 0, 0)` then `U(t_mu, mu, 0)`, or `U_eff(t_m)` then the phase gate.
    fn encode_phase(&self, state: &QuantumState<T>, cfg: &ProtocolConfig<T>) -> Result<QuantumState<T>> {
        let t_m = cfg.derived.t_m;
        match cfg.mode {
            ExecutionMode::Full => {
                let s = evolve_for(&self.integrable, state, t_m - cfg.t_mu())?;
                evolve_for(&self.with_mu, &s, cfg.t_mu())
            }
            ExecutionMode::Idealized => {
                let s = evolve_for(&self.effective, state, t_m)?;
                Ok(apply_diagonal_phase(&s, &self.diff_24, cfg.theta() / T::lit(2.0)))
            }
        }
    }

    fn initial(&self) -> Result<QuantumState<T>> {
        QuantumState::fock(&self.basis, self.cfg.initial_state())
    }

    /// Protocol I at the configured `P theta`.
    pub fn protocol1(&self, filter: &OutcomeFilter) -> Result<Protocol1Outcome<T>> {
        self.protocol1_at(self.cfg.p_theta, filter)
    }

    pub fn protocol1_at(&self, p_theta: T, filter: &OutcomeFilter) -> Result<Protocol1Outcome<T>> {
        let cfg = self.at(p_theta)?;
        let pre = self.encode_phase(&self.initial()?, &cfg)?;
        let distribution = measure_distribution(&pre, Site::Three);
        let symmetric_ideal = ideal_protocol1_output(&cfg, &self.basis, 0)?;
        let antisymmetric_ideal = ideal_protocol1_output(&cfg, &self.basis, cfg.m)?;
        let mut branches = Vec::with_capacity(distribution.len());
        for &(r, _) in &distribution {
            let record = project(&pre, Site::Three, r)?;
            let ideal = if r <= 1 && r != cfg.m { &symmetric_ideal } else { &antisymmetric_ideal };
            let fid = fidelity(ideal, &record.post_state)?;
            let b_fid = noon_fidelity_b(&record.post_state, &cfg, 2 * r <= cfg.m && r != cfg.m);
            branches.push(ProtocolReport {
                final_state: record.post_state.clone(),
                ideal_state: ideal.clone(),
                fidelity: fid,
                noon_fidelity_b: b_fid,
                measurement: Some(record),
                accepted: filter.accepts(r),
                elapsed_model_time: cfg.derived.t_m,
            });
        }
        Ok(Protocol1Outcome { p_theta, pre_measurement: pre, distribution, branches })
    }

    /// Protocol II at the configured `P theta`.
    pub fn protocol2(&self) -> Result<ProtocolReport<T>> {
        self.protocol2_at(self.cfg.p_theta)
    }

    pub fn protocol2_at(&self, p_theta: T) -> Result<ProtocolReport<T>> {
        let cfg = self.at(p_theta)?;
        let [_, _, _, last] = self.protocol2_chain_at(p_theta)?;
        let ideal = ideal_protocol2_output(&cfg, &self.basis)?;
        Ok(ProtocolReport {
            fidelity: fidelity(&ideal, &last)?,
            noon_fidelity_b: reduced_noon_overlap(&last, cfg.p, cis(p_theta - T::frac_pi_2()) * cfg.beta()),
            final_state: last,
            ideal_state: ideal,
            measurement: None,
            accepted: true,
            elapsed_model_time: T::lit(2.0) * cfg.derived.t_m,
        })
    }

    /// States after steps (i)-(iv) of Protocol II.
    pub fn protocol2_chain_at(&self, p_theta: T) -> Result<[QuantumState<T>; 4]> {
        let cfg = self.at(p_theta)?;
        let psi0 = self.initial()?;
        let t_m = cfg.derived.t_m;
        let (psi1, psi2) = match cfg.mode {
            ExecutionMode::Full => {
                let psi1 = evolve_for(&self.integrable, &psi0, t_m - cfg.t_nu())?;
                let psi2 = evolve_for(&self.with_nu, &psi1, cfg.t_nu())?;
                (psi1, psi2)
            }
            ExecutionMode::Idealized => {
                let psi1 = evolve_for(&self.effective, &psi0, t_m)?;
                let angle = T::pi() / (T::lit(4.0) * T::from_count(cfg.m));
                let psi2 = apply_diagonal_phase(&psi1, &self.diff_13, angle * cfg.nu.signum());
                (psi1, psi2)
            }
        };
        let (psi3, psi4) = match cfg.mode {
            ExecutionMode::Full => {
                let psi3 = evolve_for(&self.integrable, &psi2, t_m - cfg.t_mu())?;
                let psi4 = evolve_for(&self.with_mu, &psi3, cfg.t_mu())?;
                (psi3, psi4)
            }
            ExecutionMode::Idealized => {
                let psi3 = evolve_for(&self.effective, &psi2, t_m)?;
                let psi4 = apply_diagonal_phase(&psi3, &self.diff_24, cfg.theta() / T::lit(2.0));
                (psi3, psi4)
            }
        };
        Ok([psi1, psi2, psi3, psi4])
    }

    /// Evolves a protocol output by `U(t_m, 0, 0)` and measures site 3.
    pub fn readout(&self, output: &QuantumState<T>) -> Result<Vec<(u32, T)>> {
        let s = self.free_evolve(output, self.cfg.derived.t_m)?;
        Ok(measure_distribution(&s, Site::Three))
    }

    /// Protocol I over a `P theta` grid, in grid order.
    pub fn sweep_protocol1(&self, grid: &[T], filter: &OutcomeFilter) -> Result<Vec<Protocol1Outcome<T>>> {
        self.warm_up();
        grid.par_iter().map(|&pt| self.protocol1_at(pt, filter)).collect()
    }

    /// Protocol II over a `P theta` grid, in grid order.
    pub fn sweep_protocol2(&self, grid: &[T]) -> Result<Vec<ProtocolReport<T>>> {
        self.warm_up();
        grid.par_iter().map(|&pt| self.protocol2_at(pt)).collect()
    }

    /// Readout statistics of both protocols over a `P theta` grid.
    pub fn sweep_readout(&self, grid: &[T]) -> Result<Vec<ReadoutPoint<T>>> {
        self.warm_up();
        grid.par_iter().map(|&pt| self.readout_point(pt)).collect()
    }

    pub fn readout_point(&self, p_theta: T) -> Result<ReadoutPoint<T>> {
        let m = self.cfg.m;
        let p1 = self.protocol1_at(p_theta, &OutcomeFilter::noon(m))?;
        let mut protocol1 = Vec::new();
        for r in [0, m] {
            let Some(branch) = p1.branch(r) else { continue };
            let dist = self.readout(&branch.final_state)?;
            protocol1.push(BranchReadout {
                branch: r,
                branch_probability: branch.probability(),
                conditional: [lookup(&dist, 0), lookup(&dist, m)],
            });
        }
        let p2 = self.protocol2_at(p_theta)?;
        let dist = self.readout(&p2.final_state)?;
        Ok(ReadoutPoint { p_theta, protocol1, protocol2: [lookup(&dist, 0), lookup(&dist, m)] })
    }

    /// Forces the eigendecompositions the current mode needs.
    pub fn warm_up(&self) {
        match self.cfg.mode {
            ExecutionMode::Full => {
                [&self.integrable, &self.with_mu, &self.with_nu].par_iter().for_each(|h| {
                    h.eigen();
                });
            }
            ExecutionMode::Idealized => {
                self.effective.eigen();
            }
        }
    }
}

fn lookup<T: Real>(dist: &[(u32, T)], r: u32) -> T {
    dist.iter().find(|(o, _)| *o == r).map_or(T::zero(), |(_, p)| *p)
}

/// Protocol I at the configured `P theta` with a fresh engine.
pub fn run_protocol1<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>, filter: &OutcomeFilter) -> Result<Protocol1Outcome<T>> {
    ProtocolEngine::new(*cfg, Arc::clone(basis))?.protocol1(filter)
}

/// Protocol II at the configured `P theta` with a fresh engine.
pub fn run_protocol2<T: Real>(cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>) -> Result<ProtocolReport<T>> {
    ProtocolEngine::new(*cfg, Arc::clone(basis))?.protocol2()
}

/// Readout of a single report: `U(t_m, 0, 0)` then a site-3 measurement.
pub fn run_readout<T: Real>(report: &ProtocolReport<T>, cfg: &ProtocolConfig<T>, basis: &Arc<FockBasis>) -> Result<Readout<T>> {
    let engine = ProtocolEngine::new(*cfg, Arc::clone(basis))?;
    let distribution = engine.readout(&report.final_state)?;
    let laws = match report.outcome() {
        Some(r) => [ReadoutLaw::protocol1(cfg.m, r, 0), ReadoutLaw::protocol1(cfg.m, r, cfg.m)],
        None => [ReadoutLaw::protocol2(0, cfg.m), ReadoutLaw::protocol2(cfg.m, cfg.m)],
    };
    let laws = laws.map(|l| l.map(|law| law.eval(cfg.p_theta)));
    Ok(Readout { distribution, law_zero: laws[0], law_m: laws[1] })
}

/// Readout distribution with the analytic predictions for outcomes 0 and M.
#[derive(Clone, Debug)]
pub struct Readout<T> {
    pub distribution: Vec<(u32, T)>,
    /// Conditional on the Protocol I branch when applicable.
    pub law_zero: Option<T>,
    pub law_m: Option<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct BranchReadout<T> {
    /// Protocol I outcome at step (iii).
    pub branch: u32,
    pub branch_probability: T,
    /// Readout probabilities of site-3 outcomes 0 and M, given the branch.
    pub conditional: [T; 2],
}

impl<T: Real> BranchReadout<T> {
    /// Joint probabilities `P_I(branch, 0)` and `P_I(branch, M)`.
    pub fn joint(&self) -> [T; 2] {
        self.conditional.map(|p| p * self.branch_probability)
    }
}

#[derive(Clone, Debug)]
pub struct ReadoutPoint<T> {
    pub p_theta: T,
    pub protocol1: Vec<BranchReadout<T>>,
    /// Protocol II readout probabilities of outcomes 0 and M.
    pub protocol2: [T; 2],
}

/// Analytic readout probability laws as functions of `P theta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutLaw {
    /// `cos^2(P theta / 2)`.
    Cos2,
    /// `sin^2(P theta / 2)`.
    Sin2,
    /// `cos^2(P theta / 2 - pi / 4)`.
    ShiftedCos2,
    /// `sin^2(P theta / 2 - pi / 4)`.
    ShiftedSin2,
    /// `cos^2(P theta / 2) / 2`.
    HalfCos2,
    /// `sin^2(P theta / 2) / 2`.
    HalfSin2,
}

impl ReadoutLaw {
    pub fn eval<T: Real>(self, p_theta: T) -> T {
        let half = p_theta / T::lit(2.0);
        let shifted = half - T::frac_pi_4();
        match self {
            ReadoutLaw::Cos2 => half.cos().powi(2),
            ReadoutLaw::Sin2 => half.sin().powi(2),
            ReadoutLaw::ShiftedCos2 => shifted.cos().powi(2),
            ReadoutLaw::ShiftedSin2 => shifted.sin().powi(2),
            ReadoutLaw::HalfCos2 => half.cos().powi(2) / T::lit(2.0),
            ReadoutLaw::HalfSin2 => half.sin().powi(2) / T::lit(2.0),
        }
    }

    /// Conditional readout law for Protocol I branch `branch` and readout outcome `r`.
    pub fn protocol1(m: u32, branch: u32, r: u32) -> Option<Self> {
        if branch != 0 && branch != m {
            return None;
        }
        match r {
            0 => Some(ReadoutLaw::Cos2),
            r if r == m => Some(ReadoutLaw::Sin2),
            _ => None,
        }
    }

    /// Joint law `P_I(branch, r)` including the step (iii) probability 1/2.
    pub fn protocol1_joint(m: u32, branch: u32, r: u32) -> Option<Self> {
        Self::protocol1(m, branch, r).map(|l| match l {
            ReadoutLaw::Cos2 => ReadoutLaw::HalfCos2,
            _ => ReadoutLaw::HalfSin2,
        })
    }

    /// Protocol II readout law for outcome `r`, as realized by `U(t, mu, nu)` with `nu > 0`.
    pub fn protocol2(r: u32, m: u32) -> Option<Self> {
        match r {
            0 => Some(ReadoutLaw::ShiftedCos2),
            r if r == m => Some(ReadoutLaw::ShiftedSin2),
            _ => None,
        }
    }

    /// Protocol II law with the opposite pairing, realized for `nu < 0`.
    pub fn protocol2_reversed(r: u32, m: u32) -> Option<Self> {
        Self::protocol2(r, m).map(|l| match l {
            ReadoutLaw::ShiftedCos2 => ReadoutLaw::ShiftedSin2,
            _ => ReadoutLaw::ShiftedCos2,
        })
    }
}

/// Least-squares `c` minimizing `sum (P - c law(P theta))^2`.
pub fn fit_readout_amplitudes<T: Real>(samples: &[(T, T)], law: ReadoutLaw) -> Result<T> {
    let mut distinct: Vec<T> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite P theta"));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 distinct P theta values, got {}", distinct.len())));
    }
    let (num, den) = samples.iter().fold((T::zero(), T::zero()), |(n, d), &(pt, p)| {
        let l = law.eval(pt);
        (n + p * l, d + l * l)
    });
    if den <= T::lit(1e-300).max(T::default_epsilon() * T::default_epsilon()) {
        return Err(Error::DegenerateFit("law vanishes on every sample".into()));
    }
    Ok(num / den)
}

/// The four readout constants: Protocol I outcomes 0 and M pooled over both
/// branches, and Protocol II outcomes 0 and M.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutFit<T> {
    pub c00: T,
    pub c_mm: T,
    pub c0: T,
    pub c_m: T,
}

pub fn fit_readout_sweep<T: Real>(points: &[ReadoutPoint<T>]) -> Result<ReadoutFit<T>> {
    let mut zero = Vec::new();
    let mut full = Vec::new();
    for pt in points {
        for b in &pt.protocol1 {
            let [j0, jm] = b.joint();
            zero.push((pt.p_theta, j0));
            full.push((pt.p_theta, jm));
        }
    }
    let p2_zero: Vec<_> = points.iter().map(|p| (p.p_theta, p.protocol2[0])).collect();
    let p2_m: Vec<_> = points.iter().map(|p| (p.p_theta, p.protocol2[1])).collect();
    Ok(ReadoutFit {
        c00: fit_readout_amplitudes(&zero, ReadoutLaw::HalfCos2)?,
        c_mm: fit_readout_amplitudes(&full, ReadoutLaw::HalfSin2)?,
        c0: fit_readout_amplitudes(&p2_zero, ReadoutLaw::ShiftedCos2)?,
        c_m: fit_readout_amplitudes(&p2_m, ReadoutLaw::ShiftedSin2)?,
    })
}
