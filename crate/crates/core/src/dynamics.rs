//! Exact unitary evolution and ideal projective number measurements.

use nalgebra::DVector;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{join, split, QuantumState, Site};
use crate::model::HermitianOperator;
use crate::scalar::{phase_factor, Real};

/// Evolution under a fixed Hamiltonian for a fixed duration (seconds).
#[derive(Clone, Copy, Debug)]
pub struct EvolutionPlan<'a, T: Real> {
    pub hamiltonian: &'a HermitianOperator<T>,
    pub duration: T,
}

impl<'a, T: Real> EvolutionPlan<'a, T> {
    pub fn new(hamiltonian: &'a HermitianOperator<T>, duration: T) -> Result<Self> {
        if duration < T::zero() {
            return Err(Error::InvalidConfig(format!("negative evolution time {duration}")));
        }
        Ok(EvolutionPlan { hamiltonian, duration })
    }
}

/// `V exp(-i Λ t) V^T |ψ>` using the cached eigendecomposition.
pub fn evolve<T: Real>(state: &QuantumState<T>, plan: EvolutionPlan<'_, T>) -> Result<QuantumState<T>> {
    evolve_for(plan.hamiltonian, state, plan.duration)
}

pub fn evolve_for<T: Real>(h: &HermitianOperator<T>, state: &QuantumState<T>, t: T) -> Result<QuantumState<T>> {
    if h.basis().n_total() != state.basis().n_total() {
        return Err(Error::BasisMismatch(h.basis().n_total(), state.basis().n_total()));
    }
    if t == T::zero() {
        return Ok(state.clone());
    }
    let e = h.eigen();
    let (re, im) = split(state.amplitudes());
    let cr = e.vectors.tr_mul(&re);
    let ci = e.vectors.tr_mul(&im);
    let mut rotated_re = DVector::zeros(cr.len());
    let mut rotated_im = DVector::zeros(cr.len());
    for k in 0..cr.len() {
        let c = Complex::new(cr[k], ci[k]) * phase_factor(e.values[k] * t);
        rotated_re[k] = c.re;
        rotated_im[k] = c.im;
    }
    let out = join(&(&e.vectors * rotated_re), &(&e.vectors * rotated_im));
    Ok(QuantumState::from_amplitudes(state.basis().clone(), out))
}

/// `exp(-i t D) |ψ>` for a diagonal operator given by its diagonal entries.
pub fn apply_diagonal_phase<T: Real>(state: &QuantumState<T>, diagonal: &DVector<T>, t: T) -> QuantumState<T> {
    assert_eq!(diagonal.len(), state.amplitudes().len(), "diagonal length does not match basis");
    let amps = state
        .amplitudes()
        .iter()
        .zip(diagonal.iter())
        .map(|(a, &d)| *a * phase_factor(d * t))
        .collect::<Vec<_>>();
    QuantumState::from_amplitudes(state.basis().clone(), DVector::from_vec(amps))
}

/// States at each requested time, in the order of `times`.
pub fn trajectory<T: Real>(h: &HermitianOperator<T>, state: &QuantumState<T>, times: &[T]) -> Result<Vec<QuantumState<T>>> {
    h.eigen();
    times.par_iter().map(|&t| evolve_for(h, state, t)).collect()
}

/// Outcome of a projective measurement of one site's occupation.
#[derive(Clone, Debug)]
pub struct MeasurementRecord<T: Real> {
    pub site: Site,
    pub outcome: u32,
    pub probability: T,
    pub post_state: QuantumState<T>,
}

/// Nonzero outcome probabilities, ascending in the outcome.
pub fn measure_distribution<T: Real>(state: &QuantumState<T>, site: Site) -> Vec<(u32, T)> {
    let n = state.basis().n_total() as usize;
    let mut probs = vec![T::zero(); n + 1];
    for (s, a) in state.basis().states().iter().zip(state.amplitudes().iter()) {
        probs[s.occupation(site) as usize] += a.norm_sqr();
    }
    probs
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > T::zero())
        .map(|(r, p)| (r as u32, p))
        .collect()
}

/// Probability of finding `r` bosons at `site`.
pub fn outcome_probability<T: Real>(state: &QuantumState<T>, site: Site, r: u32) -> T {
    state
        .basis()
        .states()
        .iter()
        .zip(state.amplitudes().iter())
        .filter(|(s, _)| s.occupation(site) == r)
        .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr())
}

/// Projects onto occupation `r` at `site` and renormalizes.
pub fn project<T: Real>(state: &QuantumState<T>, site: Site, r: u32) -> Result<MeasurementRecord<T>> {
    let mut amps = state.amplitudes().clone();
    for (k, s) in state.basis().states().iter().enumerate() {
        if s.occupation(site) != r {
            amps[k] = Complex::new(T::zero(), T::zero());
        }
    }
    let probability = amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr());
    if probability <= T::zero() {
        return Err(Error::ImpossibleOutcome { site: site.label(), outcome: r });
    }
    let mut post_state = QuantumState::from_amplitudes(state.basis().clone(), amps);
    post_state.normalize();
    Ok(MeasurementRecord { site, outcome: r, probability, post_state })
}
