//! Energy-spectrum sweeps, band identification and full-versus-effective
//! evolution comparison.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::evolve_for;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState, QuantumState};
use crate::model::{band_constant, build_effective_hamiltonian_charges, build_full_hamiltonian, DerivedScales, ModelParameters};
use crate::scalar::Real;

/// Ratio of inter-band gap to the larger adjacent intra-band spread above
/// which two bands count as resolved.
pub const RESOLUTION_FACTOR: f64 = 3.0;

/// Sorted dimensionless spectra `(E - C)/J` over a coupling grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumSweep<T> {
    pub n_total: u32,
    /// Grid variable: `U/J` for coupling sweeps, `mu/J` for field sweeps.
    pub grid: Vec<T>,
    pub energies: Vec<Vec<T>>,
}

fn sorted_scaled<T: Real>(params: &ModelParameters<T>, basis: &Arc<FockBasis>) -> Vec<T> {
    let h = build_full_hamiltonian(params, basis);
    let shift = band_constant(params, basis.n_total());
    let mut e: Vec<T> = h.eigen().values.iter().map(|&x| (x - shift) / params.j).collect();
    e.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    e
}

/// Integrable spectra at `U = (U/J) J` for each grid value, keeping `U0` and
/// `J` from the template.
pub fn sweep_spectrum<T: Real>(template: &ModelParameters<T>, u_over_j: &[T], basis: &Arc<FockBasis>) -> Result<SpectrumSweep<T>> {
    if template.j <= T::zero() {
        return Err(Error::InvalidConfig(format!("J must be positive for a spectrum sweep, got {}", template.j)));
    }
    let energies = u_over_j
        .par_iter()
        .map(|&g| {
            let p = ModelParameters::integrable(template.u0, g * template.j, template.j);
            sorted_scaled(&p.with_fields(template.mu, template.nu), basis)
        })
        .collect();
    Ok(SpectrumSweep { n_total: basis.n_total(), grid: u_over_j.to_vec(), energies })
}

/// Spectra with the 2-4 field `mu = (mu/J) J` added to fixed couplings.
pub fn sweep_field<T: Real>(params: &ModelParameters<T>, mu_over_j: &[T], basis: &Arc<FockBasis>) -> Result<SpectrumSweep<T>> {
    if params.j <= T::zero() {
        return Err(Error::InvalidConfig(format!("J must be positive for a spectrum sweep, got {}", params.j)));
    }
    let energies = mu_over_j
        .par_iter()
        .map(|&g| sorted_scaled(&params.with_fields(g * params.j, params.nu), basis))
        .collect();
    Ok(SpectrumSweep { n_total: basis.n_total(), grid: mu_over_j.to_vec(), energies })
}

/// One energy band, labelled by the split `(M, P)` with `M <= P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band<T> {
    pub m: u32,
    pub p: u32,
    /// Index of the lowest level in the sorted spectrum.
    pub start: usize,
    pub len: usize,
    pub min: T,
    pub max: T,
}

impl<T: Real> Band<T> {
    pub fn spread(&self) -> T {
        self.max - self.min
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..self.start + self.len).contains(&index)
    }
}

/// Number of levels in the `(M, P)` band: `2(M+1)(P+1)`, or `(M+1)^2` when `M = P`.
pub fn band_size(m: u32, p: u32) -> usize {
    let base = (m as usize + 1) * (p as usize + 1);
    if m == p {
        base
    } else {
        2 * base
    }
}

/// Splits `(M, P)`, `M <= P`, in ascending order of zero-tunneling energy `-U(M-P)^2` for `U > 0`.
pub fn predicted_bands(n_total: u32) -> Vec<(u32, u32)> {
    (0..=n_total / 2).map(|m| (m, n_total - m)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandAssignment<T> {
    pub n_total: u32,
    pub bands: Vec<Band<T>>,
}

impl<T: Real> BandAssignment<T> {
    /// Band label of the level at `index` in the sorted spectrum.
    pub fn label(&self, index: usize) -> Option<(u32, u32)> {
        self.bands.iter().find(|b| b.contains(index)).map(|b| (b.m, b.p))
    }

    pub fn band(&self, m: u32, p: u32) -> Option<&Band<T>> {
        let (m, p) = (m.min(p), m.max(p));
        self.bands.iter().find(|b| b.m == m && b.p == p)
    }
}

/// Slices a sorted spectrum into the predicted bands by level count.
fn slice_bands<T: Real>(energies: &[T], n_total: u32) -> Result<Vec<Band<T>>> {
    let expected: usize = predicted_bands(n_total).iter().map(|&(m, p)| band_size(m, p)).sum();
    if energies.len() != expected {
        return Err(Error::InvalidConfig(format!(
            "spectrum has {} levels, the N={n_total} sector has {expected}",
            energies.len()
        )));
    }
    let mut start = 0;
    let mut bands = Vec::new();
    for (m, p) in predicted_bands(n_total) {
        let len = band_size(m, p);
        let slice = &energies[start..start + len];
        bands.push(Band { m, p, start, len, min: slice[0], max: slice[len - 1] });
        start += len;
    }
    Ok(bands)
}

fn check_boundary<T: Real>(lower: &Band<T>, upper: &Band<T>) -> Result<()> {
    let gap = upper.min - lower.max;
    let spread = lower.spread().max(upper.spread());
    if gap > T::lit(RESOLUTION_FACTOR) * spread && gap > T::zero() {
        Ok(())
    } else {
        Err(Error::BandsUnresolved(format!(
            "gap {gap} between bands ({},{}) and ({},{}) does not exceed {RESOLUTION_FACTOR} x spread {spread}",
            lower.m, lower.p, upper.m, upper.p
        )))
    }
}

/// Assigns every level of a sorted `(E - C)/J` spectrum to a band, requiring
/// every inter-band gap to be resolved.
pub fn assign_bands<T: Real>(energies: &[T], n_total: u32) -> Result<BandAssignment<T>> {
    let bands = slice_bands(energies, n_total)?;
    for pair in bands.windows(2) {
        check_boundary(&pair[0], &pair[1])?;
    }
    Ok(BandAssignment { n_total, bands })
}

/// The `(M, P)` band of a sorted spectrum, requiring only its own boundaries to be resolved.
pub fn locate_band<T: Real>(energies: &[T], n_total: u32, m: u32, p: u32) -> Result<Band<T>> {
    let (m, p) = (m.min(p), m.max(p));
    if m + p != n_total {
        return Err(Error::InvalidConfig(format!("band ({m},{p}) is not in the N={n_total} sector")));
    }
    let bands = slice_bands(energies, n_total)?;
    let k = bands.iter().position(|b| b.m == m).expect("predicted band");
    if k > 0 {
        check_boundary(&bands[k - 1], &bands[k])?;
    }
    if k + 1 < bands.len() {
        check_boundary(&bands[k], &bands[k + 1])?;
    }
    Ok(bands[k])
}

/// Band of a Fock state, found as the predicted band centre `-U(M-P)^2`
/// nearest to its diagonal energy.
pub fn band_of_fock_state<T: Real>(params: &ModelParameters<T>, state: &FockState) -> (u32, u32) {
    let n = state.total();
    let e = params.diagonal_energy(state) - band_constant(params, n);
    let u = params.u_scale();
    predicted_bands(n)
        .into_iter()
        .min_by(|a, b| {
            let da = T::from_count(a.1 - a.0);
            let db = T::from_count(b.1 - b.0);
            let ea = (e + u * da * da).abs();
            let eb = (e + u * db * db).abs();
            ea.partial_cmp(&eb).expect("finite energies")
        })
        .expect("nonempty band list")
}

/// `1 - |<Phi_full(t)|Phi_eff(t)>|` on a time grid, for `|M, P, 0, 0>`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveComparison<T> {
    pub times: Vec<T>,
    pub deficits: Vec<T>,
}

impl<T: Real> EffectiveComparison<T> {
    pub fn max_deficit(&self) -> T {
        self.deficits.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }
}

pub fn compare_effective<T: Real>(
    basis: &Arc<FockBasis>,
    m: u32,
    p: u32,
    params: &ModelParameters<T>,
    times: &[T],
) -> Result<EffectiveComparison<T>> {
    let derived = DerivedScales::new(params, m, p)?;
    let full = build_full_hamiltonian(params, basis);
    let eff = build_effective_hamiltonian_charges(basis, derived.omega);
    rayon::join(|| full.eigen(), || eff.eigen());
    let psi0 = QuantumState::fock(basis, FockState::new(m, p, 0, 0))?;
    let deficits = times
        .par_iter()
        .map(|&t| {
            let a = evolve_for(&full, &psi0, t)?;
            let b = evolve_for(&eff, &psi0, t)?;
            let overlap = a.inner(&b)?;
            Ok(T::one() - overlap.norm_sqr().sqrt())
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(EffectiveComparison { times: times.to_vec(), deficits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_sizes_cover_the_sector() {
        for n in 0..=16u32 {
            let total: usize = predicted_bands(n).iter().map(|&(m, p)| band_size(m, p)).sum();
            assert_eq!(total, crate::fock::sector_dimension(n), "N={n}");
        }
        assert_eq!(predicted_bands(15).len(), 8);
        assert_eq!(band_size(4, 11), 120);
        assert_eq!(band_size(2, 2), 9);
    }

    #[test]
    fn two_boson_clusters() {
        let b = FockBasis::enumerate(2);
        let template = ModelParameters::integrable(1.0, 0.0, 1.0);
        let sweep = sweep_spectrum(&template, &[100.0f64], &b).unwrap();
        let a = assign_bands(&sweep.energies[0], 2).unwrap();
        let low = a.band(0, 2).unwrap();
        let top = a.band(1, 1).unwrap();
        assert_eq!((low.len, top.len), (6, 4));
        assert!((low.min + 400.0).abs() < 1.0 && (low.max + 400.0).abs() < 1.0);
        assert!(top.min.abs() < 1.0 && top.max.abs() < 1.0);
        assert_eq!(a.label(0), Some((0, 2)));
        assert_eq!(a.label(9), Some((1, 1)));
    }

    #[test]
    fn unresolved_at_zero_coupling() {
        let b = FockBasis::enumerate(5);
        let template = ModelParameters::integrable(1.0, 0.0, 1.0);
        let sweep = sweep_spectrum(&template, &[0.0], &b).unwrap();
        let err = assign_bands(&sweep.energies[0], 5).unwrap_err();
        assert!(matches!(err, Error::BandsUnresolved(_)));
        assert!(err.is_numerical());
    }

    #[test]
    fn even_sector_top_band() {
        let b = FockBasis::enumerate(4);
        let template = ModelParameters::integrable(1.0, 0.0, 1.0);
        let sweep = sweep_spectrum(&template, &[25.0], &b).unwrap();
        let a = assign_bands(&sweep.energies[0], 4).unwrap();
        assert_eq!(a.bands.last().unwrap().len, 9);
        assert_eq!((a.bands.last().unwrap().m, a.bands.last().unwrap().p), (2, 2));
    }

    #[test]
    fn counts_are_conserved_across_sweep() {
        let b = FockBasis::enumerate(3);
        let template = ModelParameters::integrable(2.0, 0.0, 1.0);
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let sweep = sweep_spectrum(&template, &grid, &b).unwrap();
        for (k, e) in sweep.energies.iter().enumerate() {
            assert_eq!(e.len(), 20);
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
            if k > 0 {
                let prev = &sweep.energies[k - 1];
                let jump = e.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(jump <= 9.0 * 0.5 + 1e-9, "step {k}: {jump}");
            }
        }
    }

    #[test]
    fn fock_band_lookup() {
        let params = ModelParameters::integrable(161.282, 75.876, 24.886);
        assert_eq!(band_of_fock_state(&params, &FockState::new(4, 11, 0, 0)), (4, 11));
        assert_eq!(band_of_fock_state(&params, &FockState::new(1, 3, 3, 8)), (4, 11));
        assert_eq!(band_of_fock_state(&params, &FockState::new(0, 15, 0, 0)), (0, 15));
    }

    #[test]
    fn locate_checks_only_own_boundaries() {
        let b = FockBasis::enumerate(15);
        let template = ModelParameters::integrable(161.282, 0.0, 1.0);
        let sweep = sweep_spectrum(&template, &[3.0], &b).unwrap();
        assert!(assign_bands(&sweep.energies[0], 15).is_err());
        let band = locate_band(&sweep.energies[0], 15, 4, 11).unwrap();
        assert_eq!(band.len, 120);
        assert!(locate_band(&sweep.energies[0], 15, 7, 8).is_err());
        assert!(locate_band(&sweep.energies[0], 15, 4, 10).is_err());
    }

    #[test]
    fn zero_tunneling_has_no_deficit() {
        let b = FockBasis::enumerate(7);
        let params = ModelParameters::integrable(3.0, 2.0, 0.0);
        let err = compare_effective(&b, 2, 5, &params, &[0.0, 1.0]);
        // J = 0 makes Omega = 0 and t_m infinite, but the comparison is still defined.
        let cmp = err.unwrap();
        assert!(cmp.max_deficit() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_tunneling() {
        let b = FockBasis::enumerate(2);
        let t = ModelParameters::integrable(1.0, 0.0, 0.0);
        assert!(sweep_spectrum(&t, &[1.0], &b).is_err());
        assert!(sweep_field(&t, &[1.0], &b).is_err());
    }
}
