//! Four-site extended Bose-Hubbard Hamiltonian, conserved charges and the
//! resonant-regime effective Hamiltonian.
//!
//! All couplings are angular frequencies (energy / ħ in rad/s) and times are
//! seconds, so a propagator is `exp(-i H t)` with no explicit ħ.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState, Ladder, OperatorExpr, Site};
use crate::scalar::Real;

use Site::{Four, One, Three, Two};

/// Couplings of the four-site model. Pair couplings are symmetric, so only the
/// six independent values are stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters<T> {
    pub u0: T,
    pub u12: T,
    pub u13: T,
    pub u14: T,
    pub u23: T,
    pub u24: T,
    pub u34: T,
    /// Tunneling amplitude.
    pub j: T,
    /// Field on sites 2-4, `mu (N2 - N4)`.
    pub mu: T,
    /// Field on sites 1-3, `nu (N1 - N3)`.
    pub nu: T,
}

impl<T: Real> ModelParameters<T> {
    /// Integrable couplings `U13 = U24 = U0`, `U12 = U23 = U34 = U14 = U0 + 4U`, no fields.
    pub fn integrable(u0: T, u: T, j: T) -> Self {
        let u12 = u0 + T::lit(4.0) * u;
        ModelParameters {
            u0,
            u12,
            u13: u0,
            u14: u12,
            u23: u12,
            u24: u0,
            u34: u12,
            j,
            mu: T::zero(),
            nu: T::zero(),
        }
    }

    pub fn with_fields(mut self, mu: T, nu: T) -> Self {
        self.mu = mu;
        self.nu = nu;
        self
    }

    /// Exact-equality integrability predicate on the stored couplings.
    pub fn is_integrable(&self) -> bool {
        self.u13 == self.u0
            && self.u24 == self.u0
            && self.u12 == self.u23
            && self.u23 == self.u34
            && self.u34 == self.u14
    }

    /// `U = (U12 - U0) / 4`.
    pub fn u_scale(&self) -> T {
        (self.u12 - self.u0) / T::lit(4.0)
    }

    pub fn pair(&self, a: Site, b: Site) -> T {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (lo, hi) {
            (One, Two) => self.u12,
            (One, Three) => self.u13,
            (One, Four) => self.u14,
            (Two, Three) => self.u23,
            (Two, Four) => self.u24,
            (Three, Four) => self.u34,
            _ => self.u0,
        }
    }

    /// Interaction and field energy of a Fock state (the diagonal of H).
    pub fn diagonal_energy(&self, s: &FockState) -> T {
        let occ = |site: Site| u64::from(s.occupation(site));
        // Integer coefficients are merged per distinct coupling value before any
        // floating-point product, so states with equal energies at equal
        // couplings agree bitwise.
        let mut groups: Vec<(T, u64)> = vec![(self.u0, Site::ALL.iter().map(|&i| occ(i) * occ(i).saturating_sub(1) / 2).sum())];
        for (k, &i) in Site::ALL.iter().enumerate() {
            for &j in &Site::ALL[k + 1..] {
                let (value, count) = (self.pair(i, j), occ(i) * occ(j));
                match groups.iter_mut().find(|g| g.0 == value) {
                    Some(g) => g.1 += count,
                    None => groups.push((value, count)),
                }
            }
        }
        let n = |site: Site| T::from_count(s.occupation(site));
        let e = groups.iter().fold(T::zero(), |acc, &(v, c)| acc + v * T::from_u64(c).expect("count"));
        e + self.mu * (n(Two) - n(Four)) + self.nu * (n(One) - n(Three))
    }
}

/// Real eigendecomposition `H = V diag(values) V^T`.
#[derive(Clone, Debug)]
pub struct Eigen<T: Real> {
    pub values: DVector<T>,
    pub vectors: DMatrix<T>,
}

/// Dense Hermitian operator on one Fock sector.
///
/// Every operator of the model is real in the Fock basis, so the matrix is
/// stored real-symmetric. The eigendecomposition is computed at most once.
#[derive(Debug)]
pub struct HermitianOperator<T: Real> {
    basis: Arc<FockBasis>,
    matrix: DMatrix<T>,
    eigen: OnceLock<Eigen<T>>,
}

impl<T: Real> Clone for HermitianOperator<T> {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        HermitianOperator { basis: Arc::clone(&self.basis), matrix: self.matrix.clone(), eigen }
    }
}

impl<T: Real> HermitianOperator<T> {
    pub fn new(basis: Arc<FockBasis>, matrix: DMatrix<T>) -> Self {
        assert_eq!(matrix.shape(), (basis.len(), basis.len()), "operator shape does not match basis");
        HermitianOperator { basis, matrix, eigen: OnceLock::new() }
    }

    pub fn from_expr(basis: &Arc<FockBasis>, expr: &OperatorExpr) -> Self {
        Self::new(Arc::clone(basis), expr.to_matrix(basis))
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn eigen(&self) -> &Eigen<T> {
        self.eigen.get_or_init(|| {
            let e = SymmetricEigen::new(self.matrix.clone());
            Eigen { values: e.eigenvalues, vectors: e.eigenvectors }
        })
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<T> {
        let mut v: Vec<T> = self.eigen().values.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        v
    }

    /// Largest `|H - H^T|` entry.
    pub fn hermiticity_error(&self) -> T {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `||V diag(E) V^T - H||_F / ||H||_F`.
    pub fn reconstruction_error(&self) -> T {
        let e = self.eigen();
        let rebuilt = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        let scale = self.matrix.norm();
        let diff = (rebuilt - &self.matrix).norm();
        if scale > T::zero() {
            diff / scale
        } else {
            diff
        }
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator<T>) -> T {
        (&self.matrix * &other.matrix - &other.matrix * &self.matrix).norm()
    }

    /// `self + factor * other`, as a fresh operator.
    pub fn plus(&self, factor: T, other: &DMatrix<T>) -> Self {
        Self::new(Arc::clone(&self.basis), &self.matrix + other * factor)
    }

    /// Restriction to the span of the given basis indices.
    pub fn restricted(&self, indices: &[usize]) -> DMatrix<T> {
        DMatrix::from_fn(indices.len(), indices.len(), |r, c| self.matrix[(indices[r], indices[c])])
    }
}

/// `H = (U0/2) sum N_i(N_i-1) + sum_{i<j} U_ij N_i N_j
///      - (J/2)[(a1† + a3†)(a2 + a4) + h.c.] + mu(N2 - N4) + nu(N1 - N3)`.
pub fn build_full_hamiltonian<T: Real>(params: &ModelParameters<T>, basis: &Arc<FockBasis>) -> HermitianOperator<T> {
    let dim = basis.len();
    let mut h = DMatrix::<T>::zeros(dim, dim);
    for (k, s) in basis.states().iter().enumerate() {
        h[(k, k)] = params.diagonal_energy(s);
    }
    let half_j = params.j / T::lit(2.0);
    for &a in &[One, Three] {
        for &b in &[Two, Four] {
            for (from, to) in [(a, b), (b, a)] {
                for e in basis.hopping_table(from, to).expect("distinct sites") {
                    h[(e.target, e.source)] -= half_j * T::lit(e.amplitude);
                }
            }
        }
    }
    HermitianOperator::new(Arc::clone(basis), h)
}

/// The same Hamiltonian assembled symbolically from ladder-operator words.
pub fn hamiltonian_expr(params: &ModelParameters<f64>) -> OperatorExpr {
    let mut h = OperatorExpr::zero();
    let n = OperatorExpr::number;
    for &i in &Site::ALL {
        h = h + (n(i) * n(i) + -n(i)).scale(params.u0 / 2.0);
        for &j in &Site::ALL {
            if i != j {
                h = h + (n(i) * n(j)).scale(params.pair(i, j) / 2.0);
            }
        }
    }
    let cr = |s| OperatorExpr::word(1.0, &[Ladder::create(s)]);
    let an = |s| OperatorExpr::word(1.0, &[Ladder::annihilate(s)]);
    let hopping = (cr(One) + cr(Three)) * (an(Two) + an(Four)) + (an(One) + an(Three)) * (cr(Two) + cr(Four));
    h + hopping.scale(-params.j / 2.0)
        + (n(Two) + -n(Four)).scale(params.mu)
        + (n(One) + -n(Three)).scale(params.nu)
}

/// `N2 - N4`, the operator multiplying `mu`.
pub fn field_mu_operator<T: Real>(basis: &FockBasis) -> DMatrix<T> {
    basis.diagonal(|s| f64::from(s.0[1]) - f64::from(s.0[3]))
}

/// `N1 - N3`, the operator multiplying `nu`.
pub fn field_nu_operator<T: Real>(basis: &FockBasis) -> DMatrix<T> {
    basis.diagonal(|s| f64::from(s.0[0]) - f64::from(s.0[2]))
}

/// `N1 N3 + N2 N4`, the operator generated by a detuning `U0 - U13`.
pub fn detuning_operator<T: Real>(basis: &FockBasis) -> DMatrix<T> {
    basis.diagonal(|s| f64::from(s.0[0] * s.0[2] + s.0[1] * s.0[3]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Charge {
    Q1,
    Q2,
}

/// `2Q1 = N1 + N3 - a1†a3 - a1 a3†`, `2Q2 = N2 + N4 - a2†a4 - a2 a4†`.
pub fn charge_expr(which: Charge) -> OperatorExpr {
    let (a, b) = match which {
        Charge::Q1 => (One, Three),
        Charge::Q2 => (Two, Four),
    };
    (OperatorExpr::number(a) + OperatorExpr::number(b)
        + -OperatorExpr::hop(a, b)
        + -OperatorExpr::word(1.0, &[Ladder::annihilate(a), Ladder::create(b)]))
    .scale(0.5)
}

pub fn build_charge<T: Real>(basis: &Arc<FockBasis>, which: Charge) -> HermitianOperator<T> {
    HermitianOperator::from_expr(basis, &charge_expr(which))
}

/// Band scales of the resonant regime for an initial `|M, P, 0, 0>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales<T> {
    pub m: u32,
    pub p: u32,
    pub j: T,
    /// `U = (U12 - U0) / 4`.
    pub u: T,
    /// `Omega = J^2 / (4U((M-P)^2 - 1))`.
    pub omega: T,
    /// `t_m = pi / (2 Omega)`, or a user override.
    pub t_m: T,
    /// `(-1)^((N+1)/2)`, defined for odd N only.
    pub beta: Option<i32>,
}

impl<T: Real> DerivedScales<T> {
    pub fn new(params: &ModelParameters<T>, m: u32, p: u32) -> Result<Self> {
        let diff = m.abs_diff(p);
        if diff < 2 {
            return Err(Error::SingularResonance(diff));
        }
        let u = params.u_scale();
        if u == T::zero() {
            return Err(Error::InvalidConfig("U = (U12 - U0)/4 must be nonzero".into()));
        }
        let d = T::from_count(diff);
        let omega = params.j * params.j / (T::lit(4.0) * u * (d * d - T::one()));
        let n = m + p;
        let beta = (n % 2 == 1).then(|| if ((n + 1) / 2) % 2 == 0 { 1 } else { -1 });
        let t_m = if omega == T::zero() { T::zero() } else { T::pi() / (T::lit(2.0) * omega) };
        Ok(DerivedScales { m, p, j: params.j, u, omega, t_m, beta })
    }

    pub fn with_t_m(mut self, t_m: T) -> Self {
        self.t_m = t_m;
        self
    }

    pub fn n_total(&self) -> u32 {
        self.m + self.p
    }
}

/// Second-order effective Hamiltonian of the `(M, P)` band in its
/// second-quantized form, with coefficients `J^2 / (16 U (M - P ± 1))`.
pub fn effective_hamiltonian_sq_expr(m: u32, p: u32, j: f64, u: f64) -> Result<OperatorExpr> {
    let diff = m.abs_diff(p);
    if diff < 2 {
        return Err(Error::SingularResonance(diff));
    }
    let d = f64::from(m) - f64::from(p);
    let c_plus = j * j / (16.0 * u * (d + 1.0));
    let c_minus = j * j / (16.0 * u * (d - 1.0));
    let w = |ops: &[Ladder]| OperatorExpr::word(1.0, ops);
    let (cr, an) = (Ladder::create, Ladder::annihilate);

    let t1 = (w(&[an(One), cr(Three)]) + w(&[an(Three), cr(One)]))
        * (OperatorExpr::number(Two) + OperatorExpr::number(Four));
    let t2 = (w(&[an(One), cr(One)]) + w(&[an(Three), cr(Three)]))
        * (w(&[cr(Two), an(Four)]) + w(&[cr(Four), an(Two)]));
    let t3 = (w(&[an(Two), cr(Two)]) + w(&[an(Four), cr(Four)]))
        * (w(&[cr(One), an(Three)]) + w(&[cr(Three), an(One)]));
    let t4 = (w(&[an(Two), cr(Four)]) + w(&[an(Four), cr(Two)]))
        * (OperatorExpr::number(One) + OperatorExpr::number(Three));
    let pair = w(&[cr(One), an(Two), an(Three), cr(Four)])
        + w(&[cr(One), cr(Two), an(Three), an(Four)])
        + w(&[an(One), cr(Two), cr(Three), an(Four)])
        + w(&[an(One), an(Two), cr(Three), cr(Four)]);

    Ok(t1.scale(c_plus) + t2.scale(c_plus) + t3.scale(-c_minus) + t4.scale(-c_minus)
        + pair.scale(c_plus - c_minus))
}

pub fn build_effective_hamiltonian_sq<T: Real>(
    basis: &Arc<FockBasis>,
    derived: &DerivedScales<T>,
) -> Result<HermitianOperator<T>> {
    let expr = effective_hamiltonian_sq_expr(
        derived.m,
        derived.p,
        derived.j.to_f64_lossy(),
        derived.u.to_f64_lossy(),
    )?;
    Ok(HermitianOperator::from_expr(basis, &expr))
}

/// `H_eff = (N+1) Omega (Q1 + Q2) - 2 Omega Q1 Q2`, with `N` the sector's particle number.
pub fn build_effective_hamiltonian_charges<T: Real>(
    basis: &Arc<FockBasis>,
    omega: T,
) -> HermitianOperator<T> {
    let q1 = build_charge::<T>(basis, Charge::Q1);
    let q2 = build_charge::<T>(basis, Charge::Q2);
    let n1 = T::from_count(basis.n_total() + 1);
    let h = (q1.matrix() + q2.matrix()) * (n1 * omega) - (q1.matrix() * q2.matrix()) * (T::lit(2.0) * omega);
    // Q1 and Q2 commute, so the product is symmetric up to rounding.
    let h = (&h + h.transpose()) * T::lit(0.5);
    HermitianOperator::new(Arc::clone(basis), h)
}

/// Basis indices with `N1 + N3 = a` and `N2 + N4 = b`.
pub fn split_subspace(basis: &FockBasis, a: u32, b: u32) -> Vec<usize> {
    basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.0[0] + s.0[2] == a && s.0[1] + s.0[3] == b)
        .map(|(k, _)| k)
        .collect()
}

/// Constant of the zero-tunneling band energies `E = C - U (M - P)^2`,
/// `C = (U0 + U12) N^2 / 4 - U0 N / 2`.
pub fn band_constant<T: Real>(params: &ModelParameters<T>, n_total: u32) -> T {
    let n = T::from_count(n_total);
    (params.u0 + params.u12) * n * n / T::lit(4.0) - params.u0 * n / T::lit(2.0)
}

/// Zero-tunneling energy of the `(M, P)` split at integrable couplings.
pub fn band_energy<T: Real>(params: &ModelParameters<T>, m: u32, p: u32) -> T {
    let d = T::from_count(m.abs_diff(p));
    band_constant(params, m + p) - params.u_scale() * d * d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1() -> ModelParameters<f64> {
        ModelParameters::integrable(161.282, 75.876, 24.886)
    }

    #[test]
    fn vacuum_hamiltonian_is_zero() {
        let b = FockBasis::enumerate(0);
        let h = build_full_hamiltonian(&set1(), &b);
        assert_eq!(h.matrix().shape(), (1, 1));
        assert_eq!(h.matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn direct_and_symbolic_construction_agree() {
        let params = ModelParameters {
            u0: 1.3,
            u12: 0.7,
            u13: 0.2,
            u14: -0.4,
            u23: 0.9,
            u24: 1.1,
            u34: 0.3,
            j: 0.8,
            mu: 0.25,
            nu: -0.6,
        };
        for n in [1, 2, 3, 5] {
            let b = FockBasis::enumerate(n);
            let direct = build_full_hamiltonian(&params, &b);
            let symbolic: DMatrix<f64> = hamiltonian_expr(&params).to_matrix(&b);
            assert!((direct.matrix() - symbolic).amax() < 1e-12, "N={n}");
            assert!(direct.hermiticity_error() < 1e-14);
        }
    }

    #[test]
    fn zero_tunneling_diagonal_matches_band_energy() {
        let params = ModelParameters::integrable(161.282, 75.876, 0.0);
        for n in [3, 4, 5, 15] {
            let b = FockBasis::enumerate(n);
            let h = build_full_hamiltonian(&params, &b);
            for (k, s) in b.states().iter().enumerate() {
                let e: f64 = band_energy(&params, s.0[0] + s.0[2], s.0[1] + s.0[3]);
                let got = h.matrix()[(k, k)];
                assert!(((got - e) / e.abs().max(1.0)).abs() < 1e-12, "{s}: {got} vs {e}");
            }
            assert!((h.matrix() - DMatrix::from_diagonal(&h.matrix().diagonal())).amax() == 0.0);
        }
    }

    #[test]
    fn pure_hopping_spectrum_is_symmetric() {
        let params = ModelParameters { j: 1.0, ..ModelParameters::integrable(0.0, 0.0, 1.0) };
        let b = FockBasis::enumerate(2);
        let spec: Vec<f64> = build_full_hamiltonian(&params, &b).spectrum();
        assert_eq!(spec.len(), 10);
        for (lo, hi) in spec.iter().zip(spec.iter().rev()) {
            assert!((lo + hi).abs() < 1e-12);
        }
    }

    #[test]
    fn charge_action_on_single_boson() {
        let b = FockBasis::enumerate(1);
        let q1 = build_charge::<f64>(&b, Charge::Q1);
        let src = b.index_of(&FockState::new(1, 0, 0, 0)).unwrap();
        let dst = b.index_of(&FockState::new(0, 0, 1, 0)).unwrap();
        assert!((2.0 * q1.matrix()[(src, src)] - 1.0).abs() < 1e-15);
        assert!((2.0 * q1.matrix()[(dst, src)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn charges_have_integer_spectrum_per_split() {
        let b = FockBasis::enumerate(5);
        let q1 = build_charge::<f64>(&b, Charge::Q1);
        for a in 0..=5 {
            let idx = split_subspace(&b, a, 5 - a);
            let sub = q1.restricted(&idx);
            let mut eig: Vec<f64> = SymmetricEigen::new(sub).eigenvalues.iter().copied().collect();
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for e in &eig {
                assert!((e - e.round()).abs() < 1e-10 && *e > -1e-10 && *e < f64::from(a) + 1e-10);
            }
            assert!((eig.last().unwrap() - f64::from(a)).abs() < 1e-10);
        }
    }

    #[test]
    fn integrable_couplings_conserve_charges() {
        for n in [3, 5] {
            let b = FockBasis::enumerate(n);
            let h = build_full_hamiltonian(&set1(), &b);
            let q1 = build_charge(&b, Charge::Q1);
            let q2 = build_charge(&b, Charge::Q2);
            assert!(h.commutator_norm(&q1) < 1e-11);
            assert!(h.commutator_norm(&q2) < 1e-11);
            assert!(q1.commutator_norm(&q2) < 1e-11);
        }
    }

    #[test]
    fn broken_integrability_is_detectable() {
        let b = FockBasis::enumerate(3);
        let mut p = set1();
        assert!(p.is_integrable());
        p.u13 += 1.0;
        assert!(!p.is_integrable());
        let h = build_full_hamiltonian(&p, &b);
        assert!(h.commutator_norm(&build_charge(&b, Charge::Q1)) > 1e-3);

        let hm = build_full_hamiltonian(&set1().with_fields(20.87, 0.0), &b);
        assert!(hm.commutator_norm(&build_charge(&b, Charge::Q2)) > 1e-3);
    }

    #[test]
    fn derived_scales_for_set_one() {
        let d = DerivedScales::new(&set1(), 4, 11).unwrap();
        let omega = 24.886f64.powi(2) / (4.0 * 75.876 * 48.0);
        assert!((d.omega - omega).abs() < 1e-15);
        assert!((d.omega - 0.04251).abs() < 1e-5);
        assert!((d.t_m - 36.950).abs() / 36.950 < 1e-3);
        assert_eq!(d.beta, Some(1));
        assert_eq!(DerivedScales::new(&set1(), 4, 9).unwrap().beta, Some(-1));
        assert_eq!(DerivedScales::new(&set1(), 4, 10).unwrap().beta, None);
        assert_eq!(DerivedScales::new(&set1(), 5, 5), Err(Error::SingularResonance(0)));
        assert_eq!(DerivedScales::new(&set1(), 5, 6), Err(Error::SingularResonance(1)));
    }

    #[test]
    fn effective_forms_rejects_resonant_splits() {
        assert!(matches!(effective_hamiltonian_sq_expr(4, 4, 1.0, 1.0), Err(Error::SingularResonance(0))));
        assert!(effective_hamiltonian_sq_expr(4, 11, 1.0, 1.0).is_ok());
    }

    #[test]
    fn effective_sq_form_conserves_subsystem_numbers() {
        let b = FockBasis::enumerate(7);
        let params = ModelParameters::integrable(1.0, 3.0, 1.0);
        let d = DerivedScales::new(&params, 2, 5).unwrap();
        let h = build_effective_hamiltonian_sq::<f64>(&b, &d).unwrap();
        let na = HermitianOperator::new(b.clone(), b.diagonal(|s| f64::from(s.0[0] + s.0[2])));
        let nb = HermitianOperator::new(b.clone(), b.diagonal(|s| f64::from(s.0[1] + s.0[3])));
        assert!(h.commutator_norm(&na) < 1e-12);
        assert!(h.commutator_norm(&nb) < 1e-12);
        assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn effective_charge_form_commutes_with_charges() {
        let b = FockBasis::enumerate(7);
        let h = build_effective_hamiltonian_charges::<f64>(&b, 0.3);
        for q in [Charge::Q1, Charge::Q2] {
            assert!(h.commutator_norm(&build_charge(&b, q)) < 1e-12);
        }
        assert!(h.reconstruction_error() < 1e-9);
    }
}
