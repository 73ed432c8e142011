//! Number-conserving Fock basis of four bosonic sites and second-quantized
//! operator actions on it.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SITES: usize = 4;

/// One of the four lattice sites, numbered 1..=4 as in the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Site {
    One,
    Two,
    Three,
    Four,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::One, Site::Two, Site::Three, Site::Four];

    /// Zero-based position in an occupation tuple.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based label.
    pub fn label(self) -> usize {
        self as usize + 1
    }
}

impl TryFrom<usize> for Site {
    type Error = Error;

    fn try_from(label: usize) -> Result<Self> {
        match label {
            1 => Ok(Site::One),
            2 => Ok(Site::Two),
            3 => Ok(Site::Three),
            4 => Ok(Site::Four),
            other => Err(Error::InvalidSite(other)),
        }
    }
}

impl From<Site> for usize {
    fn from(site: Site) -> usize {
        site.label()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Occupation numbers `|n1, n2, n3, n4>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockState(pub [u32; SITES]);

impl FockState {
    pub fn new(n1: u32, n2: u32, n3: u32, n4: u32) -> Self {
        FockState([n1, n2, n3, n4])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn occupation(&self, site: Site) -> u32 {
        self.0[site.index()]
    }

    /// Applies a single ladder operator, returning the bosonic amplitude.
    pub fn apply(&self, op: Ladder) -> Option<(f64, FockState)> {
        self.apply_squared(op).map(|(a2, s)| ((a2 as f64).sqrt(), s))
    }

    fn apply_squared(&self, op: Ladder) -> Option<(u64, FockState)> {
        let k = op.site.index();
        let n = self.0[k];
        let mut next = *self;
        match op.kind {
            LadderKind::Create => {
                next.0[k] = n + 1;
                Some((u64::from(n + 1), next))
            }
            LadderKind::Annihilate => {
                if n == 0 {
                    return None;
                }
                next.0[k] = n - 1;
                Some((u64::from(n), next))
            }
        }
    }

    /// Applies an operator word written left to right; the rightmost factor acts first.
    pub fn apply_word(&self, word: &[Ladder]) -> Option<(f64, FockState)> {
        word.iter()
            .rev()
            .try_fold((1u64, *self), |(amp2, state), &op| {
                state.apply_squared(op).map(|(a2, s)| (amp2 * a2, s))
            })
            .map(|(a2, s)| ((a2 as f64).sqrt(), s))
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "|{a},{b},{c},{d}>")
    }
}

/// All Fock states with a fixed total particle number, in lexicographic order.
#[derive(Clone, Debug)]
pub struct FockBasis {
    n_total: u32,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

impl FockBasis {
    /// Enumerates every 4-tuple of occupations summing to `n_total`.
    pub fn enumerate(n_total: u32) -> Arc<Self> {
        let mut states = Vec::with_capacity(sector_dimension(n_total));
        for n1 in 0..=n_total {
            for n2 in 0..=(n_total - n1) {
                for n3 in 0..=(n_total - n1 - n2) {
                    states.push(FockState::new(n1, n2, n3, n_total - n1 - n2 - n3));
                }
            }
        }
        let index = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        Arc::new(FockBasis { n_total, states, index })
    }

    pub fn n_total(&self) -> u32 {
        self.n_total
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state_at(&self, k: usize) -> FockState {
        self.states[k]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn require_index(&self, state: &FockState) -> Result<usize> {
        self.index_of(state)
            .ok_or(Error::StateNotInBasis(state.0, self.n_total))
    }

    /// Coefficient table of `a_to† a_from`: `(source, target, amplitude)` per
    /// basis state with at least one boson at `from`.
    pub fn hopping_table(&self, from: Site, to: Site) -> Result<Vec<HopEntry>> {
        if from == to {
            return Err(Error::SameSite(from.label()));
        }
        let word = [Ladder::create(to), Ladder::annihilate(from)];
        Ok(self
            .states
            .iter()
            .enumerate()
            .filter_map(|(source, state)| {
                state.apply_word(&word).map(|(amplitude, next)| HopEntry {
                    source,
                    target: self.index[&next],
                    amplitude,
                })
            })
            .collect())
    }

    /// Diagonal operator with entries `f(state)`.
    pub fn diagonal<T: Real>(&self, f: impl Fn(&FockState) -> f64) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.len(),
            self.states.iter().map(|s| T::lit(f(s))),
        ))
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_total == other.n_total
    }
}

/// `binomial(N + 3, 3)`.
pub fn sector_dimension(n_total: u32) -> usize {
    let n = n_total as usize;
    (n + 1) * (n + 2) * (n + 3) / 6
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopEntry {
    pub source: usize,
    pub target: usize,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LadderKind {
    Create,
    Annihilate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub site: Site,
    pub kind: LadderKind,
}

impl Ladder {
    pub fn create(site: Site) -> Self {
        Ladder { site, kind: LadderKind::Create }
    }

    pub fn annihilate(site: Site) -> Self {
        Ladder { site, kind: LadderKind::Annihilate }
    }
}

/// A real linear combination of ladder-operator words.
///
/// Products expand term by term, so operators can be written exactly as they
/// appear in a derivation (`(a1 a3† + a3 a1†)(N2 + N4)`) and only turned into a matrix
/// at the end. Words must conserve the particle number as a whole.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorExpr {
    terms: Vec<(f64, Vec<Ladder>)>,
}

impl OperatorExpr {
    pub fn zero() -> Self {
        OperatorExpr::default()
    }

    pub fn identity() -> Self {
        OperatorExpr { terms: vec![(1.0, Vec::new())] }
    }

    pub fn word(coef: f64, word: &[Ladder]) -> Self {
        OperatorExpr { terms: vec![(coef, word.to_vec())] }
    }

    /// `a_i† a_j`.
    pub fn hop(to: Site, from: Site) -> Self {
        Self::word(1.0, &[Ladder::create(to), Ladder::annihilate(from)])
    }

    /// `N_i = a_i† a_i`.
    pub fn number(site: Site) -> Self {
        Self::hop(site, site)
    }

    pub fn scale(mut self, factor: f64) -> Self {
        for term in &mut self.terms {
            term.0 *= factor;
        }
        self
    }

    pub fn terms(&self) -> &[(f64, Vec<Ladder>)] {
        &self.terms
    }

    /// Matrix elements `<target| O |source>` within one sector.
    pub fn to_matrix<T: Real>(&self, basis: &FockBasis) -> DMatrix<T> {
        let dim = basis.len();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (col, state) in basis.states().iter().enumerate() {
            for (coef, word) in &self.terms {
                if let Some((amp, next)) = state.apply_word(word) {
                    let row = basis
                        .index_of(&next)
                        .expect("operator word must conserve particle number");
                    m[(row, col)] += coef * amp;
                }
            }
        }
        m.map(T::lit)
    }
}

impl Add for OperatorExpr {
    type Output = OperatorExpr;

    fn add(mut self, rhs: OperatorExpr) -> OperatorExpr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Neg for OperatorExpr {
    type Output = OperatorExpr;

    fn neg(self) -> OperatorExpr {
        self.scale(-1.0)
    }
}

impl Mul for OperatorExpr {
    type Output = OperatorExpr;

    fn mul(self, rhs: OperatorExpr) -> OperatorExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (a, wa) in &self.terms {
            for (b, wb) in &rhs.terms {
                let mut word = wa.clone();
                word.extend_from_slice(wb);
                terms.push((a * b, word));
            }
        }
        OperatorExpr { terms }
    }
}

/// Normalized complex amplitudes over one Fock sector.
#[derive(Clone, Debug)]
pub struct QuantumState<T: Real> {
    basis: Arc<FockBasis>,
    amplitudes: DVector<Complex<T>>,
}

impl<T: Real> QuantumState<T> {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(basis: Arc<FockBasis>, amplitudes: DVector<Complex<T>>) -> Self {
        assert_eq!(basis.len(), amplitudes.len(), "amplitude vector does not match basis");
        QuantumState { basis, amplitudes }
    }

    pub fn fock(basis: &Arc<FockBasis>, state: FockState) -> Result<Self> {
        Self::superposition(basis, &[(Complex::new(T::one(), T::zero()), state)])
    }

    /// Normalized superposition `sum c_k |s_k>`.
    pub fn superposition(basis: &Arc<FockBasis>, terms: &[(Complex<T>, FockState)]) -> Result<Self> {
        let mut amplitudes = DVector::zeros(basis.len());
        for (c, s) in terms {
            amplitudes[basis.require_index(s)?] += *c;
        }
        let mut state = QuantumState { basis: Arc::clone(basis), amplitudes };
        state.normalize();
        Ok(state)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex<T>> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex<T>> {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, state: &FockState) -> Complex<T> {
        self.basis
            .index_of(state)
            .map_or_else(|| Complex::new(T::zero(), T::zero()), |k| self.amplitudes[k])
    }

    pub fn norm(&self) -> T {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > T::zero() {
            self.amplitudes.unscale_mut(n);
        }
    }

    pub fn ensure_same_basis(&self, other: &QuantumState<T>) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch(self.basis.n_total(), other.basis.n_total()))
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState<T>) -> Result<Complex<T>> {
        self.ensure_same_basis(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `sum |amp|^2 n_site`.
    pub fn number_expectation(&self, site: Site) -> T {
        self.basis
            .states()
            .iter()
            .zip(self.amplitudes.iter())
            .fold(T::zero(), |acc, (s, a)| acc + a.norm_sqr() * T::from_count(s.occupation(site)))
    }

    /// `<psi| A |psi>` for a real symmetric matrix `A`.
    pub fn expectation(&self, matrix: &DMatrix<T>) -> T {
        let (re, im) = split(&self.amplitudes);
        re.dot(&(matrix * &re)) + im.dot(&(matrix * &im))
    }
}

pub(crate) fn split<T: Real>(v: &DVector<Complex<T>>) -> (DVector<T>, DVector<T>) {
    (v.map(|c| c.re), v.map(|c| c.im))
}

pub(crate) fn join<T: Real>(re: &DVector<T>, im: &DVector<T>) -> DVector<Complex<T>> {
    re.zip_map(im, Complex::new)
}
