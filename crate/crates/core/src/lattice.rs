//! Dipolar optical-lattice calculator: trap scales, on-site and long-range
//! couplings, the integrability root `U0 = U13` and the encoding fields.
//!
//! Inputs are SI. Couplings and energies are returned as angular frequencies
//! (energy / ħ in rad/s), matching [`crate::ModelParameters`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::numeric::{bracketed_root, integrate, Integral};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
pub const DY164_MASS: f64 = 163.929_174_8 * ATOMIC_MASS_UNIT;

/// Radial frequency and on-site coupling used to pin `f(kappa)`.
pub const CALIBRATION_OMEGA_R: f64 = 2.0 * PI * 37_078.0;
pub const CALIBRATION_U0: f64 = 161.282;
pub const CALIBRATION_SCATTERING_LENGTH: f64 = -21.0;

/// Default search interval for the integrability root (rad/s).
pub const DEFAULT_BRACKET: (f64, f64) = (2.0 * PI * 5.0e3, 2.0 * PI * 200.0e3);

// The radial integrand carries exp(-s^2/4); cut where it is exp(-40).
const CUTOFF_EXPONENT: f64 = 40.0;
const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_ACCEPT_REL: f64 = 1e-4;
const QUAD_MAX_SEGMENTS: usize = 4000;
const ROOT_REL_TOL: f64 = 1e-11;
const ROOT_MAX_ITER: usize = 200;
const SERIES_RADIUS: f64 = 0.05;

/// How `f(kappa)` in the on-site coupling is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Anisotropy {
    /// Closed-form anisotropy function evaluated at the configured aspect ratio.
    Standard,
    /// A fixed value.
    Fixed { f: f64 },
    /// Back-solved so that `U0(omega_r) = u0` exactly at scattering length `a` (Bohr radii).
    CalibratedTo { omega_r: f64, u0: f64, scattering_length: f64 },
}

impl Default for Anisotropy {
    fn default() -> Self {
        Anisotropy::CalibratedTo {
            omega_r: CALIBRATION_OMEGA_R,
            u0: CALIBRATION_U0,
            scattering_length: CALIBRATION_SCATTERING_LENGTH,
        }
    }
}

/// Prefactor of the on-site coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsiteReading {
    /// `kappa (eta/pi)^{3/2}`, the Gaussian-overlap normalization.
    #[default]
    SquareRoot,
    /// `kappa eta^3 / pi^3`, taken at face value.
    Literal,
}

/// Nearest-neighbour or diagonal pair on the square plaquette.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pair {
    Nearest,
    Diagonal,
}

/// Beam geometry and atomic constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapParameters {
    /// Laser wavelength (m).
    pub wavelength: f64,
    /// Lattice beam waist (m).
    pub w0: f64,
    /// Isolation beam waist (m).
    pub w1: f64,
    /// Pancake beam waist (m).
    pub w2: f64,
    /// Integrability-breaking beam waist (m).
    pub w_b: f64,
    /// Crossing angle of the pancake beams (rad).
    pub alpha: f64,
    pub v1_over_v0: f64,
    pub v2_over_v0: f64,
    pub vb_over_v0: f64,
    /// s-wave scattering length in Bohr radii.
    pub scattering_length: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Magnetic moment in Bohr magnetons.
    pub magnetic_moment: f64,
    /// `omega_z / omega_r`.
    pub kappa_sq: f64,
    pub anisotropy: Anisotropy,
    pub onsite_reading: OnsiteReading,
}

impl Default for TrapParameters {
    fn default() -> Self {
        TrapParameters {
            wavelength: 532e-9,
            w0: 50e-6,
            w1: 1.0e-6,
            w2: 50e-6,
            w_b: 5.0e-6,
            alpha: PI / 3.0,
            v1_over_v0: 1.0,
            v2_over_v0: 9.0,
            vb_over_v0: 5e-3,
            scattering_length: -21.0,
            mass: DY164_MASS,
            magnetic_moment: 9.93,
            kappa_sq: 1.464,
            anisotropy: Anisotropy::default(),
            onsite_reading: OnsiteReading::default(),
        }
    }
}

impl TrapParameters {
    pub fn with_scattering_length(mut self, a: f64) -> Self {
        self.scattering_length = a;
        self
    }

    pub fn with_anisotropy(mut self, anisotropy: Anisotropy) -> Self {
        self.anisotropy = anisotropy;
        self
    }

    pub fn with_onsite_reading(mut self, reading: OnsiteReading) -> Self {
        self.onsite_reading = reading;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("w0", self.w0),
            ("w1", self.w1),
            ("w2", self.w2),
            ("w_b", self.w_b),
            ("mass", self.mass),
            ("kappa_sq", self.kappa_sq),
            ("v1_over_v0", self.v1_over_v0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.w0 < 10.0 * self.wavelength {
            return Err(Error::InvalidConfig(format!(
                "lattice waist w0 = {} m must be much larger than the wavelength",
                self.w0
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < PI) {
            return Err(Error::InvalidConfig(format!("crossing angle must lie in (0, pi), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Nearest-well distance `l = lambda / 2` (m).
    pub fn spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Vertical distance between pancakes, `lambda / (2 sin(alpha/2))`.
    pub fn layer_spacing(&self) -> f64 {
        self.wavelength / (2.0 * (self.alpha / 2.0).sin())
    }

    /// Well-spacing contraction `1 + 2 V1 / (V0 k^2 w1^2)`.
    pub fn delta(&self) -> f64 {
        let k = self.wavenumber();
        1.0 + 2.0 * self.v1_over_v0 / (k * k * self.w1 * self.w1)
    }

    /// `omega_z / omega_r` implied by the beam depths and waists rather than the configured `kappa_sq`.
    pub fn beam_aspect_ratio(&self) -> f64 {
        let k = self.wavenumber();
        let d_sw = self.layer_spacing();
        let r1 = PI * self.w1 * self.w1 / self.wavelength;
        let axial = PI * PI * self.v2_over_v0 / (d_sw * d_sw) + self.v1_over_v0 / (r1 * r1);
        let radial = k * k + 2.0 * self.v1_over_v0 / (self.w1 * self.w1);
        (axial / radial).sqrt()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_sq.sqrt()
    }

    /// `eta = m omega_r / (2 hbar)` (1/m^2).
    pub fn eta(&self, omega_r: f64) -> f64 {
        self.mass * omega_r / (2.0 * HBAR)
    }

    /// Recoil energy `hbar k^2 / (2m)` (rad/s).
    pub fn recoil_energy(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * k * k / (2.0 * self.mass)
    }

    /// Lattice depth `V0` (J) giving radial frequency `omega_r`.
    pub fn lattice_depth(&self, omega_r: f64) -> f64 {
        let k = self.wavenumber();
        self.mass * omega_r * omega_r / (2.0 * (k * k + 2.0 * self.v1_over_v0 / (self.w1 * self.w1)))
    }

    /// Inverse of [`Self::lattice_depth`].
    pub fn radial_frequency(&self, v0: f64) -> f64 {
        let k = self.wavenumber();
        (2.0 / self.mass * v0 * (k * k + 2.0 * self.v1_over_v0 / (self.w1 * self.w1))).sqrt()
    }

    /// Isolation-beam harmonic frequency `sqrt(4 V1 / (m w1^2))` (rad/s).
    pub fn isolation_frequency(&self, omega_r: f64) -> f64 {
        let v1 = self.v1_over_v0 * self.lattice_depth(omega_r);
        (4.0 * v1 / (self.mass * self.w1 * self.w1)).sqrt()
    }

    /// Contact coupling `4 pi hbar^2 a / m` (J m^3).
    pub fn contact_coupling(&self) -> f64 {
        4.0 * PI * HBAR * HBAR * self.scattering_length * BOHR_RADIUS / self.mass
    }

    /// Dipolar coupling `mu0 mu1^2` (J m^3).
    pub fn dipolar_coupling(&self) -> f64 {
        let mu1 = self.magnetic_moment * BOHR_MAGNETON;
        VACUUM_PERMEABILITY * mu1 * mu1
    }

    fn onsite_prefactor(&self, omega_r: f64) -> f64 {
        let eta = self.eta(omega_r);
        match self.onsite_reading {
            OnsiteReading::SquareRoot => self.kappa() * (eta / PI).powf(1.5),
            OnsiteReading::Literal => self.kappa() * (eta / PI).powi(3),
        }
    }

    /// The anisotropy value entering the on-site coupling.
    pub fn anisotropy_value(&self) -> Result<f64> {
        match self.anisotropy {
            Anisotropy::Standard => anisotropy_f(self.kappa()),
            Anisotropy::Fixed { f } => Ok(f),
            Anisotropy::CalibratedTo { omega_r, u0, scattering_length } => {
                if !(omega_r > 0.0) {
                    return Err(Error::InvalidConfig(format!("calibration frequency must be positive, got {omega_r}")));
                }
                let cdd = self.dipolar_coupling();
                if cdd == 0.0 {
                    return Err(Error::InvalidConfig("calibration needs a nonzero magnetic moment".into()));
                }
                let at_calibration = self.with_scattering_length(scattering_length);
                let bracket = at_calibration.contact_coupling() - u0 * HBAR / self.onsite_prefactor(omega_r);
                Ok(3.0 * bracket / cdd)
            }
        }
    }
}

/// Dipolar anisotropy function of the aspect ratio `kappa`.
pub fn anisotropy_f(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa must be positive and finite, got {kappa}")));
    }
    let k2 = kappa * kappa;
    let eps = k2 - 1.0;
    if eps.abs() < SERIES_RADIUS {
        let mut sum = 0.0;
        let mut power = 1.0;
        for n in 1..40 {
            power *= -eps;
            let n = n as f64;
            sum += 6.0 * power / ((2.0 * n + 1.0) * (2.0 * n + 3.0));
        }
        return Ok(sum);
    }
    let head = (1.0 + 2.0 * k2) / (1.0 - k2);
    if k2 < 1.0 {
        let x = (1.0 - k2).sqrt();
        Ok(head - 3.0 * k2 * x.atanh() / (1.0 - k2).powf(1.5))
    } else {
        let x = (k2 - 1.0).sqrt();
        Ok(head + 3.0 * k2 * x.atan() / (k2 - 1.0).powf(1.5))
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        let inv = 1.0 / (x * x);
        (1.0 - 0.5 * inv + 0.75 * inv * inv - 1.875 * inv * inv * inv) / (x * PI.sqrt())
    }
}

/// Radial kernel in units of `sqrt(eta)`, argument `s = r / sqrt(eta)`.
pub fn z_kernel(s: f64, kappa: f64) -> f64 {
    4.0 / 3.0 * kappa / PI.sqrt() - s * erfcx(s / (2.0 * kappa))
}

/// On-site coupling `U0 / hbar` (rad/s).
pub fn onsite_coupling(trap: &TrapParameters, omega_r: f64) -> Result<f64> {
    let f = trap.anisotropy_value()?;
    Ok(trap.onsite_prefactor(omega_r) * (trap.contact_coupling() - trap.dipolar_coupling() / 3.0 * f) / HBAR)
}

/// Dipolar part of the on-site coupling (rad/s).
pub fn onsite_dipolar(trap: &TrapParameters, omega_r: f64) -> Result<f64> {
    let f = trap.anisotropy_value()?;
    Ok(-trap.onsite_prefactor(omega_r) * trap.dipolar_coupling() / 3.0 * f / HBAR)
}

/// Dipolar coupling between wells a distance `d` (m) apart, with its quadrature error.
pub fn dipolar_at_distance(trap: &TrapParameters, omega_r: f64, d: f64) -> Result<(f64, Integral)> {
    let eta = trap.eta(omega_r);
    let kappa = trap.kappa();
    let scaled_d = eta.sqrt() * d;
    let upper = (4.0 * CUTOFF_EXPONENT).sqrt();
    let integrand = |s: f64| s * (-s * s / 4.0).exp() * libm::j0(s * scaled_d) * z_kernel(s, kappa);
    let mut integral = integrate(integrand, 0.0, upper, QUAD_REL_TOL, QUAD_ACCEPT_REL, QUAD_MAX_SEGMENTS)?;
    // |Z| <= (4/3 + 2) kappa / sqrt(pi) and the Gaussian tail integrates to 2 exp(-S^2/4).
    integral.error += 10.0 / 3.0 * kappa / PI.sqrt() * 2.0 * (-CUTOFF_EXPONENT).exp();
    let scale = trap.dipolar_coupling() / (4.0 * PI) * eta.powf(1.5) / HBAR;
    Ok((scale * integral.value, integral))
}

/// Distance between wells of a pair (m).
pub fn pair_distance(trap: &TrapParameters, pair: Pair) -> f64 {
    let base = trap.spacing() / trap.delta();
    match pair {
        Pair::Nearest => base,
        Pair::Diagonal => base * 2f64.sqrt(),
    }
}

/// Long-range coupling `U_1j / hbar` (rad/s).
pub fn offsite_coupling(trap: &TrapParameters, omega_r: f64, pair: Pair) -> Result<f64> {
    dipolar_at_distance(trap, omega_r, pair_distance(trap, pair)).map(|(u, _)| u)
}

/// `U0 - U13` (rad/s).
pub fn detuning(trap: &TrapParameters, omega_r: f64) -> Result<f64> {
    Ok(onsite_coupling(trap, omega_r)? - offsite_coupling(trap, omega_r, Pair::Diagonal)?)
}

/// Radial frequency at the integrability point and the couplings there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityRoot {
    pub omega_r: f64,
    pub u0: f64,
    pub u13: f64,
    /// `U0 - U13 - target`.
    pub residual: f64,
}

/// Solves `U0(omega_r) = U13(omega_r)` on `bracket` (rad/s).
pub fn solve_integrability(trap: &TrapParameters, bracket: (f64, f64)) -> Result<IntegrabilityRoot> {
    solve_detuning(trap, 0.0, bracket)
}

/// Solves `U0(omega_r) - U13(omega_r) = xi` on `bracket` (rad/s).
pub fn solve_detuning(trap: &TrapParameters, xi: f64, bracket: (f64, f64)) -> Result<IntegrabilityRoot> {
    trap.validate()?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig(format!("bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let omega_r = bracketed_root(|w| Ok(detuning(trap, w)? - xi), lo, hi, ROOT_REL_TOL, ROOT_MAX_ITER)?;
    let u0 = onsite_coupling(trap, omega_r)?;
    let u13 = offsite_coupling(trap, omega_r, Pair::Diagonal)?;
    Ok(IntegrabilityRoot { omega_r, u0, u13, residual: u0 - u13 - xi })
}

/// Encoding fields `(mu, nu)` in rad/s for a beam displaced by `(dx, dy)` metres.
pub fn field_strengths(trap: &TrapParameters, v0: f64, dx: f64, dy: f64) -> Result<(f64, f64)> {
    if dx.abs() >= trap.w_b || dy.abs() >= trap.w_b {
        return Err(Error::InvalidConfig(format!(
            "beam displacement ({dx}, {dy}) m must stay inside the waist {} m",
            trap.w_b
        )));
    }
    let vb = trap.vb_over_v0 * v0;
    let scale = 2.0 * vb * trap.spacing() / (trap.w_b * trap.w_b * trap.delta()) / HBAR;
    Ok((scale * (dx - dy), scale * (dx + dy)))
}

/// Every quantity of the physical proposal at one radial frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeDerived {
    pub omega_r: f64,
    pub omega_z: f64,
    /// `omega_z / omega_r` from the beam formulas, for comparison with `kappa_sq`.
    pub beam_aspect_ratio: f64,
    /// Isolation-beam harmonic frequency.
    pub omega: f64,
    pub eta: f64,
    pub delta: f64,
    pub recoil_energy: f64,
    /// `V0 / hbar` (rad/s).
    pub v0: f64,
    pub v0_over_recoil: f64,
    pub contact_coupling: f64,
    pub dipolar_coupling: f64,
    pub anisotropy_f: f64,
    pub u0: f64,
    pub u12: f64,
    pub u13: f64,
    /// `(U12 - U0) / 4`.
    pub u: f64,
    pub mu: f64,
    pub nu: f64,
}

impl LatticeDerived {
    /// Couplings for the Hamiltonian with tunneling `j` supplied externally.
    pub fn model_parameters(&self, j: f64) -> ModelParameters<f64> {
        ModelParameters {
            u0: self.u0,
            u12: self.u12,
            u13: self.u13,
            u14: self.u12,
            u23: self.u12,
            u24: self.u13,
            u34: self.u12,
            j,
            mu: 0.0,
            nu: 0.0,
        }
    }
}

/// Evaluates the proposal at `omega_r`, with the encoding beam displaced by `(dx, dy)`.
pub fn derive(trap: &TrapParameters, omega_r: f64, dx: f64, dy: f64) -> Result<LatticeDerived> {
    trap.validate()?;
    let v0 = trap.lattice_depth(omega_r);
    let (mu, nu) = field_strengths(trap, v0, dx, dy)?;
    let u0 = onsite_coupling(trap, omega_r)?;
    let u12 = offsite_coupling(trap, omega_r, Pair::Nearest)?;
    let u13 = offsite_coupling(trap, omega_r, Pair::Diagonal)?;
    Ok(LatticeDerived {
        omega_r,
        omega_z: trap.kappa_sq * omega_r,
        beam_aspect_ratio: trap.beam_aspect_ratio(),
        omega: trap.isolation_frequency(omega_r),
        eta: trap.eta(omega_r),
        delta: trap.delta(),
        recoil_energy: trap.recoil_energy(),
        v0: v0 / HBAR,
        v0_over_recoil: v0 / HBAR / trap.recoil_energy(),
        contact_coupling: trap.contact_coupling(),
        dipolar_coupling: trap.dipolar_coupling(),
        anisotropy_f: trap.anisotropy_value()?,
        u0,
        u12,
        u13,
        u: (u12 - u0) / 4.0,
        mu,
        nu,
    })
}

/// Displacement used for the encoding fields, `|dx| = |dy| = 0.2 um` with `dx = -dy`.
pub const DEFAULT_DISPLACEMENT: (f64, f64) = (0.2e-6, -0.2e-6);
