//! Single-kaon two-level states.
//!
//! Strangeness basis ordering is (K⁰, K̄⁰), mass basis ordering is
//! (K_S, K_L). The phase convention is
//!
//! ```text
//! K_S = (K⁰ + K̄⁰)/√2        K_L = (K⁰ − K̄⁰)/√2
//! ```
//!
//! K_S and K_L are treated as orthogonal; their small overlap is handled as a
//! misidentification probability by the decay budget instead.

use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;

use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::{Error, Result};

pub type ComplexAmplitude = Complex64;

pub(crate) const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Basis {
    Strangeness,
    Mass,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Strangeness => "strangeness",
            Basis::Mass => "mass",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Hadamard-type change between (K⁰, K̄⁰) and (K_S, K_L); self-inverse.
pub(crate) fn hadamard(a0: Complex64, a1: Complex64) -> (Complex64, Complex64) {
    ((a0 + a1) * FRAC_1_SQRT_2, (a0 - a1) * FRAC_1_SQRT_2)
}

/// A normalised single-kaon state. Probability lost to decay is tracked in
/// `norm_tracked`, never in the amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleKaonState {
    basis: Basis,
    amp0: Complex64,
    amp1: Complex64,
    norm_tracked: f64,
}

impl SingleKaonState {
    /// Normalises `(amp0, amp1)`; `norm_tracked` starts at 1.
    pub fn new(basis: Basis, amp0: Complex64, amp1: Complex64) -> Result<Self> {
        if !is_finite(amp0) || !is_finite(amp1) {
            return Err(Error::NonFinite);
        }
        let norm = libm::sqrt(amp0.norm_sqr() + amp1.norm_sqr());
        if norm == 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(SingleKaonState {
            basis,
            amp0: amp0 / norm,
            amp1: amp1 / norm,
            norm_tracked: 1.0,
        })
    }

    pub fn k0() -> Self {
        Self::pure(Basis::Strangeness, 0)
    }

    pub fn k0bar() -> Self {
        Self::pure(Basis::Strangeness, 1)
    }

    pub fn ks() -> Self {
        Self::pure(Basis::Mass, 0)
    }

    pub fn kl() -> Self {
        Self::pure(Basis::Mass, 1)
    }

    fn pure(basis: Basis, index: usize) -> Self {
        let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let (amp0, amp1) = if index == 0 { (one, zero) } else { (zero, one) };
        SingleKaonState {
            basis,
            amp0,
            amp1,
            norm_tracked: 1.0,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        [self.amp0, self.amp1]
    }

    pub fn norm_tracked(&self) -> f64 {
        self.norm_tracked
    }

    pub fn with_norm_tracked(mut self, norm: f64) -> Self {
        self.norm_tracked = norm;
        self
    }

    pub fn to_mass_basis(&self) -> Result<Self> {
        self.change_basis(Basis::Strangeness, Basis::Mass)
    }

    pub fn to_strangeness_basis(&self) -> Result<Self> {
        self.change_basis(Basis::Mass, Basis::Strangeness)
    }

    fn change_basis(&self, from: Basis, to: Basis) -> Result<Self> {
        if self.basis != from {
            return Err(Error::WrongBasis {
                expected: from.as_str(),
                found: self.basis.as_str(),
            });
        }
        let (amp0, amp1) = hadamard(self.amp0, self.amp1);
        Ok(SingleKaonState {
            basis: to,
            amp0,
            amp1,
            norm_tracked: self.norm_tracked,
        })
    }

    /// Same state expressed in `basis`.
    pub fn in_basis(&self, basis: Basis) -> Self {
        if self.basis == basis {
            *self
        } else {
            let (amp0, amp1) = hadamard(self.amp0, self.amp1);
            SingleKaonState {
                basis,
                amp0,
                amp1,
                norm_tracked: self.norm_tracked,
            }
        }
    }

    /// Free decaying evolution over `t` (τ_S units).
    ///
    /// The K_S amplitude is damped by e^{−Γ_S t/2}; the K_L amplitude by
    /// e^{−Γ_L t/2} and rotated by e^{−iΔm t}. The result is renormalised and
    /// the survival probability multiplied into `norm_tracked`. The output is
    /// in the same basis as the input.
    pub fn evolve(&self, t: f64, c: &PhysicalConstants) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let m = self.in_basis(Basis::Mass);
        let (s_factor, l_factor) = mass_propagators(t, c);
        let amp_s = m.amp0 * s_factor;
        let amp_l = m.amp1 * l_factor;
        let survival = amp_s.norm_sqr() + amp_l.norm_sqr();
        let norm = libm::sqrt(survival);
        let evolved = SingleKaonState {
            basis: Basis::Mass,
            amp0: amp_s / norm,
            amp1: amp_l / norm,
            norm_tracked: self.norm_tracked * survival,
        };
        Ok(evolved.in_basis(self.basis))
    }
}

/// (K_S, K_L) propagation factors over `t`, global phase e^{−i m_S t} dropped.
pub(crate) fn mass_propagators(t: f64, c: &PhysicalConstants) -> (Complex64, Complex64) {
    let s = Complex64::new(libm::exp(-0.5 * c.gamma_s * t), 0.0);
    let l = Complex64::from_polar(libm::exp(-0.5 * c.gamma_l * t), -c.delta_m * t);
    (s, l)
}
