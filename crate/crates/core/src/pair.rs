//! Two-kaon states, reduced density matrices and von Neumann entropy.
//!
//! Amplitudes are stored left ⊗ right with index `2 * left + right`:
//!
//! | basis       | 0      | 1      | 2      | 3      |
//! |-------------|--------|--------|--------|--------|
//! | strangeness | K⁰K⁰   | K⁰K̄⁰   | K̄⁰K⁰   | K̄⁰K̄⁰   |
//! | mass        | K_SK_S | K_SK_L | K_LK_S | K_LK_L |
//!
//! Use [`TwoKaonState::slot_labels`] when printing; never rely on indices in
//! serialised output.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::kaon_state::{hadamard, is_finite, mass_propagators, Basis, NORM_TOLERANCE};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    Left,
    Right,
}

/// Regeneration parameter `r` and post-selection time `t` (τ_S units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegenerationParams {
    r: Complex64,
    t: f64,
}

impl RegenerationParams {
    pub fn new(r: Complex64, t: f64) -> Result<Self> {
        if !is_finite(r) || r.norm() >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: alloc::format!("|r| must be < 1, got {}", r.norm()),
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name: "T",
                reason: alloc::format!("must be finite and >= 0, got {t}"),
            });
        }
        Ok(RegenerationParams { r, t })
    }

    pub fn r(&self) -> Complex64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Coefficients of the K_LK_L and K_SK_S admixtures after a time `T`.
///
/// `R = −r·exp[(−iΔm + (Γ_S − Γ_L)/2)·T]` and `R′ = −r²/R`. At `T = 0` this
/// is `(−r, r)`. `R` is the K_LK_L/K_SK_L amplitude ratio obtained by
/// letting both kaons of `K_SK_L − K_LK_S − r K_LK_L + r K_SK_S` decay
/// freely, so it grows like e^{(Γ_S−Γ_L)T/2} while `R′` shrinks.
pub fn compute_r(params: &RegenerationParams, c: &PhysicalConstants) -> (Complex64, Complex64) {
    let r = params.r;
    if r == ZERO {
        return (ZERO, ZERO);
    }
    let exponent = Complex64::new(0.5 * (c.gamma_s - c.gamma_l), -c.delta_m) * params.t;
    let big_r = -r * exponent.exp();
    let r_prime = -(r * r) / big_r;
    (big_r, r_prime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoKaonState {
    basis: Basis,
    amps: [Complex64; 4],
    r: Option<Complex64>,
    r_prime: Option<Complex64>,
}

impl TwoKaonState {
    /// Normalises `amps` (slot order in the module docs).
    pub fn new(basis: Basis, amps: [Complex64; 4]) -> Result<Self> {
        if !amps.iter().all(|a| is_finite(*a)) {
            return Err(Error::NonFinite);
        }
        let norm = libm::sqrt(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(TwoKaonState {
            basis,
            amps: amps.map(|a| a / norm),
            r: None,
            r_prime: None,
        })
    }

    /// The product state `left ⊗ right`.
    pub fn product(basis: Basis, left: [Complex64; 2], right: [Complex64; 2]) -> Result<Self> {
        Self::new(
            basis,
            [
                left[0] * right[0],
                left[0] * right[1],
                left[1] * right[0],
                left[1] * right[1],
            ],
        )
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        self.amps
    }

    pub fn amplitude(&self, left: usize, right: usize) -> Complex64 {
        self.amps[2 * left + right]
    }

    /// The `R` this state was built from, if any.
    pub fn r(&self) -> Option<Complex64> {
        self.r
    }

    pub fn r_prime(&self) -> Option<Complex64> {
        self.r_prime
    }

    pub fn slot_labels(basis: Basis) -> [&'static str; 4] {
        match basis {
            Basis::Strangeness => ["K0 K0", "K0 K0bar", "K0bar K0", "K0bar K0bar"],
            Basis::Mass => ["KS KS", "KS KL", "KL KS", "KL KL"],
        }
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        if basis == self.basis {
            return *self;
        }
        let mut tmp = [ZERO; 4];
        // H ⊗ H applied as two single-slot changes
        for l in 0..2 {
            let (a, b) = hadamard(self.amps[2 * l], self.amps[2 * l + 1]);
            tmp[2 * l] = a;
            tmp[2 * l + 1] = b;
        }
        let mut amps = [ZERO; 4];
        for r in 0..2 {
            let (a, b) = hadamard(tmp[r], tmp[2 + r]);
            amps[r] = a;
            amps[2 + r] = b;
        }
        TwoKaonState {
            basis,
            amps,
            r: self.r,
            r_prime: self.r_prime,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Both kaons decay freely for `t`; returns the renormalised state and
    /// the pair survival probability.
    pub fn evolve(&self, t: f64, c: &PhysicalConstants) -> Result<(Self, f64)> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let m = self.in_basis(Basis::Mass);
        let (s, l) = mass_propagators(t, c);
        let f = [s, l];
        let mut amps = m.amps;
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= f[i / 2] * f[i % 2];
        }
        let survival: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let norm = libm::sqrt(survival);
        let evolved = TwoKaonState {
            basis: Basis::Mass,
            amps: amps.map(|a| a / norm),
            r: None,
            r_prime: None,
        };
        Ok((evolved.in_basis(self.basis), survival))
    }

    /// Partial trace over the opposite side.
    pub fn reduced_density_matrix(&self, side: Side) -> DensityMatrix2 {
        let a = |i: usize, j: usize| match side {
            Side::Left => self.amplitude(i, j),
            Side::Right => self.amplitude(j, i),
        };
        let mut rho = [[ZERO; 2]; 2];
        for (i, row) in rho.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..2).map(|k| a(i, k) * a(j, k).conj()).sum();
            }
        }
        DensityMatrix2 { entries: rho }
    }

    pub fn entropy(&self, side: Side) -> f64 {
        self.reduced_density_matrix(side).entropy()
    }
}

/// `(|K⁰K̄⁰⟩ − |K̄⁰K⁰⟩)/√2`, which equals `(|K_LK_S⟩ − |K_SK_L⟩)/√2`.
pub fn build_singlet() -> TwoKaonState {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    TwoKaonState {
        basis: Basis::Strangeness,
        amps: [ZERO, h, -h, ZERO],
        r: Some(ZERO),
        r_prime: Some(ZERO),
    }
}

/// `(|K_SK_L⟩ − |K_LK_S⟩ + R|K_LK_L⟩ + R′|K_SK_S⟩)/√(2+|R|²+|R′|²)`.
pub fn build_phi_mass_basis(r: Complex64, r_prime: Complex64) -> Result<TwoKaonState> {
    let one = Complex64::new(1.0, 0.0);
    let mut state = TwoKaonState::new(Basis::Mass, [r_prime, one, -one, r])?;
    state.r = Some(r);
    state.r_prime = Some(r_prime);
    Ok(state)
}

/// The post-selected state with `R′` dropped, written in the strangeness
/// basis:
///
/// `(R|K⁰K⁰⟩ + R|K̄⁰K̄⁰⟩ + (2−R)|K̄⁰K⁰⟩ − (2+R)|K⁰K̄⁰⟩) / (2√(2+|R|²))`
pub fn build_phi_strangeness_basis(r: Complex64) -> Result<TwoKaonState> {
    if !is_finite(r) {
        return Err(Error::NonFinite);
    }
    let two = Complex64::new(2.0, 0.0);
    let scale = 1.0 / (2.0 * libm::sqrt(2.0 + r.norm_sqr()));
    let amps = [r, -(two + r), two - r, r].map(|a| a * scale);
    let mut state = TwoKaonState {
        basis: Basis::Strangeness,
        amps,
        r: Some(r),
        r_prime: Some(ZERO),
    };
    // scale is exact up to rounding; renormalise so the invariant holds to 1e-15
    let n = libm::sqrt(state.norm_sqr());
    state.amps = state.amps.map(|a| a / n);
    Ok(state)
}

/// A 2×2 Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2 {
    entries: [[Complex64; 2]; 2],
}

impl DensityMatrix2 {
    pub fn new(entries: [[Complex64; 2]; 2]) -> Result<Self> {
        if !entries.iter().flatten().all(|z| is_finite(*z)) {
            return Err(Error::NotADensityMatrix("non-finite entry"));
        }
        if (entries[0][1] - entries[1][0].conj()).norm() > NORM_TOLERANCE
            || entries[0][0].im.abs() > NORM_TOLERANCE
            || entries[1][1].im.abs() > NORM_TOLERANCE
        {
            return Err(Error::NotADensityMatrix("not Hermitian"));
        }
        let rho = DensityMatrix2 { entries };
        if (rho.trace() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotADensityMatrix("trace differs from 1"));
        }
        if rho.eigenvalues()[1] < -NORM_TOLERANCE {
            return Err(Error::NotADensityMatrix("negative eigenvalue"));
        }
        Ok(rho)
    }

    pub fn entries(&self) -> [[Complex64; 2]; 2] {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0].re + self.entries[1][1].re
    }

    pub fn determinant(&self) -> f64 {
        self.entries[0][0].re * self.entries[1][1].re - self.entries[0][1].norm_sqr()
    }

    /// Closed-form eigenvalues, largest first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.trace();
        let det = self.determinant();
        let disc = libm::sqrt((tr * tr - 4.0 * det).max(0.0));
        let hi = 0.5 * (tr + disc);
        // det / hi avoids cancellation for nearly pure states
        let lo = if hi > 0.0 {
            det / hi
        } else {
            0.5 * (tr - disc)
        };
        [hi, lo]
    }

    pub fn entropy(&self) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| -l * libm::log2(l))
            .sum();
        s.clamp(0.0, 1.0)
    }
}

/// `−Tr[ρ log₂ ρ]`.
pub fn von_neumann_entropy(rho: &DensityMatrix2) -> f64 {
    rho.entropy()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SurfacePoint {
    pub re_r: f64,
    pub im_r: f64,
    pub entropy: f64,
}

pub const DEFAULT_SURFACE_RANGE: (f64, f64) = (-2.0, 2.0);
pub const DEFAULT_SURFACE_GRID: usize = 81;

fn grid_axis(name: &'static str, range: (f64, f64), n: usize) -> Result<impl Iterator<Item = f64>> {
    let (lo, hi) = range;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::InvalidParameter {
            name,
            reason: alloc::format!("range [{lo}, {hi}] is empty or not finite"),
        });
    }
    let span = hi - lo;
    let last = (n - 1) as f64;
    Ok((0..n).map(move |i| lo + span * i as f64 / last))
}

/// Entropy of the strangeness-basis post-selected state over a grid of `R`.
///
/// Rows are emitted with `Re R` as the outer (slow) index.
pub fn entropy_surface(
    re_range: (f64, f64),
    im_range: (f64, f64),
    grid_n: usize,
) -> Result<Vec<SurfacePoint>> {
    if grid_n < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_n",
            reason: alloc::format!("must be >= 2, got {grid_n}"),
        });
    }
    let ims: Vec<f64> = grid_axis("im_range", im_range, grid_n)?.collect();
    let mut out = Vec::with_capacity(grid_n * grid_n);
    for re in grid_axis("re_range", re_range, grid_n)? {
        for &im in &ims {
            let state = build_phi_strangeness_basis(Complex64::new(re, im))?;
            out.push(SurfacePoint {
                re_r: re,
                im_r: im,
                entropy: state.entropy(Side::Left),
            });
        }
    }
    Ok(out)
}
