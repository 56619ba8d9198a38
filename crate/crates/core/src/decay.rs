//! Decay-time bookkeeping over the lifetime-tagging window.
//!
//! Pairs are produced in the post-selected state at [`PAIR_ORIGIN`] = 10 τ_S.
//! A decay into a `KS_TAG` channel inside `[t0, t1)` tags a K_S; anything else
//! is read as "not a K_S".
//!
//! # Contamination ratio
//!
//! Every pair alive at 10 τ_S carries one K_S and one K_L, so both
//! populations start with weight one. For a bin `[a, b)` the K_S and K_L
//! decay masses are
//!
//! ```text
//! D_X(a, b) = e^{−Γ_X (a − 10)} − e^{−Γ_X (b − 10)}
//! ```
//!
//! and the ratio reported per bin is
//!
//! ```text
//! D_L(a, b) · BR(K_L → ππ) / (D_S(a, b) · BR(K_S → ππ))
//! ```
//!
//! Interference between the K_S and K_L ππ amplitudes is neglected; the K_S
//! amplitude is below 10⁻⁴ of its initial value in the region of interest.

use alloc::vec::Vec;

use crate::constants::{Parent, PhysicalConstants};
use crate::{Error, Result};

/// Production time of the post-selected pairs, τ_S units.
pub const PAIR_ORIGIN: f64 = 10.0;

/// Upper end of the grid searched by [`max_window_end`].
pub const WINDOW_SEARCH_LIMIT: f64 = 30.0;

const WINDOW_SEARCH_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaggingWindow {
    t0: f64,
    t1: f64,
}

impl TaggingWindow {
    /// Requires `0 <= t0 <= t1`; a zero-length window is allowed.
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t0 >= 0.0) || !(t1 >= t0) || !t1.is_finite() {
            return Err(Error::InvalidWindow { t0, t1 });
        }
        Ok(TaggingWindow { t0, t1 })
    }

    /// `[10, 21)`.
    pub fn standard() -> Self {
        TaggingWindow { t0: 10.0, t1: 21.0 }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn is_empty(&self) -> bool {
        self.t1 == self.t0
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t < self.t1
    }
}

/// Probability that a kaon alive at `t0` is still alive at `t1`.
pub fn survival_fraction(w: &TaggingWindow, parent: Parent, c: &PhysicalConstants) -> f64 {
    libm::exp(-c.gamma(parent) * w.len())
}

/// Fraction of K_S present at `t0` that decay inside the window into
/// channels that cannot tag a K_S.
pub fn untaggable_fraction(w: &TaggingWindow, c: &PhysicalConstants) -> f64 {
    -libm::expm1(-c.gamma_s * w.len()) * c.non_tagging_ratio(Parent::KS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MisidBudget {
    /// K_S still alive at `t1`.
    pub undecayed_fraction: f64,
    /// K_S decayed in the window into non-tagging channels.
    pub untaggable_fraction: f64,
    pub m_s: f64,
    /// K_L decayed in the window into ππ.
    pub m_l: f64,
}

pub fn misid_budget(w: &TaggingWindow, c: &PhysicalConstants) -> MisidBudget {
    let undecayed = survival_fraction(w, Parent::KS, c);
    let untaggable = untaggable_fraction(w, c);
    let m_l = -libm::expm1(-c.gamma_l * w.len()) * c.two_pion_ratio(Parent::KL);
    MisidBudget {
        undecayed_fraction: undecayed,
        untaggable_fraction: untaggable,
        m_s: undecayed + untaggable,
        m_l,
    }
}

/// Decay probability in `[a, b)` for a kaon alive at [`PAIR_ORIGIN`].
pub(crate) fn decay_mass(a: f64, b: f64, gamma: f64) -> f64 {
    // e^{-g(a-10)} (1 - e^{-g(b-a)})
    -libm::exp(-gamma * (a - PAIR_ORIGIN)) * libm::expm1(-gamma * (b - a))
}

/// K_L → ππ over K_S → ππ decays in `[a, b)`.
pub fn contamination_ratio(a: f64, b: f64, c: &PhysicalConstants) -> f64 {
    let kl = decay_mass(a, b, c.gamma_l) * c.two_pion_ratio(Parent::KL);
    let ks = decay_mass(a, b, c.gamma_s) * c.two_pion_ratio(Parent::KS);
    kl / ks
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HistogramBin {
    pub bin_start: f64,
    pub bin_end: f64,
    pub ratio: f64,
}

/// Contamination ratio over consecutive bins covering `[t_start, t_end)`.
/// The last bin is truncated at `t_end` when the width does not divide the
/// range.
pub fn contamination_histogram(
    t_start: f64,
    t_end: f64,
    bin_width: f64,
    c: &PhysicalConstants,
) -> Result<Vec<HistogramBin>> {
    if !(t_start >= PAIR_ORIGIN) {
        return Err(Error::BinBeforeOrigin(t_start));
    }
    if !(bin_width > 0.0) || !(t_end > t_start) || !t_end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "bins",
            reason: alloc::format!(
                "need t_start < t_end and width > 0, got {t_start}:{t_end}:{bin_width}"
            ),
        });
    }
    let n = libm::ceil((t_end - t_start) / bin_width - 1e-9) as usize;
    Ok((0..n)
        .map(|i| {
            let a = t_start + i as f64 * bin_width;
            let b = (t_start + (i + 1) as f64 * bin_width).min(t_end);
            HistogramBin {
                bin_start: a,
                bin_end: b,
                ratio: contamination_ratio(a, b, c),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WindowEnd {
    pub t1: f64,
    /// The cap was never reached before [`WINDOW_SEARCH_LIMIT`].
    pub hit_search_limit: bool,
}

/// Latest window end on a 0.1 τ_S grid such that the unit-width bin opening
/// at it, `[t1, t1 + 1)`, has a contamination ratio below `cap`.
pub fn max_window_end(cap: f64, c: &PhysicalConstants) -> Result<WindowEnd> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidParameter {
            name: "contamination_cap",
            reason: alloc::format!("must be positive and finite, got {cap}"),
        });
    }
    let steps = libm::round((WINDOW_SEARCH_LIMIT - PAIR_ORIGIN) / WINDOW_SEARCH_STEP) as usize;
    let mut best = None;
    for i in 0..=steps {
        let t = PAIR_ORIGIN + i as f64 * WINDOW_SEARCH_STEP;
        if contamination_ratio(t, t + 1.0, c) < cap {
            best = Some(t);
        } else {
            break;
        }
    }
    match best {
        None => Err(Error::CapUnreachable { cap }),
        Some(t1) => Ok(WindowEnd {
            t1,
            hit_search_limit: t1 >= WINDOW_SEARCH_LIMIT - 1e-9,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pdg() -> PhysicalConstants {
        PhysicalConstants::pdg()
    }

    #[test]
    fn window_validation() {
        assert!(TaggingWindow::new(10.0, 21.0).is_ok());
        assert!(TaggingWindow::new(10.0, 10.0).is_ok());
        assert!(TaggingWindow::new(12.0, 10.0).is_err());
        assert!(TaggingWindow::new(-1.0, 10.0).is_err());
        assert!(TaggingWindow::new(f64::NAN, 10.0).is_err());
    }

    #[test]
    fn survival_in_standard_window() {
        let c = pdg();
        let w = TaggingWindow::standard();
        assert!((survival_fraction(&w, Parent::KS, &c) - libm::exp(-11.0)).abs() < 1e-18);
        let kl = survival_fraction(&w, Parent::KL, &c);
        assert!((kl - libm::exp(-11.0 / c.tau_l)).abs() < 1e-15);
        assert!((kl - 0.981).abs() < 1e-3);
    }

    #[test]
    fn zero_length_window() {
        let c = pdg();
        let w = TaggingWindow::new(10.0, 10.0).unwrap();
        assert_eq!(survival_fraction(&w, Parent::KS, &c), 1.0);
        assert_eq!(survival_fraction(&w, Parent::KL, &c), 1.0);
        assert_eq!(untaggable_fraction(&w, &c), 0.0);
        let b = misid_budget(&w, &c);
        assert_eq!(b.m_s, 1.0);
        assert_eq!(b.m_l, 0.0);
    }

    #[test]
    fn all_tagging_table_has_no_untaggable_fraction() {
        let mut input = crate::constants::pdg_input();
        for ch in input.branching_table.iter_mut() {
            if ch.parent == Parent::KS {
                ch.tag_class = crate::TagClass::KsTag;
            }
        }
        let c = PhysicalConstants::new(input).unwrap();
        assert_eq!(untaggable_fraction(&TaggingWindow::standard(), &c), 0.0);
    }

    #[test]
    fn budget_components_add_up() {
        let c = pdg();
        for t1 in [11.0, 15.0, 19.0, 21.0, 25.0] {
            let b = misid_budget(&TaggingWindow::new(10.0, t1).unwrap(), &c);
            assert!((b.m_s - b.undecayed_fraction - b.untaggable_fraction).abs() < 1e-12);
            for v in [b.undecayed_fraction, b.untaggable_fraction, b.m_s, b.m_l] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn budget_trends_in_window_end() {
        let c = pdg();
        let mut prev = misid_budget(&TaggingWindow::new(10.0, 11.0).unwrap(), &c);
        for k in 12..30 {
            let b = misid_budget(&TaggingWindow::new(10.0, k as f64).unwrap(), &c);
            assert!(b.undecayed_fraction < prev.undecayed_fraction);
            assert!(b.untaggable_fraction > prev.untaggable_fraction);
            assert!(b.m_l > prev.m_l);
            prev = b;
        }
    }

    #[test]
    fn histogram_errors() {
        let c = pdg();
        assert_eq!(
            contamination_histogram(9.0, 12.0, 1.0, &c),
            Err(Error::BinBeforeOrigin(9.0))
        );
        assert!(contamination_histogram(18.0, 23.0, 0.0, &c).is_err());
        assert!(contamination_histogram(18.0, 18.0, 1.0, &c).is_err());
    }

    #[test]
    fn histogram_bin_counts() {
        let c = pdg();
        assert_eq!(
            contamination_histogram(18.0, 23.0, 1.0, &c).unwrap().len(),
            5
        );
        assert_eq!(
            contamination_histogram(18.0, 23.0, 0.5, &c).unwrap().len(),
            10
        );
        let odd = contamination_histogram(18.0, 20.5, 1.0, &c).unwrap();
        assert_eq!(odd.len(), 3);
        assert_eq!(odd[2].bin_end, 20.5);
    }

    #[test]
    fn window_end_for_half_contamination() {
        let c = pdg();
        let w = max_window_end(0.5, &c).unwrap();
        assert!((w.t1 - 21.0).abs() <= 1.0, "t1 = {}", w.t1);
        assert!(!w.hit_search_limit);
        let w = max_window_end(1.35, &c).unwrap();
        assert!((21.5..=23.0).contains(&w.t1), "t1 = {}", w.t1);
    }

    #[test]
    fn window_end_degenerate_caps() {
        let c = pdg();
        let w = max_window_end(1e6, &c).unwrap();
        assert!(w.hit_search_limit);
        assert!((w.t1 - WINDOW_SEARCH_LIMIT).abs() < 1e-9);
        assert_eq!(
            max_window_end(1e-9, &c),
            Err(Error::CapUnreachable { cap: 1e-9 })
        );
        assert!(max_window_end(0.0, &c).is_err());
        assert!(max_window_end(f64::INFINITY, &c).is_err());
    }
}
