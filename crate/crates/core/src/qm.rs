//! Quantum-mechanical joint detection probabilities, the measured
//! probabilities with tagging errors, the CH-like margin and the efficiency
//! thresholds.

use core::f64::consts::FRAC_1_SQRT_2;
use core::fmt;

use num_complex::Complex64;

use crate::decay::TaggingWindow;
use crate::kaon_state::Basis;
use crate::pair::{build_phi_strangeness_basis, TwoKaonState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    K0,
    K0Bar,
    KS,
    KL,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::K0 => "K0",
            Outcome::K0Bar => "K0BAR",
            Outcome::KS => "KS",
            Outcome::KL => "KL",
        }
    }

    /// Strangeness outcomes come from a strangeness measurement; KS/KL from
    /// lifetime tagging.
    pub fn is_strangeness(self) -> bool {
        matches!(self, Outcome::K0 | Outcome::K0Bar)
    }

    /// The projector's ket in the (K⁰, K̄⁰) basis.
    pub(crate) fn strangeness_ket(self) -> [Complex64; 2] {
        let h = FRAC_1_SQRT_2;
        let (a, b) = match self {
            Outcome::K0 => (1.0, 0.0),
            Outcome::K0Bar => (0.0, 1.0),
            Outcome::KS => (h, h),
            Outcome::KL => (h, -h),
        };
        [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identification efficiencies and tagging error rates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DetectionModel {
    /// K⁰ identification efficiency.
    pub eta: f64,
    /// K̄⁰ identification efficiency.
    pub eta_prime: f64,
    /// Probability that a K_S is not tagged as one.
    pub m_s: f64,
    /// Probability that a K_L is tagged as a K_S.
    pub m_l: f64,
    pub window: TaggingWindow,
}

impl DetectionModel {
    pub fn new(
        eta: f64,
        eta_prime: f64,
        m_s: f64,
        m_l: f64,
        window: TaggingWindow,
    ) -> Result<Self> {
        for (name, v) in [
            ("eta", eta),
            ("eta_prime", eta_prime),
            ("m_s", m_s),
            ("m_l", m_l),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("must lie in [0, 1], got {v}"),
                });
            }
        }
        if window.is_empty() {
            return Err(Error::InvalidWindow {
                t0: window.t0(),
                t1: window.t1(),
            });
        }
        Ok(DetectionModel {
            eta,
            eta_prime,
            m_s,
            m_l,
            window,
        })
    }

    /// Perfect identification and tagging over the standard window.
    pub fn ideal() -> Self {
        DetectionModel {
            eta: 1.0,
            eta_prime: 1.0,
            m_s: 0.0,
            m_l: 0.0,
            window: TaggingWindow::standard(),
        }
    }

    /// The efficiency factor applied to `outcome` at the ideal-tagging stage.
    pub fn efficiency(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::K0 => self.eta,
            Outcome::K0Bar => self.eta_prime,
            Outcome::KS | Outcome::KL => 1.0,
        }
    }
}

/// The four joint probabilities that enter the Hardy-type argument.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilitySet {
    pub p_k0_k0bar: f64,
    pub p_k0_kl: f64,
    pub p_kl_k0bar: f64,
    pub p_ks_ks: f64,
}

impl ProbabilitySet {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_k0_k0bar, self.p_k0_kl, self.p_kl_k0bar, self.p_ks_ks]
    }
}

/// The outcome pairs behind each [`ProbabilitySet`] field, in field order.
pub const HARDY_PATTERNS: [(Outcome, Outcome); 4] = [
    (Outcome::K0, Outcome::K0Bar),
    (Outcome::K0, Outcome::KL),
    (Outcome::KL, Outcome::K0Bar),
    (Outcome::KS, Outcome::KS),
];

/// Born probability of `(left, right)` scaled by the identification
/// efficiencies of strangeness outcomes. KS/KL outcomes carry no factor.
pub fn joint_probability(
    s: &TwoKaonState,
    left: Outcome,
    right: Outcome,
    d: &DetectionModel,
) -> f64 {
    born_probability(s, left, right) * d.efficiency(left) * d.efficiency(right)
}

pub(crate) fn born_probability(s: &TwoKaonState, left: Outcome, right: Outcome) -> f64 {
    let s = s.in_basis(Basis::Strangeness);
    let u = left.strangeness_ket();
    let v = right.strangeness_ket();
    let mut amp = Complex64::new(0.0, 0.0);
    for (l, ul) in u.iter().enumerate() {
        for (r, vr) in v.iter().enumerate() {
            amp += ul.conj() * vr.conj() * s.amplitude(l, r);
        }
    }
    amp.norm_sqr()
}

/// Joint probabilities of the four patterns for the post-selected state at `r`.
pub fn qm_probability_set(r: Complex64, d: &DetectionModel) -> Result<ProbabilitySet> {
    let state = build_phi_strangeness_basis(r)?;
    let [a, b, c, e] = HARDY_PATTERNS.map(|(l, rr)| joint_probability(&state, l, rr, d));
    Ok(ProbabilitySet {
        p_k0_k0bar: a,
        p_k0_kl: b,
        p_kl_k0bar: c,
        p_ks_ks: e,
    })
}

/// Probabilities at `R = −1` once K_S and K_L tagging errors are included:
/// `(ηη′/12, η m_S/6, η′ m_S/6, (2/3) m_L + (1/3) m_L²)`.
pub fn measured_probabilities(d: &DetectionModel) -> ProbabilitySet {
    ProbabilitySet {
        p_k0_k0bar: d.eta * d.eta_prime / 12.0,
        p_k0_kl: d.eta * d.m_s / 6.0,
        p_kl_k0bar: d.eta_prime * d.m_s / 6.0,
        p_ks_ks: 2.0 / 3.0 * d.m_l + d.m_l * d.m_l / 3.0,
    }
}

/// `P(K⁰,K̄⁰) − [P(K⁰,K_L) + P(K_L,K̄⁰) + P(K_S,K_S)]`. Positive means the
/// local-realist bound is violated.
pub fn ch_margin(p: &ProbabilitySet) -> f64 {
    p.p_k0_k0bar - (p.p_k0_kl + p.p_kl_k0bar + p.p_ks_ks)
}

/// Smallest common efficiency with `η²/12 = m_S`, i.e. `√(12 m_S)`.
/// A falsifying experiment has to exceed it.
pub fn threshold_falsification(m_s_effective: f64) -> Result<f64> {
    if !(m_s_effective > 0.0) || !m_s_effective.is_finite() {
        return Err(Error::InvalidParameter {
            name: "m_s_effective",
            reason: alloc::format!("must be positive, got {m_s_effective}"),
        });
    }
    Ok(libm::sqrt(12.0 * m_s_effective))
}

/// Common efficiency at which the measured probabilities reach `ch_margin = 0`.
///
/// With `η = η′`: `η²/12 = η m_S/3 + (2/3) m_L + (1/3) m_L²`, whose positive
/// root is `2 m_S + √(4 m_S² + 8 m_L + 4 m_L²)`.
pub fn threshold_ch(m_s: f64, m_l: f64) -> Result<f64> {
    for (name, v) in [("m_s", m_s), ("m_l", m_l)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: alloc::format!("must be >= 0, got {v}"),
            });
        }
    }
    Ok(2.0 * m_s + libm::sqrt(4.0 * m_s * m_s + 8.0 * m_l + 4.0 * m_l * m_l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::build_singlet;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn det(eta: f64, eta_prime: f64, m_s: f64, m_l: f64) -> DetectionModel {
        DetectionModel::new(eta, eta_prime, m_s, m_l, TaggingWindow::standard()).unwrap()
    }

    #[test]
    fn hardy_pattern_at_minus_one() {
        let d = DetectionModel::ideal();
        let s = build_phi_strangeness_basis(c(-1.0, 0.0)).unwrap();
        assert!(
            (joint_probability(&s, Outcome::K0, Outcome::K0Bar, &d) - 1.0 / 12.0).abs() < 1e-15
        );
        assert!(joint_probability(&s, Outcome::K0, Outcome::KL, &d) < 1e-12);
        assert!(joint_probability(&s, Outcome::KL, Outcome::K0Bar, &d) < 1e-12);
        assert!(joint_probability(&s, Outcome::KS, Outcome::KS, &d) < 1e-12);
    }

    #[test]
    fn efficiencies_scale_strangeness_outcomes_only() {
        let d = det(0.3, 0.7, 0.0, 0.0);
        let s = build_phi_strangeness_basis(c(-0.4, 0.9)).unwrap();
        let ideal = DetectionModel::ideal();
        let p = |l, r, d: &DetectionModel| joint_probability(&s, l, r, d);
        assert!(
            (p(Outcome::K0, Outcome::K0Bar, &d) - 0.21 * p(Outcome::K0, Outcome::K0Bar, &ideal))
                .abs()
                < 1e-15
        );
        assert!(
            (p(Outcome::K0, Outcome::KS, &d) - 0.3 * p(Outcome::K0, Outcome::KS, &ideal)).abs()
                < 1e-15
        );
        assert_eq!(
            p(Outcome::KS, Outcome::KL, &d),
            p(Outcome::KS, Outcome::KL, &ideal)
        );
    }

    #[test]
    fn probabilities_sum_to_one_per_setting() {
        let s = build_phi_strangeness_basis(c(0.7, -1.3)).unwrap();
        let d = DetectionModel::ideal();
        for (a, b) in [(Outcome::K0, Outcome::K0Bar), (Outcome::KS, Outcome::KL)] {
            for (x, y) in [(Outcome::K0, Outcome::K0Bar), (Outcome::KS, Outcome::KL)] {
                let total: f64 = [a, b]
                    .iter()
                    .flat_map(|&l| [x, y].map(move |r| (l, r)))
                    .map(|(l, r)| joint_probability(&s, l, r, &d))
                    .sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probability_set_values() {
        let p = qm_probability_set(c(-1.0, 0.0), &DetectionModel::ideal()).unwrap();
        assert!((p.p_k0_k0bar - 1.0 / 12.0).abs() < 1e-15);
        assert!(p.p_k0_kl < 1e-12 && p.p_kl_k0bar < 1e-12 && p.p_ks_ks < 1e-12);

        let singlet = qm_probability_set(c(0.0, 0.0), &DetectionModel::ideal()).unwrap();
        assert!(singlet.p_ks_ks < 1e-15);

        let p = qm_probability_set(c(-1.0, 0.0), &det(0.09, 0.09, 0.0, 0.0)).unwrap();
        assert!((p.p_k0_k0bar - 6.75e-4).abs() < 1e-15);
        assert!(p.p_k0_k0bar < 7.3e-4);
    }

    #[test]
    fn zeros_are_not_generic() {
        let d = DetectionModel::ideal();
        for r in [c(-0.5, 0.0), c(-1.0, 0.2), c(1.0, 0.0), c(-2.0, 0.0)] {
            let p = qm_probability_set(r, &d).unwrap();
            assert!(p.p_k0_kl + p.p_kl_k0bar + p.p_ks_ks > 1e-4, "R = {r}");
        }
    }

    #[test]
    fn joint_probability_is_continuous_in_r() {
        let d = DetectionModel::ideal();
        let mut prev = qm_probability_set(c(-1.5, 0.0), &d).unwrap();
        let steps = 1000;
        for i in 1..=steps {
            let re = -1.5 + i as f64 / steps as f64;
            let p = qm_probability_set(c(re, 0.0), &d).unwrap();
            for (a, b) in p.as_array().iter().zip(prev.as_array()) {
                assert!((a - b).abs() < 5e-3);
            }
            prev = p;
        }
    }

    #[test]
    fn singlet_is_perfectly_anticorrelated() {
        let s = build_singlet();
        let d = DetectionModel::ideal();
        assert!((joint_probability(&s, Outcome::K0, Outcome::K0Bar, &d) - 0.5).abs() < 1e-15);
        assert!(joint_probability(&s, Outcome::K0, Outcome::K0, &d) < 1e-15);
        assert!(joint_probability(&s, Outcome::KS, Outcome::KS, &d) < 1e-15);
    }

    #[test]
    fn measured_probability_cases() {
        assert_eq!(
            measured_probabilities(&DetectionModel::ideal()),
            ProbabilitySet {
                p_k0_k0bar: 1.0 / 12.0,
                ..Default::default()
            }
        );
        let p = measured_probabilities(&det(0.023, 0.023, 7.3e-4, 5.7e-5));
        let expected = 2.0 / 3.0 * 5.7e-5 + 5.7e-5 * 5.7e-5 / 3.0;
        assert!((p.p_ks_ks - expected).abs() < 1e-18);
        assert!((p.p_ks_ks - 3.8e-5).abs() < 0.05e-5);

        let dead = measured_probabilities(&det(1.0, 0.0, 7.3e-4, 5.7e-5));
        assert_eq!(dead.p_k0_k0bar, 0.0);
        assert_eq!(dead.p_kl_k0bar, 0.0);
    }

    #[test]
    fn measured_probabilities_are_monotone() {
        let base = [0.05, 0.07, 1e-3, 1e-4];
        let p0 = measured_probabilities(&det(base[0], base[1], base[2], base[3])).as_array();
        for k in 0..4 {
            let mut v = base;
            v[k] *= 1.5;
            let p = measured_probabilities(&det(v[0], v[1], v[2], v[3])).as_array();
            for (a, b) in p.iter().zip(p0.iter()) {
                assert!(a >= b);
            }
        }
    }

    #[test]
    fn margin_cases() {
        let ideal = ProbabilitySet {
            p_k0_k0bar: 1.0 / 12.0,
            ..Default::default()
        };
        assert_eq!(ch_margin(&ideal), 1.0 / 12.0);
        assert_eq!(ch_margin(&ProbabilitySet::default()), 0.0);

        let eta = threshold_ch(7.3e-4, 5.7e-5).unwrap();
        let at = measured_probabilities(&det(eta, eta, 7.3e-4, 5.7e-5));
        assert!(ch_margin(&at).abs() < 1e-15);
        let below = measured_probabilities(&det(0.9 * eta, 0.9 * eta, 7.3e-4, 5.7e-5));
        assert!(ch_margin(&below) < 0.0);
        let above = measured_probabilities(&det(1.1 * eta, 1.1 * eta, 7.3e-4, 5.7e-5));
        assert!(ch_margin(&above) > 0.0);
    }

    #[test]
    fn falsification_threshold() {
        let eta = threshold_falsification(7.3e-4).unwrap();
        assert!((eta - 0.0936).abs() < 1e-3);
        assert!((threshold_falsification(1.0 / 12.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((threshold_falsification(3e-4).unwrap() - 0.060).abs() < 1e-15);
        assert!(threshold_falsification(0.0).is_err());
        assert!(threshold_falsification(-1.0).is_err());
    }

    #[test]
    fn ch_threshold() {
        let eta = threshold_ch(7.3e-4, 5.7e-5).unwrap();
        assert!((eta - 2.3e-2).abs() < 0.05 * 2.3e-2);
        assert_eq!(threshold_ch(0.0, 0.0).unwrap(), 0.0);
        let ml_only = threshold_ch(0.0, 5.7e-5).unwrap();
        assert!((ml_only - (8.0 * 5.7e-5 + 4.0 * 5.7e-5 * 5.7e-5f64).sqrt()).abs() < 1e-15);
        assert!((ml_only - 2.14e-2).abs() < 0.01e-2);
        assert!(threshold_ch(-1e-3, 0.0).is_err());
    }

    #[test]
    fn ch_threshold_is_monotone() {
        for &(ms, ml) in &[(7.3e-4, 5.7e-5), (1e-3, 1e-6), (1e-5, 1e-3), (0.1, 0.2)] {
            let full = threshold_ch(ms, ml).unwrap();
            assert!(full >= threshold_ch(0.0, ml).unwrap());
            assert!(full >= threshold_ch(ms, 0.0).unwrap());
        }
    }

    #[test]
    fn detection_model_validation() {
        let w = TaggingWindow::standard();
        assert!(DetectionModel::new(1.2, 0.5, 0.0, 0.0, w).is_err());
        assert!(DetectionModel::new(0.5, 0.5, -0.1, 0.0, w).is_err());
        let empty = TaggingWindow::new(10.0, 10.0).unwrap();
        assert!(DetectionModel::new(0.5, 0.5, 0.0, 0.0, empty).is_err());
    }
}
