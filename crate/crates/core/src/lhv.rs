//! Local hidden-variable ensembles.
//!
//! An ensemble is a finite list of weighted deterministic assignments. Each
//! assignment fixes, separately for the left and right kaon, the result of a
//! strangeness measurement, the mass identity, and the decay channel and
//! time. Neither side's entries refer to the other side's measurement, which
//! is what makes the model local.
//!
//! A lifetime measurement reads only the decay: a decay into a `KS_TAG`
//! channel inside the tagging window gives `KS`, anything else gives `KL`.
//! The mass identity is the hidden "true" label and is only used by the
//! Hardy-type bookkeeping in [`hardy_constraint_check`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::constants::{Parent, PhysicalConstants, TagClass};
use crate::decay::TaggingWindow;
use crate::qm::{ch_margin, measured_probabilities, threshold_ch, DetectionModel, Outcome};
use crate::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Strangeness {
    K0,
    K0Bar,
}

impl Strangeness {
    pub fn outcome(self) -> Outcome {
        match self {
            Strangeness::K0 => Outcome::K0,
            Strangeness::K0Bar => Outcome::K0Bar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decay {
    pub channel: String,
    /// τ_S units since production.
    pub time: f64,
}

impl Decay {
    pub fn new(channel: impl Into<String>, time: f64) -> Self {
        Decay {
            channel: channel.into(),
            time,
        }
    }
}

/// One kaon's hidden record.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KaonAssignment {
    /// Strangeness registered if measured; `None` means not identified.
    pub strangeness: Option<Strangeness>,
    pub mass: Parent,
    pub decay: Decay,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HiddenAssignment {
    pub left: KaonAssignment,
    pub right: KaonAssignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenVariableEnsemble {
    entries: Vec<(HiddenAssignment, f64)>,
    // decay tag class per entry, (left, right)
    classes: Vec<[TagClass; 2]>,
    origin: f64,
    efficiency_absorbed: bool,
}

impl HiddenVariableEnsemble {
    /// Validates weights (non-negative, summing to 1), channels (listed for
    /// the kaon's mass identity) and decay times (finite, not before
    /// `origin`).
    ///
    /// With `efficiency_absorbed` the strangeness responses already include
    /// the identification efficiency; otherwise η and η′ thin them.
    pub fn new(
        entries: Vec<(HiddenAssignment, f64)>,
        c: &PhysicalConstants,
        origin: f64,
        efficiency_absorbed: bool,
    ) -> Result<Self> {
        let mut total = 0.0;
        let mut classes = Vec::with_capacity(entries.len());
        for (i, (a, w)) in entries.iter().enumerate() {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidEnsemble(alloc::format!(
                    "entry {i} has weight {w}"
                )));
            }
            total += w;
            let mut cls = [TagClass::Untaggable; 2];
            for (slot, k) in cls.iter_mut().zip([&a.left, &a.right]) {
                let ch = c.channel(k.mass, &k.decay.channel).ok_or_else(|| {
                    Error::InvalidEnsemble(alloc::format!(
                        "entry {i}: {} has no channel `{}`",
                        k.mass,
                        k.decay.channel
                    ))
                })?;
                if !k.decay.time.is_finite() || k.decay.time < origin {
                    return Err(Error::InvalidEnsemble(alloc::format!(
                        "entry {i}: decay time {} before pair origin {origin}",
                        k.decay.time
                    )));
                }
                *slot = ch.tag_class;
            }
            classes.push(cls);
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidEnsemble(alloc::format!(
                "weights sum to {total}"
            )));
        }
        Ok(HiddenVariableEnsemble {
            entries,
            classes,
            origin,
            efficiency_absorbed,
        })
    }

    pub fn entries(&self) -> &[(HiddenAssignment, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn efficiency_absorbed(&self) -> bool {
        self.efficiency_absorbed
    }

    pub(crate) fn classes(&self, i: usize) -> [TagClass; 2] {
        self.classes[i]
    }
}

/// The lifetime tag produced by a decay.
pub fn lifetime_tag(class: TagClass, time: f64, window: &TaggingWindow) -> Outcome {
    if class == TagClass::KsTag && window.contains(time) {
        Outcome::KS
    } else {
        Outcome::KL
    }
}

fn side_response(
    k: &KaonAssignment,
    class: TagClass,
    outcome: Outcome,
    d: &DetectionModel,
    absorbed: bool,
) -> f64 {
    if outcome.is_strangeness() {
        match k.strangeness {
            Some(s) if s.outcome() == outcome => {
                if absorbed {
                    1.0
                } else {
                    d.efficiency(outcome)
                }
            }
            _ => 0.0,
        }
    } else if lifetime_tag(class, k.decay.time, &d.window) == outcome {
        1.0
    } else {
        0.0
    }
}

/// Observable probability of `(left, right)`.
pub fn lhv_joint_probability(
    e: &HiddenVariableEnsemble,
    left: Outcome,
    right: Outcome,
    d: &DetectionModel,
) -> f64 {
    e.entries
        .iter()
        .zip(&e.classes)
        .map(|((a, w), cls)| {
            w * side_response(&a.left, cls[0], left, d, e.efficiency_absorbed)
                * side_response(&a.right, cls[1], right, d, e.efficiency_absorbed)
        })
        .sum()
}

/// Weight of assignments whose *true* mass identities are K_S on both sides
/// and which both decay inside the window into K_S-tagging channels.
pub fn true_ks_ks_in_window(e: &HiddenVariableEnsemble, window: &TaggingWindow) -> f64 {
    e.entries
        .iter()
        .zip(&e.classes)
        .filter(|((a, _), cls)| {
            a.left.mass == Parent::KS
                && a.right.mass == Parent::KS
                && lifetime_tag(cls[0], a.left.decay.time, window) == Outcome::KS
                && lifetime_tag(cls[1], a.right.decay.time, window) == Outcome::KS
        })
        .map(|((_, w), _)| w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HardyReport {
    /// Weight of assignments that register K⁰ on the left and K̄⁰ on the right.
    pub a_set_mass: f64,
    /// Σ ρ(a) p_l(K_S|a) p_r(K_S|a), mass identities only.
    pub unrestricted_ks_ks: f64,
    /// The same restricted to in-window K_S-tagging decays.
    pub window_ks_ks: f64,
    /// Tag-level P(K_S, K_S) as an experiment would see it.
    pub observable_ks_ks: f64,
    /// Mass-identity P(K⁰, K_L) and P(K_L, K̄⁰) both vanish.
    pub zeros_reproduced: bool,
    /// `zeros_reproduced ⇒ unrestricted_ks_ks ≥ a_set_mass`.
    pub bound_holds: bool,
    /// Non-empty A set while no true K_S pair decays identifiably.
    pub escape_exhibited: bool,
}

/// Checks the Hardy-type bound `P(K_S,K_S) ≥ ∫_{A} ρ` for an ensemble.
///
/// If the mass identities reproduce `P(K⁰,K_L) = P(K_L,K̄⁰) = 0`, every
/// assignment in the A set carries K_S on both sides and the bound holds.
/// Once decays are restricted to the tagging window the same weight can
/// vanish from `P(K_S,K_S)`.
pub fn hardy_constraint_check(e: &HiddenVariableEnsemble, d: &DetectionModel) -> HardyReport {
    let mut a_set = 0.0;
    let mut unrestricted = 0.0;
    let mut k0_kl = 0.0;
    let mut kl_k0bar = 0.0;
    for (a, w) in &e.entries {
        let left_k0 = a.left.strangeness == Some(Strangeness::K0);
        let right_k0bar = a.right.strangeness == Some(Strangeness::K0Bar);
        if left_k0 && right_k0bar {
            a_set += w;
        }
        if a.left.mass == Parent::KS && a.right.mass == Parent::KS {
            unrestricted += w;
        }
        if left_k0 && a.right.mass == Parent::KL {
            k0_kl += w;
        }
        if a.left.mass == Parent::KL && right_k0bar {
            kl_k0bar += w;
        }
    }
    let window = true_ks_ks_in_window(e, &d.window);
    let zeros = k0_kl <= WEIGHT_TOLERANCE && kl_k0bar <= WEIGHT_TOLERANCE;
    HardyReport {
        a_set_mass: a_set,
        unrestricted_ks_ks: unrestricted,
        window_ks_ks: window,
        observable_ks_ks: lhv_joint_probability(e, Outcome::KS, Outcome::KS, d),
        zeros_reproduced: zeros,
        bound_holds: !zeros || unrestricted + WEIGHT_TOLERANCE >= a_set,
        escape_exhibited: a_set > 0.0 && window <= WEIGHT_TOLERANCE,
    }
}

/// How the K_S pairs behind the registered (K⁰, K̄⁰) events avoid tagging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EscapeRoute {
    /// Decay into ππ this long after the window closes.
    LateDecay { delay: f64 },
    /// Decay inside the window into a K_L-like channel.
    KlLikeChannel,
}

impl Default for EscapeRoute {
    fn default() -> Self {
        EscapeRoute::LateDecay { delay: 1.0 }
    }
}

/// [`construct_evading_lhv_with`] using [`EscapeRoute::default`].
pub fn construct_evading_lhv(
    d: &DetectionModel,
    c: &PhysicalConstants,
) -> Result<HiddenVariableEnsemble> {
    construct_evading_lhv_with(d, c, EscapeRoute::default())
}

/// Builds a local ensemble whose observable probabilities equal
/// [`measured_probabilities`] for all four patterns, while no assignment with
/// K_S on both sides decays identifiably inside the window.
///
/// Efficiencies are absorbed into the weights. The (K⁰, K̄⁰) weight is placed
/// on K_S pairs in which one member escapes tagging. The remaining pattern
/// weight goes to single-pattern assignments, and unused weight to
/// assignments that contribute to no pattern.
///
/// Fails with [`Error::FalsificationBound`] when `ηη′/12 > m_S`. It also fails with
/// [`Error::ChViolated`] when the measured set violates the CH-like bound,
/// which every local assignment satisfies pointwise.
pub fn construct_evading_lhv_with(
    d: &DetectionModel,
    c: &PhysicalConstants,
    route: EscapeRoute,
) -> Result<HiddenVariableEnsemble> {
    let target = measured_probabilities(d);
    let a = target.p_k0_k0bar;
    if a > d.m_s {
        return Err(Error::FalsificationBound {
            p_k0_k0bar: a,
            m_s: d.m_s,
            threshold: libm::sqrt(12.0 * d.m_s),
        });
    }
    let margin = ch_margin(&target);
    if margin > 1e-15 {
        return Err(Error::ChViolated {
            margin,
            threshold: threshold_ch(d.m_s, d.m_l)?,
        });
    }

    let b = target.p_k0_kl;
    let cc = target.p_kl_k0bar;
    let e = target.p_ks_ks;
    let mut w1 = (0.5 * a).min(b);
    let w2 = (a - w1).min(cc);
    w1 = (a - w2).min(b);
    let w3 = (a - w1 - w2).max(0.0).min(e);
    let filler = 1.0 - (b + cc + e + (a - w1 - w2 - w3));
    if filler < -WEIGHT_TOLERANCE {
        return Err(Error::InvalidEnsemble(alloc::format!(
            "target probabilities sum to {}",
            1.0 - filler
        )));
    }

    let w = &d.window;
    let tag_s = c
        .first_channel(Parent::KS, TagClass::KsTag)
        .ok_or_else(|| Error::InvalidEnsemble("no K_S tagging channel".into()))?;
    let tag_l = c
        .first_channel(Parent::KL, TagClass::KsTag)
        .ok_or_else(|| Error::InvalidEnsemble("no K_L channel that tags as K_S".into()))?;
    let late_l = c
        .first_channel(Parent::KL, TagClass::KlLike)
        .ok_or_else(|| Error::InvalidEnsemble("no K_L-like K_L channel".into()))?;
    let t_in_s = w.t0() + (0.5 * w.len()).min(1.0);
    let t_in_l = w.t0() + 0.5 * w.len();

    let ks_tagged = KaonAssignment {
        strangeness: None,
        mass: Parent::KS,
        decay: Decay::new(tag_s.id.clone(), t_in_s),
    };
    let ks_escape = match route {
        EscapeRoute::LateDecay { delay } => {
            if !(delay > 0.0) || !delay.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "delay",
                    reason: alloc::format!("must be positive, got {delay}"),
                });
            }
            KaonAssignment {
                strangeness: None,
                mass: Parent::KS,
                decay: Decay::new(tag_s.id.clone(), w.t1() + delay),
            }
        }
        EscapeRoute::KlLikeChannel => {
            let ch = c
                .first_channel(Parent::KS, TagClass::KlLike)
                .ok_or_else(|| Error::InvalidEnsemble("no K_L-like K_S channel".into()))?;
            KaonAssignment {
                strangeness: None,
                mass: Parent::KS,
                decay: Decay::new(ch.id.clone(), t_in_s),
            }
        }
    };
    let kl_as_ks = KaonAssignment {
        strangeness: None,
        mass: Parent::KL,
        decay: Decay::new(tag_l.id.clone(), t_in_l),
    };
    let kl_late = KaonAssignment {
        strangeness: None,
        mass: Parent::KL,
        decay: Decay::new(late_l.id.clone(), w.t1() + 1.0),
    };
    let with = |k: &KaonAssignment, s: Option<Strangeness>| KaonAssignment {
        strangeness: s,
        ..k.clone()
    };
    let k0 = Some(Strangeness::K0);
    let k0bar = Some(Strangeness::K0Bar);
    let pair = |left: KaonAssignment, right: KaonAssignment| HiddenAssignment { left, right };

    let mut entries = Vec::new();
    let mut push = |assignment: HiddenAssignment, weight: f64| {
        if weight > 0.0 {
            entries.push((assignment, weight));
        }
    };
    push(pair(with(&ks_tagged, k0), with(&ks_escape, k0bar)), w1);
    push(pair(with(&ks_escape, k0), with(&ks_tagged, k0bar)), w2);
    push(pair(with(&kl_as_ks, k0), with(&kl_as_ks, k0bar)), w3);
    push(pair(with(&ks_tagged, k0), ks_escape.clone()), b - w1);
    push(pair(ks_escape.clone(), with(&ks_tagged, k0bar)), cc - w2);
    push(pair(kl_as_ks.clone(), kl_as_ks.clone()), e - w3);
    let filler = filler.max(0.0);
    push(pair(ks_tagged.clone(), kl_late.clone()), 0.5 * filler);
    push(pair(kl_late, ks_tagged), 0.5 * filler);

    HiddenVariableEnsemble::new(entries, c, w.t0(), true)
}
