//! Seedable event generation and the falsification verdict.
//!
//! Each event picks a measurement setting per side (strangeness or lifetime,
//! probability 1/2 each) and draws tags from either the quantum state or a
//! hidden-variable ensemble. Events are produced in fixed-size chunks; chunk
//! `k` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `k`. Any schedule that
//! merges chunks in index order therefore gives identical output.
//!
//! QM lifetime tags use a flip model: a true K_S is tagged K_L with
//! probability m_S, a true K_L is tagged K_S with probability m_L. Strangeness
//! registrations are thinned by η and η′.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::constants::{Parent, PhysicalConstants};
use crate::lhv::{lifetime_tag, HiddenVariableEnsemble};
use crate::pair::TwoKaonState;
use crate::qm::{born_probability, ch_margin, DetectionModel, Outcome, ProbabilitySet};
use crate::{Error, Result};

/// Events per RNG stream.
pub const CHUNK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Setting {
    Strangeness,
    Lifetime,
}

/// A registered tag. `Untagged` is a strangeness measurement that
/// identified nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Tag {
    K0,
    K0Bar,
    KS,
    KL,
    Untagged,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::K0 => "K0",
            Tag::K0Bar => "K0BAR",
            Tag::KS => "KS",
            Tag::KL => "KL",
            Tag::Untagged => "UNTAGGED",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Some(match s {
            "K0" => Tag::K0,
            "K0BAR" => Tag::K0Bar,
            "KS" => Tag::KS,
            "KL" => Tag::KL,
            "UNTAGGED" => Tag::Untagged,
            _ => return None,
        })
    }

    fn from_outcome(o: Outcome) -> Tag {
        match o {
            Outcome::K0 => Tag::K0,
            Outcome::K0Bar => Tag::K0Bar,
            Outcome::KS => Tag::KS,
            Outcome::KL => Tag::KL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Truth {
    Qm,
    Lhv,
}

impl Truth {
    pub fn as_str(self) -> &'static str {
        match self {
            Truth::Qm => "QM",
            Truth::Lhv => "LHV",
        }
    }

    pub fn parse(s: &str) -> Option<Truth> {
        match s {
            "QM" => Some(Truth::Qm),
            "LHV" => Some(Truth::Lhv),
            _ => None,
        }
    }
}

/// One generated event. Decay times are present exactly for sides measured
/// in the lifetime setting.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventRecord {
    pub event_id: u64,
    pub left_tag: Tag,
    pub right_tag: Tag,
    pub left_t: Option<f64>,
    pub right_t: Option<f64>,
    pub truth: Truth,
}

impl EventRecord {
    pub fn settings(&self) -> (Setting, Setting) {
        let s = |t: Option<f64>| {
            if t.is_some() {
                Setting::Lifetime
            } else {
                Setting::Strangeness
            }
        };
        (s(self.left_t), s(self.right_t))
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Qm(TwoKaonState),
    Lhv(HiddenVariableEnsemble),
}

/// Event counts. Merging is plain addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tally {
    pub n_events: u64,
    /// Events per setting pair: strangeness/strangeness, strangeness/lifetime,
    /// lifetime/strangeness, lifetime/lifetime.
    pub settings: [u64; 4],
    pub k0_k0bar: u64,
    pub k0_kl: u64,
    pub kl_k0bar: u64,
    pub ks_ks: u64,
    /// Lifetime/lifetime events whose hidden mass identities were both K_S
    /// and both decayed identifiably in the window. Not recoverable from
    /// an event stream.
    pub true_ks_ks_in_window: u64,
}

fn setting_index(l: Setting, r: Setting) -> usize {
    2 * (l == Setting::Lifetime) as usize + (r == Setting::Lifetime) as usize
}

impl Tally {
    pub fn record(&mut self, e: &EventRecord) {
        let (l, r) = e.settings();
        self.n_events += 1;
        self.settings[setting_index(l, r)] += 1;
        match (e.left_tag, e.right_tag) {
            (Tag::K0, Tag::K0Bar) => self.k0_k0bar += 1,
            (Tag::K0, Tag::KL) => self.k0_kl += 1,
            (Tag::KL, Tag::K0Bar) => self.kl_k0bar += 1,
            (Tag::KS, Tag::KS) => self.ks_ks += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.n_events += other.n_events;
        for (a, b) in self.settings.iter_mut().zip(other.settings) {
            *a += b;
        }
        self.k0_k0bar += other.k0_k0bar;
        self.k0_kl += other.k0_kl;
        self.kl_k0bar += other.kl_k0bar;
        self.ks_ks += other.ks_ks;
        self.true_ks_ks_in_window += other.true_ks_ks_in_window;
    }

    /// Each pattern count over the events in its setting pair.
    pub fn probabilities(&self) -> ProbabilitySet {
        let f = |k: u64, n: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        ProbabilitySet {
            p_k0_k0bar: f(self.k0_k0bar, self.settings[0]),
            p_k0_kl: f(self.k0_kl, self.settings[1]),
            p_kl_k0bar: f(self.kl_k0bar, self.settings[2]),
            p_ks_ks: f(self.ks_ks, self.settings[3]),
        }
    }

    /// Binomial standard errors of [`Tally::probabilities`].
    pub fn standard_errors(&self) -> ProbabilitySet {
        let p = self.probabilities().as_array();
        let [a, b, c, e] = [0, 1, 2, 3].map(|i| {
            let n = self.settings[i];
            if n == 0 {
                0.0
            } else {
                libm::sqrt(p[i] * (1.0 - p[i]) / n as f64)
            }
        });
        ProbabilitySet {
            p_k0_k0bar: a,
            p_k0_kl: b,
            p_kl_k0bar: c,
            p_ks_ks: e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VerdictReport {
    pub tally: Tally,
    pub probabilities: ProbabilitySet,
    pub standard_errors: ProbabilitySet,
    pub ch_margin: f64,
    pub m_s: f64,
    pub m_l: f64,
    /// `P(K⁰,K̄⁰) > m_S`.
    pub falsification_pass: bool,
    /// `ch_margin > 0`.
    pub ch_pass: bool,
    pub seed: Option<u64>,
}

pub fn falsification_verdict(
    tally: &Tally,
    d: &DetectionModel,
    seed: Option<u64>,
) -> VerdictReport {
    let p = tally.probabilities();
    let margin = ch_margin(&p);
    VerdictReport {
        tally: *tally,
        probabilities: p,
        standard_errors: tally.standard_errors(),
        ch_margin: margin,
        m_s: d.m_s,
        m_l: d.m_l,
        falsification_pass: p.p_k0_k0bar > d.m_s,
        ch_pass: margin > 0.0,
        seed,
    }
}

enum Kind {
    // cumulative Born probabilities per setting pair over (l, r) outcome indices
    Qm {
        cumulative: [[f64; 4]; 4],
    },
    Lhv {
        ensemble: HiddenVariableEnsemble,
        cumulative: Vec<f64>,
    },
}

/// Precomputed sampling tables for one source and detection model.
pub struct EventSampler {
    kind: Kind,
    d: DetectionModel,
    exp_s: Exp<f64>,
    exp_l: Exp<f64>,
}

fn outcome_of(setting: Setting, i: usize) -> Outcome {
    match (setting, i) {
        (Setting::Strangeness, 0) => Outcome::K0,
        (Setting::Strangeness, _) => Outcome::K0Bar,
        (Setting::Lifetime, 0) => Outcome::KS,
        (Setting::Lifetime, _) => Outcome::KL,
    }
}

const SETTINGS: [Setting; 2] = [Setting::Strangeness, Setting::Lifetime];

impl EventSampler {
    pub fn new(source: Source, d: DetectionModel, c: &PhysicalConstants) -> Result<Self> {
        let rate = |p| {
            Exp::new(c.gamma(p)).map_err(|_| Error::InvalidParameter {
                name: "gamma",
                reason: alloc::format!("{} decay rate {} is not usable", p, c.gamma(p)),
            })
        };
        let kind = match source {
            Source::Qm(state) => {
                let mut cumulative = [[0.0; 4]; 4];
                for (k, row) in cumulative.iter_mut().enumerate() {
                    let (ls, rs) = (SETTINGS[k / 2], SETTINGS[k % 2]);
                    let mut acc = 0.0;
                    for (j, slot) in row.iter_mut().enumerate() {
                        acc +=
                            born_probability(&state, outcome_of(ls, j / 2), outcome_of(rs, j % 2));
                        *slot = acc;
                    }
                    if !(acc > 0.0) {
                        return Err(Error::ZeroState);
                    }
                    // renormalise so the last bin closes at 1
                    for slot in row.iter_mut() {
                        *slot /= acc;
                    }
                }
                Kind::Qm { cumulative }
            }
            Source::Lhv(ensemble) => {
                let mut acc = 0.0;
                let cumulative = ensemble
                    .entries()
                    .iter()
                    .map(|(_, w)| {
                        acc += w;
                        acc
                    })
                    .collect();
                Kind::Lhv {
                    ensemble,
                    cumulative,
                }
            }
        };
        Ok(EventSampler {
            kind,
            d,
            exp_s: rate(Parent::KS)?,
            exp_l: rate(Parent::KL)?,
        })
    }

    pub fn detection_model(&self) -> &DetectionModel {
        &self.d
    }

    pub fn truth(&self) -> Truth {
        match self.kind {
            Kind::Qm { .. } => Truth::Qm,
            Kind::Lhv { .. } => Truth::Lhv,
        }
    }

    /// Number of chunks covering `n_events`.
    pub fn chunk_count(n_events: u64) -> u64 {
        n_events.div_ceil(CHUNK_SIZE)
    }

    /// Generates chunk `chunk` of a run of `n_events`, passing each event to
    /// `sink` in order, and returns its tally.
    pub fn run_chunk(
        &self,
        seed: u64,
        chunk: u64,
        n_events: u64,
        mut sink: impl FnMut(&EventRecord),
    ) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let start = chunk * CHUNK_SIZE;
        let end = n_events.min(start + CHUNK_SIZE);
        let mut tally = Tally::default();
        for id in start..end {
            let (rec, hidden_ks_ks) = self.event(&mut rng, id);
            tally.record(&rec);
            if hidden_ks_ks {
                tally.true_ks_ks_in_window += 1;
            }
            sink(&rec);
        }
        tally
    }

    fn thin<R: Rng>(&self, rng: &mut R, o: Outcome) -> Tag {
        let eff = self.d.efficiency(o);
        if rng.gen::<f64>() < eff {
            Tag::from_outcome(o)
        } else {
            Tag::Untagged
        }
    }

    fn event<R: Rng>(&self, rng: &mut R, id: u64) -> (EventRecord, bool) {
        let ls = if rng.gen::<bool>() {
            Setting::Strangeness
        } else {
            Setting::Lifetime
        };
        let rs = if rng.gen::<bool>() {
            Setting::Strangeness
        } else {
            Setting::Lifetime
        };
        let u: f64 = rng.gen();
        let t0 = self.d.window.t0();
        match &self.kind {
            Kind::Qm { cumulative } => {
                let row = &cumulative[setting_index(ls, rs)];
                let j = row.iter().position(|&c| u < c).unwrap_or(3);
                let mut side = |s: Setting, i: usize| -> (Tag, Option<f64>, bool) {
                    let o = outcome_of(s, i);
                    match s {
                        Setting::Strangeness => (self.thin(rng, o), None, false),
                        Setting::Lifetime => {
                            let true_s = o == Outcome::KS;
                            let flip = if true_s { self.d.m_s } else { self.d.m_l };
                            let flipped = rng.gen::<f64>() < flip;
                            let tag = match (true_s, flipped) {
                                (true, false) | (false, true) => Tag::KS,
                                _ => Tag::KL,
                            };
                            let dt = if true_s {
                                self.exp_s.sample(rng)
                            } else {
                                self.exp_l.sample(rng)
                            };
                            (tag, Some(t0 + dt), true_s && !flipped)
                        }
                    }
                };
                let (lt, ltime, l_ks) = side(ls, j / 2);
                let (rt, rtime, r_ks) = side(rs, j % 2);
                let rec = EventRecord {
                    event_id: id,
                    left_tag: lt,
                    right_tag: rt,
                    left_t: ltime,
                    right_t: rtime,
                    truth: Truth::Qm,
                };
                (rec, l_ks && r_ks)
            }
            Kind::Lhv {
                ensemble,
                cumulative,
            } => {
                let total = cumulative.last().copied().unwrap_or(1.0);
                let i = cumulative
                    .partition_point(|&c| c <= u * total)
                    .min(cumulative.len() - 1);
                let (a, _) = &ensemble.entries()[i];
                let classes = ensemble.classes(i);
                let mut hidden_ks = [false; 2];
                let mut out = [(Tag::Untagged, None); 2];
                for (k, (s, kaon)) in [(ls, &a.left), (rs, &a.right)].into_iter().enumerate() {
                    out[k] = match s {
                        Setting::Strangeness => match kaon.strangeness {
                            Some(st) if ensemble.efficiency_absorbed() => {
                                (Tag::from_outcome(st.outcome()), None)
                            }
                            Some(st) => (self.thin(rng, st.outcome()), None),
                            None => (Tag::Untagged, None),
                        },
                        Setting::Lifetime => {
                            let o = lifetime_tag(classes[k], kaon.decay.time, &self.d.window);
                            hidden_ks[k] = kaon.mass == Parent::KS && o == Outcome::KS;
                            (Tag::from_outcome(o), Some(kaon.decay.time))
                        }
                    };
                }
                let rec = EventRecord {
                    event_id: id,
                    left_tag: out[0].0,
                    right_tag: out[1].0,
                    left_t: out[0].1,
                    right_t: out[1].1,
                    truth: Truth::Lhv,
                };
                (rec, hidden_ks[0] && hidden_ks[1])
            }
        }
    }
}

/// Sequential run over all chunks, collecting the events.
pub fn monte_carlo_run(
    source: Source,
    d: &DetectionModel,
    c: &PhysicalConstants,
    n_events: u64,
    seed: u64,
) -> Result<(Vec<EventRecord>, VerdictReport)> {
    let sampler = EventSampler::new(source, *d, c)?;
    let mut events = Vec::new();
    let mut tally = Tally::default();
    for chunk in 0..EventSampler::chunk_count(n_events) {
        let t = sampler.run_chunk(seed, chunk, n_events, |e| events.push(*e));
        tally.merge(&t);
    }
    Ok((events, falsification_verdict(&tally, d, Some(seed))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::{misid_budget, TaggingWindow};
    use crate::lhv::construct_evading_lhv;
    use crate::pair::build_phi_strangeness_basis;
    use crate::qm::measured_probabilities;
    use num_complex::Complex64;

    fn phi() -> TwoKaonState {
        build_phi_strangeness_basis(Complex64::new(-1.0, 0.0)).unwrap()
    }

    fn model(eta: f64) -> DetectionModel {
        let w = TaggingWindow::standard();
        let b = misid_budget(&w, &PhysicalConstants::pdg());
        DetectionModel::new(eta, eta, b.m_s, b.m_l, w).unwrap()
    }

    #[test]
    fn same_seed_same_events() {
        let c = PhysicalConstants::pdg();
        let d = model(0.5);
        let (a, _) = monte_carlo_run(Source::Qm(phi()), &d, &c, 1000, 7).unwrap();
        let (b, _) = monte_carlo_run(Source::Qm(phi()), &d, &c, 1000, 7).unwrap();
        let (x, _) = monte_carlo_run(Source::Qm(phi()), &d, &c, 1000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, x);
        assert_eq!(a.len(), 1000);
    }

    #[test]
    fn chunks_are_independent_of_order() {
        let c = PhysicalConstants::pdg();
        let s = EventSampler::new(Source::Qm(phi()), model(0.5), &c).unwrap();
        let n = 3 * CHUNK_SIZE / 2;
        let mut forward = Tally::default();
        let mut backward = Tally::default();
        for k in 0..2 {
            forward.merge(&s.run_chunk(1, k, n, |_| {}));
        }
        for k in (0..2).rev() {
            backward.merge(&s.run_chunk(1, k, n, |_| {}));
        }
        assert_eq!(forward, backward);
        assert_eq!(forward.n_events, n);
        assert_eq!(forward.settings.iter().sum::<u64>(), n);
    }

    #[test]
    fn zero_events() {
        let c = PhysicalConstants::pdg();
        let (ev, v) = monte_carlo_run(Source::Qm(phi()), &model(0.5), &c, 0, 1).unwrap();
        assert!(ev.is_empty());
        assert!(!v.falsification_pass && !v.ch_pass);
    }

    #[test]
    fn times_only_for_lifetime_sides() {
        let c = PhysicalConstants::pdg();
        let (ev, _) = monte_carlo_run(Source::Qm(phi()), &model(0.5), &c, 2000, 3).unwrap();
        for e in &ev {
            assert_eq!(e.left_t.is_some(), matches!(e.left_tag, Tag::KS | Tag::KL));
            assert_eq!(
                e.right_t.is_some(),
                matches!(e.right_tag, Tag::KS | Tag::KL)
            );
            for t in [e.left_t, e.right_t].into_iter().flatten() {
                assert!(t >= 10.0);
            }
        }
    }

    #[test]
    fn qm_frequencies_match_measured_probabilities() {
        let c = PhysicalConstants::pdg();
        // larger m's so that every pattern is populated
        let d = DetectionModel::new(0.8, 0.6, 0.05, 0.04, TaggingWindow::standard()).unwrap();
        let (_, v) = monte_carlo_run(Source::Qm(phi()), &d, &c, 400_000, 11).unwrap();
        let want = [
            0.8 * 0.6 / 12.0,
            0.8 * 0.05 / 6.0,
            0.6 * 0.05 / 6.0,
            2.0 / 3.0 * 0.04 * (1.0 - 0.05) + 0.04 * 0.04 / 3.0,
        ];
        let got = v.probabilities.as_array();
        let se = v.standard_errors.as_array();
        for i in 0..4 {
            assert!(
                (got[i] - want[i]).abs() < 5.0 * se[i] + 1e-12,
                "{i}: {} vs {}",
                got[i],
                want[i]
            );
        }
    }

    #[test]
    fn lhv_frequencies_match_targets() {
        let c = PhysicalConstants::pdg();
        let d = model(1e-2);
        let e = construct_evading_lhv(&d, &c).unwrap();
        let (_, v) = monte_carlo_run(Source::Lhv(e), &d, &c, 400_000, 5).unwrap();
        assert_eq!(v.tally.true_ks_ks_in_window, 0);
        let want = measured_probabilities(&d).as_array();
        let got = v.probabilities.as_array();
        for i in 0..4 {
            let se = libm::sqrt(want[i] * (1.0 - want[i]) / v.tally.settings[i] as f64);
            assert!(
                (got[i] - want[i]).abs() < 5.0 * se + 1e-12,
                "{i}: {} vs {}",
                got[i],
                want[i]
            );
        }
        assert!(!v.falsification_pass);
    }

    #[test]
    fn tag_round_trip() {
        for t in [Tag::K0, Tag::K0Bar, Tag::KS, Tag::KL, Tag::Untagged] {
            assert_eq!(Tag::parse(t.as_str()), Some(t));
        }
        assert_eq!(Tag::parse("k0"), None);
        assert_eq!(Truth::parse(Truth::Lhv.as_str()), Some(Truth::Lhv));
    }
}
