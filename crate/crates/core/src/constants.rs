//! Physical inputs, normalised to K_S-lifetime units.
//!
//! Values arrive as a [`ConstantsInput`] (seconds or τ_S units) and come out
//! as a validated [`PhysicalConstants`] in which τ_S = 1, Γ_S = 1 and Δm is
//! expressed in ħ/τ_S.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Magnitude of ⟨K_S|K_L⟩.
pub const KS_KL_OVERLAP: f64 = 3.3e-3;

/// Branching-ratio sums may miss rare modes by this much.
pub const DEFAULT_BRANCHING_TOLERANCE: f64 = 1e-2;

const RATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Parent {
    #[cfg_attr(feature = "serde", serde(rename = "KS"))]
    KS,
    #[cfg_attr(feature = "serde", serde(rename = "KL"))]
    KL,
}

impl Parent {
    pub fn as_str(self) -> &'static str {
        match self {
            Parent::KS => "KS",
            Parent::KL => "KL",
        }
    }
}

impl fmt::Display for Parent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a decay channel is read by the lifetime tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TagClass {
    /// Identifies a K_S when seen inside the tagging window (ππ).
    #[cfg_attr(feature = "serde", serde(rename = "KS_TAG"))]
    KsTag,
    /// Three pions or πℓν.
    #[cfg_attr(feature = "serde", serde(rename = "KL_LIKE"))]
    KlLike,
    #[cfg_attr(feature = "serde", serde(rename = "UNTAGGABLE"))]
    Untaggable,
}

impl TagClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TagClass::KsTag => "KS_TAG",
            TagClass::KlLike => "KL_LIKE",
            TagClass::Untaggable => "UNTAGGABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Channel {
    #[cfg_attr(feature = "serde", serde(rename = "channel"))]
    pub id: String,
    pub parent: Parent,
    pub ratio: f64,
    pub tag_class: TagClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TimeUnit {
    Seconds,
    /// Lifetimes in units of τ_S (so `tau_s` must be 1) and Δm in ħ/τ_S.
    TauS,
}

/// Unvalidated constants as written in a configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsInput {
    pub time_unit: TimeUnit,
    pub tau_s: f64,
    pub tau_l: f64,
    /// ħ/s when `time_unit` is seconds, ħ/τ_S otherwise.
    pub delta_m: f64,
    /// Reference value of τ_S in seconds for τ_S-unit documents.
    pub tau_s_seconds: Option<f64>,
    pub ks_kl_overlap: f64,
    pub branching_tolerance: f64,
    pub two_pion_channels: Vec<String>,
    pub branching_table: Vec<Channel>,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PhysicalConstants {
    /// τ_S in seconds, when known.
    pub tau_s_seconds: Option<f64>,
    /// Always 1.
    pub tau_s: f64,
    pub tau_l: f64,
    pub gamma_s: f64,
    pub gamma_l: f64,
    /// K_L − K_S mass difference in ħ/τ_S.
    pub delta_m: f64,
    pub ks_kl_overlap: f64,
    pub branching_tolerance: f64,
    pub two_pion_channels: Vec<String>,
    pub branching_table: Vec<Channel>,
    pub provenance: BTreeMap<String, String>,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConstant {
        field,
        reason: reason.into(),
    }
}

fn positive_finite(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(invalid(
            field,
            format!("must be positive and finite, got {value}"),
        ));
    }
    Ok(())
}

impl PhysicalConstants {
    pub fn new(input: ConstantsInput) -> Result<Self> {
        positive_finite("tau_s", input.tau_s)?;
        positive_finite("tau_l", input.tau_l)?;
        if !input.delta_m.is_finite() {
            return Err(invalid("delta_m", "must be finite"));
        }
        if input.tau_l <= input.tau_s {
            return Err(Error::LifetimeOrdering {
                tau_s: input.tau_s,
                tau_l: input.tau_l,
            });
        }

        let (tau_l, delta_m, tau_s_seconds) = match input.time_unit {
            TimeUnit::Seconds => (
                input.tau_l / input.tau_s,
                input.delta_m * input.tau_s,
                Some(input.tau_s),
            ),
            TimeUnit::TauS => {
                if (input.tau_s - 1.0).abs() > RATE_TOLERANCE {
                    return Err(invalid("tau_s", "must be 1 when time_unit = \"tau_s\""));
                }
                if let Some(s) = input.tau_s_seconds {
                    positive_finite("tau_s_seconds", s)?;
                }
                (input.tau_l, input.delta_m, input.tau_s_seconds)
            }
        };

        if !(input.ks_kl_overlap > 0.0 && input.ks_kl_overlap < 1e-2) {
            return Err(invalid(
                "ks_kl_overlap",
                format!("must lie in (0, 1e-2), got {}", input.ks_kl_overlap),
            ));
        }
        if !(input.branching_tolerance >= 0.0 && input.branching_tolerance < 1.0) {
            return Err(invalid("branching_tolerance", "must lie in [0, 1)"));
        }

        let constants = PhysicalConstants {
            tau_s_seconds,
            tau_s: 1.0,
            tau_l,
            gamma_s: 1.0,
            gamma_l: 1.0 / tau_l,
            delta_m,
            ks_kl_overlap: input.ks_kl_overlap,
            branching_tolerance: input.branching_tolerance,
            two_pion_channels: input.two_pion_channels,
            branching_table: input.branching_table,
            provenance: input.provenance,
        };
        constants.validate_table()?;
        Ok(constants)
    }

    fn validate_table(&self) -> Result<()> {
        for (i, ch) in self.branching_table.iter().enumerate() {
            if ch.id.is_empty() {
                return Err(invalid("branching_table", "empty channel id"));
            }
            if !(0.0..=1.0).contains(&ch.ratio) {
                return Err(invalid(
                    "branching_table",
                    format!(
                        "ratio of {} -> {} is {}, outside [0, 1]",
                        ch.parent, ch.id, ch.ratio
                    ),
                ));
            }
            if self.branching_table[..i]
                .iter()
                .any(|other| other.parent == ch.parent && other.id == ch.id)
            {
                return Err(invalid(
                    "branching_table",
                    format!("duplicate channel {} -> {}", ch.parent, ch.id),
                ));
            }
        }
        for parent in [Parent::KS, Parent::KL] {
            let sum: f64 = self.channels(parent).map(|c| c.ratio).sum();
            if (sum - 1.0).abs() > self.branching_tolerance {
                return Err(Error::BranchingSum {
                    parent: parent.as_str(),
                    sum,
                    tolerance: self.branching_tolerance,
                });
            }
        }
        if self.two_pion_channels.is_empty() {
            return Err(invalid(
                "two_pion_channels",
                "at least one channel required",
            ));
        }
        for id in &self.two_pion_channels {
            for parent in [Parent::KS, Parent::KL] {
                if self.channel(parent, id).is_none() {
                    return Err(invalid(
                        "two_pion_channels",
                        format!("{id} is not listed for {parent}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn gamma(&self, parent: Parent) -> f64 {
        match parent {
            Parent::KS => self.gamma_s,
            Parent::KL => self.gamma_l,
        }
    }

    pub fn channels(&self, parent: Parent) -> impl Iterator<Item = &Channel> + '_ {
        self.branching_table
            .iter()
            .filter(move |c| c.parent == parent)
    }

    pub fn channel(&self, parent: Parent, id: &str) -> Option<&Channel> {
        self.channels(parent).find(|c| c.id == id)
    }

    /// Summed branching ratio of `parent` into the configured ππ channels.
    pub fn two_pion_ratio(&self, parent: Parent) -> f64 {
        self.two_pion_channels
            .iter()
            .filter_map(|id| self.channel(parent, id))
            .map(|c| c.ratio)
            .sum()
    }

    /// Summed branching ratio of `parent` into channels that cannot tag a K_S.
    pub fn non_tagging_ratio(&self, parent: Parent) -> f64 {
        self.channels(parent)
            .filter(|c| c.tag_class != TagClass::KsTag)
            .map(|c| c.ratio)
            .sum()
    }

    /// First channel of `parent` in the given class, in table order.
    pub fn first_channel(&self, parent: Parent, class: TagClass) -> Option<&Channel> {
        self.channels(parent).find(|c| c.tag_class == class)
    }

    /// The constants as a τ_S-unit document; `new(c.to_input()) == Ok(c)`.
    pub fn to_input(&self) -> ConstantsInput {
        ConstantsInput {
            time_unit: TimeUnit::TauS,
            tau_s: 1.0,
            tau_l: self.tau_l,
            delta_m: self.delta_m,
            tau_s_seconds: self.tau_s_seconds,
            ks_kl_overlap: self.ks_kl_overlap,
            branching_tolerance: self.branching_tolerance,
            two_pion_channels: self.two_pion_channels.clone(),
            branching_table: self.branching_table.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// PDG values, matching the constants file shipped with the CLI.
pub fn pdg_input() -> ConstantsInput {
    let ch = |id: &str, parent, ratio, tag_class| Channel {
        id: id.to_string(),
        parent,
        ratio,
        tag_class,
    };
    use Parent::{KL, KS};
    use TagClass::{KlLike, KsTag, Untaggable};
    ConstantsInput {
        time_unit: TimeUnit::Seconds,
        tau_s: 0.8954e-10,
        tau_l: 5.116e-8,
        delta_m: 0.5293e10,
        tau_s_seconds: None,
        ks_kl_overlap: KS_KL_OVERLAP,
        branching_tolerance: DEFAULT_BRANCHING_TOLERANCE,
        two_pion_channels: ["pi+pi-", "pi0pi0"].iter().map(|s| s.to_string()).collect(),
        branching_table: alloc::vec![
            ch("pi+pi-", KS, 0.6920, KsTag),
            ch("pi0pi0", KS, 0.3069, KsTag),
            ch("pi+-e-+nu", KS, 7.04e-4, KlLike),
            ch("pi+-mu-+nu", KS, 4.56e-4, KlLike),
            ch("pi+pi-pi0", KS, 3.5e-7, KlLike),
            ch("pi+-e-+nu", KL, 0.4055, KlLike),
            ch("pi+-mu-+nu", KL, 0.2704, KlLike),
            ch("3pi0", KL, 0.1952, KlLike),
            ch("pi+pi-pi0", KL, 0.1254, KlLike),
            ch("pi+pi-", KL, 1.967e-3, KsTag),
            ch("pi0pi0", KL, 8.64e-4, KsTag),
            ch("gamma gamma", KL, 5.47e-4, Untaggable),
        ],
        provenance: BTreeMap::new(),
    }
}

impl PhysicalConstants {
    /// The PDG defaults without provenance strings.
    pub fn pdg() -> Self {
        Self::new(pdg_input()).expect("built-in constants are valid")
    }
}
