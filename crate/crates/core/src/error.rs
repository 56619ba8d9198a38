use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid constant `{field}`: {reason}")]
    InvalidConstant { field: &'static str, reason: String },

    #[error("lifetime ordering violated: tau_L ({tau_l}) must exceed tau_S ({tau_s})")]
    LifetimeOrdering { tau_s: f64, tau_l: f64 },

    #[error("branching ratios of {parent} sum to {sum}, outside 1 +/- {tolerance}")]
    BranchingSum {
        parent: &'static str,
        sum: f64,
        tolerance: f64,
    },

    #[error("unknown decay channel `{0}`")]
    UnknownChannel(String),

    #[error("state is in the {found} basis, expected {expected}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("negative evolution time {0}")]
    NegativeTime(f64),

    #[error("non-finite amplitude")]
    NonFinite,

    #[error("all amplitudes are zero")]
    ZeroState,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density matrix invariant violated: {0}")]
    NotADensityMatrix(&'static str),

    #[error("invalid tagging window [{t0}, {t1})")]
    InvalidWindow { t0: f64, t1: f64 },

    #[error("histogram bin starting at {0} precedes the pair origin at 10 tau_S")]
    BinBeforeOrigin(f64),

    #[error("contamination cap {cap} is already exceeded at the window start")]
    CapUnreachable { cap: f64 },

    #[error(
        "evading ensemble infeasible: eta*eta'/12 = {p_k0_k0bar} exceeds m_S = {m_s}; \
         the bound eta*eta'/12 <= m_S fails above eta = eta' = {threshold}"
    )]
    FalsificationBound {
        p_k0_k0bar: f64,
        m_s: f64,
        threshold: f64,
    },

    #[error(
        "evading ensemble infeasible: CH margin {margin} > 0 cannot be reproduced by any \
         local assignment; CH violation holds above eta = eta' = {threshold}"
    )]
    ChViolated { margin: f64, threshold: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}
