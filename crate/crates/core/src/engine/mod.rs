//! Safety checking of compiled properties: symbolic forward and backward
//! reachability, explicit-state search and sequential equivalence.

mod equiv;
mod explicit;
mod random;
mod symbolic;
mod trace;
mod ts;

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use equiv::{equiv_check, product_machine};
pub use explicit::check_explicit;
pub use random::{cross_validate, random_module, random_system, seeded_system, CrossCheck, Shape};
pub use symbolic::{check_backward, check_forward, netlist_bdds};
pub use trace::{replay, Cycle, Trace};
pub use ts::{build_ts, build_ts_with, TransitionSystem, ASSUME_NET, BAD_NET};

use crate::bdd::BddError;
use crate::ir::{Expr, ModuleIr};
use crate::netlist::NetlistError;
use crate::psl::SafetyCheck;

#[derive(Clone, Debug)]
pub struct Limits {
    pub node_limit: usize,
    pub timeout: Option<Duration>,
    /// Largest state+input bit count the explicit engine accepts.
    pub explicit_cap: u32,
    /// Explicit engine only: deepest BFS layer examined.
    pub depth_bound: Option<usize>,
    /// Node threshold for clustering transition-relation parts.
    pub cluster_threshold: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            node_limit: 5_000_000,
            timeout: Some(Duration::from_secs(60)),
            explicit_cap: 24,
            depth_bound: None,
            cluster_threshold: 1000,
        }
    }
}

impl Limits {
    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.timeout.map(|t| start + t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EngineKind {
    Forward,
    Backward,
    Explicit,
    /// Forward and backward, failing on disagreement.
    Both,
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fwd" | "forward" => Ok(EngineKind::Forward),
            "bwd" | "backward" => Ok(EngineKind::Backward),
            "explicit" => Ok(EngineKind::Explicit),
            "both" => Ok(EngineKind::Both),
            _ => Err(format!(
                "unknown engine `{s}` (expected fwd, bwd, explicit or both)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnknownReason {
    NodeLimit,
    Timeout,
    BoundExhausted,
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownReason::NodeLimit => "node-limit",
            UnknownReason::Timeout => "timeout",
            UnknownReason::BoundExhausted => "bound-exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    HoldsVacuously,
    Violated(Trace),
    Unknown(UnknownReason),
}

impl Verdict {
    /// Keyword used in results files.
    pub fn keyword(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsVacuously => "vacuous",
            Verdict::Violated(_) => "violated",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn trace(&self) -> Option<&Trace> {
        match self {
            Verdict::Violated(t) => Some(t),
            _ => None,
        }
    }

    fn same_kind(&self, other: &Verdict) -> bool {
        self.keyword() == other.keyword()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub verdict: Verdict,
    /// Image or pre-image steps, or BFS layers for the explicit engine.
    pub iterations: usize,
    /// BDD nodes allocated, or states visited for the explicit engine.
    pub peak_nodes: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("{0}")]
    Build(String),
    #[error("explicit engine refuses {bits} state+input bits (cap {cap})")]
    TooLarge { bits: u32, cap: u32 },
    #[error("engines disagree on `{property}`: forward says {forward}, backward says {backward}")]
    Disagreement {
        property: String,
        forward: &'static str,
        backward: &'static str,
    },
    #[error("port signatures differ: {0}")]
    Signature(String),
    #[error("internal error: {0}")]
    Internal(String),
}

fn unknown_or_internal(e: BddError) -> Result<Verdict, EngineError> {
    match e {
        BddError::NodeLimit(_) => Ok(Verdict::Unknown(UnknownReason::NodeLimit)),
        BddError::Timeout => Ok(Verdict::Unknown(UnknownReason::Timeout)),
        BddError::BadRename => Err(EngineError::Internal(e.to_string())),
    }
}

/// Runs the selected engine on a built transition system.
pub fn check(
    ts: &TransitionSystem,
    engine: EngineKind,
    limits: &Limits,
) -> Result<CheckResult, EngineError> {
    match engine {
        EngineKind::Forward => check_forward(ts, limits),
        EngineKind::Backward => check_backward(ts, limits),
        EngineKind::Explicit => check_explicit(ts, limits),
        EngineKind::Both => {
            let f = check_forward(ts, limits)?;
            let b = check_backward(ts, limits)?;
            let decided = |v: &Verdict| !matches!(v, Verdict::Unknown(_));
            if decided(&f.verdict) && decided(&b.verdict) && !f.verdict.same_kind(&b.verdict) {
                return Err(EngineError::Disagreement {
                    property: ts.property.clone(),
                    forward: f.verdict.keyword(),
                    backward: b.verdict.keyword(),
                });
            }
            Ok(if decided(&f.verdict) { f } else { b })
        }
    }
}

/// Builds and checks one compiled obligation set against `m`.
pub fn check_safety(
    m: &ModuleIr,
    c: &SafetyCheck,
    engine: EngineKind,
    limits: &Limits,
) -> Result<CheckResult, EngineError> {
    let ts = build_ts(m, c)?;
    check(&ts, engine, limits)
}

/// Whether some input assignment satisfies the width-1 `assume`.
pub fn assume_satisfiable(m: &ModuleIr, assume: &Expr) -> Result<bool, String> {
    if let Some(c) = assume.as_const() {
        return Ok(c.value == 1);
    }
    let mut probe = ModuleIr::new(m.name.clone());
    probe.inputs = m.inputs.clone();
    probe.registers = m.registers.clone();
    probe.nets = m.nets.clone();
    probe.nets.push(crate::ir::Net {
        name: ASSUME_NET.into(),
        width: 1,
        expr: assume.clone(),
    });
    probe.outputs = vec![crate::ir::Port::new(ASSUME_NET, 1)];
    let b = crate::netlist::bitblast(&probe).map_err(|e| e.to_string())?;
    let root = crate::netlist::BitName::new(ASSUME_NET, 0);
    let b = crate::netlist::cone_of_influence(&b, std::slice::from_ref(&root))
        .map_err(|e| e.to_string())?;
    let node = b.output(&root).expect("root kept");
    let mut mgr = crate::bdd::Manager::new(b.inputs.len() as u32 + 2 * b.states.len() as u32);
    let bdds = netlist_bdds(&b, &mut mgr, &[node]).map_err(|e| e.to_string())?;
    Ok(bdds[0] != crate::bdd::Bdd::FALSE)
}

#[cfg(test)]
mod tests;
