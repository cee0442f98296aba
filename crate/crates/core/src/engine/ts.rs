use crate::ir::{BitVec, Expr, ModuleIr, Net, Port, RegisterDef};
use crate::netlist::{bitblast, cone_of_influence, BitName, BooleanNetlist, NodeId};
use crate::psl::SafetyCheck;

use super::EngineError;

pub const BAD_NET: &str = "__bad";
pub const ASSUME_NET: &str = "__assume";

/// Bit-level system for one check. `module` is the word-level model the
/// netlist came from (monitors and the `__bad`/`__assume` nets added); it
/// is what traces replay against.
#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub property: String,
    pub module: ModuleIr,
    pub netlist: BooleanNetlist,
    pub bad: NodeId,
    pub assume: NodeId,
    pub monitors: usize,
}

impl TransitionSystem {
    pub fn state_bits(&self) -> usize {
        self.netlist.states.len()
    }

    pub fn input_bits(&self) -> usize {
        self.netlist.inputs.len()
    }

    pub fn monitor_bits(&self) -> usize {
        self.netlist
            .states
            .iter()
            .filter(|s| s.name.signal.starts_with("__"))
            .count()
    }
}

pub fn build_ts(m: &ModuleIr, c: &SafetyCheck) -> Result<TransitionSystem, EngineError> {
    build_ts_with(m, c, true)
}

/// As [`build_ts`]; `coi = false` keeps every state and input bit.
pub fn build_ts_with(
    m: &ModuleIr,
    c: &SafetyCheck,
    coi: bool,
) -> Result<TransitionSystem, EngineError> {
    let mut aug = m.clone();
    for name in [BAD_NET, ASSUME_NET] {
        if aug.signal(name).is_some() {
            return Err(EngineError::Build(format!(
                "module already has a signal named `{name}`"
            )));
        }
    }
    for mon in &c.monitors {
        aug.registers.push(RegisterDef {
            name: mon.name.clone(),
            width: 1,
            reset_value: BitVec::zero(1),
            next_expr: mon.latch.clone(),
        });
    }
    aug.nets.push(Net {
        name: BAD_NET.into(),
        width: 1,
        expr: c.bad(),
    });
    aug.nets.push(Net {
        name: ASSUME_NET.into(),
        width: 1,
        expr: c.assume.clone(),
    });
    aug.outputs.push(Port::new(BAD_NET, 1));
    aug.outputs.push(Port::new(ASSUME_NET, 1));
    aug.validate()
        .map_err(|e| EngineError::Build(e.to_string()))?;
    let full = bitblast(&aug)?;
    let roots = [BitName::new(BAD_NET, 0), BitName::new(ASSUME_NET, 0)];
    let netlist = if coi {
        cone_of_influence(&full, &roots)?
    } else {
        let mut n = full;
        n.outputs.retain(|(b, _)| roots.contains(b));
        n
    };
    let bad = netlist.output(&roots[0]).expect("bad kept");
    let assume = netlist.output(&roots[1]).expect("assume kept");
    let property = c
        .obligations
        .iter()
        .map(|o| o.property.as_str())
        .collect::<Vec<_>>()
        .join(",");
    Ok(TransitionSystem {
        property,
        module: aug,
        netlist,
        bad,
        assume,
        monitors: c.monitors.len(),
    })
}

/// Tautological check over `m` with a given bad expression and no
/// assumption; used by equivalence checking and tests.
pub(crate) fn bare_check(name: &str, module: &str, bad: Expr) -> SafetyCheck {
    SafetyCheck {
        vunit: name.to_string(),
        module: module.to_string(),
        assume: Expr::konst(1, 1),
        assumed: Vec::new(),
        monitors: Vec::new(),
        obligations: vec![crate::psl::Obligation {
            property: name.to_string(),
            stereotype: crate::psl::Stereotype::P3,
            bad,
        }],
        cuts: Vec::new(),
        warnings: Vec::new(),
    }
}
