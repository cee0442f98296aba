use std::collections::BTreeMap;

use crate::ir::{BinaryOp, Expr, ModuleIr, Net, RegisterDef};

use super::ts::{bare_check, build_ts};
use super::{check, CheckResult, EngineError, EngineKind, Limits};
use crate::psl::SafetyCheck;

fn ports(ps: &[crate::ir::Port]) -> BTreeMap<&str, u32> {
    ps.iter().map(|p| (p.name.as_str(), p.width)).collect()
}

fn describe(a: &BTreeMap<&str, u32>, b: &BTreeMap<&str, u32>) -> String {
    let mut diffs = Vec::new();
    for (n, w) in a {
        match b.get(n) {
            None => diffs.push(format!("`{n}` only on the left")),
            Some(v) if v != w => {
                diffs.push(format!("`{n}` is {w} bits on the left, {v} on the right"))
            }
            _ => {}
        }
    }
    for n in b.keys().filter(|n| !a.contains_key(*n)) {
        diffs.push(format!("`{n}` only on the right"));
    }
    diffs.join(", ")
}

fn copy_into(product: &mut ModuleIr, m: &ModuleIr, prefix: &str) {
    let inputs: Vec<&str> = m.inputs.iter().map(|p| p.name.as_str()).collect();
    let rename = |n: &str| {
        if inputs.contains(&n) {
            n.to_string()
        } else {
            format!("{prefix}.{n}")
        }
    };
    for r in &m.registers {
        product.registers.push(RegisterDef {
            name: rename(&r.name),
            width: r.width,
            reset_value: r.reset_value,
            next_expr: r.next_expr.rename(&rename),
        });
    }
    for n in &m.nets {
        product.nets.push(Net {
            name: rename(&n.name),
            width: n.width,
            expr: n.expr.rename(&rename),
        });
    }
}

/// Product of two modules with shared inputs; the bad condition is any
/// output pair differing.
pub fn product_machine(a: &ModuleIr, b: &ModuleIr) -> Result<(ModuleIr, SafetyCheck), EngineError> {
    let (ia, ib) = (ports(&a.inputs), ports(&b.inputs));
    if ia != ib {
        return Err(EngineError::Signature(format!(
            "inputs: {}",
            describe(&ia, &ib)
        )));
    }
    let (oa, ob) = (ports(&a.outputs), ports(&b.outputs));
    if oa != ob {
        return Err(EngineError::Signature(format!(
            "outputs: {}",
            describe(&oa, &ob)
        )));
    }
    let mut p = ModuleIr::new(format!("{}__vs__{}", a.name, b.name));
    p.inputs = a.inputs.clone();
    copy_into(&mut p, a, "left");
    copy_into(&mut p, b, "right");
    let side = |m: &ModuleIr, prefix: &str, o: &str| {
        if m.inputs.iter().any(|i| i.name == o) {
            Expr::sig(o)
        } else {
            Expr::sig(format!("{prefix}.{o}"))
        }
    };
    let bad = a
        .outputs
        .iter()
        .map(|o| {
            Expr::binary(
                BinaryOp::Ne,
                side(a, "left", &o.name),
                side(b, "right", &o.name),
            )
        })
        .reduce(Expr::or)
        .unwrap_or_else(|| Expr::konst(1, 0));
    let c = bare_check("equiv", &p.name, bad);
    Ok((p, c))
}

/// Sequential equivalence from reset: every reachable cycle produces the
/// same outputs on both sides.
pub fn equiv_check(
    a: &ModuleIr,
    b: &ModuleIr,
    engine: EngineKind,
    limits: &Limits,
) -> Result<CheckResult, EngineError> {
    let (p, c) = product_machine(a, b)?;
    let ts = build_ts(&p, &c)?;
    check(&ts, engine, limits)
}
