use super::*;
use crate::ir::ModuleIr;
use crate::psl::{compile, parse_vunit, CompileOptions};
use crate::verilog::{elaborate, parse};

const COUNTER: &str = "
module C(CK, RESET, EN, Q, FULL);
  input CK, RESET, EN;
  output [1:0] Q;
  output FULL;
  reg [1:0] q;
  reg seen;
  always @(posedge CK or posedge RESET)
    if (RESET) begin q <= 2'b00; seen <= 1'b0; end
    else begin
      if (EN) q <= q + 2'b01;
      seen <= seen | (q == 2'b11);
    end
  assign Q = q;
  assign FULL = seen;
endmodule
";

const ENGINES: [EngineKind; 3] = [
    EngineKind::Forward,
    EngineKind::Backward,
    EngineKind::Explicit,
];

fn counter() -> ModuleIr {
    elaborate(&parse(COUNTER).unwrap(), "C").unwrap()
}

fn system(m: &ModuleIr, psl: &str) -> TransitionSystem {
    let (m, c) = compile(&parse_vunit(psl).unwrap(), m, CompileOptions::default()).unwrap();
    build_ts(&m, &c).unwrap()
}

fn run_all(ts: &TransitionSystem) -> Vec<CheckResult> {
    ENGINES
        .iter()
        .map(|&e| check(ts, e, &Limits::default()).unwrap())
        .collect()
}

#[test]
fn reachable_bad_state_gives_minimal_trace_on_every_engine() {
    let ts = system(
        &counter(),
        "vunit u { property p = never (Q == 2'b11); assert p; }",
    );
    for r in run_all(&ts) {
        let Verdict::Violated(t) = &r.verdict else {
            panic!("expected violation, got {:?}", r.verdict)
        };
        assert_eq!(t.len(), 4);
        assert_eq!(t.property, "p");
        replay(t, &ts).unwrap();
        assert!(t.cycles.iter().take(3).all(|c| c.inputs["EN"] == 1));
    }
    check(&ts, EngineKind::Both, &Limits::default()).unwrap();
}

#[test]
fn trace_text_lists_inputs_and_registers() {
    let ts = system(
        &counter(),
        "vunit u { property p = never (Q == 2'b01); assert p; }",
    );
    let r = check_forward(&ts, &Limits::default()).unwrap();
    let text = r.verdict.trace().unwrap().render(&ts.module);
    assert_eq!(
        text,
        "CEX p len 2\ncycle 0: EN=1 q=00 seen=0\ncycle 1: EN=0 q=01 seen=0 <- violation\n"
    );
}

#[test]
fn tautology_holds_without_iterating() {
    let ts = system(
        &counter(),
        "vunit u { property p = always (1'b1); assert p; }",
    );
    let r = check_forward(&ts, &Limits::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert_eq!(r.iterations, 0);
    assert_eq!(ts.state_bits(), 0);
}

#[test]
fn invariant_holds_under_input_assumption() {
    let ts = system(
        &counter(),
        "vunit u { property e = never (EN); assume e; property p = always (Q == 2'b00); assert p; }",
    );
    for r in run_all(&ts) {
        assert_eq!(r.verdict, Verdict::Holds);
    }
    let free = system(
        &counter(),
        "vunit u { property p = always (Q == 2'b00); assert p; }",
    );
    for r in run_all(&free) {
        assert!(matches!(r.verdict, Verdict::Violated(_)));
    }
}

#[test]
fn unsatisfiable_assumption_is_vacuous() {
    let ts = system(
        &counter(),
        "vunit u { property a = always (EN); property b = never (EN); assume a; assume b;
                   property p = never (FULL); assert p; }",
    );
    for r in run_all(&ts) {
        assert_eq!(r.verdict, Verdict::HoldsVacuously);
    }
}

#[test]
fn next_properties_use_the_monitor() {
    // once q is 3 the flag is set one cycle later
    let ts = system(
        &counter(),
        "vunit u { property p = always (Q == 2'b11 -> next FULL); assert p; }",
    );
    assert_eq!(ts.monitors, 1);
    for r in run_all(&ts) {
        assert_eq!(r.verdict, Verdict::Holds);
    }
    let ts = system(
        &counter(),
        "vunit u { property p = always (Q == 2'b10 -> next FULL); assert p; }",
    );
    for r in run_all(&ts) {
        let t = r.verdict.trace().expect("violated");
        assert_eq!(t.len(), 4);
        replay(t, &ts).unwrap();
    }
}

#[test]
fn explicit_engine_limits() {
    let ts = system(
        &counter(),
        "vunit u { property p = never (FULL); assert p; }",
    );
    let tight = Limits {
        explicit_cap: 2,
        ..Limits::default()
    };
    assert!(matches!(
        check_explicit(&ts, &tight),
        Err(EngineError::TooLarge { bits: 4, cap: 2 })
    ));
    let bounded = Limits {
        depth_bound: Some(0),
        ..Limits::default()
    };
    let r = check_explicit(&ts, &bounded).unwrap();
    assert_eq!(r.verdict, Verdict::Unknown(UnknownReason::BoundExhausted));
    let deep_enough = Limits {
        depth_bound: Some(10),
        ..Limits::default()
    };
    assert!(matches!(
        check_explicit(&ts, &deep_enough).unwrap().verdict,
        Verdict::Violated(_)
    ));
}

#[test]
fn node_limit_reports_unknown() {
    let ts = system(
        &counter(),
        "vunit u { property p = never (FULL); assert p; }",
    );
    let tiny = Limits {
        node_limit: 8,
        ..Limits::default()
    };
    for e in [EngineKind::Forward, EngineKind::Backward] {
        let r = check(&ts, e, &tiny).unwrap();
        assert_eq!(r.verdict, Verdict::Unknown(UnknownReason::NodeLimit));
    }
}

#[test]
fn cone_of_influence_does_not_change_verdicts() {
    let m = counter();
    for psl in [
        "vunit u { property p = never (FULL); assert p; }",
        "vunit u { property p = always (EN -> Q != 2'b11); assert p; }",
        "vunit u { property p = always (Q[1] -> next (Q != 2'b00)); assert p; }",
    ] {
        let (m2, c) = compile(&parse_vunit(psl).unwrap(), &m, CompileOptions::default()).unwrap();
        let small = build_ts(&m2, &c).unwrap();
        let full = build_ts_with(&m2, &c, false).unwrap();
        assert!(full.state_bits() >= small.state_bits());
        let a = check_forward(&small, &Limits::default()).unwrap();
        let b = check_forward(&full, &Limits::default()).unwrap();
        assert_eq!(a.verdict.keyword(), b.verdict.keyword(), "{psl}");
        if let Verdict::Violated(t) = &b.verdict {
            assert_eq!(t.len(), a.verdict.trace().unwrap().len());
        }
    }
}

#[test]
fn replay_rejects_tampered_traces() {
    let ts = system(
        &counter(),
        "vunit u { property p = never (Q == 2'b10); assert p; }",
    );
    let r = check_forward(&ts, &Limits::default()).unwrap();
    let t = r.verdict.trace().unwrap().clone();
    replay(&t, &ts).unwrap();

    let mut short = t.clone();
    short.cycles.pop();
    assert!(replay(&short, &ts)
        .unwrap_err()
        .contains("does not violate"));
    let mut skewed = t.clone();
    skewed.cycles[0].state.insert("q".into(), 1);
    assert!(replay(&skewed, &ts).unwrap_err().contains("reset state"));
    let mut jumped = t.clone();
    jumped.cycles[1].inputs.insert("EN".into(), 0);
    assert!(replay(&jumped, &ts).unwrap_err().contains("cycle 2"));
    let empty = Trace {
        property: "p".into(),
        cycles: Vec::new(),
    };
    assert!(replay(&empty, &ts).is_err());
}

#[test]
fn equivalence_of_hierarchy_and_leaf() {
    let wrapper = include_str!("../../../../corpus/shared_port/shared_port.v");
    let leaf = include_str!("../../../../corpus/shared_port/B.v");
    let a = elaborate(&parse(wrapper).unwrap(), "A").unwrap();
    let b = elaborate(&parse(leaf).unwrap(), "B").unwrap();
    for e in [EngineKind::Forward, EngineKind::Backward] {
        let r = equiv_check(&a, &b, e, &Limits::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
    }

    let mutated = leaf.replace("3'b001", "3'b011");
    let b2 = elaborate(&parse(&mutated).unwrap(), "B").unwrap();
    let r = equiv_check(&b, &b2, EngineKind::Forward, &Limits::default()).unwrap();
    let (p, c) = product_machine(&b, &b2).unwrap();
    let ts = build_ts(&p, &c).unwrap();
    replay(r.verdict.trace().expect("differs"), &ts).unwrap();

    let c = counter();
    let e = equiv_check(&b, &c, EngineKind::Forward, &Limits::default()).unwrap_err();
    assert!(matches!(e, EngineError::Signature(_)), "{e}");
}

#[test]
fn assume_satisfiability_probe() {
    let m = counter();
    assert!(assume_satisfiable(&m, &crate::ir::Expr::sig("EN")).unwrap());
    let contradiction = crate::ir::Expr::and(
        crate::ir::Expr::sig("EN"),
        crate::ir::Expr::not(crate::ir::Expr::sig("EN")),
    );
    assert!(!assume_satisfiable(&m, &contradiction).unwrap());
    assert!(!assume_satisfiable(&m, &crate::ir::Expr::konst(1, 0)).unwrap());
}
