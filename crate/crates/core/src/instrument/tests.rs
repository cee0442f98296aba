use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::engine::{equiv_check, EngineKind, Limits, Verdict};
use crate::ir::{mask, Assignment, Expr};
use crate::verilog::{elaborate, parse, print};

const LEAF_B: &str = include_str!("../../../../corpus/shared_port/B.v");
const SHARED_PORT: &str = include_str!("../../../../corpus/shared_port/shared_port.v");
const B_SPEC: &str = include_str!("../../../../corpus/shared_port/B.spec");
const FSM: &str = include_str!("../../../../corpus/fsm_parity/fsm_parity.v");
const FSM_SPEC: &str = include_str!("../../../../corpus/fsm_parity/fsm_parity.spec");

fn leaf() -> ModuleIr {
    elaborate(&parse(LEAF_B).unwrap(), "B").unwrap()
}

fn holds(a: &ModuleIr, b: &ModuleIr) -> bool {
    equiv_check(a, b, EngineKind::Forward, &Limits::default())
        .unwrap()
        .verdict
        == Verdict::Holds
}

const WIDE: &str = "
module W(CK, RESET, I, HE);
  input CK, RESET;
  input [5:0] I;
  output HE;
  reg [3:0] a;
  reg [5:0] b;
  reg [2:0] c;
  always @(posedge CK or posedge RESET)
    if (RESET) begin a <= 4'b1000; b <= 6'b100000; c <= 3'b100; end
    else begin a <= I[3:0]; b <= I; c <= I[2:0]; end
  assign HE = ~^a | ~^b | ~^c;
endmodule
";

#[test]
fn parses_the_example_spec() {
    let s = parse_spec(B_SPEC).unwrap();
    assert_eq!(s.module, "B");
    assert_eq!(s.he.as_deref(), Some("HE"));
    assert_eq!(s.ed, Some(("I_ERR_INJ_D".to_string(), 4)));
    assert_eq!(s.ec_name(), "I_ERR_INJ_C");
    let ents: Vec<(EntityKind, &str, u32)> = s
        .entities
        .iter()
        .map(|e| (e.kind, e.signal.as_str(), e.ecbit))
        .collect();
    assert_eq!(
        ents,
        [(EntityKind::Fsm, "cs", 0), (EntityKind::Counter, "cnt", 1)]
    );
    assert_eq!(s.inputs.len(), 1);
    assert_eq!(s.outputs.len(), 1);
    s.bind(&leaf(), false).unwrap();
    assert_eq!(
        parse_spec(&s.to_string()).unwrap().to_string(),
        s.to_string()
    );
}

#[test]
fn spec_without_entities_is_valid() {
    let s = parse_spec("module B\n# only an output group\noutput_parity O odd\n").unwrap();
    assert!(s.entities.is_empty());
    assert_eq!(s.ec_width(), 0);
    s.bind(&leaf(), false).unwrap();
}

#[test]
fn spec_syntax_errors() {
    let cases = [
        ("he HE\n", "missing `module`"),
        ("module B\nfoo x\n", "line 2: unknown directive `foo`"),
        (
            "module B\nhe HE\ned D 4\nentity fsm cs ecbit 0\nentity counter cs ecbit 1\n",
            "duplicate entity `cs`",
        ),
        (
            "module B\nhe HE\ned D 4\nentity fsm cs ecbit 0\nentity counter cnt ecbit 2\n",
            "bit 1 is unused",
        ),
        (
            "module B\nhe HE\ned D 4\nentity fsm cs ecbit 0\nentity counter cnt ecbit 0\n",
            "already used by `cs`",
        ),
        ("module B\ninput_parity I even\n", "only odd parity"),
        ("module B\nentity fsm cs ecbit 0\n", "`ed <port> <width>`"),
        ("module B\nentity latch cs ecbit 0\n", "`fsm` or `counter`"),
        ("module B\ned D 0\n", "bad width"),
        ("module B\nmodule C\n", "`module` given twice"),
    ];
    for (text, want) in cases {
        let e = parse_spec(text).unwrap_err().to_string();
        assert!(e.contains(want), "{text:?}: {e}");
    }
}

#[test]
fn bind_checks_names_and_widths() {
    let m = leaf();
    let e = parse_spec("module B\noutput_parity Q\n")
        .unwrap()
        .bind(&m, false)
        .unwrap_err();
    assert!(e.to_string().contains("unknown signal `Q`"));
    let e = parse_spec("module B\nhe O\n")
        .unwrap()
        .bind(&m, false)
        .unwrap_err();
    assert!(e.to_string().contains("must be 1 bit wide"));
    let e = parse_spec("module B\nhe HE\ned D 4\nentity fsm ns ecbit 0\n")
        .unwrap()
        .bind(&m, false)
        .unwrap_err();
    assert!(e.to_string().contains("not a register"), "{e}");
    let e = parse_spec("module C\n")
        .unwrap()
        .bind(&m, false)
        .unwrap_err();
    assert!(e.to_string().contains("design is `B`"));

    let w = elaborate(&parse(WIDE).unwrap(), "W").unwrap();
    let spec = |ed: u32| {
        parse_spec(&format!(
            "module W\nhe HE\ned D {ed}\nentity fsm a ecbit 0\nentity counter b ecbit 1\n"
        ))
        .unwrap()
    };
    let e = spec(4).bind(&w, false).unwrap_err();
    assert!(e.to_string().contains("widest entity (6 bits)"), "{e}");
    spec(6).bind(&w, false).unwrap();
}

#[test]
fn instrumented_leaf_matches_hand_written_version() {
    let s = parse_spec(B_SPEC).unwrap();
    let mine = instrument(&leaf(), &s).unwrap();
    let hand = elaborate(&parse(SHARED_PORT).unwrap(), "B").unwrap();
    assert_eq!(mine.state_bits(), 8);
    assert!(holds(&mine, &hand));
    let cs = mine.register("cs").unwrap();
    assert_eq!(
        cs.next_expr,
        Expr::mux(
            Expr::sig("I_ERR_INJ_C").bit(0),
            Expr::sig("I_ERR_INJ_D"),
            Expr::sig("ns")
        )
    );
    assert_eq!(cs.reset_value.value, 0b1000);
}

#[test]
fn source_instrumentation_reads_like_the_hand_edit() {
    let s = parse_spec(B_SPEC).unwrap();
    let file = instrument_source(&parse(LEAF_B).unwrap(), &s).unwrap();
    let text = print(&file);
    assert!(text.contains("input [1:0] I_ERR_INJ_C;"), "{text}");
    assert!(text.contains("input [3:0] I_ERR_INJ_D;"), "{text}");
    assert!(text.contains("else if (I_ERR_INJ_C[0])"), "{text}");
    assert!(text.contains("cnt <= I_ERR_INJ_D;"), "{text}");
    let back = elaborate(&parse(&text).unwrap(), "B").unwrap();
    let hand = elaborate(&parse(SHARED_PORT).unwrap(), "B").unwrap();
    assert!(holds(&back, &hand));
    assert!(holds(&back, &instrument(&leaf(), &s).unwrap()));
}

#[test]
fn shared_blocks_get_a_trailing_override() {
    let s = parse_spec("module W\nhe HE\ned D 6\nec C\nentity fsm a ecbit 0\nentity counter b ecbit 1\nentity counter c ecbit 2\n").unwrap();
    let file = instrument_source(&parse(WIDE).unwrap(), &s).unwrap();
    let text = print(&file);
    assert!(text.contains("if (C[2])"), "{text}");
    assert!(text.contains("c <= D[2:0];"), "{text}");
    let via_source = elaborate(&file, "W").unwrap();
    let via_ir = instrument(&elaborate(&parse(WIDE).unwrap(), "W").unwrap(), &s).unwrap();
    assert!(holds(&via_source, &via_ir));
}

#[test]
fn narrow_entities_take_the_low_data_bits() {
    let s = parse_spec("module W\nhe HE\ned D 6\nec C\nentity fsm a ecbit 0\nentity counter b ecbit 1\nentity counter c ecbit 2\n").unwrap();
    let m = instrument(&elaborate(&parse(WIDE).unwrap(), "W").unwrap(), &s).unwrap();
    let state = m.reset_state();
    for ed in [0b101101u64, 0b010010, 0b111111] {
        let inputs: Assignment = [("I".into(), 0), ("C".into(), 0b111), ("D".into(), ed)].into();
        let (_, next) = m.interpret(&state, &inputs).unwrap();
        assert_eq!(next["a"], ed & 0xf);
        assert_eq!(next["b"], ed);
        assert_eq!(next["c"], ed & 0x7);
    }
}

#[test]
fn injection_is_per_entity_and_only_when_selected() {
    let s = parse_spec(FSM_SPEC).unwrap();
    let base = elaborate(&parse(FSM).unwrap(), "fsm_parity").unwrap();
    let m = instrument(&base, &s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let state: Assignment = m
            .registers
            .iter()
            .map(|r| (r.name.clone(), rng.gen::<u64>() & mask(r.width)))
            .collect();
        let mut inputs: Assignment = base
            .inputs
            .iter()
            .map(|p| (p.name.clone(), rng.gen::<u64>() & mask(p.width)))
            .collect();
        let ed = rng.gen::<u64>() & 0xf;
        inputs.insert("I_ERR_INJ_D".into(), ed);
        inputs.insert("I_ERR_INJ_C".into(), 0);
        let (_, plain) = m.interpret(&state, &inputs).unwrap();
        let (_, orig) = base
            .interpret(
                &state,
                &inputs
                    .iter()
                    .filter(|(k, _)| !k.starts_with("I_ERR"))
                    .map(|(k, v)| (k.clone(), *v))
                    .collect(),
            )
            .unwrap();
        assert_eq!(plain, orig);
        for e in &s.entities {
            inputs.insert("I_ERR_INJ_C".into(), 1 << e.ecbit);
            let (_, inj) = m.interpret(&state, &inputs).unwrap();
            for (reg, v) in &inj {
                if *reg == e.signal {
                    assert_eq!(*v, ed);
                } else {
                    assert_eq!(*v, plain[reg], "injecting {} disturbed {reg}", e.signal);
                }
            }
        }
    }
}

#[test]
fn double_instrumentation_is_rejected() {
    let s = parse_spec(B_SPEC).unwrap();
    let once = instrument(&leaf(), &s).unwrap();
    let e = instrument(&once, &s).unwrap_err();
    assert!(
        e.to_string()
            .contains("already has a port named `I_ERR_INJ_C`"),
        "{e}"
    );
    s.bind(&once, true).unwrap();
    assert!(s.bind(&leaf(), true).is_err());
}

#[test]
fn no_entities_means_no_change() {
    let s = parse_spec("module B\noutput_parity O\n").unwrap();
    assert_eq!(instrument(&leaf(), &s).unwrap(), leaf());
    let r = overhead_report(&leaf(), &leaf(), &s).unwrap();
    assert_eq!((r.mux_bits, r.port_bits), (0, 0));
    assert_eq!(r.increase_pct(), 0.0);
}

#[test]
fn overhead_counts_mux_and_port_bits() {
    let s = parse_spec(B_SPEC).unwrap();
    let after = instrument(&leaf(), &s).unwrap();
    let r = overhead_report(&leaf(), &after, &s).unwrap();
    assert_eq!(r.mux_bits, 8);
    assert_eq!(r.port_bits, 6);
    assert!(r.nodes_after > r.nodes_before);
    let text = r.to_string();
    assert!(
        text.starts_with("module B\nmux_bits 8\nport_bits 6\n"),
        "{text}"
    );
}

#[test]
fn tie_offs_restore_the_original_behaviour() {
    let s = parse_spec(B_SPEC).unwrap();
    let after = instrument(&leaf(), &s).unwrap();
    let tied = tie_off_inputs(&after, &["I_ERR_INJ_C", "I_ERR_INJ_D"]).unwrap();
    assert_eq!(tied.inputs, leaf().inputs);
    assert!(holds(&tied, &leaf()));

    let mut file = parse(SHARED_PORT).unwrap();
    let before = file.clone();
    assert_eq!(tie_off_instances(&mut file, "A", &s).unwrap(), 1);
    assert_eq!(file, before, "already tied");
    assert!(tie_off_instances(&mut file, "B", &s).is_err());
}

#[test]
fn generated_wrapper_ties_and_passes_through() {
    let s = parse_spec(B_SPEC).unwrap();
    let src = parse(LEAF_B).unwrap();
    let mut file = instrument_source(&src, &s).unwrap();
    let w = generate_wrapper(src.module("B").unwrap(), &s, "A").unwrap();
    file.modules.insert(0, w);
    let text = print(&file);
    assert!(text.contains("B B_in_A ("), "{text}");
    assert!(text.contains(".I_ERR_INJ_C(2'b00)"), "{text}");
    assert!(text.contains(".I_ERR_INJ_D(4'b0000)"), "{text}");
    let wrapped = elaborate(&parse(&text).unwrap(), "A").unwrap();
    assert!(holds(&wrapped, &leaf()));
}
