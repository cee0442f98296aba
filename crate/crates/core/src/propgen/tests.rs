use super::*;
use crate::instrument::{instrument, parse_spec};
use crate::psl::{compile, parse_vunit, CompileOptions};
use crate::verilog::{elaborate, parse};

const B_SPEC: &str = include_str!("../../../../corpus/shared_port/B.spec");
const SHARED_PORT: &str = include_str!("../../../../corpus/shared_port/shared_port.v");
const PIPE_SPEC: &str = include_str!("../../../../corpus/pipeline/pipeline.spec");
const PIPE_CUTS: &str = include_str!("../../../../corpus/pipeline/pipeline.cuts");

fn b_spec() -> IntegritySpec {
    parse_spec(B_SPEC).unwrap()
}

fn asserts(g: &Generated) -> usize {
    parse_vunit(&g.text).unwrap().asserts().count()
}

fn assumes(g: &Generated) -> usize {
    parse_vunit(&g.text).unwrap().assumes().count()
}

#[test]
fn example_spec_yields_the_expected_units() {
    let s = b_spec();
    let [e, so, i] = <[Generated; 3]>::try_from(generate(&s, &EntityWidths::new())).unwrap();
    assert_eq!(
        (e.name.as_str(), e.stereotype),
        ("B_edetect", Stereotype::P0)
    );
    assert_eq!(asserts(&e), 3);
    assert!(e.text.contains(
        "property B_edetect__cs = always ((I_ERR_INJ_C[0] & ~(^I_ERR_INJ_D)) -> next HE);"
    ));
    assert!(e
        .text
        .contains("property B_edetect__I = always ( ~(^I) -> next HE);"));
    assert_eq!(
        (so.name.as_str(), so.stereotype),
        ("B_soundness", Stereotype::P1)
    );
    assert_eq!((assumes(&so), asserts(&so)), (2, 1));
    assert!(so.text.contains("always ( ~(|I_ERR_INJ_C) )"));
    assert_eq!(
        (i.name.as_str(), i.stereotype),
        ("B_integrity", Stereotype::P2)
    );
    assert_eq!((assumes(&i), asserts(&i)), (2, 1));
    for g in [&e, &so, &i] {
        assert!(g.warnings.is_empty(), "{:?}", g.warnings);
        assert_eq!(parse_vunit(&g.text).unwrap().stereotype(), g.stereotype);
    }
}

#[test]
fn generated_units_bind_to_the_instrumented_module() {
    let s = b_spec();
    let m = elaborate(&parse(SHARED_PORT).unwrap(), "B").unwrap();
    for g in generate(&s, &EntityWidths::new()) {
        let (_, c) = compile(
            &parse_vunit(&g.text).unwrap(),
            &m,
            CompileOptions::default(),
        )
        .unwrap();
        assert!(c.warnings.is_empty(), "{}: {:?}", g.name, c.warnings);
        assert!(c.obligations.iter().all(|o| o.stereotype == g.stereotype));
    }
}

#[test]
fn one_property_per_entity_and_group() {
    let mut text = String::from("module X\nhe HE\ned D 4\n");
    for k in 0..5 {
        text += &format!("entity counter c{k} ecbit {k}\n");
    }
    text += "input_parity P\ninput_parity Q\ninput_parity R\noutput_parity Y\noutput_parity Z\n";
    let s = parse_spec(&text).unwrap();
    let e = gen_edetect(&s, &EntityWidths::new());
    assert_eq!(asserts(&e), 8);
    for k in 0..5 {
        assert!(
            e.text.contains(&format!("(I_ERR_INJ_C[{k}] & ~(^D))")),
            "{}",
            e.text
        );
    }
    let so = gen_soundness(&s);
    assert_eq!((assumes(&so), asserts(&so)), (4, 1));
    let i = gen_integrity(&s);
    assert_eq!((assumes(&i), asserts(&i)), (4, 2));
}

#[test]
fn single_entity_uses_the_bare_control_bit() {
    let s = parse_spec("module X\nhe HE\ned D 4\nec C\nentity fsm a ecbit 0\n").unwrap();
    let e = gen_edetect(&s, &EntityWidths::new());
    assert!(
        e.text.contains("always ((C & ~(^D)) -> next HE)"),
        "{}",
        e.text
    );
    assert!(gen_soundness(&s).text.contains("always ( ~C )"));
}

#[test]
fn narrow_entities_check_their_data_bits() {
    let s = parse_spec("module X\nhe HE\ned D 6\nentity fsm a ecbit 0\nentity counter b ecbit 1\n")
        .unwrap();
    let widths: EntityWidths = [("a".to_string(), 3), ("b".to_string(), 6)].into();
    let e = gen_edetect(&s, &widths);
    assert!(
        e.text.contains("(I_ERR_INJ_C[0] & ~(^D[2:0]))"),
        "{}",
        e.text
    );
    assert!(e.text.contains("(I_ERR_INJ_C[1] & ~(^D))"), "{}", e.text);
}

#[test]
fn degenerate_specs_warn() {
    let s = parse_spec("module X\n").unwrap();
    let units = generate(&s, &EntityWidths::new());
    for g in &units {
        assert_eq!(g.warnings.len(), 1, "{}", g.name);
        assert_eq!(asserts(g), 0);
    }
    let s = parse_spec("module X\nhe HE\n").unwrap();
    let so = gen_soundness(&s);
    assert!(so.warnings.is_empty());
    assert_eq!((assumes(&so), asserts(&so)), (0, 1));
    // outputs only: integrity but no detection
    let s = parse_spec("module X\noutput_parity O\n").unwrap();
    assert_eq!(asserts(&gen_integrity(&s)), 1);
    assert!(!gen_edetect(&s, &EntityWidths::new()).warnings.is_empty());
}

#[test]
fn pipeline_partition_composes() {
    let s = parse_spec(PIPE_SPEC).unwrap();
    let cuts = parse_cuts(PIPE_CUTS).unwrap();
    assert_eq!(cuts.stages.len(), 4);
    assert_eq!(cuts.final_output, "D");
    let (units, report) = partition(&s, &cuts);
    assert!(report.ok(), "{report}");
    assert_eq!(report.order, ["sa", "sb", "sc", "sd"]);
    assert_eq!(units.len(), 4);
    let names: Vec<&str> = units.iter().map(|u| u.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "pipeline_integrity_sa",
            "pipeline_integrity_sb",
            "pipeline_integrity_sc",
            "pipeline_integrity_sd"
        ]
    );
    let last = parse_vunit(&units[3].text).unwrap();
    assert_eq!(last.assumed_signals(), ["A1", "BP", "C1"]);
    assert_eq!(last.stereotype(), Stereotype::P2);
    assert_eq!(report.to_string(), "composition ok: sa -> sb -> sc -> sd\n");
}

#[test]
fn single_stage_partition_is_the_plain_integrity_unit() {
    let s = parse_spec(PIPE_SPEC).unwrap();
    let cuts = parse_cuts("stage all in A,B,C out D\nfinal D\n").unwrap();
    let (units, report) = partition(&s, &cuts);
    assert!(report.ok());
    assert_eq!(
        units[0].text.replace("_integrity_all", "_integrity"),
        gen_integrity(&s).text
    );
}

#[test]
fn broken_cut_specs_are_reported() {
    let s = parse_spec(PIPE_SPEC).unwrap();
    let unsupported =
        parse_cuts("stage sa in A out A1\nstage sd in A1,X out D\nfinal D\n").unwrap();
    let r = check_composition(&s, &unsupported);
    assert!(!r.ok());
    assert!(
        r.problems[0].contains("unsupported assumption: stage `sd` assumes `X`"),
        "{r}"
    );

    let cyclic = parse_cuts("stage s1 in A,Y out X\nstage s2 in X out Y,D\nfinal D\n").unwrap();
    let r = check_composition(&s, &cyclic);
    assert!(
        r.problems
            .iter()
            .any(|p| p.contains("cyclic cut dependency among stages s1, s2")),
        "{r}"
    );

    let twice = parse_cuts("stage s1 in A out D\nstage s2 in B out D\nfinal D\n").unwrap();
    assert!(check_composition(&s, &twice).problems[0].contains("asserted by both"));

    let wrong_sink = parse_cuts("stage s1 in A out A1\nfinal A1\n").unwrap();
    assert!(check_composition(&s, &wrong_sink).problems[0].contains("not a protected output"));
    let no_sink = parse_cuts("stage s1 in A out A1\nfinal D\n").unwrap();
    assert!(check_composition(&s, &no_sink).problems[0].contains("asserted by no stage"));

    // out-of-order but acyclic stages are fine
    let reordered = parse_cuts("stage sd in A1,B out D\nstage sa in A out A1\nfinal D\n").unwrap();
    let r = check_composition(&s, &reordered);
    assert!(r.ok(), "{r}");
    assert_eq!(r.order, ["sa", "sd"]);
}

#[test]
fn cut_syntax_errors() {
    for (text, want) in [
        ("stage a in X\nfinal D\n", "line 1: expected `stage"),
        ("stage a in X out Y\n", "missing `final"),
        ("final D\n", "no stages"),
        (
            "stage a in X out Y\nstage a in Y out D\nfinal D\n",
            "duplicate stage",
        ),
        ("stage a in X out Y\nfinal D\nfinal Y\n", "given twice"),
        ("cut a\n", "unknown directive"),
    ] {
        let e = parse_cuts(text).unwrap_err().to_string();
        assert!(e.contains(want), "{text:?}: {e}");
    }
}

#[test]
fn generated_units_compile_for_every_corpus_spec() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");
    for name in [
        "fsm_parity",
        "reserved_field",
        "post_reset_input",
        "decoder91",
        "pipeline",
    ] {
        let v = std::fs::read_to_string(format!("{root}/{name}/{name}.v")).unwrap();
        let s = parse_spec(&std::fs::read_to_string(format!("{root}/{name}/{name}.spec")).unwrap())
            .unwrap();
        let m = instrument(&elaborate(&parse(&v).unwrap(), name).unwrap(), &s).unwrap();
        for g in generate(&s, &EntityWidths::new()) {
            if g.warnings.is_empty() {
                let (_, c) = compile(
                    &parse_vunit(&g.text).unwrap(),
                    &m,
                    CompileOptions::default(),
                )
                .unwrap_or_else(|e| panic!("{name}/{}: {e}", g.name));
                assert!(c.warnings.is_empty(), "{name}/{}: {:?}", g.name, c.warnings);
            }
        }
    }
}
