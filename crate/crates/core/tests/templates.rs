mod common;

use common::{fixture, normalize, read, template_diff};
use vrtl_core::engine::{check_safety, EngineKind, Limits, Verdict};
use vrtl_core::instrument::parse_spec;
use vrtl_core::propgen::{generate, EntityWidths};
use vrtl_core::psl::{compile, parse_vunit, CompileOptions};
use vrtl_core::verilog::{elaborate, parse};

#[test]
fn single_entity_units_match_the_listings() {
    let s = parse_spec(&fixture("templates/M.spec")).unwrap();
    for (g, file) in
        generate(&s, &EntityWidths::new())
            .iter()
            .zip(["M_edetect", "M_soundness", "M_integrity"])
    {
        let want = fixture(&format!("templates/{file}.psl"));
        assert_eq!(template_diff(&g.text, &want), None, "{file}\n{}", g.text);
    }
}

#[test]
fn single_entity_units_hold_on_a_correct_leaf() {
    let s = parse_spec(&fixture("templates/M.spec")).unwrap();
    let m = elaborate(&parse(&fixture("templates/M.v")).unwrap(), "M").unwrap();
    for g in generate(&s, &EntityWidths::new()) {
        let (m2, c) = compile(
            &parse_vunit(&g.text).unwrap(),
            &m,
            CompileOptions::default(),
        )
        .unwrap();
        assert!(c.warnings.is_empty(), "{:?}", c.warnings);
        for part in c.split() {
            let r = check_safety(&m2, &part, EngineKind::Both, &Limits::default()).unwrap();
            assert_eq!(
                r.verdict,
                Verdict::Holds,
                "{}",
                part.obligations[0].property
            );
        }
    }
}

/// Set `VRTL_BLESS=1` to rewrite the goldens after an intended change.
#[test]
fn example_units_match_goldens() {
    let s = parse_spec(&read("shared_port/B.spec")).unwrap();
    for g in generate(&s, &EntityWidths::new()) {
        let rel = format!("shared_port/golden/{}.psl", g.name);
        if std::env::var_os("VRTL_BLESS").is_some() {
            std::fs::write(common::corpus(&rel), &g.text).unwrap();
        }
        let want = read(&rel);
        assert_eq!(g.text, want, "{rel}");
        assert_eq!(normalize(&g.text), normalize(&want));
    }
}
