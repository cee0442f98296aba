use vrtl_core::instrument::{instrument_source, parse_spec, IntegritySpec};
use vrtl_core::ir::ModuleIr;
use vrtl_core::propgen::{generate, EntityWidths};
use vrtl_core::psl::{compile, parse_vunit, CompileOptions, SafetyCheck, Stereotype};
use vrtl_core::verilog::{elaborate, parse};

use super::read;

/// Seeded-bug designs and the stereotypes their buggy variant must
/// violate.
pub const SEEDED: [(&str, &[Stereotype]); 4] = [
    ("reserved_field", &[Stereotype::P1]),
    ("decoder91", &[Stereotype::P2]),
    ("post_reset_input", &[Stereotype::P0]),
    ("fsm_parity", &[Stereotype::P0, Stereotype::P1]),
];

/// One asserted property ready for an engine.
pub struct Prepared {
    pub property: String,
    pub stereotype: Stereotype,
    pub module: ModuleIr,
    pub check: SafetyCheck,
}

pub fn spec(design: &str) -> IntegritySpec {
    parse_spec(&read(&format!("{design}/{design}.spec"))).unwrap()
}

pub fn original(design: &str, file: &str) -> ModuleIr {
    elaborate(
        &parse(&read(&format!("{design}/{file}.v"))).unwrap(),
        design,
    )
    .unwrap()
}

/// Source-level instrumentation of `file`, then every generated vunit
/// compiled and split per property.
pub fn prepare(design: &str, file: &str) -> Vec<Prepared> {
    let s = spec(design);
    let src = parse(&read(&format!("{design}/{file}.v"))).unwrap();
    let orig = elaborate(&src, design).unwrap();
    let widths: EntityWidths = s
        .entities
        .iter()
        .map(|e| (e.signal.clone(), orig.register(&e.signal).unwrap().width))
        .collect();
    let m = elaborate(&instrument_source(&src, &s).unwrap(), design).unwrap();
    let mut out = Vec::new();
    for g in generate(&s, &widths)
        .into_iter()
        .filter(|g| g.warnings.is_empty())
    {
        let (m2, c) = compile(
            &parse_vunit(&g.text).unwrap(),
            &m,
            CompileOptions::default(),
        )
        .unwrap();
        assert!(c.warnings.is_empty(), "{file}: {:?}", c.warnings);
        for part in c.split() {
            out.push(Prepared {
                property: part.obligations[0].property.clone(),
                stereotype: part.obligations[0].stereotype,
                module: m2.clone(),
                check: part,
            });
        }
    }
    out
}

/// The shared_port leaf as written by hand, with the golden vunits.
pub fn prepare_shared_port() -> Vec<Prepared> {
    let m = elaborate(&parse(&read("shared_port/shared_port.v")).unwrap(), "B").unwrap();
    let mut out = Vec::new();
    for unit in ["B_edetect", "B_soundness", "B_integrity"] {
        let v = parse_vunit(&read(&format!("shared_port/golden/{unit}.psl"))).unwrap();
        let (m2, c) = compile(&v, &m, CompileOptions::default()).unwrap();
        for part in c.split() {
            out.push(Prepared {
                property: part.obligations[0].property.clone(),
                stereotype: part.obligations[0].stereotype,
                module: m2.clone(),
                check: part,
            });
        }
    }
    out
}
