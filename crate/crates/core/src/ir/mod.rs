//! Word-level netlist IR shared by every pass.

mod expr;
mod module;
pub mod text;

pub use expr::{eval, mask, to_binary, BinaryOp, BitVec, CaseArm, Expr, UnaryOp, MAX_WIDTH};
#[allow(unused_imports)]
pub(crate) use module::expr_width;
pub use module::{Assignment, ModuleIr, Net, Port, RegisterDef, SignalKind, Simulator};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("width mismatch in `{signal}`: {detail}")]
    WidthMismatch { signal: String, detail: String },
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error("unknown signal `{signal}` referenced from {context}")]
    UnknownSignal { signal: String, context: String },
    #[error("signal `{0}` declared more than once")]
    DuplicateSignal(String),
    #[error("bad assignment: {0}")]
    Assignment(String),
    #[error("IR text line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter() -> ModuleIr {
        let mut m = ModuleIr::new("ctr");
        m.inputs.push(Port::new("en", 1));
        m.registers.push(RegisterDef {
            name: "c".into(),
            width: 4,
            reset_value: BitVec::new(4, 0b1111),
            next_expr: Expr::mux(
                Expr::sig("en"),
                Expr::binary(BinaryOp::Add, Expr::sig("c"), Expr::konst(4, 1)),
                Expr::sig("c"),
            ),
        });
        m.nets.push(Net {
            name: "p".into(),
            width: 1,
            expr: Expr::unary(UnaryOp::RedXor, Expr::sig("c")),
        });
        m.outputs.push(Port::new("p", 1));
        m
    }

    fn assign(pairs: &[(&str, u64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn add_wraps_modulo_width() {
        let m = counter();
        let (_, next) = m
            .interpret(&assign(&[("c", 0b1111)]), &assign(&[("en", 1)]))
            .unwrap();
        assert_eq!(next["c"], 0);
    }

    #[test]
    fn reduction_xor_of_single_bit() {
        let m = counter();
        let (out, _) = m
            .interpret(&assign(&[("c", 0b1000)]), &assign(&[("en", 0)]))
            .unwrap();
        assert_eq!(out["p"], 1);
    }

    #[test]
    fn pure_wire_passes_zero() {
        let mut m = ModuleIr::new("w");
        m.inputs.push(Port::new("I", 4));
        m.nets.push(Net {
            name: "O".into(),
            width: 4,
            expr: Expr::sig("I"),
        });
        m.outputs.push(Port::new("O", 4));
        let (out, next) = m
            .interpret(&Assignment::new(), &assign(&[("I", 0)]))
            .unwrap();
        assert_eq!(out["O"], 0);
        assert!(next.is_empty());
    }

    #[test]
    fn missing_and_extra_assignments_are_rejected() {
        let m = counter();
        assert!(matches!(
            m.interpret(&Assignment::new(), &assign(&[("en", 0)])),
            Err(IrError::Assignment(_))
        ));
        assert!(matches!(
            m.interpret(&assign(&[("c", 0)]), &assign(&[("en", 0), ("x", 1)])),
            Err(IrError::Assignment(_))
        ));
        assert!(matches!(
            m.interpret(&assign(&[("c", 16)]), &assign(&[("en", 0)])),
            Err(IrError::Assignment(_))
        ));
    }

    #[test]
    fn width_mismatch_names_signal() {
        let mut m = counter();
        m.nets.push(Net {
            name: "bad".into(),
            width: 4,
            expr: Expr::and(Expr::sig("c"), Expr::sig("en")),
        });
        match m.validate() {
            Err(IrError::WidthMismatch { signal, .. }) => assert_eq!(signal, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn combinational_cycle_is_reported() {
        let mut m = ModuleIr::new("loop");
        m.nets.push(Net {
            name: "a".into(),
            width: 1,
            expr: Expr::not(Expr::sig("b")),
        });
        m.nets.push(Net {
            name: "b".into(),
            width: 1,
            expr: Expr::sig("a"),
        });
        assert!(matches!(m.validate(), Err(IrError::CombinationalCycle(_))));
    }

    #[test]
    fn unknown_reference_is_reported() {
        let mut m = ModuleIr::new("u");
        m.nets.push(Net {
            name: "a".into(),
            width: 1,
            expr: Expr::sig("ghost"),
        });
        match m.validate() {
            Err(IrError::UnknownSignal { signal, context }) => {
                assert_eq!(signal, "ghost");
                assert_eq!(context, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fold_propagates_tied_constants() {
        let mut m = ModuleIr::new("t");
        m.inputs.push(Port::new("d", 4));
        m.nets.push(Net {
            name: "ec".into(),
            width: 2,
            expr: Expr::konst(2, 0),
        });
        m.nets.push(Net {
            name: "ns".into(),
            width: 4,
            expr: Expr::sig("d"),
        });
        m.registers.push(RegisterDef {
            name: "cs".into(),
            width: 4,
            reset_value: BitVec::new(4, 8),
            next_expr: Expr::mux(Expr::sig("ec").bit(0), Expr::sig("d"), Expr::sig("ns")),
        });
        m.fold_constants().unwrap();
        assert_eq!(m.registers[0].next_expr, Expr::sig("ns"));
    }

    #[test]
    fn cut_turns_register_into_input() {
        let m = counter().cut(&["c".to_string()]).unwrap();
        assert!(m.registers.is_empty());
        assert_eq!(m.signal("c"), Some((SignalKind::Input, 4)));
        m.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut m = counter();
        m.nets.push(Net {
            name: "dec".into(),
            width: 2,
            expr: Expr::Case {
                sel: Box::new(Expr::sig("c").part(1, 0)),
                arms: vec![CaseArm {
                    labels: vec![BitVec::new(2, 1), BitVec::new(2, 2)],
                    value: Expr::Concat(vec![Expr::sig("en"), Expr::sig("p")]),
                }],
                default: Box::new(Expr::konst(2, 3)),
            },
        });
        let text = text::dump(&m);
        let back = text::read(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(text::dump(&back), text);
    }
}
