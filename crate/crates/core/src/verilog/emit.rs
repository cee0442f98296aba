//! Rendering a [`ModuleIr`] back to the accepted Verilog subset.

use std::collections::HashSet;

use super::ast::*;
use crate::ir::{expr_width, BinaryOp, Expr, ModuleIr, UnaryOp};
use crate::syntax::{SBinary, SExpr, SUnary};

/// Names chosen for the clock and reset ports of an emitted module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockReset {
    pub clock: String,
    pub reset: String,
}

pub fn emit_verilog(m: &ModuleIr) -> String {
    let (decl, _) = emit_module(m);
    let mut s = String::new();
    super::print::print_module(&mut s, &decl);
    s
}

fn fresh(base: &str, used: &HashSet<String>) -> String {
    let mut n = base.to_string();
    while used.contains(&n) {
        n.push('_');
    }
    n
}

fn range(w: u32) -> Option<(u32, u32)> {
    (w > 1).then_some((w - 1, 0))
}

fn decl(kind: DeclKind, w: u32, name: &str) -> Item {
    Item::Decl(Decl {
        kind,
        range: range(w),
        names: vec![name.to_string()],
        init: None,
        loc: Loc::default(),
    })
}

struct Emitter<'m> {
    m: &'m ModuleIr,
    used: HashSet<String>,
    temps: Vec<(String, u32, SExpr)>,
}

impl Emitter<'_> {
    fn width(&self, e: &Expr) -> u32 {
        expr_width(e, &|n| self.m.signal(n).map(|(_, w)| w)).expect("validated module")
    }

    fn hoist(&mut self, e: &Expr) -> SExpr {
        if let Expr::Ref(n) = e {
            return SExpr::Ident(n.clone());
        }
        let name = fresh(&format!("_t{}", self.temps.len()), &self.used);
        self.used.insert(name.clone());
        let w = self.width(e);
        let s = self.expr(e);
        self.temps.push((name.clone(), w, s));
        SExpr::Ident(name)
    }

    fn expr(&mut self, e: &Expr) -> SExpr {
        match e {
            Expr::Const(c) => SExpr::sized(c.width, c.value),
            Expr::Ref(n) => SExpr::Ident(n.clone()),
            Expr::Bit(x, i) => self.hoist(x).index(*i),
            Expr::Part(x, m, l) => self.hoist(x).range(*m, *l),
            Expr::Concat(xs) => SExpr::Concat(xs.iter().map(|x| self.expr(x)).collect()),
            Expr::Unary(op, x) => {
                let op = match op {
                    UnaryOp::Not => SUnary::Not,
                    UnaryOp::RedXor => SUnary::RedXor,
                    UnaryOp::RedAnd => SUnary::RedAnd,
                    UnaryOp::RedOr => SUnary::RedOr,
                    UnaryOp::LNot => SUnary::LNot,
                };
                SExpr::unary(op, self.expr(x))
            }
            Expr::Binary(op, a, b) => {
                let op = match op {
                    BinaryOp::And => SBinary::And,
                    BinaryOp::Or => SBinary::Or,
                    BinaryOp::Xor => SBinary::Xor,
                    BinaryOp::LAnd => SBinary::LAnd,
                    BinaryOp::LOr => SBinary::LOr,
                    BinaryOp::Eq => SBinary::Eq,
                    BinaryOp::Ne => SBinary::Ne,
                    BinaryOp::Add => SBinary::Add,
                };
                SExpr::binary(op, self.expr(a), self.expr(b))
            }
            Expr::Mux(s, a, b) => SExpr::Ternary(
                Box::new(self.expr(s)),
                Box::new(self.expr(a)),
                Box::new(self.expr(b)),
            ),
            Expr::Case { sel, arms, default } => {
                let sel = self.expr(sel);
                let mut acc = self.expr(default);
                for arm in arms.iter().rev() {
                    let cond = arm
                        .labels
                        .iter()
                        .map(|l| {
                            SExpr::binary(SBinary::Eq, sel.clone(), SExpr::sized(l.width, l.value))
                        })
                        .reduce(|a, b| SExpr::binary(SBinary::LOr, a, b));
                    let value = self.expr(&arm.value);
                    acc = match cond {
                        Some(c) => SExpr::Ternary(Box::new(c), Box::new(value), Box::new(acc)),
                        None => acc,
                    };
                }
                acc
            }
        }
    }

    fn assign(lhs: &str, rhs: SExpr, blocking: bool) -> Stmt {
        Stmt::Assign {
            lhs: lhs.to_string(),
            rhs,
            blocking,
            loc: Loc::default(),
        }
    }

    /// A top-level mux chain becomes an if/else-if chain.
    fn next_stmt(&mut self, reg: &str, e: &Expr) -> Stmt {
        match e {
            Expr::Mux(s, a, b) => Stmt::If {
                cond: self.expr(s),
                then: Box::new(Self::assign(reg, self.expr(a), false)),
                otherwise: Some(Box::new(self.next_stmt(reg, b))),
                loc: Loc::default(),
            },
            _ => Self::assign(reg, self.expr(e), false),
        }
    }
}

/// Builds the AST of `m` plus the clock/reset port names, which exist only
/// when the module has registers.
pub fn emit_module(m: &ModuleIr) -> (ModuleDecl, Option<ClockReset>) {
    let mut used: HashSet<String> = m
        .inputs
        .iter()
        .map(|p| p.name.clone())
        .chain(m.registers.iter().map(|r| r.name.clone()))
        .chain(m.nets.iter().map(|n| n.name.clone()))
        .collect();
    let clock = fresh("CK", &used);
    used.insert(clock.clone());
    let reset = fresh("RESET", &used);
    used.insert(reset.clone());
    let mut em = Emitter {
        m,
        used,
        temps: Vec::new(),
    };

    let has_regs = !m.registers.is_empty();
    let mut ports = Vec::new();
    let mut items = Vec::new();
    if has_regs {
        for n in [&clock, &reset] {
            ports.push(PortItem::Name(n.clone()));
            items.push(decl(DeclKind::Input, 1, n));
        }
    }
    for p in &m.inputs {
        ports.push(PortItem::Name(p.name.clone()));
        items.push(decl(DeclKind::Input, p.width, &p.name));
    }
    for p in &m.outputs {
        ports.push(PortItem::Name(p.name.clone()));
        items.push(decl(DeclKind::Output, p.width, &p.name));
    }
    let is_output = |n: &str| m.outputs.iter().any(|p| p.name == n);

    let mut body = Vec::new();
    for r in &m.registers {
        items.push(decl(DeclKind::Reg, r.width, &r.name));
    }
    for n in &m.nets {
        match &n.expr {
            Expr::Case { sel, arms, default } => {
                items.push(decl(DeclKind::Reg, n.width, &n.name));
                let sel = em.expr(sel);
                let case_items = arms
                    .iter()
                    .map(|a| CaseItem {
                        labels: a
                            .labels
                            .iter()
                            .map(|l| SExpr::sized(l.width, l.value))
                            .collect(),
                        body: Emitter::assign(&n.name, em.expr(&a.value), true),
                    })
                    .collect();
                let d = Emitter::assign(&n.name, em.expr(default), true);
                body.push(Item::Always {
                    sens: Sensitivity::Star,
                    body: Stmt::Case {
                        sel,
                        items: case_items,
                        default: Box::new(d),
                        loc: Loc::default(),
                    },
                    loc: Loc::default(),
                });
            }
            e => {
                if !is_output(&n.name) {
                    items.push(decl(DeclKind::Wire, n.width, &n.name));
                }
                let rhs = em.expr(e);
                body.push(Item::Assign {
                    lhs: n.name.clone(),
                    rhs,
                    loc: Loc::default(),
                });
            }
        }
    }
    for r in &m.registers {
        let reset_stmt =
            Emitter::assign(&r.name, SExpr::sized(r.width, r.reset_value.value), false);
        let next = em.next_stmt(&r.name, &r.next_expr);
        body.push(Item::Always {
            sens: Sensitivity::Edges(vec![(Edge::Pos, clock.clone()), (Edge::Pos, reset.clone())]),
            body: Stmt::If {
                cond: SExpr::Ident(reset.clone()),
                then: Box::new(reset_stmt),
                otherwise: Some(Box::new(next)),
                loc: Loc::default(),
            },
            loc: Loc::default(),
        });
    }
    for (name, w, e) in std::mem::take(&mut em.temps) {
        items.push(decl(DeclKind::Wire, w, &name));
        body.push(Item::Assign {
            lhs: name,
            rhs: e,
            loc: Loc::default(),
        });
    }
    items.extend(body);
    (
        ModuleDecl {
            name: m.name.clone(),
            ports,
            items,
            loc: Loc::default(),
        },
        has_regs.then_some(ClockReset { clock, reset }),
    )
}
