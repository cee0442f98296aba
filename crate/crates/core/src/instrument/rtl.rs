use std::fmt;

use thiserror::Error;

use super::{IntegritySpec, SpecError};
use crate::ir::{Expr, IrError, ModuleIr, Net, Port};
use crate::netlist::{bitblast, NetlistError};
use crate::syntax::SExpr;
use crate::verilog::{
    elaborate, Conn, Decl, DeclKind, Instance, Item, Loc, ModuleDecl, PortItem, Sensitivity,
    SourceFile, Stmt, VerilogError,
};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Verilog(#[from] VerilogError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("{0}")]
    Source(String),
}

fn entity_width(m: &ModuleIr, name: &str) -> u32 {
    m.register(name).map(|r| r.width).expect("bound entity")
}

/// Adds the control and data ports and puts an injection mux in front of
/// each entity's next-state function. Reset values are untouched, so the
/// priority is reset, then injection, then normal update.
pub fn instrument(m: &ModuleIr, s: &IntegritySpec) -> Result<ModuleIr, SpecError> {
    s.bind(m, false)?;
    if s.entities.is_empty() {
        return Ok(m.clone());
    }
    let mut out = m.clone();
    let (n, w) = (s.ec_width(), s.ed_width());
    out.inputs.push(Port::new(s.ec_name(), n));
    out.inputs.push(Port::new(s.ed_name(), w));
    for e in &s.entities {
        let wk = entity_width(m, &e.signal);
        let sel = if n == 1 {
            Expr::sig(s.ec_name())
        } else {
            Expr::sig(s.ec_name()).bit(e.ecbit)
        };
        let data = if wk == w {
            Expr::sig(s.ed_name())
        } else {
            Expr::sig(s.ed_name()).part(wk - 1, 0)
        };
        let r = out
            .registers
            .iter_mut()
            .find(|r| r.name == e.signal)
            .expect("bound entity");
        let normal = std::mem::replace(&mut r.next_expr, Expr::konst(1, 0));
        r.next_expr = Expr::mux(sel, data, normal);
    }
    Ok(out)
}

fn range_of(w: u32) -> Option<(u32, u32)> {
    (w > 1).then_some((w - 1, 0))
}

fn assigns(s: &Stmt, name: &str) -> bool {
    match s {
        Stmt::Assign { lhs, .. } => lhs == name,
        Stmt::Block(b) => b.iter().any(|x| assigns(x, name)),
        Stmt::If {
            then, otherwise, ..
        } => assigns(then, name) || otherwise.as_deref().is_some_and(|o| assigns(o, name)),
        Stmt::Case { items, default, .. } => {
            items.iter().any(|i| assigns(&i.body, name)) || assigns(default, name)
        }
        Stmt::Empty => false,
    }
}

/// Reset-guarded `if` at the top of a sequential block.
fn reset_if(body: &mut Stmt) -> Option<&mut Stmt> {
    if matches!(body, Stmt::Block(b) if b.len() == 1) {
        let Stmt::Block(b) = body else { unreachable!() };
        return reset_if(&mut b[0]);
    }
    matches!(body, Stmt::If { .. }).then_some(body)
}

fn inject_stmt(operate: Option<Box<Stmt>>, reg: &str, sel: SExpr, data: SExpr) -> Stmt {
    let inject = Stmt::Assign {
        lhs: reg.to_string(),
        rhs: data,
        blocking: false,
        loc: Loc::default(),
    };
    match operate {
        // a lone update of the entity becomes an `else if` chain
        Some(op) if matches!(&*op, Stmt::Assign { lhs, .. } if lhs == reg) => Stmt::If {
            cond: sel,
            then: Box::new(inject),
            otherwise: Some(op),
            loc: Loc::default(),
        },
        // otherwise a trailing override: the last non-blocking write wins
        Some(op) => {
            let guard = Stmt::If {
                cond: sel,
                then: Box::new(inject),
                otherwise: None,
                loc: Loc::default(),
            };
            match *op {
                Stmt::Block(mut b) => {
                    b.push(guard);
                    Stmt::Block(b)
                }
                other => Stmt::Block(vec![other, guard]),
            }
        }
        None => Stmt::If {
            cond: sel,
            then: Box::new(inject),
            otherwise: None,
            loc: Loc::default(),
        },
    }
}

/// Source-level counterpart of [`instrument`]: edits the leaf's
/// declaration in `file`, leaving everything else as written.
pub fn instrument_source(
    file: &SourceFile,
    s: &IntegritySpec,
) -> Result<SourceFile, InstrumentError> {
    let m = elaborate(file, &s.module)?;
    s.bind(&m, false)?;
    let mut out = file.clone();
    if s.entities.is_empty() {
        return Ok(out);
    }
    let decl = out.module_mut(&s.module).expect("elaborated module exists");
    let (n, w) = (s.ec_width(), s.ed_width());
    let ansi = decl.ports.iter().any(|p| matches!(p, PortItem::Decl(_)));
    let new_ports = [(s.ec_name().to_string(), n), (s.ed_name().to_string(), w)];
    let mut at = decl
        .items
        .iter()
        .rposition(|i| matches!(i, Item::Decl(d) if d.kind == DeclKind::Input))
        .map_or(0, |p| p + 1);
    for (name, width) in &new_ports {
        let d = Decl {
            kind: DeclKind::Input,
            range: range_of(*width),
            names: vec![name.clone()],
            init: None,
            loc: Loc::default(),
        };
        if ansi {
            decl.ports.push(PortItem::Decl(d));
        } else {
            decl.ports.push(PortItem::Name(name.clone()));
            decl.items.insert(at, Item::Decl(d));
            at += 1;
        }
    }
    for e in s.entities_by_bit() {
        let wk = entity_width(&m, &e.signal);
        let sel = if n == 1 {
            SExpr::Ident(s.ec_name().into())
        } else {
            SExpr::Ident(s.ec_name().into()).index(e.ecbit)
        };
        let data = match wk {
            _ if wk == w => SExpr::Ident(s.ed_name().into()),
            1 => SExpr::Ident(s.ed_name().into()).index(0),
            _ => SExpr::Ident(s.ed_name().into()).range(wk - 1, 0),
        };
        let block = decl.items.iter_mut().find_map(|i| match i {
            Item::Always {
                sens: Sensitivity::Edges(_),
                body,
                ..
            } if assigns(body, &e.signal) => Some(body),
            _ => None,
        });
        let Some(Stmt::If { otherwise, .. }) = block.and_then(reset_if) else {
            return Err(InstrumentError::Source(format!(
                "no sequential block with a reset branch assigns `{}`",
                e.signal
            )));
        };
        let op = otherwise.take();
        *otherwise = Some(Box::new(inject_stmt(op, &e.signal, sel, data)));
    }
    // the edited module must still elaborate
    elaborate(&out, &s.module)?;
    Ok(out)
}

/// Connects the injection ports of every `leaf` instance in `parent` to
/// zero, replacing existing connections. Returns the number of instances.
pub fn tie_off_instances(
    file: &mut SourceFile,
    parent: &str,
    s: &IntegritySpec,
) -> Result<usize, InstrumentError> {
    let decl = file
        .module_mut(parent)
        .ok_or_else(|| InstrumentError::Source(format!("no module `{parent}`")))?;
    let ties = [(s.ec_name(), s.ec_width()), (s.ed_name(), s.ed_width())];
    let mut count = 0;
    for item in &mut decl.items {
        let Item::Instance(inst) = item else { continue };
        if inst.module != s.module {
            continue;
        }
        count += 1;
        for (port, width) in ties.iter().filter(|(_, w)| *w > 0) {
            let zero = Some(SExpr::sized(*width, 0));
            match inst
                .conns
                .iter_mut()
                .find(|c| matches!(c, Conn::Named { port: p, .. } if p == port))
            {
                Some(Conn::Named { expr, .. }) => *expr = zero,
                _ => inst.conns.push(Conn::Named {
                    port: port.to_string(),
                    expr: zero,
                }),
            }
        }
    }
    if count == 0 {
        return Err(InstrumentError::Source(format!(
            "module `{parent}` has no instance of `{}`",
            s.module
        )));
    }
    Ok(count)
}

fn port_names(d: &ModuleDecl) -> Vec<String> {
    d.ports
        .iter()
        .flat_map(|p| match p {
            PortItem::Name(n) => vec![n.clone()],
            PortItem::Decl(d) => d.names.clone(),
            PortItem::Elided => Vec::new(),
        })
        .collect()
}

fn port_decl(d: &ModuleDecl, name: &str) -> Option<Decl> {
    let header = d.ports.iter().filter_map(|p| match p {
        PortItem::Decl(x) => Some(x),
        _ => None,
    });
    let body = d.items.iter().filter_map(|i| match i {
        Item::Decl(x) => Some(x),
        _ => None,
    });
    header
        .chain(body)
        .find(|x| {
            matches!(
                x.kind,
                DeclKind::Input | DeclKind::Output | DeclKind::OutputReg
            ) && x.names.iter().any(|n| n == name)
        })
        .cloned()
}

/// New module `wrapper` instantiating the instrumented leaf as
/// `<leaf>_in_<wrapper>` with the original ports passed through and the
/// injection ports tied to zero. `original` is the leaf before
/// instrumentation.
pub fn generate_wrapper(
    original: &ModuleDecl,
    s: &IntegritySpec,
    wrapper: &str,
) -> Result<ModuleDecl, InstrumentError> {
    let names = port_names(original);
    let mut items = Vec::new();
    let mut conns = Vec::new();
    for n in &names {
        let mut d = port_decl(original, n).ok_or_else(|| {
            InstrumentError::Source(format!(
                "port `{n}` of `{}` has no direction",
                original.name
            ))
        })?;
        if d.kind == DeclKind::OutputReg {
            d.kind = DeclKind::Output;
        }
        d.names = vec![n.clone()];
        d.init = None;
        d.loc = Loc::default();
        items.push(Item::Decl(d));
        conns.push(Conn::Named {
            port: n.clone(),
            expr: Some(SExpr::Ident(n.clone())),
        });
    }
    for (port, width) in [(s.ec_name(), s.ec_width()), (s.ed_name(), s.ed_width())] {
        if width > 0 {
            conns.push(Conn::Named {
                port: port.to_string(),
                expr: Some(SExpr::sized(width, 0)),
            });
        }
    }
    items.push(Item::Instance(Instance {
        module: original.name.clone(),
        name: format!("{}_in_{wrapper}", original.name),
        conns,
        loc: Loc::default(),
    }));
    Ok(ModuleDecl {
        name: wrapper.to_string(),
        ports: names.into_iter().map(PortItem::Name).collect(),
        items,
        loc: Loc::default(),
    })
}

/// Removes the named inputs, replacing every use with zero.
pub fn tie_off_inputs(m: &ModuleIr, names: &[&str]) -> Result<ModuleIr, IrError> {
    let mut out = m.clone();
    let widths: Vec<(String, u32)> = m
        .inputs
        .iter()
        .filter(|p| names.contains(&p.name.as_str()))
        .map(|p| (p.name.clone(), p.width))
        .collect();
    let zero = |n: &str| {
        widths
            .iter()
            .find(|(x, _)| x == n)
            .map(|(_, w)| Expr::konst(*w, 0))
    };
    out.inputs.retain(|p| !names.contains(&p.name.as_str()));
    for r in &mut out.registers {
        r.next_expr = r.next_expr.map_refs(&mut |n| zero(n));
    }
    for net in &mut out.nets {
        net.expr = net.expr.map_refs(&mut |n| zero(n));
    }
    for o in &out.outputs {
        if let Some(z) = zero(&o.name) {
            out.nets.push(Net {
                name: o.name.clone(),
                width: o.width,
                expr: z,
            });
        }
    }
    out.fold_constants()?;
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    pub module: String,
    /// Bits of injection mux, one per entity state bit.
    pub mux_bits: u32,
    pub port_bits: u32,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

impl OverheadReport {
    /// Percentage growth of the live netlist.
    pub fn increase_pct(&self) -> f64 {
        if self.nodes_before == 0 {
            return 0.0;
        }
        (self.nodes_after as f64 / self.nodes_before as f64 - 1.0) * 100.0
    }
}

impl fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "module {}", self.module)?;
        writeln!(f, "mux_bits {}", self.mux_bits)?;
        writeln!(f, "port_bits {}", self.port_bits)?;
        writeln!(f, "nodes_before {}", self.nodes_before)?;
        writeln!(f, "nodes_after {}", self.nodes_after)?;
        writeln!(f, "increase_pct {:.2}", self.increase_pct())
    }
}

pub fn overhead_report(
    before: &ModuleIr,
    after: &ModuleIr,
    s: &IntegritySpec,
) -> Result<OverheadReport, NetlistError> {
    let mux_bits = s
        .entities
        .iter()
        .map(|e| entity_width(before, &e.signal))
        .sum();
    let port_bits = if s.entities.is_empty() {
        0
    } else {
        s.ec_width() + s.ed_width()
    };
    Ok(OverheadReport {
        module: before.name.clone(),
        mux_bits,
        port_bits,
        nodes_before: bitblast(before)?.live_node_count(),
        nodes_after: bitblast(after)?.live_node_count(),
    })
}
