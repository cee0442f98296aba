//! Flattening of a parsed source file into one [`ModuleIr`].

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::VerilogError;
use crate::ir::{self, BitVec, CaseArm, Expr, ModuleIr, Net, Port, RegisterDef};
use crate::syntax::{self, LowerError, Pos, SExpr};

/// Elaboration result plus the port roles that were removed from the IR.
#[derive(Clone, Debug)]
pub struct Elaborated {
    pub ir: ModuleIr,
    pub clock: Option<String>,
    /// Reset port and whether it is active high.
    pub reset: Option<(String, bool)>,
    /// Instances in the whole hierarchy below this module.
    pub instances: usize,
}

pub fn elaborate(file: &SourceFile, top: &str) -> Result<ModuleIr, VerilogError> {
    elaborate_full(file, top).map(|e| e.ir)
}

pub fn elaborate_full(file: &SourceFile, top: &str) -> Result<Elaborated, VerilogError> {
    let mut ctx = Ctx {
        file,
        stack: Vec::new(),
    };
    let mut e = ctx.module(top, Pos::default())?;
    e.ir.fold_constants()?;
    e.ir.validate()?;
    Ok(e)
}

struct Ctx<'a> {
    file: &'a SourceFile,
    stack: Vec<String>,
}

fn err(module: &str, loc: Loc, message: impl Into<String>) -> VerilogError {
    VerilogError::Elab {
        module: module.to_string(),
        pos: loc.0,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug)]
struct SigDecl {
    kind: DeclKind,
    width: u32,
    loc: Loc,
}

#[derive(Clone, Debug, PartialEq)]
enum Val {
    Unset,
    Partial,
    Set(Expr),
}

type Env = BTreeMap<String, Val>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Sequential,
    Combinational,
}

impl Ctx<'_> {
    fn module(&mut self, name: &str, at: Pos) -> Result<Elaborated, VerilogError> {
        if self.stack.iter().any(|s| s == name) {
            let mut chain = self.stack.clone();
            chain.push(name.to_string());
            return Err(err(
                name,
                Loc(at),
                format!("recursive instantiation: {}", chain.join(" -> ")),
            ));
        }
        let decl = self
            .file
            .module(name)
            .ok_or_else(|| err(name, Loc(at), format!("unknown module `{name}`")))?;
        self.stack.push(name.to_string());
        let r = ModuleElab::new(self, decl).and_then(|m| m.run());
        self.stack.pop();
        r
    }
}

/// Clock, (reset, active-high), reset branch, operating body.
type SplitReset<'s> = (String, (String, bool), &'s Stmt, Option<&'s Stmt>);

struct ModuleElab<'c, 'a> {
    ctx: &'c mut Ctx<'a>,
    decl: &'a ModuleDecl,
    sigs: HashMap<String, SigDecl>,
    /// Declaration order of non-port signals and ports.
    order: Vec<String>,
    ports: Vec<String>,
    clock: Option<String>,
    reset: Option<(String, bool)>,
    driven: HashMap<String, Loc>,
    nets: Vec<Net>,
    registers: BTreeMap<String, RegisterDef>,
    instances: usize,
}

impl<'c, 'a> ModuleElab<'c, 'a> {
    fn new(ctx: &'c mut Ctx<'a>, decl: &'a ModuleDecl) -> Result<Self, VerilogError> {
        let mut me = ModuleElab {
            ctx,
            decl,
            sigs: HashMap::new(),
            order: Vec::new(),
            ports: Vec::new(),
            clock: None,
            reset: None,
            driven: HashMap::new(),
            nets: Vec::new(),
            registers: BTreeMap::new(),
            instances: 0,
        };
        me.declare_all()?;
        Ok(me)
    }

    fn name(&self) -> &str {
        &self.decl.name
    }

    fn err(&self, loc: Loc, message: impl Into<String>) -> VerilogError {
        err(&self.decl.name, loc, message)
    }

    fn declare(
        &mut self,
        name: &str,
        kind: DeclKind,
        width: u32,
        loc: Loc,
    ) -> Result<(), VerilogError> {
        if let Some(prev) = self.sigs.get_mut(name) {
            let merged = match (prev.kind, kind) {
                (DeclKind::Output, DeclKind::Reg) | (DeclKind::Reg, DeclKind::Output) => {
                    DeclKind::OutputReg
                }
                (DeclKind::Output, DeclKind::Wire) | (DeclKind::Wire, DeclKind::Output) => {
                    DeclKind::Output
                }
                _ => {
                    return Err(err(
                        &self.decl.name,
                        loc,
                        format!("`{name}` declared more than once"),
                    ))
                }
            };
            if prev.width != width {
                return Err(err(
                    &self.decl.name,
                    loc,
                    format!(
                        "redeclaration of `{name}` with width {width} (was {})",
                        prev.width
                    ),
                ));
            }
            prev.kind = merged;
            return Ok(());
        }
        self.sigs
            .insert(name.to_string(), SigDecl { kind, width, loc });
        self.order.push(name.to_string());
        Ok(())
    }

    fn declare_all(&mut self) -> Result<(), VerilogError> {
        let decl = self.decl;
        let mut ansi = false;
        for p in &decl.ports {
            match p {
                PortItem::Elided => {
                    return Err(self.err(decl.loc, "elided port list `...` cannot be elaborated"))
                }
                PortItem::Name(n) => {
                    if self.ports.contains(n) {
                        return Err(self.err(decl.loc, format!("port `{n}` listed twice")));
                    }
                    self.ports.push(n.clone());
                }
                PortItem::Decl(d) => {
                    ansi = true;
                    for n in &d.names {
                        self.declare(n, d.kind, d.width(), d.loc)?;
                        self.ports.push(n.clone());
                    }
                }
            }
        }
        for item in &decl.items {
            match item {
                Item::Elided(loc) => {
                    return Err(self.err(*loc, "elided item `...` cannot be elaborated"))
                }
                Item::Decl(d) => {
                    if ansi
                        && matches!(
                            d.kind,
                            DeclKind::Input | DeclKind::Output | DeclKind::OutputReg
                        )
                    {
                        return Err(
                            self.err(d.loc, "port declarations must stay in the ANSI header")
                        );
                    }
                    for n in &d.names {
                        if matches!(
                            d.kind,
                            DeclKind::Input | DeclKind::Output | DeclKind::OutputReg
                        ) && !self.ports.contains(n)
                        {
                            return Err(self.err(d.loc, format!("`{n}` is not in the port list")));
                        }
                        self.declare(n, d.kind, d.width(), d.loc)?;
                    }
                }
                _ => {}
            }
        }
        for p in &self.ports {
            match self.sigs.get(p) {
                Some(s)
                    if matches!(
                        s.kind,
                        DeclKind::Input | DeclKind::Output | DeclKind::OutputReg
                    ) => {}
                _ => {
                    return Err(
                        self.err(decl.loc, format!("port `{p}` has no direction declaration"))
                    )
                }
            }
        }
        Ok(())
    }

    fn set_clock(&mut self, name: &str, loc: Loc) -> Result<(), VerilogError> {
        match &self.clock {
            Some(c) if c != name => Err(self.err(
                loc,
                format!("second clock `{name}` (module already clocked by `{c}`)"),
            )),
            _ => {
                self.require_input(name, loc, "clock")?;
                self.clock = Some(name.to_string());
                Ok(())
            }
        }
    }

    fn set_reset(&mut self, name: &str, active_high: bool, loc: Loc) -> Result<(), VerilogError> {
        match &self.reset {
            Some((r, h)) if r != name || *h != active_high => Err(self.err(
                loc,
                format!("conflicting reset `{name}` (module already reset by `{r}`)"),
            )),
            _ => {
                self.require_input(name, loc, "reset")?;
                self.reset = Some((name.to_string(), active_high));
                Ok(())
            }
        }
    }

    fn require_input(&self, name: &str, loc: Loc, role: &str) -> Result<(), VerilogError> {
        match self.sigs.get(name) {
            Some(s) if s.kind == DeclKind::Input && s.width == 1 => Ok(()),
            Some(_) => Err(self.err(loc, format!("{role} `{name}` must be a 1-bit input"))),
            None => Err(self.err(loc, format!("undeclared {role} `{name}`"))),
        }
    }

    fn drive(&mut self, name: &str, loc: Loc) -> Result<(), VerilogError> {
        if let Some(prev) = self.driven.get(name) {
            return Err(self.err(
                loc,
                format!(
                    "`{name}` is driven more than once (first driver at {})",
                    prev.0
                ),
            ));
        }
        self.driven.insert(name.to_string(), loc);
        Ok(())
    }

    /// Splits a sequential block into its reset branch and operating body.
    fn split_reset<'s>(
        &self,
        edges: &[(Edge, String)],
        body: &'s Stmt,
        loc: Loc,
    ) -> Result<SplitReset<'s>, VerilogError> {
        if edges.len() != 2 {
            return Err(VerilogError::Elab {
                module: self.name().to_string(),
                pos: loc.0,
                message: "sequential blocks need a clock and an asynchronous reset edge".into(),
            });
        }
        let body = match body {
            Stmt::Block(b) if b.len() == 1 => &b[0],
            other => other,
        };
        let Stmt::If {
            cond,
            then,
            otherwise,
            ..
        } = body
        else {
            return Err(self.err(loc, "sequential block must start with `if (<reset>)`"));
        };
        let (name, active_high) = match cond {
            SExpr::Ident(n) => (n.clone(), true),
            SExpr::Unary(syntax::SUnary::LNot | syntax::SUnary::Not, x) => match &**x {
                SExpr::Ident(n) => (n.clone(), false),
                _ => return Err(self.err(loc, "reset condition must be a reset signal")),
            },
            _ => return Err(self.err(loc, "reset condition must be a reset signal")),
        };
        let Some(pos) = edges.iter().position(|(_, n)| *n == name) else {
            return Err(self.err(
                loc,
                format!("reset `{name}` is not in the sensitivity list"),
            ));
        };
        let expected_edge = if active_high { Edge::Pos } else { Edge::Neg };
        if edges[pos].0 != expected_edge {
            return Err(self.err(
                loc,
                format!("edge of reset `{name}` does not match its polarity"),
            ));
        }
        let clock = &edges[1 - pos];
        if clock.0 != Edge::Pos {
            return Err(self.err(loc, "clock must be `posedge`"));
        }
        Ok((
            clock.1.clone(),
            (name, active_high),
            then,
            otherwise.as_deref(),
        ))
    }

    fn run(mut self) -> Result<Elaborated, VerilogError> {
        let decl = self.decl;
        // clocks and resets first so that data references can be checked
        let mut children = Vec::new();
        for item in &decl.items {
            match item {
                Item::Always {
                    sens: Sensitivity::Edges(edges),
                    body,
                    loc,
                } => {
                    let (clock, (reset, high), _, _) = self.split_reset(edges, body, *loc)?;
                    self.set_clock(&clock, *loc)?;
                    self.set_reset(&reset, high, *loc)?;
                }
                Item::Instance(inst) => {
                    let child = self.ctx.module(&inst.module, inst.loc.0)?;
                    for c in &inst.conns {
                        let Conn::Named { port, expr } = c else {
                            return Err(
                                self.err(inst.loc, "elided connection `...` cannot be elaborated")
                            );
                        };
                        let role_reset = child.reset.as_ref().filter(|(r, _)| r == port);
                        if child.clock.as_deref() == Some(port.as_str()) || role_reset.is_some() {
                            let Some(SExpr::Ident(p)) = expr else {
                                return Err(self.err(
                                    inst.loc,
                                    format!("clock/reset port `{port}` of `{}` must connect to a signal", inst.name),
                                ));
                            };
                            match role_reset {
                                Some((_, high)) => self.set_reset(p, *high, inst.loc)?,
                                None => self.set_clock(p, inst.loc)?,
                            }
                        }
                    }
                    children.push((inst, child));
                }
                _ => {}
            }
        }

        for item in &decl.items {
            match item {
                Item::Decl(d) => {
                    if let Some(init) = &d.init {
                        let n = &d.names[0];
                        self.drive(n, d.loc)?;
                        let (e, w) = self.lower_plain(init, d.width(), d.loc)?;
                        self.check_width(n, d.width(), w, d.loc)?;
                        self.nets.push(Net {
                            name: n.clone(),
                            width: w,
                            expr: e,
                        });
                    }
                }
                Item::Assign { lhs, rhs, loc } => {
                    let sig = self.lookup_decl(lhs, *loc)?;
                    if !matches!(sig.kind, DeclKind::Wire | DeclKind::Output) {
                        return Err(
                            self.err(*loc, format!("continuous assignment to non-wire `{lhs}`"))
                        );
                    }
                    self.drive(lhs, *loc)?;
                    let (e, w) = self.lower_plain(rhs, sig.width, *loc)?;
                    self.check_width(lhs, sig.width, w, *loc)?;
                    self.nets.push(Net {
                        name: lhs.clone(),
                        width: w,
                        expr: e,
                    });
                }
                Item::Always { sens, body, loc } => match sens {
                    Sensitivity::Edges(edges) => self.sequential(edges, body, *loc)?,
                    Sensitivity::Star => self.combinational(body, *loc)?,
                },
                Item::Instance(_) | Item::Elided(_) => {}
            }
        }

        for (inst, child) in children {
            self.inline(inst, child)?;
        }
        self.finish()
    }

    fn lookup_decl(&self, name: &str, loc: Loc) -> Result<SigDecl, VerilogError> {
        self.sigs
            .get(name)
            .copied()
            .ok_or_else(|| self.err(loc, format!("undeclared identifier `{name}`")))
    }

    fn check_width(
        &self,
        name: &str,
        expected: u32,
        got: u32,
        loc: Loc,
    ) -> Result<(), VerilogError> {
        if expected != got {
            return Err(self.err(
                loc,
                format!("width mismatch: {got}-bit value assigned to {expected}-bit `{name}`"),
            ));
        }
        Ok(())
    }

    fn resolve_base(&self, name: &str) -> Option<(Expr, u32)> {
        if let Some((r, high)) = &self.reset {
            if r == name {
                return Some((Expr::konst(1, u64::from(!*high)), 1));
            }
        }
        if self.clock.as_deref() == Some(name) {
            return None;
        }
        self.sigs.get(name).map(|s| (Expr::sig(name), s.width))
    }

    fn lower_error(&self, e: LowerError, loc: Loc) -> VerilogError {
        match e {
            LowerError::Unknown(n) if self.clock.as_deref() == Some(n.as_str()) => {
                self.err(loc, format!("clock `{n}` used as data"))
            }
            LowerError::Unknown(n) => self.err(loc, format!("undeclared identifier `{n}`")),
            other => self.err(loc, other.to_string()),
        }
    }

    fn lower_plain(&self, e: &SExpr, width: u32, loc: Loc) -> Result<(Expr, u32), VerilogError> {
        syntax::lower(e, &|n| self.resolve_base(n), Some(width))
            .map_err(|x| self.lower_error(x, loc))
    }

    fn lower_env(
        &self,
        e: &SExpr,
        expected: Option<u32>,
        env: &Env,
        mode: Mode,
        loc: Loc,
    ) -> Result<(Expr, u32), VerilogError> {
        if mode == Mode::Combinational {
            let mut bad = None;
            for_each_ident(e, &mut |n| {
                if matches!(env.get(n), Some(Val::Unset | Val::Partial)) && bad.is_none() {
                    bad = Some(n.to_string());
                }
            });
            if let Some(n) = bad {
                return Err(self.err(
                    loc,
                    format!("`{n}` is read before it is assigned on every path"),
                ));
            }
        }
        let resolve = |n: &str| match (mode, env.get(n)) {
            (Mode::Combinational, Some(Val::Set(x))) => Some((x.clone(), self.sigs[n].width)),
            _ => self.resolve_base(n),
        };
        syntax::lower(e, &resolve, expected).map_err(|x| self.lower_error(x, loc))
    }

    fn condition(&self, e: &SExpr, env: &Env, mode: Mode, loc: Loc) -> Result<Expr, VerilogError> {
        let (x, w) = self.lower_env(e, Some(1), env, mode, loc)?;
        Ok(if w == 1 {
            x
        } else {
            Expr::unary(ir::UnaryOp::RedOr, x)
        })
    }

    fn targets(&self, s: &Stmt, out: &mut Vec<(String, Loc, bool)>) {
        match s {
            Stmt::Block(b) => b.iter().for_each(|x| self.targets(x, out)),
            Stmt::If {
                then, otherwise, ..
            } => {
                self.targets(then, out);
                if let Some(o) = otherwise {
                    self.targets(o, out);
                }
            }
            Stmt::Case { items, default, .. } => {
                items.iter().for_each(|i| self.targets(&i.body, out));
                self.targets(default, out);
            }
            Stmt::Assign {
                lhs, loc, blocking, ..
            } => {
                if !out.iter().any(|(n, _, _)| n == lhs) {
                    out.push((lhs.clone(), *loc, *blocking));
                }
            }
            Stmt::Empty => {}
        }
    }

    fn block_targets(&mut self, body: &Stmt) -> Result<Vec<String>, VerilogError> {
        let mut ts = Vec::new();
        self.targets(body, &mut ts);
        let mut names = Vec::new();
        for (n, loc, _) in ts {
            let sig = self.lookup_decl(&n, loc)?;
            if !matches!(sig.kind, DeclKind::Reg | DeclKind::OutputReg) {
                return Err(self.err(loc, format!("procedural assignment to non-reg `{n}`")));
            }
            self.drive(&n, loc)?;
            names.push(n);
        }
        Ok(names)
    }

    fn sequential(
        &mut self,
        edges: &[(Edge, String)],
        body: &Stmt,
        loc: Loc,
    ) -> Result<(), VerilogError> {
        let (_, _, reset_branch, operate) = self.split_reset(edges, body, loc)?;
        let regs = self.block_targets(body)?;
        let mut resets: HashMap<String, BitVec> = HashMap::new();
        let mut flat = Vec::new();
        flatten(reset_branch, &mut flat);
        for s in flat {
            let Stmt::Assign {
                lhs,
                rhs,
                blocking,
                loc,
            } = s
            else {
                return Err(self.err(loc, "reset branch may contain only assignments"));
            };
            if *blocking {
                return Err(self.err(*loc, "blocking assignment `=` in a sequential block"));
            }
            let width = self.sigs[lhs].width;
            let (e, w) = self.lower_plain(rhs, width, *loc)?;
            self.check_width(lhs, width, w, *loc)?;
            if !e.refs().is_empty() {
                return Err(self.err(*loc, format!("reset value of `{lhs}` is not a constant")));
            }
            let (v, _) = ir::eval(&e, &|_| 0, &|_| 0);
            resets.insert(lhs.clone(), BitVec::new(width, v));
        }
        let mut env: Env = regs
            .iter()
            .map(|r| (r.clone(), Val::Set(Expr::sig(r.as_str()))))
            .collect();
        if let Some(op) = operate {
            self.exec(op, &mut env, Mode::Sequential)?;
        }
        for r in &regs {
            let reset_value = resets
                .remove(r)
                .ok_or_else(|| self.err(loc, format!("register `{r}` has no reset value")))?;
            let Some(Val::Set(next)) = env.remove(r) else {
                unreachable!("sequential targets start assigned");
            };
            self.registers.insert(
                r.clone(),
                RegisterDef {
                    name: r.clone(),
                    width: reset_value.width,
                    reset_value,
                    next_expr: next,
                },
            );
        }
        if let Some(extra) = resets.keys().next() {
            return Err(self.err(loc, format!("`{extra}` assigned in reset branch only")));
        }
        Ok(())
    }

    fn combinational(&mut self, body: &Stmt, loc: Loc) -> Result<(), VerilogError> {
        let vars = self.block_targets(body)?;
        let mut env: Env = vars.iter().map(|v| (v.clone(), Val::Unset)).collect();
        self.exec(body, &mut env, Mode::Combinational)?;
        for v in vars {
            match env.remove(&v) {
                Some(Val::Set(e)) => {
                    let width = self.sigs[&v].width;
                    self.nets.push(Net {
                        name: v,
                        width,
                        expr: e,
                    });
                }
                _ => {
                    return Err(self.err(
                        loc,
                        format!(
                            "`{v}` is not assigned on every path of a combinational block (latch)"
                        ),
                    ))
                }
            }
        }
        Ok(())
    }

    fn exec(&self, s: &Stmt, env: &mut Env, mode: Mode) -> Result<(), VerilogError> {
        match s {
            Stmt::Empty => Ok(()),
            Stmt::Block(b) => {
                for x in b {
                    self.exec(x, env, mode)?;
                }
                Ok(())
            }
            Stmt::Assign {
                lhs,
                rhs,
                blocking,
                loc,
            } => {
                match (mode, blocking) {
                    (Mode::Sequential, true) => {
                        return Err(self.err(*loc, "blocking assignment `=` in a sequential block"))
                    }
                    (Mode::Combinational, false) => {
                        return Err(self.err(
                            *loc,
                            "non-blocking assignment `<=` in a combinational block",
                        ))
                    }
                    _ => {}
                }
                let width = self.sigs[lhs].width;
                let (e, w) = self.lower_env(rhs, Some(width), env, mode, *loc)?;
                self.check_width(lhs, width, w, *loc)?;
                env.insert(lhs.clone(), Val::Set(e));
                Ok(())
            }
            Stmt::If {
                cond,
                then,
                otherwise,
                loc,
            } => {
                let c = self.condition(cond, env, mode, *loc)?;
                let mut t = env.clone();
                self.exec(then, &mut t, mode)?;
                let mut e = env.clone();
                if let Some(o) = otherwise {
                    self.exec(o, &mut e, mode)?;
                }
                for (k, v) in env.iter_mut() {
                    *v = match (&t[k], &e[k]) {
                        (a, b) if a == b => a.clone(),
                        (Val::Set(a), Val::Set(b)) => {
                            Val::Set(Expr::mux(c.clone(), a.clone(), b.clone()))
                        }
                        _ => Val::Partial,
                    };
                }
                Ok(())
            }
            Stmt::Case {
                sel,
                items,
                default,
                loc,
            } => {
                let (sel_e, sel_w) = self.lower_env(sel, None, env, mode, *loc)?;
                let mut arms = Vec::new();
                for it in items {
                    let mut labels = Vec::new();
                    for l in &it.labels {
                        let (le, lw) = self.lower_env(l, Some(sel_w), env, mode, *loc)?;
                        if lw != sel_w {
                            return Err(self.err(
                                *loc,
                                format!(
                                    "case label width {lw} differs from selector width {sel_w}"
                                ),
                            ));
                        }
                        let Some(c) = le.as_const() else {
                            return Err(
                                self.err(*loc, format!("case label `{l}` is not a constant"))
                            );
                        };
                        labels.push(c);
                    }
                    let mut arm_env = env.clone();
                    self.exec(&it.body, &mut arm_env, mode)?;
                    arms.push((labels, arm_env));
                }
                let mut d = env.clone();
                self.exec(default, &mut d, mode)?;
                for (k, v) in env.iter_mut() {
                    let dv = &d[k];
                    if arms.iter().all(|(_, a)| &a[k] == dv) {
                        *v = dv.clone();
                        continue;
                    }
                    let Val::Set(dexpr) = dv else {
                        *v = Val::Partial;
                        continue;
                    };
                    let mut case_arms = Vec::new();
                    let mut complete = true;
                    for (labels, a) in &arms {
                        match &a[k] {
                            Val::Set(x) => case_arms.push(CaseArm {
                                labels: labels.clone(),
                                value: x.clone(),
                            }),
                            _ => complete = false,
                        }
                    }
                    *v = if complete {
                        Val::Set(Expr::Case {
                            sel: Box::new(sel_e.clone()),
                            arms: case_arms,
                            default: Box::new(dexpr.clone()),
                        })
                    } else {
                        Val::Partial
                    };
                }
                Ok(())
            }
        }
    }

    fn inline(&mut self, inst: &Instance, child: Elaborated) -> Result<(), VerilogError> {
        self.instances += 1 + child.instances;
        let prefix = format!("{}.", inst.name);
        let pre = |n: &str| format!("{prefix}{n}");
        let mut conns: HashMap<&str, &Option<SExpr>> = HashMap::new();
        for c in &inst.conns {
            if let Conn::Named { port, expr } = c {
                let known = child
                    .ir
                    .inputs
                    .iter()
                    .chain(&child.ir.outputs)
                    .any(|p| p.name == *port)
                    || child.clock.as_deref() == Some(port.as_str())
                    || child.reset.as_ref().is_some_and(|(r, _)| r == port);
                if !known {
                    return Err(self.err(
                        inst.loc,
                        format!("module `{}` has no port `{port}`", inst.module),
                    ));
                }
                if conns.insert(port.as_str(), expr).is_some() {
                    return Err(self.err(inst.loc, format!("port `{port}` connected twice")));
                }
            }
        }
        for role in [
            child.clock.clone(),
            child.reset.as_ref().map(|r| r.0.clone()),
        ]
        .into_iter()
        .flatten()
        {
            if !matches!(conns.get(role.as_str()), Some(Some(_))) {
                return Err(self.err(
                    inst.loc,
                    format!("port `{role}` of instance `{}` is unconnected", inst.name),
                ));
            }
        }
        for p in &child.ir.inputs {
            let Some(Some(e)) = conns.get(p.name.as_str()) else {
                return Err(self.err(
                    inst.loc,
                    format!(
                        "input `{}` of instance `{}` is unconnected",
                        p.name, inst.name
                    ),
                ));
            };
            let (x, w) = self.lower_plain(e, p.width, inst.loc)?;
            self.check_width(&pre(&p.name), p.width, w, inst.loc)?;
            self.nets.push(Net {
                name: pre(&p.name),
                width: w,
                expr: x,
            });
        }
        for p in &child.ir.outputs {
            let Some(Some(e)) = conns.get(p.name.as_str()) else {
                continue;
            };
            let SExpr::Ident(target) = e else {
                return Err(self.err(
                    inst.loc,
                    format!("output `{}` must connect to a whole wire", p.name),
                ));
            };
            let sig = self.lookup_decl(target, inst.loc)?;
            if !matches!(sig.kind, DeclKind::Wire | DeclKind::Output) {
                return Err(self.err(
                    inst.loc,
                    format!("instance output drives non-wire `{target}`"),
                ));
            }
            self.check_width(target, sig.width, p.width, inst.loc)?;
            self.drive(target, inst.loc)?;
            self.nets.push(Net {
                name: target.clone(),
                width: p.width,
                expr: Expr::sig(pre(&p.name)),
            });
        }
        let rename = |n: &str| pre(n);
        for r in child.ir.registers {
            self.registers.insert(
                pre(&r.name),
                RegisterDef {
                    name: pre(&r.name),
                    width: r.width,
                    reset_value: r.reset_value,
                    next_expr: r.next_expr.rename(&rename),
                },
            );
        }
        for n in child.ir.nets {
            self.nets.push(Net {
                name: pre(&n.name),
                width: n.width,
                expr: n.expr.rename(&rename),
            });
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Elaborated, VerilogError> {
        let mut m = ModuleIr::new(self.decl.name.clone());
        let roles: Vec<&str> = self
            .clock
            .iter()
            .map(String::as_str)
            .chain(self.reset.iter().map(|r| r.0.as_str()))
            .collect();
        for p in &self.ports {
            let s = self.sigs[p];
            match s.kind {
                DeclKind::Input => {
                    if !roles.contains(&p.as_str()) {
                        m.inputs.push(Port::new(p.clone(), s.width));
                    }
                }
                _ => {
                    if !self.driven.contains_key(p) {
                        return Err(self.err(s.loc, format!("output `{p}` is never driven")));
                    }
                    m.outputs.push(Port::new(p.clone(), s.width));
                }
            }
        }
        // registers in declaration order, then inlined ones
        let mut regs = Vec::new();
        for n in &self.order {
            if let Some(r) = self.registers.remove(n) {
                regs.push(r);
            }
        }
        regs.extend(std::mem::take(&mut self.registers).into_values());
        m.registers = regs;
        m.nets = std::mem::take(&mut self.nets);
        // any referenced but undriven wire/reg is an error
        let defined: std::collections::HashSet<&str> = m
            .inputs
            .iter()
            .map(|p| p.name.as_str())
            .chain(m.registers.iter().map(|r| r.name.as_str()))
            .chain(m.nets.iter().map(|n| n.name.as_str()))
            .collect();
        let mut missing = None;
        for e in m
            .registers
            .iter()
            .map(|r| &r.next_expr)
            .chain(m.nets.iter().map(|n| &n.expr))
        {
            e.for_each_ref(&mut |r| {
                if !defined.contains(r) && missing.is_none() {
                    missing = Some(r.to_string());
                }
            });
        }
        if let Some(r) = missing {
            let loc = self.sigs.get(&r).map_or(self.decl.loc, |s| s.loc);
            return Err(self.err(loc, format!("`{r}` is never driven")));
        }
        m.validate()
            .map_err(|e| self.err(self.decl.loc, e.to_string()))?;
        Ok(Elaborated {
            ir: m,
            clock: self.clock,
            reset: self.reset,
            instances: self.instances,
        })
    }
}

fn flatten<'s>(s: &'s Stmt, out: &mut Vec<&'s Stmt>) {
    match s {
        Stmt::Block(b) => b.iter().for_each(|x| flatten(x, out)),
        Stmt::Empty => {}
        other => out.push(other),
    }
}

fn for_each_ident<'e>(e: &'e SExpr, f: &mut impl FnMut(&'e str)) {
    match e {
        SExpr::Ident(n) => f(n),
        SExpr::Literal { .. } => {}
        SExpr::Index(x, _)
        | SExpr::Range(x, _, _)
        | SExpr::Replicate(_, x)
        | SExpr::Unary(_, x)
        | SExpr::Always(x)
        | SExpr::Never(x)
        | SExpr::Next(x) => for_each_ident(x, f),
        SExpr::Concat(xs) => xs.iter().for_each(|x| for_each_ident(x, f)),
        SExpr::Binary(_, a, b) | SExpr::Implies(a, b) => {
            for_each_ident(a, f);
            for_each_ident(b, f);
        }
        SExpr::Ternary(a, b, c) => {
            for_each_ident(a, f);
            for_each_ident(b, f);
            for_each_ident(c, f);
        }
    }
}
