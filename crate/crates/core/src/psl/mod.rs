//! PSL subset: vunits of named `always`/`never` properties with
//! assert/assume directives, compiled to safety obligations over a module.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ir::{Expr, ModuleIr, SignalKind};
use crate::syntax::{self, lex, LowerError, Parser, Pos, SExpr, SyntaxError, Tok};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stereotype {
    P0,
    P1,
    P2,
    P3,
}

impl Stereotype {
    pub const ALL: [Stereotype; 4] = [
        Stereotype::P0,
        Stereotype::P1,
        Stereotype::P2,
        Stereotype::P3,
    ];

    /// Derived from the vunit naming convention of generated units.
    pub fn from_vunit_name(name: &str) -> Stereotype {
        if name.ends_with("_edetect") {
            Stereotype::P0
        } else if name.ends_with("_soundness") {
            Stereotype::P1
        } else if name.contains("_integrity") {
            Stereotype::P2
        } else {
            Stereotype::P3
        }
    }
}

impl fmt::Display for Stereotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Stereotype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "P0" => Ok(Stereotype::P0),
            "P1" => Ok(Stereotype::P1),
            "P2" => Ok(Stereotype::P2),
            "P3" => Ok(Stereotype::P3),
            _ => Err(format!("unknown property type `{s}`")),
        }
    }
}

/// Body of an `always` property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Bool(SExpr),
    Implies {
        ante: SExpr,
        next: bool,
        cons: SExpr,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropExpr {
    Always(Body),
    Never(SExpr),
}

impl PropExpr {
    fn to_sexpr(&self) -> SExpr {
        match self {
            PropExpr::Always(Body::Bool(e)) => SExpr::Always(Box::new(e.clone())),
            PropExpr::Always(Body::Implies { ante, next, cons }) => {
                let c = if *next {
                    SExpr::Next(Box::new(cons.clone()))
                } else {
                    cons.clone()
                };
                SExpr::Always(Box::new(SExpr::Implies(
                    Box::new(ante.clone()),
                    Box::new(c),
                )))
            }
            PropExpr::Never(e) => SExpr::Never(Box::new(e.clone())),
        }
    }

    fn for_each_bool(&self, f: &mut impl FnMut(&SExpr)) {
        match self {
            PropExpr::Always(Body::Bool(e)) | PropExpr::Never(e) => f(e),
            PropExpr::Always(Body::Implies { ante, cons, .. }) => {
                f(ante);
                f(cons);
            }
        }
    }
}

impl fmt::Display for PropExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VunitItem {
    Property {
        name: String,
        expr: PropExpr,
        pos: Pos,
    },
    Assert {
        name: String,
        pos: Pos,
    },
    Assume {
        name: String,
        pos: Pos,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vunit {
    pub name: String,
    pub module: Option<String>,
    pub items: Vec<VunitItem>,
}

impl Vunit {
    pub fn new(name: impl Into<String>, module: Option<String>) -> Self {
        Vunit {
            name: name.into(),
            module,
            items: Vec::new(),
        }
    }

    pub fn property(&self, name: &str) -> Option<&PropExpr> {
        self.items.iter().find_map(|i| match i {
            VunitItem::Property { name: n, expr, .. } if n == name => Some(expr),
            _ => None,
        })
    }

    pub fn asserts(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match i {
            VunitItem::Assert { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }

    pub fn assumes(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match i {
            VunitItem::Assume { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }

    pub fn stereotype(&self) -> Stereotype {
        Stereotype::from_vunit_name(&self.name)
    }

    /// Signals named by assumed properties, in first-use order.
    pub fn assumed_signals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in self.assumes() {
            if let Some(p) = self.property(a) {
                p.for_each_bool(&mut |e| {
                    idents(e, &mut |n| {
                        if !out.iter().any(|o| o == n) {
                            out.push(n.to_string());
                        }
                    })
                });
            }
        }
        out
    }
}

impl fmt::Display for Vunit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vunit {}", syntax::SExpr::Ident(self.name.clone()))?;
        if let Some(m) = &self.module {
            write!(f, " ({})", syntax::SExpr::Ident(m.clone()))?;
        }
        writeln!(f, " {{")?;
        for it in &self.items {
            match it {
                VunitItem::Property { name, expr, .. } => {
                    writeln!(f, "  property {} = {expr};", SExpr::Ident(name.clone()))?
                }
                VunitItem::Assert { name, .. } => {
                    writeln!(f, "  assert {};", SExpr::Ident(name.clone()))?
                }
                VunitItem::Assume { name, .. } => {
                    writeln!(f, "  assume {};", SExpr::Ident(name.clone()))?
                }
            }
        }
        writeln!(f, "}}")
    }
}

fn idents(e: &SExpr, f: &mut impl FnMut(&str)) {
    match e {
        SExpr::Ident(n) => f(n),
        SExpr::Literal { .. } => {}
        SExpr::Index(x, _)
        | SExpr::Range(x, _, _)
        | SExpr::Replicate(_, x)
        | SExpr::Unary(_, x)
        | SExpr::Always(x)
        | SExpr::Never(x)
        | SExpr::Next(x) => idents(x, f),
        SExpr::Concat(xs) => xs.iter().for_each(|x| idents(x, f)),
        SExpr::Binary(_, a, b) | SExpr::Implies(a, b) => {
            idents(a, f);
            idents(b, f);
        }
        SExpr::Ternary(a, b, c) => {
            idents(a, f);
            idents(b, f);
            idents(c, f);
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PslError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: vunit `{vunit}`: {message}")]
    Semantic {
        vunit: String,
        pos: Pos,
        message: String,
    },
}

fn semantic(vunit: &str, pos: Pos, message: impl Into<String>) -> PslError {
    PslError::Semantic {
        vunit: vunit.to_string(),
        pos,
        message: message.into(),
    }
}

/// Parses every vunit in `text`.
pub fn parse_psl(text: &str) -> Result<Vec<Vunit>, PslError> {
    let mut p = Parser::new(lex(text, true)?, true);
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(vunit(&mut p)?);
    }
    Ok(out)
}

/// Parses text that must contain exactly one vunit.
pub fn parse_vunit(text: &str) -> Result<Vunit, PslError> {
    let mut all = parse_psl(text)?;
    if all.len() != 1 {
        return Err(semantic(
            "",
            Pos::default(),
            format!("expected one vunit, found {}", all.len()),
        ));
    }
    Ok(all.remove(0))
}

fn vunit(p: &mut Parser) -> Result<Vunit, PslError> {
    p.expect_keyword("vunit")?;
    let name = p.expect_ident()?;
    let module = if p.eat_punct("(") {
        let m = p.expect_ident()?;
        p.expect_punct(")")?;
        Some(m)
    } else {
        None
    };
    p.expect_punct("{")?;
    let mut v = Vunit::new(name, module);
    let mut declared: HashMap<String, Pos> = HashMap::new();
    while !p.eat_punct("}") {
        let pos = p.here();
        if p.eat_keyword("property") {
            let name = p.expect_ident()?;
            p.expect_punct("=")?;
            let e = p.expr()?;
            p.expect_punct(";")?;
            let expr = classify(&e)
                .map_err(|m| semantic(&v.name, pos, format!("property `{name}`: {m}")))?;
            if let Some(prev) = declared.insert(name.clone(), pos) {
                return Err(semantic(
                    &v.name,
                    pos,
                    format!("property `{name}` already declared at {prev}"),
                ));
            }
            v.items.push(VunitItem::Property { name, expr, pos });
        } else if p.at_keyword("assert") || p.at_keyword("assume") {
            let assert = p.eat_keyword("assert");
            if !assert {
                p.expect_keyword("assume")?;
            }
            let name = p.expect_ident()?;
            p.expect_punct(";")?;
            if !declared.contains_key(&name) {
                return Err(semantic(
                    &v.name,
                    pos,
                    format!("directive names undeclared property `{name}`"),
                ));
            }
            v.items.push(if assert {
                VunitItem::Assert { name, pos }
            } else {
                VunitItem::Assume { name, pos }
            });
        } else if *p.peek() == Tok::Eof {
            return Err(p.unexpected("`}`").into());
        } else {
            return Err(p.unexpected("`property`, `assert`, `assume` or `}`").into());
        }
    }
    Ok(v)
}

fn plain(e: &SExpr) -> Result<(), String> {
    let mut temporal = false;
    walk(e, &mut |x| temporal |= x.is_temporal());
    if temporal {
        Err("`next` is only allowed on the consequent of an implication inside `always`".into())
    } else {
        Ok(())
    }
}

fn walk(e: &SExpr, f: &mut impl FnMut(&SExpr)) {
    f(e);
    match e {
        SExpr::Ident(_) | SExpr::Literal { .. } => {}
        SExpr::Index(x, _)
        | SExpr::Range(x, _, _)
        | SExpr::Replicate(_, x)
        | SExpr::Unary(_, x)
        | SExpr::Always(x)
        | SExpr::Never(x)
        | SExpr::Next(x) => walk(x, f),
        SExpr::Concat(xs) => xs.iter().for_each(|x| walk(x, f)),
        SExpr::Binary(_, a, b) | SExpr::Implies(a, b) => {
            walk(a, f);
            walk(b, f);
        }
        SExpr::Ternary(a, b, c) => {
            walk(a, f);
            walk(b, f);
            walk(c, f);
        }
    }
}

fn classify(e: &SExpr) -> Result<PropExpr, String> {
    match e {
        SExpr::Always(b) => match &**b {
            SExpr::Implies(a, c) => {
                plain(a)?;
                let (next, cons) = match &**c {
                    SExpr::Next(x) => (true, &**x),
                    other => (false, other),
                };
                plain(cons)?;
                Ok(PropExpr::Always(Body::Implies {
                    ante: (**a).clone(),
                    next,
                    cons: cons.clone(),
                }))
            }
            other => {
                plain(other)?;
                Ok(PropExpr::Always(Body::Bool(other.clone())))
            }
        },
        SExpr::Never(b) => {
            plain(b)?;
            Ok(PropExpr::Never((**b).clone()))
        }
        _ => Err("property must be `always (...)` or `never (...)`".into()),
    }
}

/// Monitor register latching an antecedent for one cycle (init 0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monitor {
    pub name: String,
    pub latch: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub property: String,
    pub stereotype: Stereotype,
    /// Width-1 violation condition over module signals and monitors.
    pub bad: Expr,
}

/// A vunit compiled against one module: input assumption, monitors and one
/// obligation per asserted property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyCheck {
    pub vunit: String,
    pub module: String,
    pub assume: Expr,
    pub assumed: Vec<String>,
    pub monitors: Vec<Monitor>,
    pub obligations: Vec<Obligation>,
    /// Signals turned into free inputs before compiling (stage checks).
    pub cuts: Vec<String>,
    pub warnings: Vec<String>,
}

impl SafetyCheck {
    /// One check per obligation, each with only the monitors it reads.
    pub fn split(&self) -> Vec<SafetyCheck> {
        self.obligations
            .iter()
            .map(|o| {
                let used: BTreeSet<&str> = o.bad.refs().into_iter().collect();
                SafetyCheck {
                    monitors: self
                        .monitors
                        .iter()
                        .filter(|m| used.contains(m.name.as_str()))
                        .cloned()
                        .collect(),
                    obligations: vec![o.clone()],
                    ..self.clone()
                }
            })
            .collect()
    }

    /// Disjunction of all obligations.
    pub fn bad(&self) -> Expr {
        self.obligations
            .iter()
            .map(|o| o.bad.clone())
            .reduce(Expr::or)
            .unwrap_or_else(|| Expr::konst(1, 0))
    }
}

pub fn monitor_name(property: &str) -> String {
    format!("__mon_{property}")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompileOptions {
    /// Cut every non-input signal named by an assumption so the assumption
    /// constrains a free input (assume/guarantee stage checks).
    pub assume_cuts: bool,
}

/// Compiles `v` against `m`. Returns the module the check refers to, which
/// differs from `m` only when cut-points were introduced.
pub fn compile(
    v: &Vunit,
    m: &ModuleIr,
    opts: CompileOptions,
) -> Result<(ModuleIr, SafetyCheck), PslError> {
    let err = |pos: Pos, msg: String| semantic(&v.name, pos, msg);
    if let Some(b) = &v.module {
        if *b != m.name {
            return Err(err(
                Pos::default(),
                format!("vunit binds to module `{b}` but the design is `{}`", m.name),
            ));
        }
    }
    let mut cuts = Vec::new();
    let m = if opts.assume_cuts {
        for s in v.assumed_signals() {
            if matches!(
                m.signal(&s),
                Some((SignalKind::Register | SignalKind::Net, _))
            ) {
                cuts.push(s);
            }
        }
        m.cut(&cuts)
            .map_err(|e| err(Pos::default(), e.to_string()))?
    } else {
        m.clone()
    };
    let widths: HashMap<&str, u32> = m
        .inputs
        .iter()
        .map(|p| (p.name.as_str(), p.width))
        .chain(m.registers.iter().map(|r| (r.name.as_str(), r.width)))
        .chain(m.nets.iter().map(|n| (n.name.as_str(), n.width)))
        .collect();
    let lower = |e: &SExpr, prop: &str, pos: Pos| -> Result<Expr, PslError> {
        let resolve = |n: &str| widths.get(n).map(|w| (Expr::sig(n), *w));
        let (x, w) = syntax::lower(e, &resolve, Some(1)).map_err(|le| match le {
            LowerError::Unknown(n) => err(pos, format!("property `{prop}`: unknown signal `{n}`")),
            other => err(pos, format!("property `{prop}`: {other}")),
        })?;
        if w != 1 {
            return Err(err(
                pos,
                format!("property `{prop}`: boolean expression `{e}` is {w} bits wide"),
            ));
        }
        Ok(x)
    };
    let pos_of = |name: &str| {
        v.items
            .iter()
            .find_map(|i| match i {
                VunitItem::Property { name: n, pos, .. } if n == name => Some(*pos),
                _ => None,
            })
            .unwrap_or_default()
    };

    let mut assume = Vec::new();
    let mut assumed = Vec::new();
    for a in v.assumes() {
        let prop = v.property(a).expect("directives name declared properties");
        let pos = pos_of(a);
        let e = match prop {
            PropExpr::Always(Body::Bool(e)) => lower(e, a, pos)?,
            PropExpr::Never(e) => Expr::not(lower(e, a, pos)?),
            PropExpr::Always(Body::Implies { next: true, .. }) => {
                return Err(err(
                    pos,
                    format!("assumption `{a}` uses `next`; assumptions must be invariants"),
                ))
            }
            PropExpr::Always(Body::Implies { ante, cons, .. }) => {
                Expr::or(Expr::not(lower(ante, a, pos)?), lower(cons, a, pos)?)
            }
        };
        let state = m.non_input_support(&e);
        if !state.is_empty() {
            return Err(err(
                pos,
                format!(
                    "assume must constrain inputs only: `{a}` depends on {}",
                    state
                        .iter()
                        .map(|s| format!("`{s}`"))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
        assume.push(e);
        assumed.push(a.to_string());
    }

    let stereotype = v.stereotype();
    let mut monitors = Vec::new();
    let mut obligations = Vec::new();
    for a in v.asserts() {
        let prop = v.property(a).expect("directives name declared properties");
        let pos = pos_of(a);
        let bad = match prop {
            PropExpr::Always(Body::Bool(e)) => Expr::not(lower(e, a, pos)?),
            PropExpr::Never(e) => lower(e, a, pos)?,
            PropExpr::Always(Body::Implies {
                ante,
                next: false,
                cons,
            }) => Expr::and(lower(ante, a, pos)?, Expr::not(lower(cons, a, pos)?)),
            PropExpr::Always(Body::Implies {
                ante,
                next: true,
                cons,
            }) => {
                let name = monitor_name(a);
                if monitors.iter().any(|m: &Monitor| m.name == name) {
                    return Err(err(pos, format!("property `{a}` asserted twice")));
                }
                monitors.push(Monitor {
                    name: name.clone(),
                    latch: lower(ante, a, pos)?,
                });
                Expr::and(Expr::sig(name), Expr::not(lower(cons, a, pos)?))
            }
        };
        obligations.push(Obligation {
            property: a.to_string(),
            stereotype,
            bad,
        });
    }
    for mon in &monitors {
        if m.signal(&mon.name).is_some() {
            return Err(err(
                Pos::default(),
                format!("module already has a signal named `{}`", mon.name),
            ));
        }
    }

    let assume = assume
        .into_iter()
        .reduce(Expr::and)
        .unwrap_or_else(|| Expr::konst(1, 1));
    let mut warnings = Vec::new();
    if obligations.is_empty() {
        warnings.push(format!("vunit `{}` asserts nothing", v.name));
    }
    if !crate::engine::assume_satisfiable(&m, &assume).map_err(|e| err(Pos::default(), e))? {
        warnings.push(format!(
            "assumptions of vunit `{}` are unsatisfiable; its properties hold vacuously",
            v.name
        ));
    }
    let check = SafetyCheck {
        vunit: v.name.clone(),
        module: m.name.clone(),
        assume,
        assumed,
        monitors,
        obligations,
        cuts,
        warnings,
    };
    Ok((m, check))
}
