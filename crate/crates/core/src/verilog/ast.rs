use crate::syntax::{Pos, SExpr};

/// Source location that never participates in structural equality, so a
/// re-parsed AST compares equal to the original.
#[derive(Clone, Copy, Debug, Default)]
pub struct Loc(pub Pos);

impl PartialEq for Loc {
    fn eq(&self, _: &Loc) -> bool {
        true
    }
}

impl Eq for Loc {}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SourceFile {
    pub modules: Vec<ModuleDecl>,
}

impl SourceFile {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn module_mut(&mut self, name: &str) -> Option<&mut ModuleDecl> {
        self.modules.iter_mut().find(|m| m.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub ports: Vec<PortItem>,
    pub items: Vec<Item>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PortItem {
    Name(String),
    /// ANSI-style declaration in the header.
    Decl(Decl),
    /// `...` placeholder in abbreviated listings.
    Elided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Input,
    Output,
    OutputReg,
    Wire,
    Reg,
}

impl DeclKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclKind::Input => "input",
            DeclKind::Output => "output",
            DeclKind::OutputReg => "output reg",
            DeclKind::Wire => "wire",
            DeclKind::Reg => "reg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    /// `[msb:lsb]`; `None` is a single bit.
    pub range: Option<(u32, u32)>,
    pub names: Vec<String>,
    /// `wire x = e;` (single name only).
    pub init: Option<SExpr>,
    pub loc: Loc,
}

impl Decl {
    pub fn width(&self) -> u32 {
        self.range.map_or(1, |(m, l)| m - l + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sensitivity {
    Star,
    Edges(Vec<(Edge, String)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Decl(Decl),
    Assign {
        lhs: String,
        rhs: SExpr,
        loc: Loc,
    },
    Always {
        sens: Sensitivity,
        body: Stmt,
        loc: Loc,
    },
    Instance(Instance),
    Elided(Loc),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub conns: Vec<Conn>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conn {
    /// `.port(expr)`; `None` for an explicitly open `.port()`.
    Named {
        port: String,
        expr: Option<SExpr>,
    },
    Elided,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseItem {
    pub labels: Vec<SExpr>,
    pub body: Stmt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If {
        cond: SExpr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
        loc: Loc,
    },
    Case {
        sel: SExpr,
        items: Vec<CaseItem>,
        default: Box<Stmt>,
        loc: Loc,
    },
    Assign {
        lhs: String,
        rhs: SExpr,
        blocking: bool,
        loc: Loc,
    },
    Empty,
}
