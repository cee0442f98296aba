use std::fmt;

/// Widest vector the IR carries; values live in a `u64`.
pub const MAX_WIDTH: u32 = 64;

/// A sized constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitVec {
    pub width: u32,
    pub value: u64,
}

impl BitVec {
    pub fn new(width: u32, value: u64) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width));
        BitVec {
            width,
            value: value & mask(width),
        }
    }

    pub fn zero(width: u32) -> Self {
        BitVec::new(width, 0)
    }

    pub fn bit(&self, i: u32) -> bool {
        (self.value >> i) & 1 == 1
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, to_binary(self.value, self.width))
    }
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// MSB-first binary rendering padded to `width` digits.
pub fn to_binary(value: u64, width: u32) -> String {
    (0..width)
        .rev()
        .map(|i| if (value >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    /// Bitwise complement.
    Not,
    RedXor,
    RedAnd,
    RedOr,
    /// Logical negation: 1 iff the operand is zero.
    LNot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    LAnd,
    LOr,
    Eq,
    Ne,
    /// Addition modulo 2^width.
    Add,
}

impl UnaryOp {
    pub fn keyword(self) -> &'static str {
        match self {
            UnaryOp::Not => "not",
            UnaryOp::RedXor => "redxor",
            UnaryOp::RedAnd => "redand",
            UnaryOp::RedOr => "redor",
            UnaryOp::LNot => "lnot",
        }
    }
}

impl BinaryOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Xor => "xor",
            BinaryOp::LAnd => "land",
            BinaryOp::LOr => "lor",
            BinaryOp::Eq => "eq",
            BinaryOp::Ne => "ne",
            BinaryOp::Add => "add",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CaseArm {
    pub labels: Vec<BitVec>,
    pub value: Expr,
}

/// Word-level expression tree. Widths are not stored on nodes; they are
/// derived against a signal table (see [`crate::ir::ModuleIr::width_of`]).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(BitVec),
    Ref(String),
    Bit(Box<Expr>, u32),
    /// `e[msb:lsb]`
    Part(Box<Expr>, u32, u32),
    /// Operands listed MSB first, as in Verilog `{a, b}`.
    Concat(Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// `sel ? then : else`
    Mux(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Parallel decode; the first arm whose label matches wins.
    Case {
        sel: Box<Expr>,
        arms: Vec<CaseArm>,
        default: Box<Expr>,
    },
}

impl Expr {
    pub fn konst(width: u32, value: u64) -> Expr {
        Expr::Const(BitVec::new(width, value))
    }

    pub fn sig(name: impl Into<String>) -> Expr {
        Expr::Ref(name.into())
    }

    pub fn bit(self, i: u32) -> Expr {
        Expr::Bit(Box::new(self), i)
    }

    pub fn part(self, msb: u32, lsb: u32) -> Expr {
        Expr::Part(Box::new(self), msb, lsb)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::unary(UnaryOp::Not, e)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Or, a, b)
    }

    pub fn mux(sel: Expr, then: Expr, els: Expr) -> Expr {
        Expr::Mux(Box::new(sel), Box::new(then), Box::new(els))
    }

    pub fn as_const(&self) -> Option<BitVec> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Calls `f` on every signal name referenced by this expression.
    pub fn for_each_ref<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Const(_) => {}
            Expr::Ref(n) => f(n),
            Expr::Bit(e, _) | Expr::Part(e, _, _) | Expr::Unary(_, e) => e.for_each_ref(f),
            Expr::Concat(es) => es.iter().for_each(|e| e.for_each_ref(f)),
            Expr::Binary(_, a, b) => {
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Expr::Mux(s, a, b) => {
                s.for_each_ref(f);
                a.for_each_ref(f);
                b.for_each_ref(f);
            }
            Expr::Case { sel, arms, default } => {
                sel.for_each_ref(f);
                arms.iter().for_each(|a| a.value.for_each_ref(f));
                default.for_each_ref(f);
            }
        }
    }

    pub fn refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |n| out.push(n));
        out
    }

    /// Rewrites every `Ref` through `f`; `None` leaves the reference alone.
    pub fn map_refs(&self, f: &mut impl FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Ref(n) => f(n).unwrap_or_else(|| self.clone()),
            Expr::Bit(e, i) => Expr::Bit(Box::new(e.map_refs(f)), *i),
            Expr::Part(e, m, l) => Expr::Part(Box::new(e.map_refs(f)), *m, *l),
            Expr::Concat(es) => Expr::Concat(es.iter().map(|e| e.map_refs(f)).collect()),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map_refs(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.map_refs(f)), Box::new(b.map_refs(f)))
            }
            Expr::Mux(s, a, b) => Expr::Mux(
                Box::new(s.map_refs(f)),
                Box::new(a.map_refs(f)),
                Box::new(b.map_refs(f)),
            ),
            Expr::Case { sel, arms, default } => Expr::Case {
                sel: Box::new(sel.map_refs(f)),
                arms: arms
                    .iter()
                    .map(|a| CaseArm {
                        labels: a.labels.clone(),
                        value: a.value.map_refs(f),
                    })
                    .collect(),
                default: Box::new(default.map_refs(f)),
            },
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Expr {
        self.map_refs(&mut |n| Some(Expr::Ref(f(n))))
    }
}

/// Evaluates `e` with signal values supplied by `lookup`; widths by `width`.
/// Both closures are assumed consistent with a validated module.
pub fn eval(e: &Expr, lookup: &impl Fn(&str) -> u64, width: &impl Fn(&str) -> u32) -> (u64, u32) {
    match e {
        Expr::Const(c) => (c.value, c.width),
        Expr::Ref(n) => {
            let w = width(n);
            (lookup(n) & mask(w), w)
        }
        Expr::Bit(x, i) => {
            let (v, _) = eval(x, lookup, width);
            ((v >> i) & 1, 1)
        }
        Expr::Part(x, m, l) => {
            let (v, _) = eval(x, lookup, width);
            let w = m - l + 1;
            ((v >> l) & mask(w), w)
        }
        Expr::Concat(es) => {
            let mut acc = 0u64;
            let mut total = 0u32;
            for x in es {
                let (v, w) = eval(x, lookup, width);
                acc = if w >= 64 { v } else { (acc << w) | v };
                total += w;
            }
            (acc, total)
        }
        Expr::Unary(op, x) => {
            let (v, w) = eval(x, lookup, width);
            match op {
                UnaryOp::Not => (!v & mask(w), w),
                UnaryOp::RedXor => ((v.count_ones() & 1) as u64, 1),
                UnaryOp::RedAnd => ((v == mask(w)) as u64, 1),
                UnaryOp::RedOr => ((v != 0) as u64, 1),
                UnaryOp::LNot => ((v == 0) as u64, 1),
            }
        }
        Expr::Binary(op, a, b) => {
            let (x, w) = eval(a, lookup, width);
            let (y, _) = eval(b, lookup, width);
            match op {
                BinaryOp::And => (x & y, w),
                BinaryOp::Or => (x | y, w),
                BinaryOp::Xor => (x ^ y, w),
                BinaryOp::Add => (x.wrapping_add(y) & mask(w), w),
                BinaryOp::LAnd => ((x != 0 && y != 0) as u64, 1),
                BinaryOp::LOr => ((x != 0 || y != 0) as u64, 1),
                BinaryOp::Eq => ((x == y) as u64, 1),
                BinaryOp::Ne => ((x != y) as u64, 1),
            }
        }
        Expr::Mux(s, a, b) => {
            let (sv, _) = eval(s, lookup, width);
            if sv != 0 {
                eval(a, lookup, width)
            } else {
                eval(b, lookup, width)
            }
        }
        Expr::Case { sel, arms, default } => {
            let (sv, _) = eval(sel, lookup, width);
            for arm in arms {
                if arm.labels.iter().any(|l| l.value == sv) {
                    return eval(&arm.value, lookup, width);
                }
            }
            eval(default, lookup, width)
        }
    }
}
