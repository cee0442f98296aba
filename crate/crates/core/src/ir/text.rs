//! Line-oriented textual form of [`ModuleIr`].
//!
//! ```text
//! module B
//! input I 4
//! output O 4
//! register cs 4 4'b1000 (mux (bit I_ERR_INJ_C 0) I_ERR_INJ_D ns)
//! net ns 4 (case cs (arm (4'b1000) 4'b0001) (default cs))
//! end
//! ```
//!
//! Expressions are s-expressions; bare atoms are signal names or sized
//! binary constants.

use std::fmt::Write as _;

use super::expr::{BinaryOp, BitVec, CaseArm, Expr, UnaryOp};
use super::module::{ModuleIr, Net, Port, RegisterDef};
use super::IrError;

pub fn dump(m: &ModuleIr) -> String {
    let mut s = String::new();
    writeln!(s, "module {}", m.name).unwrap();
    for p in &m.inputs {
        writeln!(s, "input {} {}", p.name, p.width).unwrap();
    }
    for p in &m.outputs {
        writeln!(s, "output {} {}", p.name, p.width).unwrap();
    }
    for r in &m.registers {
        writeln!(
            s,
            "register {} {} {} {}",
            r.name,
            r.width,
            r.reset_value,
            sexpr(&r.next_expr)
        )
        .unwrap();
    }
    for n in &m.nets {
        writeln!(s, "net {} {} {}", n.name, n.width, sexpr(&n.expr)).unwrap();
    }
    s.push_str("end\n");
    s
}

pub fn sexpr(e: &Expr) -> String {
    let mut s = String::new();
    write_sexpr(&mut s, e);
    s
}

fn write_sexpr(s: &mut String, e: &Expr) {
    match e {
        Expr::Const(c) => write!(s, "{c}").unwrap(),
        Expr::Ref(n) => s.push_str(n),
        Expr::Bit(x, i) => {
            s.push_str("(bit ");
            write_sexpr(s, x);
            write!(s, " {i})").unwrap();
        }
        Expr::Part(x, m, l) => {
            s.push_str("(part ");
            write_sexpr(s, x);
            write!(s, " {m} {l})").unwrap();
        }
        Expr::Concat(es) => {
            s.push_str("(concat");
            for x in es {
                s.push(' ');
                write_sexpr(s, x);
            }
            s.push(')');
        }
        Expr::Unary(op, x) => {
            write!(s, "({} ", op.keyword()).unwrap();
            write_sexpr(s, x);
            s.push(')');
        }
        Expr::Binary(op, a, b) => {
            write!(s, "({} ", op.keyword()).unwrap();
            write_sexpr(s, a);
            s.push(' ');
            write_sexpr(s, b);
            s.push(')');
        }
        Expr::Mux(c, a, b) => {
            s.push_str("(mux ");
            write_sexpr(s, c);
            s.push(' ');
            write_sexpr(s, a);
            s.push(' ');
            write_sexpr(s, b);
            s.push(')');
        }
        Expr::Case { sel, arms, default } => {
            s.push_str("(case ");
            write_sexpr(s, sel);
            for arm in arms {
                s.push_str(" (arm (");
                for (i, l) in arm.labels.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    write!(s, "{l}").unwrap();
                }
                s.push_str(") ");
                write_sexpr(s, &arm.value);
                s.push(')');
            }
            s.push_str(" (default ");
            write_sexpr(s, default);
            s.push_str("))");
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' | ' ' | '\t' => {
                if !cur.is_empty() {
                    out.push(Tok::Atom(std::mem::take(&mut cur)));
                }
                match ch {
                    '(' => out.push(Tok::Open),
                    ')' => out.push(Tok::Close),
                    _ => {}
                }
            }
            _ => cur.push(ch),
        }
    }
    if !cur.is_empty() {
        out.push(Tok::Atom(cur));
    }
    out
}

struct Reader<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
}

impl Reader<'_> {
    fn err(&self, msg: impl Into<String>) -> IrError {
        IrError::Parse {
            line: self.line,
            message: msg.into(),
        }
    }

    fn next(&mut self) -> Result<&Tok, IrError> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of expression"))?;
        self.pos += 1;
        Ok(t)
    }

    fn atom(&mut self) -> Result<String, IrError> {
        match self.next()? {
            Tok::Atom(a) => Ok(a.clone()),
            t => {
                let t = format!("{t:?}");
                Err(self.err(format!("expected atom, found {t}")))
            }
        }
    }

    fn number(&mut self) -> Result<u32, IrError> {
        let a = self.atom()?;
        a.parse()
            .map_err(|_| self.err(format!("expected integer, found `{a}`")))
    }

    fn close(&mut self) -> Result<(), IrError> {
        match self.next()? {
            Tok::Close => Ok(()),
            _ => Err(self.err("expected `)`")),
        }
    }

    fn expr(&mut self) -> Result<Expr, IrError> {
        match self.next()?.clone() {
            Tok::Close => Err(self.err("unexpected `)`")),
            Tok::Atom(a) => {
                if a.starts_with(|c: char| c.is_ascii_digit()) {
                    Ok(Expr::Const(
                        parse_const(&a).ok_or_else(|| self.err(format!("bad constant `{a}`")))?,
                    ))
                } else {
                    Ok(Expr::Ref(a))
                }
            }
            Tok::Open => {
                let head = self.atom()?;
                let e = match head.as_str() {
                    "bit" => {
                        let x = self.expr()?;
                        Expr::Bit(Box::new(x), self.number()?)
                    }
                    "part" => {
                        let x = self.expr()?;
                        let m = self.number()?;
                        Expr::Part(Box::new(x), m, self.number()?)
                    }
                    "concat" => {
                        let mut es = Vec::new();
                        while self.toks.get(self.pos) != Some(&Tok::Close) {
                            es.push(self.expr()?);
                        }
                        Expr::Concat(es)
                    }
                    "mux" => {
                        let s = self.expr()?;
                        let a = self.expr()?;
                        Expr::mux(s, a, self.expr()?)
                    }
                    "case" => return self.case(),
                    other => {
                        if let Some(op) = unary_op(other) {
                            Expr::unary(op, self.expr()?)
                        } else if let Some(op) = binary_op(other) {
                            let a = self.expr()?;
                            Expr::binary(op, a, self.expr()?)
                        } else {
                            return Err(self.err(format!("unknown operator `{other}`")));
                        }
                    }
                };
                self.close()?;
                Ok(e)
            }
        }
    }

    fn case(&mut self) -> Result<Expr, IrError> {
        let sel = self.expr()?;
        let mut arms = Vec::new();
        loop {
            match self.next()? {
                Tok::Open => {}
                _ => return Err(self.err("expected `(arm` or `(default`")),
            }
            match self.atom()?.as_str() {
                "arm" => {
                    match self.next()? {
                        Tok::Open => {}
                        _ => return Err(self.err("expected label list")),
                    }
                    let mut labels = Vec::new();
                    loop {
                        match self.next()?.clone() {
                            Tok::Close => break,
                            Tok::Atom(a) => labels.push(
                                parse_const(&a)
                                    .ok_or_else(|| self.err(format!("bad label `{a}`")))?,
                            ),
                            Tok::Open => return Err(self.err("nested list in labels")),
                        }
                    }
                    let value = self.expr()?;
                    self.close()?;
                    arms.push(CaseArm { labels, value });
                }
                "default" => {
                    let d = self.expr()?;
                    self.close()?;
                    self.close()?;
                    return Ok(Expr::Case {
                        sel: Box::new(sel),
                        arms,
                        default: Box::new(d),
                    });
                }
                other => return Err(self.err(format!("unexpected `{other}` in case"))),
            }
        }
    }
}

fn unary_op(s: &str) -> Option<UnaryOp> {
    [
        UnaryOp::Not,
        UnaryOp::RedXor,
        UnaryOp::RedAnd,
        UnaryOp::RedOr,
        UnaryOp::LNot,
    ]
    .into_iter()
    .find(|op| op.keyword() == s)
}

fn binary_op(s: &str) -> Option<BinaryOp> {
    [
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Xor,
        BinaryOp::LAnd,
        BinaryOp::LOr,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Add,
    ]
    .into_iter()
    .find(|op| op.keyword() == s)
}

/// Parses `W'bBITS`.
fn parse_const(s: &str) -> Option<BitVec> {
    let (w, bits) = s.split_once("'b")?;
    let width: u32 = w.parse().ok()?;
    if width == 0 || width > 64 || bits.len() != width as usize {
        return None;
    }
    let value = u64::from_str_radix(bits, 2).ok()?;
    Some(BitVec::new(width, value))
}

fn parse_expr_at(text: &str, line: usize) -> Result<Expr, IrError> {
    let toks = tokenize(text);
    let mut r = Reader {
        toks: &toks,
        pos: 0,
        line,
    };
    let e = r.expr()?;
    if r.pos != toks.len() {
        return Err(r.err("trailing tokens after expression"));
    }
    Ok(e)
}

/// Reads the format produced by [`dump`].
pub fn read(text: &str) -> Result<ModuleIr, IrError> {
    let mut module: Option<ModuleIr> = None;
    let perr = |line: usize, msg: String| IrError::Parse { line, message: msg };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut parts = l.splitn(2, ' ');
        let kw = parts.next().unwrap();
        let rest = parts.next().unwrap_or("");
        if kw == "module" {
            module = Some(ModuleIr::new(rest.trim()));
            continue;
        }
        let m = module
            .as_mut()
            .ok_or_else(|| perr(line, "content before `module`".into()))?;
        let fields: Vec<&str> = rest.splitn(4, ' ').collect();
        let width = |i: usize| -> Result<u32, IrError> {
            fields
                .get(i)
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| perr(line, "expected width".into()))
        };
        let name = || -> Result<String, IrError> {
            fields
                .first()
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
                .ok_or_else(|| perr(line, "expected name".into()))
        };
        match kw {
            "input" => m.inputs.push(Port::new(name()?, width(1)?)),
            "output" => m.outputs.push(Port::new(name()?, width(1)?)),
            "register" => {
                let reset = fields
                    .get(2)
                    .and_then(|s| parse_const(s))
                    .ok_or_else(|| perr(line, "expected reset constant".into()))?;
                let next = parse_expr_at(fields.get(3).copied().unwrap_or(""), line)?;
                m.registers.push(RegisterDef {
                    name: name()?,
                    width: width(1)?,
                    reset_value: reset,
                    next_expr: next,
                });
            }
            "net" => {
                let body = rest.splitn(3, ' ').nth(2).unwrap_or("");
                m.nets.push(Net {
                    name: name()?,
                    width: width(1)?,
                    expr: parse_expr_at(body, line)?,
                });
            }
            "end" => return module.ok_or_else(|| perr(line, "`end` without module".into())),
            other => return Err(perr(line, format!("unknown directive `{other}`"))),
        }
    }
    Err(perr(text.lines().count(), "missing `end`".into()))
}
