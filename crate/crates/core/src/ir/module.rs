use std::collections::{BTreeMap, HashMap};

use super::expr::{eval, mask, BinaryOp, BitVec, CaseArm, Expr, UnaryOp, MAX_WIDTH};
use super::IrError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub width: u32,
}

impl Port {
    pub fn new(name: impl Into<String>, width: u32) -> Self {
        Port {
            name: name.into(),
            width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterDef {
    pub name: String,
    pub width: u32,
    pub reset_value: BitVec,
    pub next_expr: Expr,
}

/// Combinational definition (a wire, or a `reg` driven from `always @(*)`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Net {
    pub name: String,
    pub width: u32,
    pub expr: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Input,
    Register,
    Net,
}

/// Elaborated single-clock word-level netlist of one module.
///
/// Outputs name an existing input, register or net of the same width; the
/// defining expression of an output is the definition of that signal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleIr {
    pub name: String,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    pub registers: Vec<RegisterDef>,
    pub nets: Vec<Net>,
}

pub type Assignment = BTreeMap<String, u64>;

impl ModuleIr {
    pub fn new(name: impl Into<String>) -> Self {
        ModuleIr {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn signal(&self, name: &str) -> Option<(SignalKind, u32)> {
        if let Some(p) = self.inputs.iter().find(|p| p.name == name) {
            return Some((SignalKind::Input, p.width));
        }
        if let Some(r) = self.registers.iter().find(|r| r.name == name) {
            return Some((SignalKind::Register, r.width));
        }
        self.nets
            .iter()
            .find(|n| n.name == name)
            .map(|n| (SignalKind::Net, n.width))
    }

    pub fn net(&self, name: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.name == name)
    }

    pub fn register(&self, name: &str) -> Option<&RegisterDef> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn state_bits(&self) -> u32 {
        self.registers.iter().map(|r| r.width).sum()
    }

    fn width_table(&self) -> HashMap<&str, u32> {
        let mut t = HashMap::new();
        for p in &self.inputs {
            t.insert(p.name.as_str(), p.width);
        }
        for r in &self.registers {
            t.insert(r.name.as_str(), r.width);
        }
        for n in &self.nets {
            t.insert(n.name.as_str(), n.width);
        }
        t
    }

    /// Width of `e`, checking every typing rule on the way down.
    pub fn width_of(&self, e: &Expr) -> Result<u32, String> {
        let table = self.width_table();
        expr_width(e, &|n| table.get(n).copied())
    }

    /// Checks every structural invariant and returns the nets in a
    /// dependency-respecting evaluation order.
    pub fn validate(&self) -> Result<Vec<usize>, IrError> {
        let mut seen: HashMap<&str, SignalKind> = HashMap::new();
        let all = self
            .inputs
            .iter()
            .map(|p| (p.name.as_str(), p.width, SignalKind::Input))
            .chain(
                self.registers
                    .iter()
                    .map(|r| (r.name.as_str(), r.width, SignalKind::Register)),
            )
            .chain(
                self.nets
                    .iter()
                    .map(|n| (n.name.as_str(), n.width, SignalKind::Net)),
            );
        for (name, width, kind) in all {
            if seen.insert(name, kind).is_some() {
                return Err(IrError::DuplicateSignal(name.to_string()));
            }
            if width == 0 || width > MAX_WIDTH {
                return Err(IrError::WidthMismatch {
                    signal: name.to_string(),
                    detail: format!("width {width} outside 1..={MAX_WIDTH}"),
                });
            }
        }
        let table = self.width_table();
        let lookup = |n: &str| table.get(n).copied();
        let check = |signal: &str, e: &Expr, want: u32| -> Result<(), IrError> {
            let got = expr_width(e, &lookup).map_err(|detail| {
                match detail.strip_prefix("unknown signal ") {
                    Some(s) => IrError::UnknownSignal {
                        signal: s.to_string(),
                        context: signal.to_string(),
                    },
                    None => IrError::WidthMismatch {
                        signal: signal.to_string(),
                        detail,
                    },
                }
            })?;
            if got != want {
                return Err(IrError::WidthMismatch {
                    signal: signal.to_string(),
                    detail: format!("declared width {want}, definition has width {got}"),
                });
            }
            Ok(())
        };
        for r in &self.registers {
            if r.reset_value.width != r.width {
                return Err(IrError::WidthMismatch {
                    signal: r.name.clone(),
                    detail: format!(
                        "reset value {} does not match width {}",
                        r.reset_value, r.width
                    ),
                });
            }
            check(&r.name, &r.next_expr, r.width)?;
        }
        for n in &self.nets {
            check(&n.name, &n.expr, n.width)?;
        }
        for o in &self.outputs {
            match table.get(o.name.as_str()) {
                None => {
                    return Err(IrError::UnknownSignal {
                        signal: o.name.clone(),
                        context: "output list".into(),
                    })
                }
                Some(&w) if w != o.width => {
                    return Err(IrError::WidthMismatch {
                        signal: o.name.clone(),
                        detail: format!("output declared {} bits, signal has {w}", o.width),
                    })
                }
                _ => {}
            }
        }
        self.net_order()
    }

    /// Topological order of nets; fails on a combinational cycle.
    pub fn net_order(&self) -> Result<Vec<usize>, IrError> {
        let index: HashMap<&str, usize> = self
            .nets
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.as_str(), i))
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.nets.len()];
        let mut order = Vec::with_capacity(self.nets.len());
        for root in 0..self.nets.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(root, self.net_deps(root, &index))];
            state[root] = 1;
            while let Some((node, deps)) = stack.last_mut() {
                if let Some(d) = deps.pop() {
                    match state[d] {
                        0 => {
                            state[d] = 1;
                            let dd = self.net_deps(d, &index);
                            stack.push((d, dd));
                        }
                        1 => {
                            return Err(IrError::CombinationalCycle(self.nets[d].name.clone()));
                        }
                        _ => {}
                    }
                } else {
                    let n = *node;
                    state[n] = 2;
                    order.push(n);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    fn net_deps(&self, i: usize, index: &HashMap<&str, usize>) -> Vec<usize> {
        let mut deps: Vec<usize> = self.nets[i]
            .expr
            .refs()
            .into_iter()
            .filter_map(|r| index.get(r).copied())
            .collect();
        deps.sort_unstable();
        deps.dedup();
        deps.reverse();
        deps
    }

    /// Input-only transitive support of `e` through nets; returns the
    /// non-input leaves (registers) reached.
    pub fn non_input_support(&self, e: &Expr) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack: Vec<String> = e.refs().into_iter().map(String::from).collect();
        let mut seen = std::collections::HashSet::new();
        while let Some(s) = stack.pop() {
            if !seen.insert(s.clone()) {
                continue;
            }
            match self.signal(&s) {
                Some((SignalKind::Net, _)) => {
                    let n = self.net(&s).expect("net exists");
                    stack.extend(n.expr.refs().into_iter().map(String::from));
                }
                Some((SignalKind::Register, _)) => out.push(s),
                _ => {}
            }
        }
        out.sort();
        out
    }

    /// Turns the named registers or nets into free inputs. Their previous
    /// definitions are dropped.
    pub fn cut(&self, signals: &[String]) -> Result<ModuleIr, IrError> {
        let mut m = self.clone();
        for s in signals {
            let width = match m.signal(s) {
                Some((SignalKind::Input, _)) => continue,
                Some((_, w)) => w,
                None => {
                    return Err(IrError::UnknownSignal {
                        signal: s.clone(),
                        context: "cut point".into(),
                    })
                }
            };
            m.registers.retain(|r| &r.name != s);
            m.nets.retain(|n| &n.name != s);
            m.inputs.push(Port::new(s.clone(), width));
        }
        Ok(m)
    }

    /// Propagates constant nets into their readers and folds constant
    /// sub-expressions. Nets themselves are kept.
    pub fn fold_constants(&mut self) -> Result<(), IrError> {
        let order = self.net_order()?;
        let widths: HashMap<String, u32> = self
            .width_table()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let mut consts: HashMap<String, BitVec> = HashMap::new();
        for i in order {
            let folded = fold(&self.nets[i].expr, &consts, &widths);
            if let Some(c) = folded.as_const() {
                consts.insert(self.nets[i].name.clone(), c);
            }
            self.nets[i].expr = folded;
        }
        for r in &mut self.registers {
            r.next_expr = fold(&r.next_expr, &consts, &widths);
        }
        Ok(())
    }

    /// Evaluates outputs and next state for one cycle.
    pub fn interpret(
        &self,
        state: &Assignment,
        inputs: &Assignment,
    ) -> Result<(Assignment, Assignment), IrError> {
        Simulator::new(self)?.step(state, inputs)
    }

    /// Register reset values.
    pub fn reset_state(&self) -> Assignment {
        self.registers
            .iter()
            .map(|r| (r.name.clone(), r.reset_value.value))
            .collect()
    }
}

pub(crate) fn expr_width(e: &Expr, lookup: &impl Fn(&str) -> Option<u32>) -> Result<u32, String> {
    let w = match e {
        Expr::Const(c) => {
            if c.width == 0 || c.width > MAX_WIDTH {
                return Err(format!("constant width {} out of range", c.width));
            }
            c.width
        }
        Expr::Ref(n) => lookup(n).ok_or_else(|| format!("unknown signal {n}"))?,
        Expr::Bit(x, i) => {
            let w = expr_width(x, lookup)?;
            if *i >= w {
                return Err(format!("bit index {i} out of range for width {w}"));
            }
            1
        }
        Expr::Part(x, m, l) => {
            let w = expr_width(x, lookup)?;
            if m < l || *m >= w {
                return Err(format!("part select [{m}:{l}] out of range for width {w}"));
            }
            m - l + 1
        }
        Expr::Concat(es) => {
            if es.is_empty() {
                return Err("empty concatenation".into());
            }
            let mut total = 0;
            for x in es {
                total += expr_width(x, lookup)?;
            }
            if total > MAX_WIDTH {
                return Err(format!("concatenation width {total} exceeds {MAX_WIDTH}"));
            }
            total
        }
        Expr::Unary(op, x) => {
            let w = expr_width(x, lookup)?;
            match op {
                UnaryOp::Not => w,
                _ => 1,
            }
        }
        Expr::Binary(op, a, b) => {
            let wa = expr_width(a, lookup)?;
            let wb = expr_width(b, lookup)?;
            match op {
                BinaryOp::LAnd | BinaryOp::LOr => 1,
                _ if wa != wb => {
                    return Err(format!(
                        "operands of `{}` have widths {wa} and {wb}",
                        op.keyword()
                    ))
                }
                BinaryOp::Eq | BinaryOp::Ne => 1,
                _ => wa,
            }
        }
        Expr::Mux(s, a, b) => {
            let ws = expr_width(s, lookup)?;
            if ws != 1 {
                return Err(format!("mux select has width {ws}"));
            }
            let wa = expr_width(a, lookup)?;
            let wb = expr_width(b, lookup)?;
            if wa != wb {
                return Err(format!("mux arms have widths {wa} and {wb}"));
            }
            wa
        }
        Expr::Case { sel, arms, default } => {
            let ws = expr_width(sel, lookup)?;
            let wd = expr_width(default, lookup)?;
            for arm in arms {
                if arm.labels.is_empty() {
                    return Err("case arm without labels".into());
                }
                if let Some(l) = arm.labels.iter().find(|l| l.width != ws) {
                    return Err(format!("case label {l} does not match selector width {ws}"));
                }
                let wa = expr_width(&arm.value, lookup)?;
                if wa != wd {
                    return Err(format!(
                        "case arm width {wa} differs from default width {wd}"
                    ));
                }
            }
            wd
        }
    };
    Ok(w)
}

fn fold(e: &Expr, consts: &HashMap<String, BitVec>, widths: &HashMap<String, u32>) -> Expr {
    let f = |x: &Expr| fold(x, consts, widths);
    let out = match e {
        Expr::Const(_) => return e.clone(),
        Expr::Ref(n) => match consts.get(n) {
            Some(c) => return Expr::Const(*c),
            None => return e.clone(),
        },
        Expr::Bit(x, i) => Expr::Bit(Box::new(f(x)), *i),
        Expr::Part(x, m, l) => Expr::Part(Box::new(f(x)), *m, *l),
        Expr::Concat(es) => Expr::Concat(es.iter().map(f).collect()),
        Expr::Unary(op, x) => Expr::Unary(*op, Box::new(f(x))),
        Expr::Binary(op, a, b) => {
            let (a, b) = (f(a), f(b));
            match (op, a.as_const(), b.as_const()) {
                (BinaryOp::And, Some(c), _) if c.value == 0 => return a,
                (BinaryOp::And, _, Some(c)) if c.value == 0 => return b,
                (BinaryOp::And, Some(c), None) if c.value == mask(c.width) => return b,
                (BinaryOp::And, None, Some(c)) if c.value == mask(c.width) => return a,
                (BinaryOp::Or | BinaryOp::Xor, Some(c), None) if c.value == 0 => return b,
                (BinaryOp::Or | BinaryOp::Xor, None, Some(c)) if c.value == 0 => return a,
                _ => Expr::Binary(*op, Box::new(a), Box::new(b)),
            }
        }
        Expr::Mux(s, a, b) => {
            let s = f(s);
            if let Some(c) = s.as_const() {
                return if c.value != 0 { f(a) } else { f(b) };
            }
            Expr::Mux(Box::new(s), Box::new(f(a)), Box::new(f(b)))
        }
        Expr::Case { sel, arms, default } => {
            let sel = f(sel);
            if let Some(c) = sel.as_const() {
                for arm in arms {
                    if arm.labels.iter().any(|l| l.value == c.value) {
                        return f(&arm.value);
                    }
                }
                return f(default);
            }
            Expr::Case {
                sel: Box::new(sel),
                arms: arms
                    .iter()
                    .map(|a| CaseArm {
                        labels: a.labels.clone(),
                        value: f(&a.value),
                    })
                    .collect(),
                default: Box::new(f(default)),
            }
        }
    };
    if all_const(&out) {
        let (v, w) = eval(&out, &|_| 0, &|n| widths.get(n).copied().unwrap_or(1));
        Expr::Const(BitVec::new(w, v))
    } else {
        out
    }
}

fn all_const(e: &Expr) -> bool {
    let mut any_ref = false;
    e.for_each_ref(&mut |_| any_ref = true);
    !any_ref
}

/// Word-level reference interpreter with a precomputed evaluation order.
pub struct Simulator<'m> {
    module: &'m ModuleIr,
    order: Vec<usize>,
    widths: HashMap<&'m str, u32>,
}

impl<'m> Simulator<'m> {
    pub fn new(module: &'m ModuleIr) -> Result<Self, IrError> {
        let order = module.validate()?;
        Ok(Simulator {
            module,
            order,
            widths: module.width_table(),
        })
    }

    /// One clock cycle. `state` must cover exactly the registers and
    /// `inputs` exactly the inputs. Returns (outputs, next state).
    pub fn step(
        &self,
        state: &Assignment,
        inputs: &Assignment,
    ) -> Result<(Assignment, Assignment), IrError> {
        let env = self.settle(state, inputs)?;
        let outputs = self
            .module
            .outputs
            .iter()
            .map(|o| (o.name.clone(), env[o.name.as_str()]))
            .collect();
        let next = self
            .module
            .registers
            .iter()
            .map(|r| (r.name.clone(), self.eval_in(&env, &r.next_expr)))
            .collect();
        Ok((outputs, next))
    }

    /// Values of every signal (inputs, registers, nets) for one cycle.
    pub fn settle(
        &self,
        state: &Assignment,
        inputs: &Assignment,
    ) -> Result<HashMap<&'m str, u64>, IrError> {
        let m = self.module;
        check_cover(
            "state",
            state,
            m.registers.iter().map(|r| (r.name.as_str(), r.width)),
        )?;
        check_cover(
            "inputs",
            inputs,
            m.inputs.iter().map(|p| (p.name.as_str(), p.width)),
        )?;
        let mut env: HashMap<&'m str, u64> = HashMap::with_capacity(self.widths.len());
        for p in &m.inputs {
            env.insert(p.name.as_str(), inputs[&p.name]);
        }
        for r in &m.registers {
            env.insert(r.name.as_str(), state[&r.name]);
        }
        for &i in &self.order {
            let n = &m.nets[i];
            let v = self.eval_in(&env, &n.expr);
            env.insert(n.name.as_str(), v);
        }
        Ok(env)
    }

    pub fn eval_in(&self, env: &HashMap<&'m str, u64>, e: &Expr) -> u64 {
        eval(e, &|n| env[n], &|n| self.widths[n]).0
    }
}

fn check_cover<'a>(
    what: &str,
    given: &Assignment,
    expected: impl Iterator<Item = (&'a str, u32)>,
) -> Result<(), IrError> {
    let mut count = 0;
    for (name, width) in expected {
        count += 1;
        match given.get(name) {
            None => return Err(IrError::Assignment(format!("{what} is missing `{name}`"))),
            Some(v) if *v & !mask(width) != 0 => {
                return Err(IrError::Assignment(format!(
                    "{what} value {v} for `{name}` exceeds {width} bits"
                )))
            }
            _ => {}
        }
    }
    if given.len() != count {
        return Err(IrError::Assignment(format!(
            "{what} assigns {} signals, expected {count}",
            given.len()
        )));
    }
    Ok(())
}
