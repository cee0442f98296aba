//! Bit-level form of a [`ModuleIr`]: a structurally hashed gate DAG over
//! input and state bits, one next-state function per state bit.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rustc_hash::FxHashMap;

use crate::ir::{BinaryOp, Expr, IrError, ModuleIr, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const FALSE: NodeId = NodeId(0);
    pub const TRUE: NodeId = NodeId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    False,
    True,
    Input(u32),
    State(u32),
    Not(NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Xor(NodeId, NodeId),
}

/// One bit of a word-level signal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitName {
    pub signal: String,
    pub bit: u32,
}

impl BitName {
    pub fn new(signal: impl Into<String>, bit: u32) -> Self {
        BitName {
            signal: signal.into(),
            bit,
        }
    }
}

impl fmt::Display for BitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.signal, self.bit)
    }
}

#[derive(Clone, Debug)]
pub struct StateBit {
    pub name: BitName,
    pub init: bool,
    pub next: NodeId,
}

#[derive(Clone, Debug)]
pub struct BooleanNetlist {
    pub name: String,
    pub inputs: Vec<BitName>,
    pub states: Vec<StateBit>,
    pub outputs: Vec<(BitName, NodeId)>,
    gates: Vec<Gate>,
    strash: FxHashMap<Gate, NodeId>,
}

impl BooleanNetlist {
    pub fn new(name: impl Into<String>) -> Self {
        let mut n = BooleanNetlist {
            name: name.into(),
            inputs: Vec::new(),
            states: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            strash: FxHashMap::default(),
        };
        n.intern(Gate::False);
        n.intern(Gate::True);
        n
    }

    pub fn gate(&self, id: NodeId) -> Gate {
        self.gates[id.index()]
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    fn intern(&mut self, g: Gate) -> NodeId {
        if let Some(&id) = self.strash.get(&g) {
            return id;
        }
        let id = NodeId(self.gates.len() as u32);
        self.gates.push(g);
        self.strash.insert(g, id);
        id
    }

    pub fn add_input(&mut self, name: BitName) -> NodeId {
        let idx = self.inputs.len() as u32;
        self.inputs.push(name);
        self.intern(Gate::Input(idx))
    }

    /// Adds a state bit whose next function is filled in later.
    pub fn add_state(&mut self, name: BitName, init: bool) -> NodeId {
        let idx = self.states.len() as u32;
        self.states.push(StateBit {
            name,
            init,
            next: NodeId::FALSE,
        });
        self.intern(Gate::State(idx))
    }

    pub fn constant(&self, b: bool) -> NodeId {
        if b {
            NodeId::TRUE
        } else {
            NodeId::FALSE
        }
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        match self.gate(a) {
            Gate::False => NodeId::TRUE,
            Gate::True => NodeId::FALSE,
            Gate::Not(x) => x,
            _ => self.intern(Gate::Not(a)),
        }
    }

    fn is_complement(&self, a: NodeId, b: NodeId) -> bool {
        self.gate(a) == Gate::Not(b) || self.gate(b) == Gate::Not(a)
    }

    pub fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == NodeId::FALSE || b == NodeId::FALSE || self.is_complement(a, b) {
            return NodeId::FALSE;
        }
        if a == NodeId::TRUE || a == b {
            return b;
        }
        if b == NodeId::TRUE {
            return a;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.intern(Gate::And(a, b))
    }

    pub fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == NodeId::TRUE || b == NodeId::TRUE || self.is_complement(a, b) {
            return NodeId::TRUE;
        }
        if a == NodeId::FALSE || a == b {
            return b;
        }
        if b == NodeId::FALSE {
            return a;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.intern(Gate::Or(a, b))
    }

    pub fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == b {
            return NodeId::FALSE;
        }
        if self.is_complement(a, b) {
            return NodeId::TRUE;
        }
        match (a, b) {
            (NodeId::FALSE, x) | (x, NodeId::FALSE) => x,
            (NodeId::TRUE, x) | (x, NodeId::TRUE) => self.not(x),
            _ => {
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                self.intern(Gate::Xor(a, b))
            }
        }
    }

    pub fn mux(&mut self, s: NodeId, t: NodeId, e: NodeId) -> NodeId {
        if t == e {
            return t;
        }
        let ns = self.not(s);
        let a = self.and(s, t);
        let b = self.and(ns, e);
        self.or(a, b)
    }

    pub fn output(&self, name: &BitName) -> Option<NodeId> {
        self.outputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
    }

    pub fn input_index(&self, name: &BitName) -> Option<usize> {
        self.inputs.iter().position(|n| n == name)
    }

    pub fn state_index(&self, name: &BitName) -> Option<usize> {
        self.states.iter().position(|s| &s.name == name)
    }

    /// Number of gates reachable from outputs and next-state functions,
    /// excluding constants and leaves.
    pub fn live_node_count(&self) -> usize {
        let roots: Vec<NodeId> = self
            .outputs
            .iter()
            .map(|(_, id)| *id)
            .chain(self.states.iter().map(|s| s.next))
            .collect();
        self.reachable(&roots)
            .into_iter()
            .filter(|id| {
                !matches!(
                    self.gate(*id),
                    Gate::False | Gate::True | Gate::Input(_) | Gate::State(_)
                )
            })
            .count()
    }

    fn reachable(&self, roots: &[NodeId]) -> Vec<NodeId> {
        let mut seen = vec![false; self.gates.len()];
        let mut stack: Vec<NodeId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            out.push(id);
            match self.gate(id) {
                Gate::Not(a) => stack.push(a),
                Gate::And(a, b) | Gate::Or(a, b) | Gate::Xor(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                _ => {}
            }
        }
        out
    }

    /// Leaves (input indices, state indices) feeding `roots`.
    pub fn support(&self, roots: &[NodeId]) -> (Vec<usize>, Vec<usize>) {
        let mut ins = Vec::new();
        let mut sts = Vec::new();
        for id in self.reachable(roots) {
            match self.gate(id) {
                Gate::Input(i) => ins.push(i as usize),
                Gate::State(s) => sts.push(s as usize),
                _ => {}
            }
        }
        ins.sort_unstable();
        sts.sort_unstable();
        (ins, sts)
    }

    /// Evaluates every gate with 64 independent lanes per word.
    /// Gates are stored in topological order, so one forward pass suffices.
    pub fn eval_words(&self, inputs: &[u64], states: &[u64]) -> Vec<u64> {
        let mut v = vec![0u64; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            v[i] = match *g {
                Gate::False => 0,
                Gate::True => u64::MAX,
                Gate::Input(k) => inputs[k as usize],
                Gate::State(k) => states[k as usize],
                Gate::Not(a) => !v[a.index()],
                Gate::And(a, b) => v[a.index()] & v[b.index()],
                Gate::Or(a, b) => v[a.index()] | v[b.index()],
                Gate::Xor(a, b) => v[a.index()] ^ v[b.index()],
            };
        }
        v
    }

    /// Single-point evaluation: (output bits, next-state bits).
    pub fn eval(&self, inputs: &[bool], states: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let iw: Vec<u64> = inputs
            .iter()
            .map(|&b| if b { u64::MAX } else { 0 })
            .collect();
        let sw: Vec<u64> = states
            .iter()
            .map(|&b| if b { u64::MAX } else { 0 })
            .collect();
        let v = self.eval_words(&iw, &sw);
        (
            self.outputs
                .iter()
                .map(|(_, id)| v[id.index()] & 1 == 1)
                .collect(),
            self.states
                .iter()
                .map(|s| v[s.next.index()] & 1 == 1)
                .collect(),
        )
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("unknown root `{0}`")]
    UnknownRoot(String),
}

/// Lowers a validated module to bit level. Addition becomes a ripple-carry
/// chain; case-select becomes a priority mux tree in declaration order.
pub fn bitblast(m: &ModuleIr) -> Result<BooleanNetlist, NetlistError> {
    let order = m.validate()?;
    let mut n = BooleanNetlist::new(m.name.clone());
    let mut env: HashMap<&str, Vec<NodeId>> = HashMap::new();
    for p in &m.inputs {
        let bits = (0..p.width)
            .map(|i| n.add_input(BitName::new(p.name.clone(), i)))
            .collect();
        env.insert(p.name.as_str(), bits);
    }
    for r in &m.registers {
        let bits = (0..r.width)
            .map(|i| n.add_state(BitName::new(r.name.clone(), i), r.reset_value.bit(i)))
            .collect();
        env.insert(r.name.as_str(), bits);
    }
    for i in order {
        let net = &m.nets[i];
        let bits = blast(&mut n, &env, &net.expr);
        env.insert(net.name.as_str(), bits);
    }
    let mut k = 0;
    for r in &m.registers {
        let bits = blast(&mut n, &env, &r.next_expr);
        for b in bits {
            n.states[k].next = b;
            k += 1;
        }
    }
    for o in &m.outputs {
        for (i, b) in env[o.name.as_str()].iter().enumerate() {
            n.outputs.push((BitName::new(o.name.clone(), i as u32), *b));
        }
    }
    Ok(n)
}

fn blast(n: &mut BooleanNetlist, env: &HashMap<&str, Vec<NodeId>>, e: &Expr) -> Vec<NodeId> {
    match e {
        Expr::Const(c) => (0..c.width).map(|i| n.constant(c.bit(i))).collect(),
        Expr::Ref(name) => env[name.as_str()].clone(),
        Expr::Bit(x, i) => vec![blast(n, env, x)[*i as usize]],
        Expr::Part(x, m, l) => blast(n, env, x)[*l as usize..=*m as usize].to_vec(),
        Expr::Concat(es) => {
            let mut out = Vec::new();
            for x in es.iter().rev() {
                out.extend(blast(n, env, x));
            }
            out
        }
        Expr::Unary(op, x) => {
            let v = blast(n, env, x);
            match op {
                UnaryOp::Not => v.into_iter().map(|b| n.not(b)).collect(),
                UnaryOp::RedXor => vec![fold_bits(n, &v, NodeId::FALSE, BooleanNetlist::xor)],
                UnaryOp::RedAnd => vec![fold_bits(n, &v, NodeId::TRUE, BooleanNetlist::and)],
                UnaryOp::RedOr => vec![fold_bits(n, &v, NodeId::FALSE, BooleanNetlist::or)],
                UnaryOp::LNot => {
                    let any = fold_bits(n, &v, NodeId::FALSE, BooleanNetlist::or);
                    vec![n.not(any)]
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let x = blast(n, env, a);
            let y = blast(n, env, b);
            match op {
                BinaryOp::And => zip(n, &x, &y, BooleanNetlist::and),
                BinaryOp::Or => zip(n, &x, &y, BooleanNetlist::or),
                BinaryOp::Xor => zip(n, &x, &y, BooleanNetlist::xor),
                BinaryOp::LAnd | BinaryOp::LOr => {
                    let xa = fold_bits(n, &x, NodeId::FALSE, BooleanNetlist::or);
                    let ya = fold_bits(n, &y, NodeId::FALSE, BooleanNetlist::or);
                    if *op == BinaryOp::LAnd {
                        vec![n.and(xa, ya)]
                    } else {
                        vec![n.or(xa, ya)]
                    }
                }
                BinaryOp::Eq | BinaryOp::Ne => {
                    let eq = equal(n, &x, &y);
                    if *op == BinaryOp::Eq {
                        vec![eq]
                    } else {
                        vec![n.not(eq)]
                    }
                }
                BinaryOp::Add => {
                    let mut carry = NodeId::FALSE;
                    let mut out = Vec::with_capacity(x.len());
                    for (&a, &b) in x.iter().zip(&y) {
                        let axb = n.xor(a, b);
                        out.push(n.xor(axb, carry));
                        let g = n.and(a, b);
                        let p = n.and(carry, axb);
                        carry = n.or(g, p);
                    }
                    out
                }
            }
        }
        Expr::Mux(s, a, b) => {
            let s = blast(n, env, s)[0];
            let x = blast(n, env, a);
            let y = blast(n, env, b);
            x.iter().zip(&y).map(|(&t, &e)| n.mux(s, t, e)).collect()
        }
        Expr::Case { sel, arms, default } => {
            let s = blast(n, env, sel);
            let mut acc = blast(n, env, default);
            for arm in arms.iter().rev() {
                let mut hit = NodeId::FALSE;
                for l in &arm.labels {
                    let lbits: Vec<NodeId> = (0..l.width).map(|i| n.constant(l.bit(i))).collect();
                    let eq = equal(n, &s, &lbits);
                    hit = n.or(hit, eq);
                }
                let v = blast(n, env, &arm.value);
                acc = v
                    .iter()
                    .zip(&acc)
                    .map(|(&t, &e)| n.mux(hit, t, e))
                    .collect();
            }
            acc
        }
    }
}

fn fold_bits(
    n: &mut BooleanNetlist,
    bits: &[NodeId],
    unit: NodeId,
    f: fn(&mut BooleanNetlist, NodeId, NodeId) -> NodeId,
) -> NodeId {
    bits.iter().fold(unit, |acc, &b| f(n, acc, b))
}

fn zip(
    n: &mut BooleanNetlist,
    x: &[NodeId],
    y: &[NodeId],
    f: fn(&mut BooleanNetlist, NodeId, NodeId) -> NodeId,
) -> Vec<NodeId> {
    x.iter().zip(y).map(|(&a, &b)| f(n, a, b)).collect()
}

fn equal(n: &mut BooleanNetlist, x: &[NodeId], y: &[NodeId]) -> NodeId {
    let mut acc = NodeId::TRUE;
    for (&a, &b) in x.iter().zip(y) {
        let d = n.xor(a, b);
        let same = n.not(d);
        acc = n.and(acc, same);
    }
    acc
}

/// Keeps exactly the inputs and state bits transitively feeding `roots`.
/// Outputs named as roots are kept; other outputs are dropped.
pub fn cone_of_influence(
    b: &BooleanNetlist,
    roots: &[BitName],
) -> Result<BooleanNetlist, NetlistError> {
    let mut root_nodes = Vec::new();
    let mut kept_outputs = Vec::new();
    for r in roots {
        if let Some(id) = b.output(r) {
            root_nodes.push(id);
            kept_outputs.push((r.clone(), id));
        } else if let Some(s) = b.state_index(r) {
            root_nodes.push(state_leaf(b, s));
        } else {
            return Err(NetlistError::UnknownRoot(r.to_string()));
        }
    }
    // Close over next-state functions.
    let mut states: HashSet<usize> = HashSet::new();
    let mut frontier = root_nodes.clone();
    loop {
        let (_, sts) = b.support(&frontier);
        let fresh: Vec<usize> = sts.into_iter().filter(|s| states.insert(*s)).collect();
        if fresh.is_empty() {
            break;
        }
        frontier = fresh.iter().map(|&s| b.states[s].next).collect();
    }
    let mut all_roots = root_nodes;
    all_roots.extend(states.iter().map(|&s| b.states[s].next));
    let (ins, _) = b.support(&all_roots);

    let mut out = BooleanNetlist::new(b.name.clone());
    let mut map: Vec<Option<NodeId>> = vec![None; b.gates.len()];
    map[0] = Some(NodeId::FALSE);
    map[1] = Some(NodeId::TRUE);
    for &i in &ins {
        let id = out.add_input(b.inputs[i].clone());
        map[b.strash[&Gate::Input(i as u32)].index()] = Some(id);
    }
    let mut kept_states: Vec<usize> = states.into_iter().collect();
    kept_states.sort_unstable();
    for &s in &kept_states {
        let id = out.add_state(b.states[s].name.clone(), b.states[s].init);
        map[state_leaf(b, s).index()] = Some(id);
    }
    for (k, &s) in kept_states.iter().enumerate() {
        out.states[k].next = copy_node(b, &mut out, &mut map, b.states[s].next);
    }
    for (name, id) in kept_outputs {
        let nid = copy_node(b, &mut out, &mut map, id);
        out.outputs.push((name, nid));
    }
    Ok(out)
}

fn state_leaf(b: &BooleanNetlist, s: usize) -> NodeId {
    b.strash[&Gate::State(s as u32)]
}

fn copy_node(
    src: &BooleanNetlist,
    dst: &mut BooleanNetlist,
    map: &mut [Option<NodeId>],
    root: NodeId,
) -> NodeId {
    let mut stack = vec![(root, false)];
    while let Some((id, expanded)) = stack.pop() {
        if map[id.index()].is_some() {
            continue;
        }
        let g = src.gate(id);
        let kids: Vec<NodeId> = match g {
            Gate::Not(a) => vec![a],
            Gate::And(a, b) | Gate::Or(a, b) | Gate::Xor(a, b) => vec![a, b],
            _ => vec![],
        };
        if !expanded {
            stack.push((id, true));
            for k in kids {
                if map[k.index()].is_none() {
                    stack.push((k, false));
                }
            }
            continue;
        }
        let m = |x: NodeId| map[x.index()].expect("child mapped");
        let nid = match g {
            Gate::Not(a) => {
                let a = m(a);
                dst.not(a)
            }
            Gate::And(a, b) => {
                let (a, b) = (m(a), m(b));
                dst.and(a, b)
            }
            Gate::Or(a, b) => {
                let (a, b) = (m(a), m(b));
                dst.or(a, b)
            }
            Gate::Xor(a, b) => {
                let (a, b) = (m(a), m(b));
                dst.xor(a, b)
            }
            other => unreachable!("leaf {other:?} not pre-mapped"),
        };
        map[id.index()] = Some(nid);
    }
    map[root.index()].unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BitVec, Net, Port, RegisterDef};

    fn two_regs() -> ModuleIr {
        let mut m = ModuleIr::new("m");
        m.inputs.push(Port::new("a", 2));
        m.inputs.push(Port::new("b", 2));
        m.registers.push(RegisterDef {
            name: "cs".into(),
            width: 2,
            reset_value: BitVec::new(2, 1),
            next_expr: Expr::sig("a"),
        });
        m.registers.push(RegisterDef {
            name: "cnt".into(),
            width: 2,
            reset_value: BitVec::new(2, 1),
            next_expr: Expr::binary(BinaryOp::Add, Expr::sig("cnt"), Expr::sig("b")),
        });
        m.nets.push(Net {
            name: "HE".into(),
            width: 1,
            expr: Expr::not(Expr::unary(UnaryOp::RedXor, Expr::sig("cs"))),
        });
        m.nets.push(Net {
            name: "O".into(),
            width: 2,
            expr: Expr::sig("cnt"),
        });
        m.outputs.push(Port::new("HE", 1));
        m.outputs.push(Port::new("O", 2));
        m
    }

    #[test]
    fn coi_drops_unrelated_register() {
        let b = bitblast(&two_regs()).unwrap();
        let r = cone_of_influence(&b, &[BitName::new("HE", 0)]).unwrap();
        let names: Vec<String> = r.states.iter().map(|s| s.name.signal.clone()).collect();
        assert_eq!(names, vec!["cs", "cs"]);
        assert!(r.inputs.iter().all(|i| i.signal == "a"));
    }

    #[test]
    fn coi_over_all_outputs_keeps_everything() {
        let b = bitblast(&two_regs()).unwrap();
        let roots: Vec<BitName> = b.outputs.iter().map(|(n, _)| n.clone()).collect();
        let r = cone_of_influence(&b, &roots).unwrap();
        assert_eq!(r.inputs, b.inputs);
        assert_eq!(r.states.len(), b.states.len());
        assert_eq!(r.outputs.len(), b.outputs.len());
        assert_eq!(r.live_node_count(), b.live_node_count());
    }

    #[test]
    fn coi_unknown_root() {
        let b = bitblast(&two_regs()).unwrap();
        assert!(matches!(
            cone_of_influence(&b, &[BitName::new("nope", 0)]),
            Err(NetlistError::UnknownRoot(_))
        ));
    }

    #[test]
    fn structural_hashing_folds_complements() {
        let mut n = BooleanNetlist::new("t");
        let a = n.add_input(BitName::new("a", 0));
        let na = n.not(a);
        assert_eq!(n.xor(a, na), NodeId::TRUE);
        assert_eq!(n.and(a, na), NodeId::FALSE);
        assert_eq!(n.not(na), a);
    }
}
