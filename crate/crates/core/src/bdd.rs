//! Reduced ordered BDDs over a fixed variable order (variable index is the
//! level). Nodes are hash-consed and never freed; every operation fails
//! with [`BddError::NodeLimit`] once the table reaches its limit.

use std::fmt::Write as _;
use std::time::Instant;

use rustc_hash::FxHashMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bdd(u32);

impl Bdd {
    pub const FALSE: Bdd = Bdd(0);
    pub const TRUE: Bdd = Bdd(1);

    pub fn is_const(self) -> bool {
        self.0 < 2
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum BddError {
    #[error("BDD node limit of {0} reached")]
    NodeLimit(usize),
    #[error("deadline exceeded")]
    Timeout,
    #[error("rename map is not injective or collides with the support")]
    BadRename,
}

pub type BddResult<T> = Result<T, BddError>;

const TERMINAL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    var: u32,
    lo: u32,
    hi: u32,
}

/// A set of variables to quantify.
#[derive(Clone, Debug, Default)]
pub struct VarSet {
    member: Vec<bool>,
    last: Option<u32>,
}

impl VarSet {
    pub fn new(vars: impl IntoIterator<Item = u32>) -> Self {
        let mut s = VarSet::default();
        for v in vars {
            let i = v as usize;
            if s.member.len() <= i {
                s.member.resize(i + 1, false);
            }
            s.member[i] = true;
            s.last = Some(s.last.map_or(v, |l| l.max(v)));
        }
        s
    }

    pub fn contains(&self, v: u32) -> bool {
        self.member.get(v as usize).copied().unwrap_or(false)
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_none()
    }

    fn beyond(&self, v: u32) -> bool {
        self.last.is_none_or(|l| v > l)
    }
}

pub struct Manager {
    nodes: Vec<Node>,
    unique: FxHashMap<(u32, u32, u32), u32>,
    ite_cache: FxHashMap<(u32, u32, u32), u32>,
    num_vars: u32,
    node_limit: usize,
    deadline: Option<Instant>,
    ticks: u32,
}

const CACHE_FLUSH: usize = 1 << 22;

impl Manager {
    pub fn new(num_vars: u32) -> Self {
        Manager {
            nodes: vec![
                Node {
                    var: TERMINAL,
                    lo: 0,
                    hi: 0,
                },
                Node {
                    var: TERMINAL,
                    lo: 1,
                    hi: 1,
                },
            ],
            unique: FxHashMap::default(),
            ite_cache: FxHashMap::default(),
            num_vars,
            node_limit: usize::MAX,
            deadline: None,
            ticks: 0,
        }
    }

    pub fn with_limit(mut self, node_limit: usize) -> Self {
        self.node_limit = node_limit;
        self
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Total nodes allocated, terminals included. Nodes are never freed, so
    /// this is also the peak.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn peak_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn var_of(&self, f: Bdd) -> Option<u32> {
        let v = self.nodes[f.0 as usize].var;
        (v != TERMINAL).then_some(v)
    }

    /// Low and high cofactors of a non-terminal node.
    pub fn children(&self, f: Bdd) -> (Bdd, Bdd) {
        let n = self.nodes[f.0 as usize];
        (Bdd(n.lo), Bdd(n.hi))
    }

    fn level(&self, f: u32) -> u32 {
        self.nodes[f as usize].var
    }

    pub fn mk(&mut self, var: u32, lo: Bdd, hi: Bdd) -> BddResult<Bdd> {
        self.mk_raw(var, lo.0, hi.0).map(Bdd)
    }

    fn mk_raw(&mut self, var: u32, lo: u32, hi: u32) -> BddResult<u32> {
        if lo == hi {
            return Ok(lo);
        }
        debug_assert!(var < self.level(lo) && var < self.level(hi));
        if let Some(&n) = self.unique.get(&(var, lo, hi)) {
            return Ok(n);
        }
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(BddError::Timeout);
                }
            }
        }
        if self.nodes.len() >= self.node_limit {
            return Err(BddError::NodeLimit(self.node_limit));
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { var, lo, hi });
        self.unique.insert((var, lo, hi), id);
        if var >= self.num_vars {
            self.num_vars = var + 1;
        }
        Ok(id)
    }

    pub fn var(&mut self, v: u32) -> BddResult<Bdd> {
        self.mk(v, Bdd::FALSE, Bdd::TRUE)
    }

    pub fn nvar(&mut self, v: u32) -> BddResult<Bdd> {
        self.mk(v, Bdd::TRUE, Bdd::FALSE)
    }

    pub fn literal(&mut self, v: u32, value: bool) -> BddResult<Bdd> {
        if value {
            self.var(v)
        } else {
            self.nvar(v)
        }
    }

    pub fn constant(b: bool) -> Bdd {
        if b {
            Bdd::TRUE
        } else {
            Bdd::FALSE
        }
    }

    pub fn not(&mut self, f: Bdd) -> BddResult<Bdd> {
        self.ite(f, Bdd::FALSE, Bdd::TRUE)
    }

    pub fn and(&mut self, f: Bdd, g: Bdd) -> BddResult<Bdd> {
        self.ite(f, g, Bdd::FALSE)
    }

    pub fn or(&mut self, f: Bdd, g: Bdd) -> BddResult<Bdd> {
        self.ite(f, Bdd::TRUE, g)
    }

    pub fn xor(&mut self, f: Bdd, g: Bdd) -> BddResult<Bdd> {
        let ng = self.not(g)?;
        self.ite(f, ng, g)
    }

    pub fn xnor(&mut self, f: Bdd, g: Bdd) -> BddResult<Bdd> {
        let ng = self.not(g)?;
        self.ite(f, g, ng)
    }

    pub fn imp(&mut self, f: Bdd, g: Bdd) -> BddResult<Bdd> {
        self.ite(f, g, Bdd::TRUE)
    }

    pub fn and_all(&mut self, fs: impl IntoIterator<Item = Bdd>) -> BddResult<Bdd> {
        let mut acc = Bdd::TRUE;
        for f in fs {
            acc = self.and(acc, f)?;
        }
        Ok(acc)
    }

    pub fn or_all(&mut self, fs: impl IntoIterator<Item = Bdd>) -> BddResult<Bdd> {
        let mut acc = Bdd::FALSE;
        for f in fs {
            acc = self.or(acc, f)?;
        }
        Ok(acc)
    }

    fn cofactors(&self, f: u32, v: u32) -> (u32, u32) {
        let n = self.nodes[f as usize];
        if n.var == v {
            (n.lo, n.hi)
        } else {
            (f, f)
        }
    }

    pub fn ite(&mut self, f: Bdd, g: Bdd, h: Bdd) -> BddResult<Bdd> {
        if self.ite_cache.len() > CACHE_FLUSH {
            self.ite_cache.clear();
        }
        self.ite_rec(f.0, g.0, h.0).map(Bdd)
    }

    fn ite_rec(&mut self, f: u32, mut g: u32, mut h: u32) -> BddResult<u32> {
        match f {
            1 => return Ok(g),
            0 => return Ok(h),
            _ => {}
        }
        if g == f {
            g = 1;
        }
        if h == f {
            h = 0;
        }
        if g == h {
            return Ok(g);
        }
        if g == 1 && h == 0 {
            return Ok(f);
        }
        let key = (f, g, h);
        if let Some(&r) = self.ite_cache.get(&key) {
            return Ok(r);
        }
        let v = self.level(f).min(self.level(g)).min(self.level(h));
        let (f0, f1) = self.cofactors(f, v);
        let (g0, g1) = self.cofactors(g, v);
        let (h0, h1) = self.cofactors(h, v);
        let lo = self.ite_rec(f0, g0, h0)?;
        let hi = self.ite_rec(f1, g1, h1)?;
        let r = self.mk_raw(v, lo, hi)?;
        self.ite_cache.insert(key, r);
        Ok(r)
    }

    /// Restricts variable `v` to `value`.
    pub fn restrict(&mut self, f: Bdd, v: u32, value: bool) -> BddResult<Bdd> {
        let mut cache = FxHashMap::default();
        self.restrict_rec(f.0, v, value, &mut cache).map(Bdd)
    }

    fn restrict_rec(
        &mut self,
        f: u32,
        v: u32,
        value: bool,
        cache: &mut FxHashMap<u32, u32>,
    ) -> BddResult<u32> {
        let n = self.nodes[f as usize];
        if n.var == TERMINAL || n.var > v {
            return Ok(f);
        }
        if n.var == v {
            return Ok(if value { n.hi } else { n.lo });
        }
        if let Some(&r) = cache.get(&f) {
            return Ok(r);
        }
        let lo = self.restrict_rec(n.lo, v, value, cache)?;
        let hi = self.restrict_rec(n.hi, v, value, cache)?;
        let r = self.mk_raw(n.var, lo, hi)?;
        cache.insert(f, r);
        Ok(r)
    }

    pub fn exists(&mut self, f: Bdd, vars: &VarSet) -> BddResult<Bdd> {
        if vars.is_empty() {
            return Ok(f);
        }
        let mut cache = FxHashMap::default();
        self.exists_rec(f.0, vars, &mut cache).map(Bdd)
    }

    fn exists_rec(
        &mut self,
        f: u32,
        vars: &VarSet,
        cache: &mut FxHashMap<u32, u32>,
    ) -> BddResult<u32> {
        let n = self.nodes[f as usize];
        if n.var == TERMINAL || vars.beyond(n.var) {
            return Ok(f);
        }
        if let Some(&r) = cache.get(&f) {
            return Ok(r);
        }
        let lo = self.exists_rec(n.lo, vars, cache)?;
        let r = if vars.contains(n.var) {
            if lo == 1 {
                1
            } else {
                let hi = self.exists_rec(n.hi, vars, cache)?;
                self.ite_rec(lo, 1, hi)?
            }
        } else {
            let hi = self.exists_rec(n.hi, vars, cache)?;
            self.mk_raw(n.var, lo, hi)?
        };
        cache.insert(f, r);
        Ok(r)
    }

    pub fn forall(&mut self, f: Bdd, vars: &VarSet) -> BddResult<Bdd> {
        let nf = self.not(f)?;
        let e = self.exists(nf, vars)?;
        self.not(e)
    }

    /// Relational product `∃vars. f ∧ g` without building the conjunction.
    pub fn and_exists(&mut self, f: Bdd, g: Bdd, vars: &VarSet) -> BddResult<Bdd> {
        if self.ite_cache.len() > CACHE_FLUSH {
            self.ite_cache.clear();
        }
        let mut cache = FxHashMap::default();
        let mut ex_cache = FxHashMap::default();
        self.relprod_rec(f.0, g.0, vars, &mut cache, &mut ex_cache)
            .map(Bdd)
    }

    fn relprod_rec(
        &mut self,
        f: u32,
        g: u32,
        vars: &VarSet,
        cache: &mut FxHashMap<(u32, u32), u32>,
        ex_cache: &mut FxHashMap<u32, u32>,
    ) -> BddResult<u32> {
        if f == 0 || g == 0 {
            return Ok(0);
        }
        if f == 1 && g == 1 {
            return Ok(1);
        }
        if f == 1 || f == g {
            return self.exists_rec(g, vars, ex_cache);
        }
        if g == 1 {
            return self.exists_rec(f, vars, ex_cache);
        }
        let key = if f < g { (f, g) } else { (g, f) };
        if let Some(&r) = cache.get(&key) {
            return Ok(r);
        }
        let v = self.level(f).min(self.level(g));
        let r = if vars.beyond(v) {
            self.ite_rec(f, g, 0)?
        } else {
            let (f0, f1) = self.cofactors(f, v);
            let (g0, g1) = self.cofactors(g, v);
            let lo = self.relprod_rec(f0, g0, vars, cache, ex_cache)?;
            if vars.contains(v) {
                if lo == 1 {
                    1
                } else {
                    let hi = self.relprod_rec(f1, g1, vars, cache, ex_cache)?;
                    self.ite_rec(lo, 1, hi)?
                }
            } else {
                let hi = self.relprod_rec(f1, g1, vars, cache, ex_cache)?;
                self.mk_raw(v, lo, hi)?
            }
        };
        cache.insert(key, r);
        Ok(r)
    }

    /// Simultaneous substitution of variables by variables. The map must be
    /// injective, and no target may already occur in the support unless it
    /// is itself renamed.
    pub fn rename(&mut self, f: Bdd, map: &[(u32, u32)]) -> BddResult<Bdd> {
        let mut lookup: FxHashMap<u32, u32> = FxHashMap::default();
        let mut targets: FxHashMap<u32, u32> = FxHashMap::default();
        for &(from, to) in map {
            if lookup.insert(from, to).is_some_and(|prev| prev != to) {
                return Err(BddError::BadRename);
            }
            if targets.insert(to, from).is_some_and(|prev| prev != from) {
                return Err(BddError::BadRename);
            }
        }
        for v in self.support(f) {
            if targets.contains_key(&v) && !lookup.contains_key(&v) {
                return Err(BddError::BadRename);
            }
        }
        let mut cache = FxHashMap::default();
        self.rename_rec(f.0, &lookup, &mut cache).map(Bdd)
    }

    fn rename_rec(
        &mut self,
        f: u32,
        map: &FxHashMap<u32, u32>,
        cache: &mut FxHashMap<u32, u32>,
    ) -> BddResult<u32> {
        let n = self.nodes[f as usize];
        if n.var == TERMINAL {
            return Ok(f);
        }
        if let Some(&r) = cache.get(&f) {
            return Ok(r);
        }
        let lo = self.rename_rec(n.lo, map, cache)?;
        let hi = self.rename_rec(n.hi, map, cache)?;
        let v = map.get(&n.var).copied().unwrap_or(n.var);
        let x = self.mk_raw(v, 0, 1)?;
        let r = self.ite_rec(x, hi, lo)?;
        cache.insert(f, r);
        Ok(r)
    }

    /// A satisfying total assignment over `0..num_vars`, following low
    /// branches where possible; variables off the path are 0.
    pub fn sat_one(&self, f: Bdd) -> Option<Vec<bool>> {
        if f == Bdd::FALSE {
            return None;
        }
        let mut out = vec![false; self.num_vars as usize];
        let mut cur = f.0;
        while cur > 1 {
            let n = self.nodes[cur as usize];
            if n.lo != 0 {
                cur = n.lo;
            } else {
                out[n.var as usize] = true;
                cur = n.hi;
            }
        }
        Some(out)
    }

    /// Builds the conjunction of literals in `cube`.
    pub fn cube(&mut self, cube: &[(u32, bool)]) -> BddResult<Bdd> {
        let mut lits = cube.to_vec();
        lits.sort_unstable_by_key(|l| std::cmp::Reverse(l.0));
        let mut acc = Bdd::TRUE;
        for (v, val) in lits {
            acc = if val {
                self.mk(v, Bdd::FALSE, acc)?
            } else {
                self.mk(v, acc, Bdd::FALSE)?
            };
        }
        Ok(acc)
    }

    pub fn eval(&self, f: Bdd, assignment: impl Fn(u32) -> bool) -> bool {
        let mut cur = f.0;
        while cur > 1 {
            let n = self.nodes[cur as usize];
            cur = if assignment(n.var) { n.hi } else { n.lo };
        }
        cur == 1
    }

    fn reachable(&self, f: Bdd) -> Vec<u32> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![f.0];
        let mut out = Vec::new();
        while let Some(x) = stack.pop() {
            if x < 2 || !seen.insert(x) {
                continue;
            }
            out.push(x);
            let n = self.nodes[x as usize];
            stack.push(n.lo);
            stack.push(n.hi);
        }
        out
    }

    /// Sorted variables the function depends on.
    pub fn support(&self, f: Bdd) -> Vec<u32> {
        let mut vs: Vec<u32> = self
            .reachable(f)
            .into_iter()
            .map(|x| self.nodes[x as usize].var)
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Internal nodes reachable from `f`.
    pub fn node_count(&self, f: Bdd) -> usize {
        self.reachable(f).len()
    }

    /// Number of satisfying assignments over variables `0..num_vars`.
    pub fn sat_count(&self, f: Bdd, num_vars: u32) -> f64 {
        // fraction of assignments satisfying f
        fn rec(m: &Manager, f: u32, memo: &mut FxHashMap<u32, f64>) -> f64 {
            if f < 2 {
                return f as f64;
            }
            if let Some(&c) = memo.get(&f) {
                return c;
            }
            let n = m.nodes[f as usize];
            let c = 0.5 * rec(m, n.lo, memo) + 0.5 * rec(m, n.hi, memo);
            memo.insert(f, c);
            c
        }
        let mut memo = FxHashMap::default();
        rec(self, f.0, &mut memo) * 2f64.powi(num_vars as i32)
    }

    /// Checks canonicity invariants of the whole table.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen: FxHashMap<(u32, u32, u32), u32> = FxHashMap::default();
        for (i, n) in self.nodes.iter().enumerate().skip(2) {
            if n.lo == n.hi {
                return Err(format!("node {i} is redundant"));
            }
            if n.lo as usize >= i || n.hi as usize >= i {
                return Err(format!("node {i} points forward"));
            }
            if n.var >= self.level(n.lo) || n.var >= self.level(n.hi) {
                return Err(format!("node {i} violates the variable order"));
            }
            if let Some(j) = seen.insert((n.var, n.lo, n.hi), i as u32) {
                return Err(format!("nodes {j} and {i} are duplicates"));
            }
            if self.unique.get(&(n.var, n.lo, n.hi)) != Some(&(i as u32)) {
                return Err(format!("node {i} missing from the unique table"));
            }
        }
        if self.unique.len() != self.nodes.len() - 2 {
            return Err("unique table holds stale entries".into());
        }
        Ok(())
    }

    /// Graphviz rendering; dashed edges are low branches.
    pub fn to_dot(&self, f: Bdd, name: impl Fn(u32) -> String) -> String {
        let mut s = String::from("digraph bdd {\n");
        s.push_str("  n0 [shape=box,label=\"0\"];\n  n1 [shape=box,label=\"1\"];\n");
        let mut nodes = self.reachable(f);
        nodes.sort_unstable();
        for x in nodes {
            let n = self.nodes[x as usize];
            writeln!(s, "  n{x} [label=\"{}\"];", name(n.var)).unwrap();
            writeln!(s, "  n{x} -> n{} [style=dashed];", n.lo).unwrap();
            writeln!(s, "  n{x} -> n{};", n.hi).unwrap();
        }
        writeln!(s, "  root -> n{};", f.0).unwrap();
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms_share_nodes() {
        let mut m = Manager::new(3);
        let (a, b) = (m.var(0).unwrap(), m.var(1).unwrap());
        let ab = m.and(a, b).unwrap();
        let ba = m.and(b, a).unwrap();
        assert_eq!(ab, ba);
        let na = m.not(a).unwrap();
        assert_eq!(m.or(a, na).unwrap(), Bdd::TRUE);
        assert_eq!(m.xor(ab, ab).unwrap(), Bdd::FALSE);
        m.audit().unwrap();
    }

    #[test]
    fn node_limit_is_reported() {
        let mut m = Manager::new(16).with_limit(10);
        let mut acc = Bdd::FALSE;
        let mut err = None;
        for v in 0..16 {
            let x = m.var(v).unwrap_or(Bdd::FALSE);
            match m.xor(acc, x) {
                Ok(r) => acc = r,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert_eq!(err, Some(BddError::NodeLimit(10)));
    }

    #[test]
    fn rename_rejects_collisions() {
        let mut m = Manager::new(4);
        let (a, b) = (m.var(0).unwrap(), m.var(1).unwrap());
        let f = m.and(a, b).unwrap();
        assert_eq!(m.rename(f, &[(0, 1)]), Err(BddError::BadRename));
        assert_eq!(m.rename(f, &[(0, 2), (1, 2)]), Err(BddError::BadRename));
        let swapped = m.rename(f, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(swapped, f);
        let moved = m.rename(f, &[(0, 2), (1, 3)]).unwrap();
        assert_eq!(m.support(moved), vec![2, 3]);
    }

    #[test]
    fn sat_one_prefers_zero() {
        let mut m = Manager::new(3);
        let (a, c) = (m.var(0).unwrap(), m.var(2).unwrap());
        let f = m.or(a, c).unwrap();
        assert_eq!(m.sat_one(f), Some(vec![false, false, true]));
        assert_eq!(m.sat_one(Bdd::FALSE), None);
        assert_eq!(m.sat_one(Bdd::TRUE), Some(vec![false; 3]));
    }

    #[test]
    fn dot_lists_reachable_nodes() {
        let mut m = Manager::new(2);
        let (a, b) = (m.var(0).unwrap(), m.var(1).unwrap());
        let f = m.xor(a, b).unwrap();
        let dot = m.to_dot(f, |v| format!("x{v}"));
        assert_eq!(dot.matches("label=\"x1\"").count(), 2);
        assert_eq!(dot.matches("label=\"x0\"").count(), 1);
    }
}
