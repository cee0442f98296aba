//! BDD reachability. Variable order: all inputs first, then each state
//! bit's current and next copies interleaved.

use std::time::Instant;

use crate::bdd::{Bdd, BddError, BddResult, Manager, VarSet};
use crate::netlist::{BooleanNetlist, Gate, NodeId};

use super::trace::Trace;
use super::{unknown_or_internal, CheckResult, EngineError, Limits, TransitionSystem, Verdict};

fn cur(ni: usize, j: usize) -> u32 {
    (ni + 2 * j) as u32
}

fn nxt(ni: usize, j: usize) -> u32 {
    (ni + 2 * j + 1) as u32
}

/// BDDs for `roots` with input k as variable k and state j as `ni + 2j`.
pub fn netlist_bdds(
    b: &BooleanNetlist,
    mgr: &mut Manager,
    roots: &[NodeId],
) -> BddResult<Vec<Bdd>> {
    let ni = b.inputs.len();
    let mut need = vec![false; b.gates().len()];
    let mut stack = roots.to_vec();
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut need[id.index()], true) {
            continue;
        }
        match b.gate(id) {
            Gate::Not(a) => stack.push(a),
            Gate::And(x, y) | Gate::Or(x, y) | Gate::Xor(x, y) => {
                stack.push(x);
                stack.push(y);
            }
            _ => {}
        }
    }
    // children precede parents in gate order
    let mut val = vec![Bdd::FALSE; b.gates().len()];
    for (i, g) in b.gates().iter().enumerate() {
        if !need[i] {
            continue;
        }
        val[i] = match *g {
            Gate::False => Bdd::FALSE,
            Gate::True => Bdd::TRUE,
            Gate::Input(k) => mgr.var(k)?,
            Gate::State(k) => mgr.var(cur(ni, k as usize))?,
            Gate::Not(a) => mgr.not(val[a.index()])?,
            Gate::And(x, y) => mgr.and(val[x.index()], val[y.index()])?,
            Gate::Or(x, y) => mgr.or(val[x.index()], val[y.index()])?,
            Gate::Xor(x, y) => mgr.xor(val[x.index()], val[y.index()])?,
        };
    }
    Ok(roots.iter().map(|r| val[r.index()]).collect())
}

/// Partitioned transition relation with an early-quantification schedule.
struct Relation {
    clusters: Vec<Bdd>,
    /// `img_q[0]` is quantified before the first cluster, `img_q[k+1]`
    /// right after conjoining cluster k.
    img_q: Vec<VarSet>,
    pre_q: Vec<VarSet>,
}

struct Sym<'t> {
    ts: &'t TransitionSystem,
    mgr: Manager,
    ni: usize,
    ns: usize,
    next_fns: Vec<Bdd>,
    assume: Bdd,
    /// Bad states paired with inputs satisfying the assumption.
    bad_si: Bdd,
    init: Bdd,
    rel: Relation,
}

fn schedule(mgr: &Manager, clusters: &[Bdd], quantify: &[u32]) -> Vec<VarSet> {
    let supports: Vec<VarSet> = clusters
        .iter()
        .map(|&c| VarSet::new(mgr.support(c)))
        .collect();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); clusters.len() + 1];
    for &v in quantify {
        let last = supports.iter().rposition(|s| s.contains(v));
        buckets[last.map_or(0, |k| k + 1)].push(v);
    }
    buckets.into_iter().map(VarSet::new).collect()
}

impl<'t> Sym<'t> {
    fn new(ts: &'t TransitionSystem, limits: &Limits, start: Instant) -> BddResult<Self> {
        let b = &ts.netlist;
        let ni = b.inputs.len();
        let ns = b.states.len();
        let mut mgr = Manager::new((ni + 2 * ns) as u32).with_limit(limits.node_limit);
        mgr.set_deadline(limits.deadline(start));
        let mut roots: Vec<NodeId> = b.states.iter().map(|s| s.next).collect();
        roots.push(ts.assume);
        roots.push(ts.bad);
        let mut fns = netlist_bdds(b, &mut mgr, &roots)?;
        let bad = fns.pop().unwrap();
        let assume = fns.pop().unwrap();
        let bad_si = mgr.and(bad, assume)?;
        let lits: Vec<(u32, bool)> = b
            .states
            .iter()
            .enumerate()
            .map(|(j, s)| (cur(ni, j), s.init))
            .collect();
        let init = mgr.cube(&lits)?;

        let mut clusters = Vec::new();
        let mut acc = Bdd::TRUE;
        for (j, &f) in fns.iter().enumerate() {
            let v = mgr.var(nxt(ni, j))?;
            let part = mgr.xnor(v, f)?;
            if acc == Bdd::TRUE {
                acc = part;
                continue;
            }
            let joined = mgr.and(acc, part)?;
            if mgr.node_count(joined) > limits.cluster_threshold {
                clusters.push(acc);
                acc = part;
            } else {
                acc = joined;
            }
        }
        if acc != Bdd::TRUE || clusters.is_empty() {
            clusters.push(acc);
        }
        let inputs: Vec<u32> = (0..ni as u32).collect();
        let img_vars: Vec<u32> = inputs
            .iter()
            .copied()
            .chain((0..ns).map(|j| cur(ni, j)))
            .collect();
        let pre_vars: Vec<u32> = inputs
            .iter()
            .copied()
            .chain((0..ns).map(|j| nxt(ni, j)))
            .collect();
        let rel = Relation {
            img_q: schedule(&mgr, &clusters, &img_vars),
            pre_q: schedule(&mgr, &clusters, &pre_vars),
            clusters,
        };
        Ok(Sym {
            ts,
            mgr,
            ni,
            ns,
            next_fns: fns,
            assume,
            bad_si,
            init,
            rel,
        })
    }

    fn swap_pairs(&self, to_next: bool) -> Vec<(u32, u32)> {
        (0..self.ns)
            .map(|j| {
                if to_next {
                    (cur(self.ni, j), nxt(self.ni, j))
                } else {
                    (nxt(self.ni, j), cur(self.ni, j))
                }
            })
            .collect()
    }

    /// Successors of `s` (over current-state vars) under the assumption.
    fn image(&mut self, s: Bdd) -> BddResult<Bdd> {
        let p = self.mgr.and(s, self.assume)?;
        let mut p = self.mgr.exists(p, &self.rel.img_q[0])?;
        for k in 0..self.rel.clusters.len() {
            p = self
                .mgr
                .and_exists(p, self.rel.clusters[k], &self.rel.img_q[k + 1])?;
        }
        let pairs = self.swap_pairs(false);
        self.mgr.rename(p, &pairs)
    }

    /// States with some assumed input leading into `s`.
    fn preimage(&mut self, s: Bdd) -> BddResult<Bdd> {
        let pairs = self.swap_pairs(true);
        let s2 = self.mgr.rename(s, &pairs)?;
        let p = self.mgr.and(s2, self.assume)?;
        let mut p = self.mgr.exists(p, &self.rel.pre_q[0])?;
        for k in 0..self.rel.clusters.len() {
            p = self
                .mgr
                .and_exists(p, self.rel.clusters[k], &self.rel.pre_q[k + 1])?;
        }
        Ok(p)
    }

    fn split_point(&self, sat: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let inputs = sat[..self.ni].to_vec();
        let states = (0..self.ns)
            .map(|j| sat[cur(self.ni, j) as usize])
            .collect();
        (inputs, states)
    }

    fn state_cube(&mut self, s: &[bool]) -> BddResult<Bdd> {
        let lits: Vec<(u32, bool)> = s
            .iter()
            .enumerate()
            .map(|(j, &v)| (cur(self.ni, j), v))
            .collect();
        self.mgr.cube(&lits)
    }

    /// Backward walk through forward layers; `layers[k]` meets the bad set.
    fn forward_trace(&mut self, layers: &[Bdd]) -> BddResult<Trace> {
        let k = layers.len() - 1;
        let target = self.mgr.and(layers[k], self.bad_si)?;
        let (i, s) = self.split_point(&self.mgr.sat_one(target).expect("non-empty"));
        let mut steps = vec![(s, i)];
        for j in (0..k).rev() {
            let succ = steps.last().unwrap().0.clone();
            let mut q = self.mgr.and(layers[j], self.assume)?;
            for (b, &v) in succ.iter().enumerate() {
                let f = if v {
                    self.next_fns[b]
                } else {
                    self.mgr.not(self.next_fns[b])?
                };
                q = self.mgr.and(q, f)?;
            }
            let (i, s) = self.split_point(&self.mgr.sat_one(q).expect("predecessor exists"));
            steps.push((s, i));
        }
        steps.reverse();
        Ok(self.lift(&steps))
    }

    /// Forward walk through backward layers; `layers[d]` holds states
    /// exactly `d` steps from bad, and the initial state is in the last.
    fn backward_trace(&mut self, layers: &[Bdd]) -> BddResult<Trace> {
        let k = layers.len() - 1;
        let mut s: Vec<bool> = self.ts.netlist.states.iter().map(|b| b.init).collect();
        let mut steps = Vec::new();
        let pairs = self.swap_pairs(true);
        for d in (1..=k).rev() {
            let here = self.state_cube(&s)?;
            let there = self.mgr.rename(layers[d - 1], &pairs)?;
            let mut q = self.mgr.and(here, self.assume)?;
            q = self.mgr.and(q, there)?;
            for &c in &self.rel.clusters {
                q = self.mgr.and(q, c)?;
            }
            let sat = self.mgr.sat_one(q).expect("successor exists");
            let (i, _) = self.split_point(&sat);
            let next: Vec<bool> = (0..self.ns)
                .map(|j| sat[nxt(self.ni, j) as usize])
                .collect();
            steps.push((s, i));
            s = next;
        }
        let here = self.state_cube(&s)?;
        let q = self.mgr.and(here, self.bad_si)?;
        let (i, _) = self.split_point(&self.mgr.sat_one(q).expect("bad reachable"));
        steps.push((s, i));
        Ok(self.lift(&steps))
    }

    fn lift(&self, steps: &[(Vec<bool>, Vec<bool>)]) -> Trace {
        let inputs: Vec<Vec<bool>> = steps.iter().map(|(_, i)| i.clone()).collect();
        Trace::from_bits(self.ts, &inputs)
    }
}

/// The table is full when the relation fails to build at the node limit.
fn build_peak(e: BddError) -> usize {
    match e {
        BddError::NodeLimit(n) => n,
        _ => 0,
    }
}

fn finish(verdict: Verdict, iterations: usize, peak: usize, start: Instant) -> CheckResult {
    CheckResult {
        verdict,
        iterations,
        peak_nodes: peak,
        elapsed: start.elapsed(),
    }
}

pub fn check_forward(ts: &TransitionSystem, limits: &Limits) -> Result<CheckResult, EngineError> {
    let start = Instant::now();
    let mut sym = match Sym::new(ts, limits, start) {
        Ok(s) => s,
        Err(e) => return Ok(finish(unknown_or_internal(e)?, 0, build_peak(e), start)),
    };
    let mut iterations = 0;
    let r = forward_loop(&mut sym, &mut iterations);
    let peak = sym.mgr.peak_nodes();
    match r {
        Ok(v) => Ok(finish(v, iterations, peak, start)),
        Err(e) => Ok(finish(unknown_or_internal(e)?, iterations, peak, start)),
    }
}

fn forward_loop(sym: &mut Sym, iterations: &mut usize) -> BddResult<Verdict> {
    if sym.assume == Bdd::FALSE {
        return Ok(Verdict::HoldsVacuously);
    }
    if sym.bad_si == Bdd::FALSE {
        return Ok(Verdict::Holds);
    }
    let mut layers = vec![sym.init];
    let mut reached = sym.init;
    let mut frontier = sym.init;
    loop {
        if sym.mgr.and(frontier, sym.bad_si)? != Bdd::FALSE {
            return Ok(Verdict::Violated(sym.forward_trace(&layers)?));
        }
        let img = sym.image(frontier)?;
        *iterations += 1;
        let unseen = sym.mgr.not(reached)?;
        let fresh = sym.mgr.and(img, unseen)?;
        if fresh == Bdd::FALSE {
            // reached must be closed under the image
            let all = sym.image(reached)?;
            let unseen = sym.mgr.not(reached)?;
            let escape = sym.mgr.and(all, unseen)?;
            assert!(escape == Bdd::FALSE, "reachable set not closed under image");
            return Ok(Verdict::Holds);
        }
        reached = sym.mgr.or(reached, fresh)?;
        frontier = fresh;
        layers.push(fresh);
    }
}

pub fn check_backward(ts: &TransitionSystem, limits: &Limits) -> Result<CheckResult, EngineError> {
    let start = Instant::now();
    let mut sym = match Sym::new(ts, limits, start) {
        Ok(s) => s,
        Err(e) => return Ok(finish(unknown_or_internal(e)?, 0, build_peak(e), start)),
    };
    let mut iterations = 0;
    let r = backward_loop(&mut sym, &mut iterations);
    let peak = sym.mgr.peak_nodes();
    match r {
        Ok(v) => Ok(finish(v, iterations, peak, start)),
        Err(e) => Ok(finish(unknown_or_internal(e)?, iterations, peak, start)),
    }
}

fn backward_loop(sym: &mut Sym, iterations: &mut usize) -> BddResult<Verdict> {
    if sym.assume == Bdd::FALSE {
        return Ok(Verdict::HoldsVacuously);
    }
    if sym.bad_si == Bdd::FALSE {
        return Ok(Verdict::Holds);
    }
    let inputs = VarSet::new(0..sym.ni as u32);
    let b0 = sym.mgr.exists(sym.bad_si, &inputs)?;
    let mut layers = vec![b0];
    let mut cum = b0;
    loop {
        let last = *layers.last().unwrap();
        if sym.mgr.and(sym.init, last)? != Bdd::FALSE {
            return Ok(Verdict::Violated(sym.backward_trace(&layers)?));
        }
        let pre = sym.preimage(last)?;
        *iterations += 1;
        let unseen = sym.mgr.not(cum)?;
        let fresh = sym.mgr.and(pre, unseen)?;
        if fresh == Bdd::FALSE {
            return Ok(Verdict::Holds);
        }
        cum = sym.mgr.or(cum, fresh)?;
        layers.push(fresh);
    }
}
