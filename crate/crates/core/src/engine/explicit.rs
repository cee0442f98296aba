//! Breadth-first explicit-state search. Each state is expanded against
//! every input vector, 64 vectors per netlist evaluation.

use std::time::Instant;

use rustc_hash::FxHashMap;

use super::trace::Trace;
use super::{CheckResult, EngineError, Limits, TransitionSystem, UnknownReason, Verdict};

/// Lane `l` of word `k` carries bit `k` of `l`.
const LANE_BITS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

enum Expansion {
    Bad(u64),
    /// Each successor once, with the first input reaching it.
    Next(Vec<(u32, u64)>),
}

struct Search<'t> {
    ts: &'t TransitionSystem,
    ni: usize,
    ns: usize,
}

impl Search<'_> {
    fn expand(&self, state: u32, any_assumed: &mut bool) -> Expansion {
        let states: Vec<u64> = (0..self.ns)
            .map(|j| if state >> j & 1 == 1 { u64::MAX } else { 0 })
            .collect();
        let total: u64 = 1 << self.ni;
        let lane_mask = if total >= 64 {
            u64::MAX
        } else {
            (1u64 << total) - 1
        };
        let mut next = Vec::new();
        let mut base = 0u64;
        while base < total {
            let inputs: Vec<u64> = (0..self.ni)
                .map(|k| {
                    if k < 6 {
                        LANE_BITS[k]
                    } else if base >> k & 1 == 1 {
                        u64::MAX
                    } else {
                        0
                    }
                })
                .collect();
            let v = self.ts.netlist.eval_words(&inputs, &states);
            let ok = v[self.ts.assume.index()] & lane_mask;
            if ok != 0 {
                *any_assumed = true;
            }
            let bad = v[self.ts.bad.index()] & ok;
            if bad != 0 {
                return Expansion::Bad(base + bad.trailing_zeros() as u64);
            }
            let words: Vec<u64> = self
                .ts
                .netlist
                .states
                .iter()
                .map(|s| v[s.next.index()])
                .collect();
            let mut lanes = ok;
            while lanes != 0 {
                let l = lanes.trailing_zeros();
                lanes &= lanes - 1;
                let mut s = 0u32;
                for (j, w) in words.iter().enumerate() {
                    s |= ((w >> l & 1) as u32) << j;
                }
                next.push((s, base + l as u64));
            }
            base += 64;
        }
        next.sort_unstable();
        next.dedup_by_key(|p| p.0);
        Expansion::Next(next)
    }

    fn trace(
        &self,
        parents: &FxHashMap<u32, (u32, u64)>,
        init: u32,
        last: u32,
        bad_input: u64,
    ) -> Trace {
        let mut inputs = vec![bad_input];
        let mut s = last;
        while s != init {
            let (p, i) = parents[&s];
            inputs.push(i);
            s = p;
        }
        inputs.reverse();
        let bits: Vec<Vec<bool>> = inputs
            .iter()
            .map(|&i| (0..self.ni).map(|k| i >> k & 1 == 1).collect())
            .collect();
        Trace::from_bits(self.ts, &bits)
    }
}

pub fn check_explicit(ts: &TransitionSystem, limits: &Limits) -> Result<CheckResult, EngineError> {
    let start = Instant::now();
    let ni = ts.input_bits();
    let ns = ts.state_bits();
    let bits = (ni + ns) as u32;
    if bits > limits.explicit_cap || bits > 40 {
        return Err(EngineError::TooLarge {
            bits,
            cap: limits.explicit_cap,
        });
    }
    let search = Search { ts, ni, ns };
    let init = ts
        .netlist
        .states
        .iter()
        .enumerate()
        .fold(0u32, |acc, (j, s)| acc | (s.init as u32) << j);
    let deadline = limits.deadline(start);
    let done = |verdict, iterations, visited| CheckResult {
        verdict,
        iterations,
        peak_nodes: visited,
        elapsed: start.elapsed(),
    };

    // parent state and the input that left it
    let mut parents: FxHashMap<u32, (u32, u64)> = FxHashMap::default();
    parents.insert(init, (init, 0));
    let mut layer = vec![init];
    let mut depth = 0usize;
    loop {
        if limits.depth_bound.is_some_and(|b| depth > b) {
            return Ok(done(
                Verdict::Unknown(UnknownReason::BoundExhausted),
                depth,
                parents.len(),
            ));
        }
        let mut fresh = Vec::new();
        for &s in &layer {
            if deadline.is_some_and(|d| Instant::now() > d) {
                return Ok(done(
                    Verdict::Unknown(UnknownReason::Timeout),
                    depth,
                    parents.len(),
                ));
            }
            let mut any_assumed = false;
            match search.expand(s, &mut any_assumed) {
                Expansion::Bad(i) => {
                    let t = search.trace(&parents, init, s, i);
                    return Ok(done(Verdict::Violated(t), depth, parents.len()));
                }
                Expansion::Next(succ) => {
                    if depth == 0 && !any_assumed {
                        return Ok(done(Verdict::HoldsVacuously, 0, parents.len()));
                    }
                    for (n, i) in succ {
                        if let std::collections::hash_map::Entry::Vacant(e) = parents.entry(n) {
                            e.insert((s, i));
                            fresh.push(n);
                        }
                    }
                }
            }
        }
        depth += 1;
        if fresh.is_empty() {
            return Ok(done(Verdict::Holds, depth, parents.len()));
        }
        layer = fresh;
    }
}
