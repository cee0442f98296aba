//! Seeded random transition systems and a three-engine cross-check.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    build_ts, check_backward, check_explicit, check_forward, replay, CheckResult, EngineError,
    Limits, Verdict,
};
use crate::ir::{mask, BinaryOp, BitVec, CaseArm, Expr, ModuleIr, Net, Port, RegisterDef, UnaryOp};
use crate::psl::{Obligation, SafetyCheck, Stereotype};

/// Size bounds for generated modules.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_state_bits: u32,
    pub max_input_bits: u32,
    pub max_depth: u32,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_state_bits: 10,
            max_input_bits: 6,
            max_depth: 3,
        }
    }
}

/// Splits `total` bits into words of 1 to 4 bits.
fn words<R: Rng>(rng: &mut R, total: u32) -> Vec<u32> {
    let mut left = total;
    let mut out = Vec::new();
    while left > 0 {
        let w = rng.gen_range(1..=left.min(4));
        out.push(w);
        left -= w;
    }
    out
}

struct Gen<'r, R> {
    rng: &'r mut R,
    signals: Vec<(String, u32)>,
}

impl<R: Rng> Gen<'_, R> {
    /// A signal or constant resized to `w` bits.
    fn leaf(&mut self, w: u32) -> Expr {
        if self.signals.is_empty() || self.rng.gen_bool(0.2) {
            return Expr::konst(w, self.rng.gen::<u64>() & mask(w));
        }
        let (name, sw) = self.signals.choose(self.rng).cloned().expect("non-empty");
        let s = Expr::sig(name);
        if sw == w {
            s
        } else if sw > w {
            let lsb = self.rng.gen_range(0..=sw - w);
            s.part(lsb + w - 1, lsb)
        } else {
            Expr::Concat(vec![Expr::konst(w - sw, 0), s])
        }
    }

    fn expr(&mut self, w: u32, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf(w);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..9) {
            0 => Expr::not(self.expr(w, d)),
            1 => Expr::and(self.expr(w, d), self.expr(w, d)),
            2 => Expr::or(self.expr(w, d), self.expr(w, d)),
            3 => Expr::binary(BinaryOp::Xor, self.expr(w, d), self.expr(w, d)),
            4 => Expr::binary(BinaryOp::Add, self.expr(w, d), self.expr(w, d)),
            5 => Expr::mux(self.expr(1, d), self.expr(w, d), self.expr(w, d)),
            6 if w == 1 => {
                let ow = self.rng.gen_range(1..=4);
                let op = *[
                    UnaryOp::RedXor,
                    UnaryOp::RedAnd,
                    UnaryOp::RedOr,
                    UnaryOp::LNot,
                ]
                .choose(self.rng)
                .expect("non-empty");
                Expr::unary(op, self.expr(ow, d))
            }
            7 if w == 1 => {
                let ow = self.rng.gen_range(1..=4);
                let op = *[BinaryOp::Eq, BinaryOp::Ne, BinaryOp::LAnd, BinaryOp::LOr]
                    .choose(self.rng)
                    .expect("non-empty");
                Expr::binary(op, self.expr(ow, d), self.expr(ow, d))
            }
            8 if w <= 3 => {
                let sw = self.rng.gen_range(1..=2u32);
                let arms = (0..self.rng.gen_range(1..=2))
                    .map(|_| CaseArm {
                        labels: vec![BitVec::new(sw, self.rng.gen_range(0..1 << sw))],
                        value: self.expr(w, d),
                    })
                    .collect();
                Expr::Case {
                    sel: Box::new(self.expr(sw, d)),
                    arms,
                    default: Box::new(self.expr(w, d)),
                }
            }
            _ if w >= 2 => {
                let hi = self.rng.gen_range(1..w);
                Expr::Concat(vec![self.expr(w - hi, d), self.expr(hi, d)])
            }
            _ => self.leaf(w),
        }
    }
}

/// A random module with inputs `i<k>`, registers `r<k>`, a net `n0` and
/// outputs, within `shape`. Generated modules always validate.
pub fn random_module<R: Rng>(rng: &mut R, shape: &Shape) -> ModuleIr {
    let mut m = ModuleIr::new("rnd");
    let ni = rng.gen_range(0..=shape.max_input_bits);
    let ns = rng.gen_range(1..=shape.max_state_bits);
    for (k, w) in words(rng, ni).into_iter().enumerate() {
        m.inputs.push(Port::new(format!("i{k}"), w));
    }
    let regs: Vec<(String, u32)> = words(rng, ns)
        .into_iter()
        .enumerate()
        .map(|(k, w)| (format!("r{k}"), w))
        .collect();
    let mut signals: Vec<(String, u32)> =
        m.inputs.iter().map(|p| (p.name.clone(), p.width)).collect();
    signals.extend(regs.iter().cloned());
    let mut g = Gen { rng, signals };
    let nw = g.rng.gen_range(1..=4);
    let net = g.expr(nw, shape.max_depth);
    g.signals.push(("n0".into(), nw));
    for (name, w) in &regs {
        let reset = g.rng.gen::<u64>() & mask(*w);
        m.registers.push(RegisterDef {
            name: name.clone(),
            width: *w,
            reset_value: BitVec::new(*w, reset),
            next_expr: g.expr(*w, shape.max_depth),
        });
    }
    m.nets.push(Net {
        name: "n0".into(),
        width: nw,
        expr: net,
    });
    m.outputs.push(Port::new("n0", nw));
    m.outputs.push(Port::new(regs[0].0.clone(), regs[0].1));
    m
}

/// A random module plus one obligation and an input-only assumption.
pub fn random_system<R: Rng>(rng: &mut R, shape: &Shape) -> (ModuleIr, SafetyCheck) {
    let m = random_module(rng, shape);
    let state: Vec<(String, u32)> = m
        .registers
        .iter()
        .map(|r| (r.name.clone(), r.width))
        .collect();
    let inputs: Vec<(String, u32)> = m.inputs.iter().map(|p| (p.name.clone(), p.width)).collect();
    // bad: some register word equals a random value, optionally gated
    let (target, w) = state.choose(rng).cloned().expect("at least one register");
    let mut bad = Expr::binary(
        BinaryOp::Eq,
        Expr::sig(target),
        Expr::konst(w, rng.gen::<u64>() & mask(w)),
    );
    if rng.gen_bool(0.5) {
        let mut g = Gen {
            rng,
            signals: state.iter().chain(&inputs).cloned().collect(),
        };
        bad = Expr::and(bad, g.expr(1, 1));
    }
    let assume = if inputs.is_empty() || rng.gen_bool(0.4) {
        Expr::konst(1, 1)
    } else {
        let mut g = Gen {
            rng,
            signals: inputs,
        };
        Expr::not(Expr::and(g.expr(1, 1), g.expr(1, 1)))
    };
    let check = SafetyCheck {
        vunit: "rnd".into(),
        module: m.name.clone(),
        assume,
        assumed: Vec::new(),
        monitors: Vec::new(),
        obligations: vec![Obligation {
            property: "rnd__bad".into(),
            stereotype: Stereotype::P3,
            bad,
        }],
        cuts: Vec::new(),
        warnings: Vec::new(),
    };
    (m, check)
}

pub fn seeded_system(seed: u64, shape: &Shape) -> (ModuleIr, SafetyCheck) {
    random_system(&mut ChaCha8Rng::seed_from_u64(seed), shape)
}

/// Verdicts of all three engines on one system.
#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub forward: CheckResult,
    pub backward: CheckResult,
    pub explicit: CheckResult,
}

/// Runs every engine and checks that verdicts agree, that every trace
/// replays, and that trace lengths equal the explicit search depth plus
/// one (the violating cycle).
pub fn cross_validate(
    m: &ModuleIr,
    c: &SafetyCheck,
    limits: &Limits,
) -> Result<CrossCheck, String> {
    let ts = build_ts(m, c).map_err(|e| e.to_string())?;
    let run = |f: fn(&_, &Limits) -> Result<CheckResult, EngineError>| {
        f(&ts, limits).map_err(|e| e.to_string())
    };
    let x = CrossCheck {
        forward: run(check_forward)?,
        backward: run(check_backward)?,
        explicit: run(check_explicit)?,
    };
    let all = [
        ("forward", &x.forward),
        ("backward", &x.backward),
        ("explicit", &x.explicit),
    ];
    for (name, r) in all {
        if r.verdict.keyword() != x.explicit.verdict.keyword() {
            return Err(format!(
                "{name} says {}, explicit says {}",
                r.verdict.keyword(),
                x.explicit.verdict.keyword()
            ));
        }
        if let Verdict::Violated(t) = &r.verdict {
            replay(t, &ts).map_err(|e| format!("{name} trace: {e}"))?;
            if t.len() != x.explicit.iterations + 1 {
                return Err(format!(
                    "{name} trace has {} cycles, explicit search depth is {}",
                    t.len(),
                    x.explicit.iterations
                ));
            }
        }
    }
    Ok(x)
}
