use crate::ir::{to_binary, Assignment, ModuleIr, Simulator};

use super::ts::{ASSUME_NET, BAD_NET};
use super::TransitionSystem;

/// One cycle of a counterexample: the inputs applied and the register
/// values seen in that cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub inputs: Assignment,
    pub state: Assignment,
}

/// Path from reset whose last cycle satisfies the bad condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub property: String,
    pub cycles: Vec<Cycle>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Builds the word-level trace for per-cycle input bits of the
    /// reduced netlist; inputs outside the cone are held at 0.
    pub(crate) fn from_bits(ts: &TransitionSystem, inputs: &[Vec<bool>]) -> Trace {
        let m = &ts.module;
        let sim = Simulator::new(m).expect("module validated when the system was built");
        let mut state = m.reset_state();
        let mut cycles = Vec::with_capacity(inputs.len());
        for bits in inputs {
            let mut words: Assignment = m.inputs.iter().map(|p| (p.name.clone(), 0)).collect();
            for (k, name) in ts.netlist.inputs.iter().enumerate() {
                if bits[k] {
                    *words.get_mut(&name.signal).expect("netlist input") |= 1 << name.bit;
                }
            }
            let (_, next) = sim.step(&state, &words).expect("complete assignment");
            cycles.push(Cycle {
                inputs: words,
                state: std::mem::replace(&mut state, next),
            });
        }
        Trace {
            property: ts.property.clone(),
            cycles,
        }
    }

    fn width(m: &ModuleIr, name: &str) -> u32 {
        m.signal(name).map_or(64, |(_, w)| w)
    }

    /// Text form against the module the trace was produced from.
    pub fn render(&self, m: &ModuleIr) -> String {
        let mut s = format!("CEX {} len {}\n", self.property, self.cycles.len());
        for (k, c) in self.cycles.iter().enumerate() {
            s.push_str(&format!("cycle {k}:"));
            for (name, v) in c.inputs.iter().chain(c.state.iter()) {
                if name.starts_with("__") {
                    continue;
                }
                s.push_str(&format!(" {name}={}", to_binary(*v, Self::width(m, name))));
            }
            if k + 1 == self.cycles.len() {
                s.push_str(" <- violation");
            }
            s.push('\n');
        }
        s
    }
}

/// Re-simulates `trace` on the system's word-level module: it must start
/// at reset, follow the next-state functions, satisfy the assumption on
/// every cycle and hit the bad condition on the last one.
pub fn replay(trace: &Trace, ts: &TransitionSystem) -> Result<(), String> {
    let m = &ts.module;
    if trace.cycles.is_empty() {
        return Err("empty trace".into());
    }
    let sim = Simulator::new(m).map_err(|e| e.to_string())?;
    let mut expected = m.reset_state();
    for (k, c) in trace.cycles.iter().enumerate() {
        if c.state != expected {
            return Err(if k == 0 {
                "trace does not start in the reset state".into()
            } else {
                format!("cycle {k}: state does not follow from cycle {}", k - 1)
            });
        }
        let env = sim
            .settle(&c.state, &c.inputs)
            .map_err(|e| format!("cycle {k}: {e}"))?;
        if env[ASSUME_NET] != 1 {
            return Err(format!("cycle {k}: inputs violate the assumption"));
        }
        let last = k + 1 == trace.cycles.len();
        if last && env[BAD_NET] != 1 {
            return Err(format!(
                "cycle {k}: final cycle does not violate the property"
            ));
        }
        let (_, next) = sim.step(&c.state, &c.inputs).map_err(|e| e.to_string())?;
        expected = next;
    }
    Ok(())
}
