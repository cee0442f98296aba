//! Integrity specifications and the error-injection pass: per-entity
//! injection muxes driven by a control port and a shared data port, with
//! parents tying both ports to zero.

mod rtl;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use rtl::{
    generate_wrapper, instrument, instrument_source, overhead_report, tie_off_inputs,
    tie_off_instances, InstrumentError, OverheadReport,
};

use crate::ir::{ModuleIr, SignalKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Fsm,
    Counter,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Fsm => "fsm",
            EntityKind::Counter => "counter",
        })
    }
}

/// Injectable state register, protected by odd parity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    pub signal: String,
    pub ecbit: u32,
    pub line: usize,
}

/// Odd-parity-protected port group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityGroup {
    pub signal: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntegritySpec {
    pub module: String,
    pub he: Option<String>,
    /// Shared injected-data port and its width.
    pub ed: Option<(String, u32)>,
    /// Injection-control port; one bit per entity.
    pub ec: Option<String>,
    pub entities: Vec<Entity>,
    pub inputs: Vec<ParityGroup>,
    pub outputs: Vec<ParityGroup>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{}{message}", if *.line > 0 { format!("line {}: ", .line) } else { String::new() })]
pub struct SpecError {
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

fn spec_err(line: usize, message: impl Into<String>) -> SpecError {
    SpecError {
        line,
        message: message.into(),
    }
}

impl IntegritySpec {
    pub fn ec_width(&self) -> u32 {
        self.entities.len() as u32
    }

    pub fn ed_width(&self) -> u32 {
        self.ed.as_ref().map_or(0, |(_, w)| *w)
    }

    pub fn ec_name(&self) -> &str {
        self.ec.as_deref().unwrap_or("I_ERR_INJ_C")
    }

    pub fn ed_name(&self) -> &str {
        self.ed.as_ref().map_or("I_ERR_INJ_D", |(n, _)| n.as_str())
    }

    /// Entities ordered by control bit.
    pub fn entities_by_bit(&self) -> Vec<&Entity> {
        let mut v: Vec<&Entity> = self.entities.iter().collect();
        v.sort_by_key(|e| e.ecbit);
        v
    }

    /// Checks the spec against a design. `instrumented` says whether the
    /// injection ports are expected to exist already.
    pub fn bind(&self, m: &ModuleIr, instrumented: bool) -> Result<(), SpecError> {
        if m.name != self.module {
            return Err(spec_err(
                0,
                format!(
                    "spec is for module `{}` but the design is `{}`",
                    self.module, m.name
                ),
            ));
        }
        let width = |name: &str, line: usize| {
            m.signal(name).ok_or_else(|| {
                spec_err(
                    line,
                    format!("unknown signal `{name}` in module `{}`", m.name),
                )
            })
        };
        if let Some(he) = &self.he {
            let (_, w) = width(he, 0)?;
            if w != 1 {
                return Err(spec_err(
                    0,
                    format!("error report `{he}` must be 1 bit wide, found {w}"),
                ));
            }
        }
        for g in self.inputs.iter().chain(&self.outputs) {
            width(&g.signal, g.line)?;
        }
        let mut max = 0;
        for e in &self.entities {
            let (kind, w) = width(&e.signal, e.line)?;
            if kind != SignalKind::Register {
                return Err(spec_err(
                    e.line,
                    format!("entity `{}` is not a register", e.signal),
                ));
            }
            max = max.max(w);
        }
        if self.entities.is_empty() {
            return Ok(());
        }
        if self.ed_width() != max {
            return Err(spec_err(
                0,
                format!(
                    "injected-data width must equal the widest entity ({max} bits), spec declares {}",
                    self.ed_width()
                ),
            ));
        }
        for (name, w) in [
            (self.ec_name(), self.ec_width()),
            (self.ed_name(), self.ed_width()),
        ] {
            match (m.signal(name), instrumented) {
                (Some(_), false) => {
                    return Err(spec_err(
                        0,
                        format!("module `{}` already has a port named `{name}`", m.name),
                    ))
                }
                (Some((SignalKind::Input, got)), true) if got == w => {}
                (_, true) => {
                    return Err(spec_err(
                        0,
                        format!("instrumented module needs a {w}-bit input `{name}`"),
                    ))
                }
                (None, false) => {}
            }
        }
        Ok(())
    }
}

pub fn parse_spec(text: &str) -> Result<IntegritySpec, SpecError> {
    let mut s = IntegritySpec::default();
    let mut module = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let arity = |n: usize| {
            if words.len() == n {
                Ok(())
            } else {
                Err(spec_err(
                    line,
                    format!("`{}` takes {} argument(s)", words[0], n - 1),
                ))
            }
        };
        let once = |slot: bool, what: &str| {
            if slot {
                Err(spec_err(line, format!("`{what}` given twice")))
            } else {
                Ok(())
            }
        };
        match words[0] {
            "module" => {
                arity(2)?;
                once(module.is_some(), "module")?;
                module = Some(words[1].to_string());
            }
            "he" => {
                arity(2)?;
                once(s.he.is_some(), "he")?;
                s.he = Some(words[1].to_string());
            }
            "ed" => {
                arity(3)?;
                once(s.ed.is_some(), "ed")?;
                let w: u32 = words[2]
                    .parse()
                    .ok()
                    .filter(|w| (1..=64).contains(w))
                    .ok_or_else(|| spec_err(line, format!("bad width `{}`", words[2])))?;
                s.ed = Some((words[1].to_string(), w));
            }
            "ec" => {
                arity(2)?;
                once(s.ec.is_some(), "ec")?;
                s.ec = Some(words[1].to_string());
            }
            "entity" => {
                arity(5)?;
                let kind = match words[1] {
                    "fsm" => EntityKind::Fsm,
                    "counter" => EntityKind::Counter,
                    k => {
                        return Err(spec_err(
                            line,
                            format!("entity kind must be `fsm` or `counter`, got `{k}`"),
                        ))
                    }
                };
                if words[3] != "ecbit" {
                    return Err(spec_err(
                        line,
                        "expected `entity <kind> <signal> ecbit <n>`",
                    ));
                }
                let ecbit: u32 = words[4]
                    .parse()
                    .map_err(|_| spec_err(line, format!("bad control bit `{}`", words[4])))?;
                if s.entities.iter().any(|e| e.signal == words[2]) {
                    return Err(spec_err(line, format!("duplicate entity `{}`", words[2])));
                }
                if let Some(e) = s.entities.iter().find(|e| e.ecbit == ecbit) {
                    return Err(spec_err(
                        line,
                        format!("control bit {ecbit} already used by `{}`", e.signal),
                    ));
                }
                s.entities.push(Entity {
                    kind,
                    signal: words[2].to_string(),
                    ecbit,
                    line,
                });
            }
            kw @ ("input_parity" | "output_parity") => {
                if !(2..=3).contains(&words.len()) {
                    return Err(spec_err(line, format!("expected `{kw} <signal> [odd]`")));
                }
                if let Some(&conv) = words.get(2) {
                    if conv != "odd" {
                        return Err(spec_err(
                            line,
                            format!("only odd parity is supported, got `{conv}`"),
                        ));
                    }
                }
                let groups = if kw == "input_parity" {
                    &mut s.inputs
                } else {
                    &mut s.outputs
                };
                if groups.iter().any(|g| g.signal == words[1]) {
                    return Err(spec_err(line, format!("`{}` listed twice", words[1])));
                }
                groups.push(ParityGroup {
                    signal: words[1].to_string(),
                    line,
                });
            }
            other => return Err(spec_err(line, format!("unknown directive `{other}`"))),
        }
    }
    s.module = module.ok_or_else(|| spec_err(0, "missing `module` line"))?;
    let bits: BTreeSet<u32> = s.entities.iter().map(|e| e.ecbit).collect();
    if let Some(gap) = (0..s.entities.len() as u32).find(|b| !bits.contains(b)) {
        return Err(spec_err(
            0,
            format!("control bits must be contiguous from 0; bit {gap} is unused"),
        ));
    }
    if !s.entities.is_empty() {
        if s.ed.is_none() {
            return Err(spec_err(0, "entities need an `ed <port> <width>` line"));
        }
        if s.he.is_none() {
            return Err(spec_err(0, "entities need an `he <signal>` line"));
        }
    }
    Ok(s)
}

impl fmt::Display for IntegritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "module {}", self.module)?;
        if let Some(he) = &self.he {
            writeln!(f, "he {he}")?;
        }
        if let Some((n, w)) = &self.ed {
            writeln!(f, "ed {n} {w}")?;
        }
        if let Some(ec) = &self.ec {
            writeln!(f, "ec {ec}")?;
        }
        for e in &self.entities {
            writeln!(f, "entity {} {} ecbit {}", e.kind, e.signal, e.ecbit)?;
        }
        for g in &self.inputs {
            writeln!(f, "input_parity {} odd", g.signal)?;
        }
        for g in &self.outputs {
            writeln!(f, "output_parity {} odd", g.signal)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
