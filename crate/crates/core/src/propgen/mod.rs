//! Stereotype vunit generation from an integrity spec, and per-stage
//! assume/guarantee splitting of an output-integrity check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::instrument::IntegritySpec;
use crate::psl::Stereotype;

/// Generated vunit text plus anything worth telling the user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub name: String,
    pub stereotype: Stereotype,
    pub text: String,
    pub warnings: Vec<String>,
}

struct Unit {
    name: String,
    module: String,
    lines: Vec<String>,
    asserts: usize,
}

impl Unit {
    fn new(module: &str, name: String) -> Self {
        Unit {
            name,
            module: module.to_string(),
            lines: Vec::new(),
            asserts: 0,
        }
    }

    fn directive(&mut self, kind: &str, checkpoint: &str, body: String) {
        let prop = format!("{}__{checkpoint}", self.name);
        self.lines.push(format!("  property {prop} = {body};"));
        self.lines.push(format!("  {kind} {prop};"));
        if kind == "assert" {
            self.asserts += 1;
        }
    }

    fn finish(self, stereotype: Stereotype, mut warnings: Vec<String>) -> Generated {
        if self.asserts == 0 && warnings.is_empty() {
            warnings.push(format!("vunit `{}` has nothing to assert", self.name));
        }
        let mut text = format!("vunit {} ({}) {{\n", self.name, self.module);
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        text.push_str("}\n");
        Generated {
            name: self.name,
            stereotype,
            text,
            warnings,
        }
    }
}

fn ec_bit(s: &IntegritySpec, k: u32) -> String {
    if s.ec_width() == 1 {
        s.ec_name().to_string()
    } else {
        format!("{}[{k}]", s.ec_name())
    }
}

/// Parity of the injected data as seen by an entity of `width` bits.
fn ed_parity(s: &IntegritySpec, width: Option<u32>) -> String {
    match width {
        Some(w) if w < s.ed_width() => format!("^{}[{}:0]", s.ed_name(), w - 1),
        _ => format!("^{}", s.ed_name()),
    }
}

/// Invariant that no injection happens; `None` without entities.
fn no_injection(s: &IntegritySpec) -> Option<String> {
    match s.ec_width() {
        0 => None,
        1 => Some(format!("always ( ~{} )", s.ec_name())),
        _ => Some(format!("always ( ~(|{}) )", s.ec_name())),
    }
}

/// Entity widths, when known, let narrow entities check only the low
/// data bits they receive.
pub type EntityWidths = BTreeMap<String, u32>;

pub fn gen_edetect(s: &IntegritySpec, widths: &EntityWidths) -> Generated {
    let mut u = Unit::new(&s.module, format!("{}_edetect", s.module));
    let Some(he) = &s.he else {
        return u.finish(
            Stereotype::P0,
            vec![format!(
                "module `{}` has no error report; no detection checks",
                s.module
            )],
        );
    };
    for e in s.entities_by_bit() {
        let body = format!(
            "always (({} & ~({})) -> next {he})",
            ec_bit(s, e.ecbit),
            ed_parity(s, widths.get(&e.signal).copied())
        );
        u.directive("assert", &e.signal, body);
    }
    for g in &s.inputs {
        u.directive(
            "assert",
            &g.signal,
            format!("always ( ~(^{}) -> next {he})", g.signal),
        );
    }
    u.finish(Stereotype::P0, Vec::new())
}

fn assume_clean_inputs<'a>(
    u: &mut Unit,
    s: &IntegritySpec,
    inputs: impl IntoIterator<Item = &'a str>,
) {
    for i in inputs {
        u.directive("assume", &format!("in_{i}"), format!("always ( ^{i} )"));
    }
    if let Some(body) = no_injection(s) {
        u.directive("assume", "no_injection", body);
    }
}

pub fn gen_soundness(s: &IntegritySpec) -> Generated {
    let mut u = Unit::new(&s.module, format!("{}_soundness", s.module));
    let Some(he) = &s.he else {
        return u.finish(
            Stereotype::P1,
            vec![format!(
                "module `{}` has no error report; no soundness check",
                s.module
            )],
        );
    };
    assume_clean_inputs(&mut u, s, s.inputs.iter().map(|g| g.signal.as_str()));
    u.directive("assert", he, format!("never ( {he} )"));
    u.finish(Stereotype::P1, Vec::new())
}

pub fn gen_integrity(s: &IntegritySpec) -> Generated {
    let mut u = Unit::new(&s.module, format!("{}_integrity", s.module));
    if s.outputs.is_empty() {
        return u.finish(
            Stereotype::P2,
            vec![format!(
                "module `{}` has no parity-protected outputs",
                s.module
            )],
        );
    }
    assume_clean_inputs(&mut u, s, s.inputs.iter().map(|g| g.signal.as_str()));
    for g in &s.outputs {
        u.directive("assert", &g.signal, format!("always ( ^{} )", g.signal));
    }
    u.finish(Stereotype::P2, Vec::new())
}

/// All three stereotype units, in P0, P1, P2 order.
pub fn generate(s: &IntegritySpec, widths: &EntityWidths) -> Vec<Generated> {
    vec![gen_edetect(s, widths), gen_soundness(s), gen_integrity(s)]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub line: usize,
}

/// Cut points splitting one output-integrity check into stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutSpec {
    pub stages: Vec<Stage>,
    pub final_output: String,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct CutError {
    pub line: usize,
    pub message: String,
}

fn signal_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_cuts(text: &str) -> Result<CutSpec, CutError> {
    let mut stages: Vec<Stage> = Vec::new();
    let mut final_output = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |m: String| CutError { line, message: m };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "stage" => {
                let [_, name, "in", ins, "out", outs] = words[..] else {
                    return Err(err(
                        "expected `stage <name> in <sig>[,<sig>...] out <sig>[,<sig>...]`".into(),
                    ));
                };
                if stages.iter().any(|s| s.name == name) {
                    return Err(err(format!("duplicate stage `{name}`")));
                }
                let (inputs, outputs) = (signal_list(ins), signal_list(outs));
                if inputs.is_empty() || outputs.is_empty() {
                    return Err(err(format!("stage `{name}` needs inputs and outputs")));
                }
                stages.push(Stage {
                    name: name.to_string(),
                    inputs,
                    outputs,
                    line,
                });
            }
            "final" => {
                let [_, sig] = words[..] else {
                    return Err(err("expected `final <sig>`".into()));
                };
                if final_output.replace(sig.to_string()).is_some() {
                    return Err(err("`final` given twice".into()));
                }
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    let final_output = final_output.ok_or(CutError {
        line: 0,
        message: "missing `final <sig>` line".into(),
    })?;
    if stages.is_empty() {
        return Err(CutError {
            line: 0,
            message: "no stages".into(),
        });
    }
    Ok(CutSpec {
        stages,
        final_output,
    })
}

/// Structural argument that the stage checks together imply the
/// end-to-end one: every assumption is a primary input or discharged by
/// exactly one stage, the stage graph is acyclic, and the final output
/// is asserted by exactly one stage and is a protected output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionReport {
    /// Stages in an order where producers precede consumers.
    pub order: Vec<String>,
    pub problems: Vec<String>,
}

impl CompositionReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for CompositionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            writeln!(f, "composition ok: {}", self.order.join(" -> "))
        } else {
            for p in &self.problems {
                writeln!(f, "composition error: {p}")?;
            }
            Ok(())
        }
    }
}

pub fn check_composition(s: &IntegritySpec, cuts: &CutSpec) -> CompositionReport {
    let mut problems = Vec::new();
    let primary: BTreeSet<&str> = s.inputs.iter().map(|g| g.signal.as_str()).collect();
    let mut producer: BTreeMap<&str, &str> = BTreeMap::new();
    for st in &cuts.stages {
        for o in &st.outputs {
            if let Some(prev) = producer.insert(o, &st.name) {
                problems.push(format!(
                    "`{o}` is asserted by both stage `{prev}` and stage `{}`",
                    st.name
                ));
            }
        }
    }
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for st in &cuts.stages {
        let d = deps.entry(&st.name).or_default();
        for i in &st.inputs {
            match producer.get(i.as_str()) {
                Some(p) => {
                    d.insert(p);
                }
                None if primary.contains(i.as_str()) => {}
                None => problems.push(format!(
                    "unsupported assumption: stage `{}` assumes `{i}`, which is neither a protected input nor asserted by any stage",
                    st.name
                )),
            }
        }
    }
    match producer.get(cuts.final_output.as_str()) {
        None => problems.push(format!(
            "final output `{}` is asserted by no stage",
            cuts.final_output
        )),
        Some(_) if !s.outputs.iter().any(|g| g.signal == cuts.final_output) => {
            problems.push(format!(
                "final output `{}` is not a protected output of `{}`",
                cuts.final_output, s.module
            ))
        }
        Some(_) => {}
    }

    // Kahn's algorithm in declaration order
    let mut order = Vec::new();
    let mut done: BTreeSet<&str> = BTreeSet::new();
    while order.len() < cuts.stages.len() {
        let next = cuts.stages.iter().find(|st| {
            !done.contains(st.name.as_str())
                && deps[st.name.as_str()].iter().all(|d| done.contains(d))
        });
        match next {
            Some(st) => {
                done.insert(&st.name);
                order.push(st.name.clone());
            }
            None => {
                let stuck: Vec<&str> = cuts
                    .stages
                    .iter()
                    .map(|st| st.name.as_str())
                    .filter(|n| !done.contains(n))
                    .collect();
                problems.push(format!(
                    "cyclic cut dependency among stages {}",
                    stuck.join(", ")
                ));
                break;
            }
        }
    }
    CompositionReport { order, problems }
}

/// One integrity vunit per stage: the stage's inputs are assumed to keep
/// odd parity (with injection off) and its outputs are asserted to.
pub fn partition(s: &IntegritySpec, cuts: &CutSpec) -> (Vec<Generated>, CompositionReport) {
    let units = cuts
        .stages
        .iter()
        .map(|st| {
            let mut u = Unit::new(&s.module, format!("{}_integrity_{}", s.module, st.name));
            assume_clean_inputs(&mut u, s, st.inputs.iter().map(String::as_str));
            for o in &st.outputs {
                u.directive("assert", o, format!("always ( ^{o} )"));
            }
            u.finish(Stereotype::P2, Vec::new())
        })
        .collect();
    (units, check_composition(s, cuts))
}

#[cfg(test)]
mod tests;
