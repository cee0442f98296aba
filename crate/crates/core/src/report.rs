//! Line-oriented check results and their per-module aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::psl::Stereotype;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Holds,
    Vacuous,
    Violated,
    Unknown,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::Holds,
        Outcome::Vacuous,
        Outcome::Violated,
        Outcome::Unknown,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Outcome::Holds => "holds",
            Outcome::Vacuous => "vacuous",
            Outcome::Violated => "violated",
            Outcome::Unknown => "unknown",
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.keyword() == s)
            .ok_or_else(|| format!("unknown verdict `{s}`"))
    }
}

impl From<&crate::engine::Verdict> for Outcome {
    fn from(v: &crate::engine::Verdict) -> Self {
        use crate::engine::Verdict::*;
        match v {
            Holds => Outcome::Holds,
            HoldsVacuously => Outcome::Vacuous,
            Violated(_) => Outcome::Violated,
            Unknown(_) => Outcome::Unknown,
        }
    }
}

/// Process exit status for a set of verdicts: 1 if anything is violated,
/// else 2 if anything is unknown or vacuous, else 0.
pub fn exit_code<I: IntoIterator<Item = Outcome>>(outcomes: I) -> i32 {
    let mut code = 0;
    for o in outcomes {
        match o {
            Outcome::Violated => return 1,
            Outcome::Unknown | Outcome::Vacuous => code = 2,
            Outcome::Holds => {}
        }
    }
    code
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyResult {
    pub property: String,
    pub stereotype: Stereotype,
    pub outcome: Outcome,
    pub iterations: u64,
    pub nodes: u64,
    pub ms: u64,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "property {} type {} verdict {} iters {} nodes {} ms {}",
            self.property,
            self.stereotype,
            self.outcome.keyword(),
            self.iterations,
            self.nodes,
            self.ms
        )
    }
}

/// Results for one checked module; `sub` is carried as metadata only.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModuleResults {
    pub module: String,
    pub sub: u64,
    pub properties: Vec<PropertyResult>,
}

impl fmt::Display for ModuleResults {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "module {} sub {}", self.module, self.sub)?;
        for p in &self.properties {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ResultsError {
    pub line: usize,
    pub message: String,
}

fn number(word: &str, line: usize) -> Result<u64, ResultsError> {
    word.parse().map_err(|_| ResultsError {
        line,
        message: format!("bad number `{word}`"),
    })
}

/// Parses a results file. Property lines before any `module` line belong
/// to `default_module` with no sub-modules.
pub fn parse_results(text: &str, default_module: &str) -> Result<Vec<ModuleResults>, ResultsError> {
    let mut out: Vec<ModuleResults> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ResultsError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[..] {
            ["module", name, "sub", n] => out.push(ModuleResults {
                module: name.to_string(),
                sub: number(n, line)?,
                properties: Vec::new(),
            }),
            ["property", name, "type", ty, "verdict", v, "iters", it, "nodes", nodes, "ms", ms] => {
                if out.is_empty() {
                    out.push(ModuleResults {
                        module: default_module.to_string(),
                        ..Default::default()
                    });
                }
                let r = PropertyResult {
                    property: name.to_string(),
                    stereotype: ty.parse().map_err(err)?,
                    outcome: v.parse().map_err(err)?,
                    iterations: number(it, line)?,
                    nodes: number(nodes, line)?,
                    ms: number(ms, line)?,
                };
                out.last_mut().expect("pushed above").properties.push(r);
            }
            _ => return Err(err(format!("unrecognized line `{content}`"))),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModuleRow {
    pub sub: u64,
    pub by_type: [u64; 4],
    pub by_outcome: BTreeMap<Outcome, u64>,
    pub violated: Vec<String>,
    pub ms: u64,
}

impl ModuleRow {
    pub fn total(&self) -> u64 {
        self.by_type.iter().sum()
    }

    pub fn count(&self, o: Outcome) -> u64 {
        self.by_outcome.get(&o).copied().unwrap_or(0)
    }

    fn absorb(&mut self, other: &ModuleRow) {
        self.sub += other.sub;
        for (a, b) in self.by_type.iter_mut().zip(other.by_type) {
            *a += b;
        }
        for (o, n) in &other.by_outcome {
            *self.by_outcome.entry(*o).or_default() += n;
        }
        self.violated.extend(other.violated.iter().cloned());
        self.ms += other.ms;
    }
}

/// Aggregated results keyed by module name, so rows come out sorted.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RunReport {
    pub modules: BTreeMap<String, ModuleRow>,
}

impl RunReport {
    /// A module seen in several result sets keeps the largest `sub`;
    /// a property reported twice counts twice.
    pub fn add(&mut self, r: &ModuleResults) {
        let row = self.modules.entry(r.module.clone()).or_default();
        row.sub = row.sub.max(r.sub);
        for p in &r.properties {
            row.by_type[p.stereotype as usize] += 1;
            *row.by_outcome.entry(p.outcome).or_default() += 1;
            if p.outcome == Outcome::Violated {
                row.violated.push(p.property.clone());
            }
            row.ms += p.ms;
        }
    }

    pub fn total(&self) -> ModuleRow {
        let mut t = ModuleRow::default();
        for row in self.modules.values() {
            t.absorb(row);
        }
        t
    }
}

pub const TABLE_HEADER: &str = "Module | #Sub | #Violated | P0 | P1 | P2 | P3 | Total";

fn table_row(f: &mut fmt::Formatter<'_>, name: &str, r: &ModuleRow) -> fmt::Result {
    let [p0, p1, p2, p3] = r.by_type;
    writeln!(
        f,
        "{name} | {} | {} | {p0} | {p1} | {p2} | {p3} | {}",
        r.sub,
        r.count(Outcome::Violated),
        r.total()
    )
}

/// The table, then verdict tallies, wall time and violated properties.
/// Without any module only the header is printed.
impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{TABLE_HEADER}")?;
        if self.modules.is_empty() {
            return Ok(());
        }
        for (name, row) in &self.modules {
            table_row(f, name, row)?;
        }
        let t = self.total();
        table_row(f, "Total", &t)?;
        writeln!(f)?;
        let tallies: Vec<String> = Outcome::ALL
            .iter()
            .map(|o| format!("{} {}", o.keyword(), t.count(*o)))
            .collect();
        writeln!(f, "verdicts {}", tallies.join(" "))?;
        writeln!(f, "time_ms {}", t.ms)?;
        for (name, row) in &self.modules {
            for p in &row.violated {
                writeln!(f, "violated {name} {p}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn result(name: &str, ty: Stereotype, o: Outcome) -> PropertyResult {
        PropertyResult {
            property: name.into(),
            stereotype: ty,
            outcome: o,
            iterations: 3,
            nodes: 40,
            ms: 2,
        }
    }

    #[test]
    fn results_round_trip() {
        let m = ModuleResults {
            module: "fsm_parity".into(),
            sub: 0,
            properties: vec![
                result("fsm_parity_edetect__st", Stereotype::P0, Outcome::Violated),
                result("x", Stereotype::P3, Outcome::Vacuous),
            ],
        };
        let text = m.to_string();
        assert_eq!(
            text,
            "module fsm_parity sub 0\n\
             property fsm_parity_edetect__st type P0 verdict violated iters 3 nodes 40 ms 2\n\
             property x type P3 verdict vacuous iters 3 nodes 40 ms 2\n"
        );
        assert_eq!(parse_results(&text, "ignored").unwrap(), vec![m]);
    }

    #[test]
    fn bare_property_lines_use_the_default_module() {
        let r = parse_results(
            "# c\nproperty p type P1 verdict holds iters 0 nodes 1 ms 0\n",
            "top",
        )
        .unwrap();
        assert_eq!(
            (r[0].module.as_str(), r[0].sub, r[0].properties.len()),
            ("top", 0, 1)
        );
    }

    #[test]
    fn malformed_results() {
        for (text, want) in [
            (
                "property p type P4 verdict holds iters 0 nodes 1 ms 0\n",
                "line 1: unknown property type `P4`",
            ),
            (
                "property p type P1 verdict fine iters 0 nodes 1 ms 0\n",
                "line 1: unknown verdict `fine`",
            ),
            (
                "\nproperty p type P1 verdict holds iters x nodes 1 ms 0\n",
                "line 2: bad number `x`",
            ),
            ("module m\n", "line 1: unrecognized line `module m`"),
        ] {
            assert_eq!(parse_results(text, "d").unwrap_err().to_string(), want);
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(
            RunReport::default().to_string(),
            format!("{TABLE_HEADER}\n")
        );
    }

    #[test]
    fn report_rows_and_footer() {
        let mut rep = RunReport::default();
        rep.add(&ModuleResults {
            module: "b".into(),
            sub: 2,
            properties: vec![
                result("b1", Stereotype::P0, Outcome::Holds),
                result("b2", Stereotype::P2, Outcome::Violated),
            ],
        });
        rep.add(&ModuleResults {
            module: "a".into(),
            sub: 1,
            properties: vec![result("a1", Stereotype::P1, Outcome::Unknown)],
        });
        assert_eq!(
            rep.to_string(),
            "Module | #Sub | #Violated | P0 | P1 | P2 | P3 | Total\n\
             a | 1 | 0 | 0 | 1 | 0 | 0 | 1\n\
             b | 2 | 1 | 1 | 0 | 1 | 0 | 2\n\
             Total | 3 | 1 | 1 | 1 | 1 | 0 | 3\n\
             \n\
             verdicts holds 1 vacuous 0 violated 1 unknown 1\n\
             time_ms 6\n\
             violated b b2\n"
        );
    }

    #[test]
    fn exit_codes_cover_every_combination() {
        // bit k of the mask: outcome k present
        for mask in 0u8..16 {
            let present: Vec<Outcome> = (0..4)
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| Outcome::ALL[k])
                .collect();
            let want = if present.contains(&Outcome::Violated) {
                1
            } else if present
                .iter()
                .any(|o| matches!(o, Outcome::Unknown | Outcome::Vacuous))
            {
                2
            } else {
                0
            };
            assert_eq!(exit_code(present.iter().copied()), want, "{present:?}");
            assert_eq!(exit_code(present.iter().rev().copied()), want);
        }
    }

    fn arb_results() -> impl Strategy<Value = ModuleResults> {
        let prop = (0usize..4, 0usize..4, 0u64..100).prop_map(|(t, o, ms)| PropertyResult {
            property: format!("p{ms}"),
            stereotype: Stereotype::ALL[t],
            outcome: Outcome::ALL[o],
            iterations: ms / 3,
            nodes: ms * 7,
            ms,
        });
        ("[a-c]", 0u64..5, prop::collection::vec(prop, 0..8)).prop_map(
            |(module, sub, properties)| ModuleResults {
                module,
                sub,
                properties,
            },
        )
    }

    proptest! {
        #[test]
        fn tallies_sum_to_property_count(sets in prop::collection::vec(arb_results(), 0..6)) {
            let mut rep = RunReport::default();
            for s in &sets {
                rep.add(s);
            }
            let n: usize = sets.iter().map(|s| s.properties.len()).sum();
            let t = rep.total();
            prop_assert_eq!(t.total() as usize, n);
            prop_assert_eq!(Outcome::ALL.iter().map(|o| t.count(*o)).sum::<u64>() as usize, n);
            for row in rep.modules.values() {
                prop_assert_eq!(row.total(), Outcome::ALL.iter().map(|o| row.count(*o)).sum::<u64>());
            }
            // order of inputs does not matter for the table
            let mut rev = RunReport::default();
            for s in sets.iter().rev() {
                rev.add(s);
            }
            let table = |r: &RunReport| r.to_string().lines().take_while(|l| !l.is_empty()).map(String::from).collect::<Vec<_>>();
            prop_assert_eq!(table(&rep), table(&rev));
        }
    }
}
