use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use vrtl_core::engine::{
    build_ts, check, cross_validate, product_machine, replay, seeded_system, Limits, Shape, Verdict,
};
use vrtl_core::instrument::{
    generate_wrapper, instrument_source, overhead_report, tie_off_instances, InstrumentError,
    IntegritySpec,
};
use vrtl_core::ir::{text, ModuleIr};
use vrtl_core::propgen::{generate, parse_cuts, partition, EntityWidths};
use vrtl_core::psl::{compile, CompileOptions, SafetyCheck};
use vrtl_core::report::{
    exit_code, parse_results, ModuleResults, Outcome, PropertyResult, RunReport,
};
use vrtl_core::verilog::{elaborate, elaborate_full, print, Item};

use crate::io::{ensure_dir, load_spec, load_vunits, read, write_atomic, Design, Fail, Res};
use crate::{Command, EngineArgs, Rtl};

pub fn run(cmd: Command) -> Res<u8> {
    match cmd {
        Command::Instrument {
            design,
            spec,
            output,
            wrapper,
            report,
        } => instrument(
            &design,
            &spec,
            &output,
            wrapper.as_deref(),
            report.as_deref(),
        ),
        Command::Propgen {
            spec,
            output,
            cuts,
            rtl,
            top,
        } => propgen(&spec, &output, cuts.as_deref(), &rtl, top.as_deref()),
        Command::Check {
            design,
            vunit,
            engine,
            cut,
            trace,
            results,
            jobs,
        } => check_cmd(
            &design,
            &vunit,
            &engine,
            cut,
            trace.as_deref(),
            results.as_deref(),
            jobs,
        ),
        Command::Equiv {
            left,
            rtl2,
            top2,
            engine,
            trace,
        } => equiv(
            &left,
            &Rtl {
                rtl: rtl2,
                top: top2,
            },
            &engine,
            trace.as_deref(),
        ),
        Command::Report { results, output } => report(&results, output.as_deref()),
        Command::DumpIr { design } => {
            let d = Design::load(&design.rtl)?;
            let m = elaborate(&d.file, &design.top).map_err(|e| d.explain(e))?;
            print!("{}", text::dump(&m));
            Ok(0)
        }
        Command::Crossval {
            seed,
            count,
            state_bits,
            input_bits,
            jobs,
        } => crossval(seed, count, state_bits, input_bits, jobs),
    }
}

fn limits(a: &EngineArgs) -> Limits {
    Limits {
        node_limit: a.node_limit,
        timeout: (a.timeout > 0).then(|| Duration::from_secs(a.timeout)),
        explicit_cap: a.explicit_cap,
        depth_bound: a.depth_bound,
        ..Limits::default()
    }
}

fn pool(jobs: usize) -> Res<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn elaborate_top(r: &Rtl) -> Res<(Design, ModuleIr, usize)> {
    let d = Design::load(&r.rtl)?;
    let e = elaborate_full(&d.file, &r.top).map_err(|e| d.explain(e))?;
    Ok((d, e.ir, e.instances))
}

fn instrument(
    r: &Rtl,
    spec: &Path,
    output: &Path,
    wrapper: Option<&str>,
    report: Option<&Path>,
) -> Res<u8> {
    let s = load_spec(spec)?;
    if s.module != r.top {
        return Err(Fail(format!(
            "{}: spec is for module `{}` but --top is `{}`",
            spec.display(),
            s.module,
            r.top
        )));
    }
    let d = Design::load(&r.rtl)?;
    let before = elaborate(&d.file, &s.module).map_err(|e| d.explain(e))?;
    let mut out = instrument_source(&d.file, &s).map_err(|e| match e {
        InstrumentError::Verilog(v) => d.explain(v),
        InstrumentError::Spec(e) => Fail(format!("{}: {e}", spec.display())),
        e => Fail(e.to_string()),
    })?;
    let parents: Vec<String> = out
        .modules
        .iter()
        .filter(|m| {
            m.items
                .iter()
                .any(|i| matches!(i, Item::Instance(inst) if inst.module == s.module))
        })
        .map(|m| m.name.clone())
        .collect();
    for p in &parents {
        tie_off_instances(&mut out, p, &s)?;
    }
    if let Some(w) = wrapper {
        if out.module(w).is_some() {
            return Err(Fail(format!("module `{w}` already exists")));
        }
        let original = d.file.module(&s.module).expect("elaborated above");
        out.modules.push(generate_wrapper(original, &s, w)?);
    }
    write_atomic(output, &print(&out))?;
    if let Some(path) = report {
        let after = elaborate(&out, &s.module)?;
        write_atomic(path, &overhead_report(&before, &after, &s)?.to_string())?;
    }
    Ok(0)
}

fn entity_widths(s: &IntegritySpec, rtl: &[PathBuf], top: Option<&str>) -> Res<EntityWidths> {
    let Some(top) = top else {
        return Ok(EntityWidths::new());
    };
    let d = Design::load(rtl)?;
    let m = elaborate(&d.file, top).map_err(|e| d.explain(e))?;
    s.entities
        .iter()
        .map(|e| {
            m.register(&e.signal)
                .map(|r| (e.signal.clone(), r.width))
                .ok_or_else(|| {
                    Fail(format!(
                        "entity `{}` is not a register of `{top}`",
                        e.signal
                    ))
                })
        })
        .collect()
}

fn propgen(
    spec: &Path,
    output: &Path,
    cuts: Option<&Path>,
    rtl: &[PathBuf],
    top: Option<&str>,
) -> Res<u8> {
    let s = load_spec(spec)?;
    let widths = entity_widths(&s, rtl, top)?;
    let mut units = generate(&s, &widths);
    let mut composition = None;
    if let Some(path) = cuts {
        let c = parse_cuts(&read(path)?).map_err(|e| {
            if e.line > 0 {
                Fail(format!("{}:{}: {}", path.display(), e.line, e.message))
            } else {
                Fail(format!("{}: {}", path.display(), e.message))
            }
        })?;
        let (stages, rep) = partition(&s, &c);
        if !rep.ok() {
            return Err(Fail(format!(
                "{}: {}",
                path.display(),
                rep.to_string().trim_end()
            )));
        }
        units.extend(stages);
        composition = Some(rep);
    }
    ensure_dir(output)?;
    for g in &units {
        for w in &g.warnings {
            eprintln!("warning: {w}");
        }
        let path = output.join(format!("{}.psl", g.name));
        write_atomic(&path, &g.text)?;
        println!("{}", path.display());
    }
    if let Some(rep) = composition {
        print!("{rep}");
    }
    Ok(0)
}

struct Job {
    module: Arc<ModuleIr>,
    check: SafetyCheck,
}

struct Checked {
    result: PropertyResult,
    cex: Option<String>,
}

fn run_job(job: &Job, a: &EngineArgs, lim: &Limits) -> Result<Checked, String> {
    let ob = &job.check.obligations[0];
    let ts = build_ts(&job.module, &job.check).map_err(|e| format!("{}: {e}", ob.property))?;
    let r = check(&ts, a.engine, lim).map_err(|e| format!("{}: {e}", ob.property))?;
    let cex = match &r.verdict {
        Verdict::Violated(t) => {
            replay(t, &ts)
                .map_err(|e| format!("{}: counterexample does not replay: {e}", ob.property))?;
            Some(t.render(&job.module))
        }
        _ => None,
    };
    Ok(Checked {
        result: PropertyResult {
            property: ob.property.clone(),
            stereotype: ob.stereotype,
            outcome: Outcome::from(&r.verdict),
            iterations: r.iterations as u64,
            nodes: r.peak_nodes as u64,
            ms: r.elapsed.as_millis() as u64,
        },
        cex,
    })
}

fn check_cmd(
    r: &Rtl,
    vunits: &[PathBuf],
    a: &EngineArgs,
    cut: bool,
    trace: Option<&Path>,
    results: Option<&Path>,
    jobs: usize,
) -> Res<u8> {
    let (_, m, instances) = elaborate_top(r)?;
    let mut work = Vec::new();
    for (path, v) in load_vunits(vunits)? {
        let (m2, c) = compile(&v, &m, CompileOptions { assume_cuts: cut })
            .map_err(|e| Fail(format!("{}:{e}", path.display())))?;
        for w in &c.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        let module = Arc::new(m2);
        work.extend(c.split().into_iter().map(|check| Job {
            module: module.clone(),
            check,
        }));
    }
    if let Some(dir) = trace {
        ensure_dir(dir)?;
    }
    let lim = limits(a);
    let outcomes: Vec<Result<Checked, String>> = pool(jobs)?.install(|| {
        work.par_iter()
            .map(|job| {
                let c = run_job(job, a, &lim)?;
                if let (Some(dir), Some(text)) = (trace, &c.cex) {
                    write_atomic(&dir.join(format!("{}.cex", c.result.property)), text)
                        .map_err(|f| f.0)?;
                }
                Ok(c)
            })
            .collect()
    });
    let mut res = ModuleResults {
        module: m.name.clone(),
        sub: instances as u64,
        properties: Vec::new(),
    };
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => {
                if let (None, Some(text)) = (trace, &c.cex) {
                    eprint!("{text}");
                }
                res.properties.push(c.result);
            }
            Err(e) => errors.push(e),
        }
    }
    print!("{res}");
    if let Some(path) = results {
        write_atomic(path, &res.to_string())?;
    }
    if !errors.is_empty() {
        return Err(Fail(errors.join("\n")));
    }
    Ok(exit_code(res.properties.iter().map(|p| p.outcome)) as u8)
}

fn equiv(left: &Rtl, right: &Rtl, a: &EngineArgs, trace: Option<&Path>) -> Res<u8> {
    let (_, ma, _) = elaborate_top(left)?;
    let (_, mb, _) = elaborate_top(right)?;
    let (product, c) = product_machine(&ma, &mb)?;
    let ts = build_ts(&product, &c)?;
    let r = check(&ts, a.engine, &limits(a))?;
    println!(
        "equiv {} {} verdict {} iters {} nodes {} ms {}",
        ma.name,
        mb.name,
        r.verdict.keyword(),
        r.iterations,
        r.peak_nodes,
        r.elapsed.as_millis()
    );
    if let Verdict::Violated(t) = &r.verdict {
        replay(t, &ts).map_err(|e| Fail(format!("counterexample does not replay: {e}")))?;
        let text = t.render(&product);
        match trace {
            Some(path) => write_atomic(path, &text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(exit_code([Outcome::from(&r.verdict)]) as u8)
}

fn report(results: &[PathBuf], output: Option<&Path>) -> Res<u8> {
    let mut rep = RunReport::default();
    for path in results {
        let stem = path
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let sets = parse_results(&read(path)?, &stem)
            .map_err(|e| Fail(format!("{}:{}: {}", path.display(), e.line, e.message)))?;
        for s in &sets {
            rep.add(s);
        }
    }
    match output {
        Some(path) => write_atomic(path, &rep.to_string())?,
        None => print!("{rep}"),
    }
    Ok(0)
}

fn crossval(seed: u64, count: u64, state_bits: u32, input_bits: u32, jobs: usize) -> Res<u8> {
    let shape = Shape {
        max_state_bits: state_bits.max(1),
        max_input_bits: input_bits,
        ..Shape::default()
    };
    let lim = Limits::default();
    let lines: Vec<(bool, String)> = pool(jobs)?.install(|| {
        (seed..seed.saturating_add(count))
            .into_par_iter()
            .map(|s| {
                let (m, c) = seeded_system(s, &shape);
                match cross_validate(&m, &c, &lim) {
                    Ok(x) => (
                        true,
                        format!(
                            "system {s} verdict {} depth {}",
                            x.explicit.verdict.keyword(),
                            x.explicit.iterations
                        ),
                    ),
                    Err(e) => (false, format!("system {s} mismatch: {e}")),
                }
            })
            .collect()
    });
    let mut ok = true;
    for (good, line) in lines {
        ok &= good;
        println!("{line}");
    }
    Ok(if ok { 0 } else { 1 })
}
