use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use blockprec::block::{write_system, BlockMatrix};
use blockprec::krylov::gmres;
use blockprec::precond::{build_preconditioner, PrecondSpec};
use blockprec::problems::generate;

use crate::config::{load, sweep_path, sweep_value, Loaded, Override};
use crate::report::{Report, TimeStats, Timings};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Converged => 0,
            Status::NotConverged => 2,
        }
    }
}

/// Rejects any `BLOCKPREC_THREADS` other than 1.
pub fn check_threads() -> Result<()> {
    match std::env::var("BLOCKPREC_THREADS") {
        Ok(v) if v.trim() != "1" => {
            bail!("BLOCKPREC_THREADS={v} is not supported; only 1 thread is available")
        }
        _ => Ok(()),
    }
}

/// Builds the preconditioner and runs GMRES `repeat` times.
pub fn solve(loaded: &Loaded) -> Result<Report> {
    let (a, b) = loaded.system()?;
    let spec = loaded.preconditioner(&a)?;
    solve_system(loaded, &a, &b, spec)
}

fn solve_system(loaded: &Loaded, a: &BlockMatrix, b: &[f64], spec: PrecondSpec) -> Result<Report> {
    let cfg = &loaded.config;
    let (mut setup, mut solve) = (Vec::new(), Vec::new());
    let mut first = None;
    for k in 0..cfg.repeat {
        let t = Instant::now();
        let p = build_preconditioner(a, &spec)?;
        setup.push(t.elapsed().as_secs_f64());
        let (_, report) = gmres(a, p.as_ref(), b, None, &cfg.gmres)?;
        solve.push(report.solve_seconds);
        match &first {
            None => first = Some((report, p.hierarchies())),
            Some((r0, _)) if r0.iterations != report.iterations => {
                bail!(
                    "repeat {k} took {} iterations, first run took {}",
                    report.iterations,
                    r0.iterations
                )
            }
            Some(_) => {}
        }
    }
    let (report, hierarchies) = first.expect("repeat >= 1");
    Ok(Report {
        problem: cfg.problem,
        manifest: cfg.manifest.clone(),
        field_sizes: a.row_layout().sizes().to_vec(),
        nnz: a.nnz(),
        preconditioner: spec,
        gmres: cfg.gmres,
        converged: report.converged,
        iterations: report.iterations,
        final_relative_residual: report.final_relative_residual,
        residual_history: report.residual_history,
        timings: Timings {
            repeat: cfg.repeat,
            setup_seconds: TimeStats::of(&setup),
            solve_seconds: TimeStats::of(&solve),
        },
        hierarchies,
    })
}

/// Writes the report (stdout without an output path) and the optional
/// history CSV.
pub fn emit(loaded: &Loaded, report: &Report) -> Result<Status> {
    let json = report.to_json()?;
    match &loaded.config.output {
        Some(path) => std::fs::write(path, json)?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    if let Some(path) = &loaded.config.csv {
        report.write_history_csv(path)?;
    }
    Ok(if report.converged {
        Status::Converged
    } else {
        Status::NotConverged
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Re-runs the solve with `name` set to each value in turn.
pub fn sweep(
    config: Option<&std::path::Path>,
    overrides: &[Override],
    name: &str,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let path = sweep_path(name);
    values
        .iter()
        .map(|&v| {
            let mut o = overrides.to_vec();
            o.push(Override::new(path.clone(), sweep_value(v)));
            o.push(Override::new("repeat", 1.into()));
            let r = solve(&load(config, &o)?)?;
            Ok(SweepRow {
                value: v,
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, name: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = name.rsplit('.').next().unwrap_or(name);
    w.write_record([header, "iterations", "converged"])?;
    for r in rows {
        w.serialize((r.value, r.iterations, r.converged))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the generated problem of `loaded` as a block Matrix Market set.
pub fn export(loaded: &Loaded, dir: &std::path::Path) -> Result<std::path::PathBuf> {
    let Some(spec) = &loaded.config.problem else {
        bail!("export needs a generated 'problem', not a manifest");
    };
    let (a, b) = generate(spec)?;
    Ok(write_system(dir, &a, Some(&b))?)
}

/// Text dump of every AMG hierarchy in the preconditioner tree.
pub fn hierarchy_text(loaded: &Loaded) -> Result<String> {
    let (a, _) = loaded.system()?;
    let spec = loaded.preconditioner(&a)?;
    let p = build_preconditioner(&a, &spec)?;
    let h = p.hierarchies();
    if h.is_empty() {
        return Ok(format!(
            "preconditioner '{}' has no multigrid hierarchy\n",
            spec.kind_name()
        ));
    }
    Ok(h.iter().map(|s| format!("{s}\n")).collect())
}
