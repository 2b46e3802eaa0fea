use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use blockprec_cli::config::{linspace, load, parse_value, Loaded, Override};
use blockprec_cli::run::{self, Status};
use clap::{Args, Parser, Subcommand};

/// Solve block-structured sparse systems with configurable block
/// preconditioners and restarted GMRES.
///
/// Field indices are 0-based everywhere in configs; entries inside Matrix
/// Market files stay 1-based.
#[derive(Parser)]
#[command(name = "blockprec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the preconditioner and solve once (or `--repeat` times).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Report path (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the residual history as `iteration,relres` CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run setup and solve this many times and report timing spread.
        #[arg(long)]
        repeat: Option<usize>,
        /// Print the multigrid hierarchies to stderr.
        #[arg(long)]
        print_hierarchy: bool,
    },
    /// Solve for each value of a parameter and write `value,iterations` CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=start:stop:count`, e.g. `coupling=0:4:9`. `coupling`, `n`
        /// and `seed` refer to the problem; other names are dotted paths.
        #[arg(long = "sweep", value_name = "PARAM=RANGE")]
        range: String,
        /// CSV path (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a generated problem as Matrix Market files plus a manifest.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the multigrid hierarchies of the configured preconditioner.
    PrintHierarchy {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    config: Option<PathBuf>,
    /// Generated problem: coupled2, saddle or threefield.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Block system manifest written by `export`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Preset name or an inline JSON preconditioner tree.
    #[arg(long)]
    prec: Option<String>,
    /// Override a config entry by dotted path, e.g. `gmres.rel_tol=1e-10`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<Override>> {
        let mut o = Vec::new();
        if let Some(p) = &self.problem {
            o.push(Override::new("problem.kind", p.as_str().into()));
        }
        if let Some(n) = self.n {
            o.push(Override::new("problem.n", n.into()));
        }
        if let Some(c) = self.coupling {
            o.push(Override::new("problem.coupling", c.into()));
        }
        if let Some(s) = self.seed {
            o.push(Override::new("problem.seed", s.into()));
        }
        if let Some(m) = &self.manifest {
            o.push(Override::new(
                "manifest",
                m.to_string_lossy().as_ref().into(),
            ));
        }
        if let Some(p) = &self.prec {
            let value = if p.trim_start().starts_with('{') {
                parse_value(p)
            } else {
                p.as_str().into()
            };
            o.push(Override::new("preconditioner", value));
        }
        for s in &self.set {
            o.push(Override::parse(s)?);
        }
        Ok(o)
    }

    fn load(&self, extra: Vec<Override>) -> Result<Loaded> {
        let mut o = self.overrides()?;
        o.extend(extra);
        load(self.config.as_deref(), &o)
    }
}

fn execute(cli: Cli) -> Result<Status> {
    run::check_threads()?;
    match cli.command {
        Command::Solve {
            common,
            output,
            csv,
            repeat,
            print_hierarchy,
        } => {
            let mut extra = Vec::new();
            if let Some(p) = output {
                extra.push(Override::new("output", p.to_string_lossy().as_ref().into()));
            }
            if let Some(p) = csv {
                extra.push(Override::new("csv", p.to_string_lossy().as_ref().into()));
            }
            if let Some(k) = repeat {
                extra.push(Override::new("repeat", k.into()));
            }
            let loaded = common.load(extra)?;
            let report = run::solve(&loaded)?;
            if print_hierarchy {
                for h in &report.hierarchies {
                    eprintln!("{h}");
                }
            }
            run::emit(&loaded, &report)
        }
        Command::Sweep {
            common,
            range,
            output,
        } => {
            let (name, spec) = range
                .split_once('=')
                .with_context(|| format!("--sweep '{range}' is not PARAM=start:stop:count"))?;
            let values = linspace(spec)?;
            let rows = run::sweep(
                common.config.as_deref(),
                &common.overrides()?,
                name,
                &values,
            )?;
            match output {
                Some(p) => run::write_sweep_csv(std::fs::File::create(&p)?, name, &rows)?,
                None => run::write_sweep_csv(std::io::stdout().lock(), name, &rows)?,
            }
            Ok(if rows.iter().all(|r| r.converged) {
                Status::Converged
            } else {
                Status::NotConverged
            })
        }
        Command::Export { common, dir } => {
            let path = run::export(&common.load(Vec::new())?, &dir)?;
            println!("{}", path.display());
            Ok(Status::Converged)
        }
        Command::PrintHierarchy { common } => {
            print!("{}", run::hierarchy_text(&common.load(Vec::new())?)?);
            Ok(Status::Converged)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
