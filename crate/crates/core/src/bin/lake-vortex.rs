use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lake_vortex::profile::solve_profile;
use lake_vortex::runner::{
    self, describe, exit_code, landscape, list_extrema, parse_eps_list, write_rows, RunOptions, PROFILE_GRID,
};
use lake_vortex::scenario::Scenario;
use lake_vortex::Error;

#[derive(Parser)]
#[command(name = "lake-vortex", version, about = "Multi-vortex solutions of the lake equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for independent diagnostics.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ε values; `e-K` means exp(−K).
    #[arg(long)]
    eps_ladder: Option<String>,
    /// Treat warnings as errors.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the ε ladder and write artifacts.
    Run(Common),
    /// List strict extrema of q²/b.
    Extrema {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Single-vortex reduced energy over a lattice at the first ε.
    Landscape {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        lattice: usize,
    },
    /// Tabulate the radial profile.
    ProfileTable {
        #[arg(long, conflicts_with = "p")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn options(c: &Common) -> Result<RunOptions, Error> {
    Ok(RunOptions {
        out: c.out.clone(),
        eps_ladder: c.eps_ladder.as_deref().map(parse_eps_list).transpose()?,
        strict: c.strict,
    })
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(runner::EXIT_FAILURE as u8);
        }
    }
    match cli.command {
        Command::Run(c) => {
            let opts = match options(&c) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let (code, run) = runner::run_scenario(&c.scenario, &opts);
            match run {
                Ok(run) => {
                    for r in &run.records {
                        let outer = r.projection.as_ref().map_or(0, |p| p.outer_iterations);
                        println!(
                            "eps {:.4e}  nodes {:>7}  newton {:>2}  outer {:>2}  residual {:.2e}  correction {:.3e}  circulation {:.4}",
                            r.eps, r.nodes, r.newton_iterations, outer, r.residual_relative, r.correction_sup, r.circulation.total
                        );
                    }
                    for w in &run.warnings {
                        eprintln!("warning: {w}");
                    }
                    for f in &run.invariant_failures {
                        eprintln!("invariant: {f}");
                    }
                    if let Some((e, err)) = &run.failure {
                        eprintln!("error at eps {e:.4e}: {err}");
                    }
                    println!("artifacts in {}", runner::output_dir(&run.scenario, &opts).display());
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
        Command::Extrema { scenario } => {
            let s = match Scenario::from_path(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let grid = match s.base_grid() {
                Ok(g) => g,
                Err(e) => return fail(e),
            };
            let report = list_extrema(s.background(), &grid);
            for c in &report.candidates {
                println!("{}", describe(c, &s.domain));
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Command::Landscape { common, lattice } => {
            let s = match Scenario::from_path(&common.scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let opts = match options(&common) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let eps = match opts.eps_ladder.clone().map(Ok).unwrap_or_else(|| s.eps_ladder()) {
                Ok(v) if !v.is_empty() => v[0],
                Ok(_) => return fail(Error::Validation("empty eps ladder".into())),
                Err(e) => return fail(e),
            };
            let rows = match landscape(&s, eps, lattice) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let dir = runner::output_dir(&s, &opts);
            let written = std::fs::create_dir_all(&dir)
                .map_err(Error::from)
                .and_then(|_| std::fs::File::create(dir.join("landscape.csv")).map_err(Error::from))
                .and_then(|f| write_rows(&rows, f));
            if let Err(e) = written {
                return fail(e);
            }
            println!("{} points written to {}", rows.len(), dir.join("landscape.csv").display());
            ExitCode::SUCCESS
        }
        Command::ProfileTable { scenario, p, out } => {
            let p = match (scenario, p) {
                (Some(path), _) => match Scenario::from_path(&path) {
                    Ok(s) => s.p,
                    Err(e) => return fail(e),
                },
                (None, Some(p)) => p,
                (None, None) => return fail(Error::Validation("profile-table needs --scenario or --p".into())),
            };
            let table = match solve_profile(p, PROFILE_GRID) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let written = match out {
                Some(dir) => std::fs::create_dir_all(&dir)
                    .map_err(Error::from)
                    .and_then(|_| std::fs::File::create(dir.join("profile.csv")).map_err(Error::from))
                    .and_then(|f| table.write_csv(f)),
                None => table.write_csv(std::io::stdout().lock()),
            };
            if let Err(e) = written {
                return fail(e);
            }
            let (a, b) = table.pohozaev_errors();
            eprintln!("p = {p}: phi'(1) = {:.12e}, identity errors {a:.2e} {b:.2e}", table.slope_at_one);
            ExitCode::SUCCESS
        }
    }
}
