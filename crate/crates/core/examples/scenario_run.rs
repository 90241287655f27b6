//! Full pipeline from a bundled scenario file into a temporary output directory.

use std::path::Path;

use lake_vortex::runner::{run_scenario, RunOptions};

fn main() {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/disk-single-b1-q1-p2.toml");
    let out = std::env::temp_dir().join("lake-vortex-scenario-run");
    let options = RunOptions { out: Some(out.clone()), eps_ladder: Some(vec![(-3.0f64).exp(), (-4.0f64).exp()]), strict: false };
    let (code, run) = run_scenario(&scenario, &options);
    match run {
        Ok(run) => {
            for r in &run.records {
                println!("eps {:.4e}  circulation {:.4}  residual {:.1e}", r.eps, r.circulation.total, r.residual_relative);
            }
            for row in &run.trend.rows {
                println!("eps {:.4e}  circ_error {:.4}  energy_gap {:.3}", row.eps, row.circ_error, row.energy_gap);
            }
        }
        Err(e) => println!("error: {e}"),
    }
    println!("exit code {code}, artifacts in {}", out.display());
}
