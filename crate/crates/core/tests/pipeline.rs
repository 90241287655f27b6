use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lake_vortex::diagnostics::circulation;
use lake_vortex::geometry::{Background, NodeKind, Shape};
use lake_vortex::profile::solve_profile;
use lake_vortex::runner::{exit_code, run_scenario, RunOptions, EXIT_DIVERGENCE, EXIT_INVARIANT, EXIT_PARSE, EXIT_VALIDATION};
use lake_vortex::solver::{newton_solve, GridPolicy, NewtonOptions, Problem};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lake-vortex-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn short(out: &Path) -> RunOptions {
    RunOptions { out: Some(out.to_path_buf()), eps_ladder: Some(vec![(-3.0f64).exp(), (-4.0f64).exp()]), strict: false }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_scenarios_give_identical_csv() {
    let path = scenarios().join("disk-single-b1-q1-p2.toml");
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let (ca, _) = run_scenario(&path, &short(&a));
    let (cb, _) = run_scenario(&path, &short(&b));
    assert_eq!((ca, cb), (0, 0));
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() >= 4);
    assert_eq!(fa, fb);
}

#[test]
fn pair_mode_without_negatives_matches_interior_mode() {
    let text = fs::read_to_string(scenarios().join("disk-single-b1-q1-p2.toml")).unwrap();
    let dir = scratch("pair-n0");
    let interior = dir.join("interior.toml");
    let pair = dir.join("pair.toml");
    fs::write(&interior, &text).unwrap();
    fs::write(&pair, text.replacen("p = 2.0", "p = 2.0\nmode = \"pair\"", 1)).unwrap();
    let (oi, op) = (dir.join("out-interior"), dir.join("out-pair"));
    let (ci, ri) = run_scenario(&interior, &short(&oi));
    let (cp, rp) = run_scenario(&pair, &short(&op));
    assert_eq!((ci, cp), (0, 0));
    assert_eq!(rp.unwrap().scenario.mode, lake_vortex::scenario::Mode::Pair);
    drop(ri);
    assert_eq!(csv_files(&oi), csv_files(&op));
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = scratch("codes");
    let (code, run) = run_scenario(&scenarios().join("invalid-negative-stream.toml"), &short(&dir.join("a")));
    assert_eq!(code, EXIT_VALIDATION);
    assert_eq!(exit_code(&run.unwrap_err()), EXIT_VALIDATION);

    let broken = dir.join("broken.toml");
    fs::write(&broken, "name = \"x\"\np = [\n").unwrap();
    assert_eq!(run_scenario(&broken, &short(&dir.join("b"))).0, EXIT_PARSE);

    let text = fs::read_to_string(scenarios().join("disk-single-b1-q1-p2.toml")).unwrap();
    let unknown = dir.join("unknown.toml");
    fs::write(&unknown, text.replacen("[grid]", "[grid]\ncell_size = 3", 1)).unwrap();
    assert_eq!(run_scenario(&unknown, &short(&dir.join("c"))).0, EXIT_PARSE);

    let path = scenarios().join("disk-single-b1-q1-p2.toml");
    let reversed = RunOptions { out: Some(dir.join("d")), eps_ladder: Some(vec![(-4.0f64).exp(), (-3.0f64).exp()]), strict: false };
    assert_eq!(run_scenario(&path, &reversed).0, EXIT_VALIDATION);

    let strict = RunOptions { strict: true, ..short(&dir.join("e")) };
    let (code, run) = run_scenario(&path, &strict);
    assert_eq!(code, 0);
    let mut run = run.unwrap();
    run.warnings.push("synthetic".into());
    assert_eq!(run.exit_code(), EXIT_INVARIANT);
    run.strict = false;
    assert_eq!(run.exit_code(), 0);
    assert_ne!(EXIT_DIVERGENCE, EXIT_INVARIANT);
}

#[test]
fn cli_subcommands() {
    let bin = env!("CARGO_BIN_EXE_lake-vortex");
    let dir = scratch("cli");
    let out = Command::new(bin).args(["profile-table", "--p", "3"]).output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().count() > 1000 && table.starts_with("radius,phi"), "{}", &table[..40.min(table.len())]);

    let out = Command::new(bin)
        .args(["extrema", "--scenario"])
        .arg(scenarios().join("disk-double-bumps.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listing.lines().filter(|l| l.starts_with("Interior Min")).count(), 2, "{listing}");

    let out = Command::new(bin)
        .args(["run", "--threads", "2", "--eps-ladder", "e-3", "--scenario"])
        .arg(scenarios().join("disk-single-b1-q1-p2.toml"))
        .arg("--out")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "trend.csv", "profile.csv", "extrema.json", "newton.jsonl", "scenario.toml"] {
        assert!(dir.join("run").join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);

    let out = Command::new(bin)
        .args(["landscape", "--lattice", "8", "--eps-ladder", "e-4", "--scenario"])
        .arg(scenarios().join("disk-bump-single.toml"))
        .arg("--out")
        .arg(dir.join("land"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.join("land/landscape.csv")).unwrap().lines().count() > 10);

    let out = Command::new(bin)
        .args(["run", "--scenario"])
        .arg(scenarios().join("invalid-negative-stream.toml"))
        .arg("--out")
        .arg(dir.join("bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
}

fn single_problem(cells_per_core: f64) -> Problem {
    Problem {
        shape: Shape::unit_disk(),
        background: Background::uniform(1.0, 1.0),
        p: 2.0,
        centers_plus: vec![[0.0, 0.0]],
        centers_minus: vec![],
        grid: GridPolicy { cells_per_core, ..GridPolicy::adaptive(1.0 / 32.0) },
        newton: NewtonOptions::default(),
    }
}

#[test]
fn perturbed_solution_returns_to_the_same_branch() {
    let profile = solve_profile(2.0, 4000).unwrap();
    let eps = (-5.0f64).exp();
    let rung = single_problem(8.0).solve(eps, &profile, None).unwrap();
    let state = rung.state.as_ref().unwrap();
    let sup = state.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let perturbed: Vec<f64> = state
        .w
        .iter()
        .enumerate()
        .map(|(k, &v)| if rung.grid.kinds[k] == NodeKind::Interior { v + 1e-3 * sup * ((k * 7) % 11) as f64 / 10.0 } else { v })
        .collect();
    let again = newton_solve(&perturbed, &rung.ansatz.field, &rung.fields, eps, 2.0, &rung.grid, false, &NewtonOptions::default()).unwrap();
    let gap = again.w.iter().zip(&state.w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(gap <= 1e-8, "{gap}");
}

#[test]
fn circulation_converges_under_refinement() {
    let profile = solve_profile(2.0, 4000).unwrap();
    let eps = (-4.0f64).exp();
    let values: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&c| {
            let rung = single_problem(c).solve(eps, &profile, None).unwrap();
            circulation(rung.state.as_ref().unwrap(), &rung.fields, &rung.grid).total
        })
        .collect();
    let order = ((values[0] - values[1]) / (values[1] - values[2])).abs().log2();
    assert!(order >= 1.5, "{values:?} order {order}");
}

#[test]
fn stationarity_residual_shrinks_under_refinement() {
    let profile = solve_profile(2.0, 4000).unwrap();
    let eps = (-4.0f64).exp();
    let values: Vec<f64> = [16.0, 32.0]
        .iter()
        .map(|&c| {
            let rung = single_problem(c).solve(eps, &profile, None).unwrap();
            lake_vortex::diagnostics::reconstruct_flow(rung.state.as_ref().unwrap(), &rung.fields, &rung.grid).stationarity_relative
        })
        .collect();
    assert!(values[1] < 0.5 * values[0], "{values:?}");
}
