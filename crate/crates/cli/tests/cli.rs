use std::path::PathBuf;
use std::process::{Command as Proc, Output};

use curvatura::frames::{point_geometry, FrameGauge};
use curvatura::immersion::build_mesh;
use curvatura_cli::zoo::{self, ManifoldDescriptor};
use curvatura_cli::{run, Command, RunConfig};

fn bin(args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_curvatura")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("curvatura-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(path: &PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bin(&["invariants", "--manifold", "no-such-thing"]).status.code(), Some(2));
    assert_eq!(bin(&["invariants", "--manifold", "sphere", "--p", "5"]).status.code(), Some(2));
    assert_eq!(bin(&["invariants", "--manifold", "sphere", "--param", "radius=2"]).status.code(), Some(2));
    assert_eq!(bin(&["invariants", "--manifold", "sphere", "--tol-overrides", "bogus=1"]).status.code(), Some(2));
    assert_eq!(bin(&["invariants"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn tolerance_failures_exit_with_one() {
    let out = bin(&[
        "first-variation",
        "--manifold",
        "torus-of-revolution",
        "--p",
        "0",
        "--resolution",
        "16",
        "--tol-overrides",
        "first_variation_rel=1e-30,first_variation_abs=1e-30",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED first-variation"));
}

#[test]
fn list_zoo_names_every_entry() {
    let out = bin(&["list-zoo"]);
    assert!(out.status.success());
    let entries: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = entries.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, zoo::NAMES);
    let csv = bin(&["list-zoo", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("name,n,m,ambient,closed,complex,params,references"));
    assert_eq!(text.lines().count(), zoo::NAMES.len() + 1);
}

#[test]
fn every_zoo_entry_builds_with_symmetric_second_fundamental_form() {
    for name in zoo::NAMES {
        let z = zoo::build(&ManifoldDescriptor::named(*name)).unwrap();
        let mesh = build_mesh(&z.patch, &z.default_resolution).unwrap();
        assert!(mesh.volume() > 0.0, "{name}");
        let step = (mesh.len() / 7).max(1);
        for node in mesh.nodes.iter().step_by(step) {
            let g = point_geometry(&z.patch, &node.u, &FrameGauge::default()).unwrap();
            assert!(g.sff.symmetry_defect() < 1e-7, "{name} at {:?}", node.u);
        }
        if z.patch.is_complex() {
            assert!(z.patch.dim() % 2 == 0 && z.patch.codim() % 2 == 0, "{name}");
        }
        for r in &z.references {
            assert!(r.value.is_finite(), "{name}: {}", r.quantity);
        }
    }
    assert!(zoo::build(&ManifoldDescriptor::named("clifford-torus")).is_ok());
    assert!(zoo::build(&ManifoldDescriptor::named("product-torus-s3").with("a", 1.5)).is_err());
}

#[test]
fn config_file_drives_a_run_and_report_is_self_describing() {
    let dir = scratch("config");
    let out = dir.join("report.json");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "command = \"invariants\"\np = [0, 1]\nresolution = [12]\nseed = 4\nout = {:?}\n[manifold]\nname = \"sphere\"\nparams = {{ r = 2.0 }}\n[tolerances]\nreference = 1e-5\n",
            out.display().to_string()
        ),
    )
    .unwrap();
    // the subcommand wins over the file's command
    let status = bin(&["el-check", "--config", cfg.to_str().unwrap()]).status;
    assert_eq!(status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["command"], "el-check");
    assert_eq!(doc["params"]["r"], 2.0);
    assert_eq!(doc["resolution"], serde_json::json!([12, 12]));
    assert_eq!(doc["settings"]["tolerances"]["reference"], 1e-5);
    for key in ["ambient_fd_step", "stencil_step", "deformation_step", "field_amplitude"] {
        assert!(doc["settings"][key].as_f64().unwrap() > 0.0, "{key}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn csv_output_writes_one_table_per_section() {
    let dir = scratch("csv");
    let out = dir.join("sphere.json");
    let status = bin(&["invariants", "--manifold", "sphere", "--format", "csv", "--out", out.to_str().unwrap()]).status;
    assert!(status.success());
    let summary = json(&out);
    let file = summary["sections"][0]["table_file"].as_str().unwrap();
    assert_eq!(file, "sphere.invariants.csv");
    let table = std::fs::read_to_string(dir.join(file)).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.len() > 2);
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 24 * 32);
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn reports_are_identical_across_pool_sizes() {
    let mut cfg = RunConfig::new(Command::ReportAll, ManifoldDescriptor::named("torus-hyperbolic"));
    cfg.seed = 3;
    cfg.resolution = Some(vec![16]);
    let docs: Vec<String> = [1, 2, 5]
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            pool.install(|| run(&cfg)).unwrap().to_json().unwrap()
        })
        .collect();
    assert_eq!(docs[0], docs[1]);
    assert_eq!(docs[0], docs[2]);
}
