//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Closed-form expectations (hypersurface symmetric functions, tube volumes,
//! Clifford torus curvatures) are computed here from scratch; everything else
//! goes through the same `run` entry point the binary uses.

use std::path::PathBuf;
use std::process::{Command as Proc, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvatura::frames::{relative_curvature, SffTensor};
use curvatura::invariants::{
    binomial, h2p1_at, h2p1_via_normal_integral, k2p_at, k2p_via_normal_integral,
};
use curvatura_cli::report::Section;
use curvatura_cli::zoo::{self, ManifoldDescriptor};
use curvatura_cli::{run, Command, Report, RunConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn descriptor(name: &str, params: &[(&str, f64)]) -> ManifoldDescriptor {
    params.iter().fold(ManifoldDescriptor::named(name), |d, (k, v)| d.with(k, *v))
}

fn run_cmd(command: Command, desc: ManifoldDescriptor, ps: Option<Vec<usize>>) -> Report {
    let mut cfg = RunConfig::new(command, desc);
    cfg.p = ps;
    run(&cfg).unwrap_or_else(|e| panic!("{} failed: {e}", command.name()))
}

fn section<'a>(rep: &'a Report, name: &str) -> &'a Section {
    rep.sections
        .iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("{} has no section {name}", rep.manifold))
}

fn failures(rep: &Report) -> Vec<String> {
    rep.failed_checks().into_iter().map(|f| format!("{}: {f}", rep.manifold)).collect()
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, diagonal: bool) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if i == j || !diagonal {
                let v = rng.random_range(-2.0..2.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    a
}

/// `e_k` of the eigenvalues, by the product recursion over eigenvalues.
fn sigma_from_eigenvalues(a: &DMatrix<f64>, k: usize) -> f64 {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let mut e = vec![0.0; a.nrows() + 1];
    e[0] = 1.0;
    for (count, &lam) in eig.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    e[k]
}

fn hypersurface_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut k_err, mut h_err) = (0.0f64, 0.0f64);
    for case in 0..200 {
        let n = 2 + case % 5;
        let a = random_symmetric(&mut rng, n, case % 2 == 0);
        let sff = SffTensor::from_matrices(std::slice::from_ref(&a));
        let rel = relative_curvature(&sff);
        for p in 0..=n / 2 {
            let expect = sigma_from_eigenvalues(&a, 2 * p) / binomial(n, 2 * p);
            k_err = k_err.max((k2p_at(&rel, p).unwrap() - expect).abs() / expect.abs().max(1.0));
        }
        for p in 0..=(n - 1) / 2 {
            let expect = sigma_from_eigenvalues(&a, 2 * p + 1) / binomial(n, 2 * p + 1);
            h_err = h_err.max((h2p1_at(&rel, &sff, p)[0] - expect).abs() / expect.abs().max(1.0));
        }
    }
    Outcome::new(
        k_err < 1e-10 && h_err < 1e-9,
        format!("200 tensors, n in 2..=6: K max err {k_err:.2e} (< 1e-10), H max err {h_err:.2e} (< 1e-9)"),
    )
}

fn route_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=5 {
        for m in 1..=3 {
            for _ in 0..8 {
                let mats: Vec<_> = (0..m).map(|_| random_symmetric(&mut rng, n, false)).collect();
                let sff = SffTensor::from_matrices(&mats);
                let rel = relative_curvature(&sff);
                for p in 0..=n / 2 {
                    let a = k2p_at(&rel, p).unwrap();
                    let b = k2p_via_normal_integral(&sff, p).unwrap();
                    worst = worst.max((a - b).abs() / a.abs().max(1.0));
                    let ha = h2p1_at(&rel, &sff, p);
                    let hb = h2p1_via_normal_integral(&sff, p);
                    for (x, y) in ha.iter().zip(&hb) {
                        worst = worst.max((x - y).abs() / x.abs().max(1.0));
                    }
                }
                cases += 1;
            }
        }
    }
    Outcome::new(worst < 1e-8, format!("{cases} tensors, n <= 5, m <= 3: max gap {worst:.2e} (< 1e-8)"))
}

fn intrinsic_relation() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for name in ["torus-hyperbolic", "torus-of-revolution", "ellipsoid-r4", "clifford-torus-s3", "product-torus-s3", "great-sphere-s3"] {
        let rep = run_cmd(Command::Invariants, ManifoldDescriptor::named(name), None);
        for v in section(&rep, "invariants").verdicts.iter().filter(|v| v.check.ends_with("relation")) {
            worst = worst.max(v.value);
            if !v.passed || v.bound > 1e-9 {
                bad.push(format!("{name}: {} = {:.2e}", v.check, v.value));
            }
        }
    }
    let rep = run_cmd(Command::Invariants, ManifoldDescriptor::named("clifford-torus-s3"), None);
    let t = &section(&rep, "invariants").totals;
    let kf = (t["K_2_min"] + 1.0).abs().max((t["K_2_max"] + 1.0).abs());
    let km = t["KM_2_min"].abs().max(t["KM_2_max"].abs());
    if kf >= 1e-6 || km >= 1e-6 {
        bad.push(format!("Clifford torus: |K_2 + 1| = {kf:.2e}, |K^M_2| = {km:.2e}"));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "c in {{-1,0,1}}: max relation gap {worst:.2e} (< 1e-9); Clifford |K_2+1| {kf:.2e}, |K^M_2| {km:.2e} (< 1e-6){}",
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn space_form_el() -> Outcome {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut count = 0;
    for name in zoo::NAMES {
        let z = zoo::build(&ManifoldDescriptor::named(*name)).unwrap();
        if z.patch.ambient().space_form_curvature().is_none() {
            continue;
        }
        count += 1;
        let rep = run_cmd(Command::ElCheck, ManifoldDescriptor::named(*name), None);
        let shortcut: Vec<_> =
            section(&rep, "el-check").verdicts.iter().filter(|v| v.check.contains("shortcut")).collect();
        if shortcut.len() != rep.p.len() {
            bad.push(format!("{name}: {} of {} p values checked", shortcut.len(), rep.p.len()));
        }
        for v in shortcut {
            worst = worst.max(v.value);
            if !v.passed || v.bound > 1e-6 {
                bad.push(format!("{name}: {} = {:.2e}", v.check, v.value));
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "{count} space-form patches, all p: max pointwise gap {worst:.2e} (< 1e-6){}",
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn first_variation() -> Outcome {
    let cases = [
        ("torus-of-revolution", 0),
        ("ellipsoid", 1),
        ("product-torus-s3", 1),
        ("ellipsoid-r4", 1),
    ];
    let mut parts = Vec::new();
    let mut bad = Vec::new();
    for (name, p) in cases {
        let rep = run_cmd(Command::FirstVariation, ManifoldDescriptor::named(name), Some(vec![p]));
        let s = section(&rep, "first-variation");
        if s.verdicts.len() != 5 {
            bad.push(format!("{name}: {} fields instead of 5", s.verdicts.len()));
        }
        let worst_rel = s.verdicts.iter().filter(|v| v.check.ends_with("relative gap")).fold(0.0f64, |a, v| a.max(v.value));
        let worst_abs = s.verdicts.iter().filter(|v| v.check.ends_with("absolute gap")).fold(0.0f64, |a, v| a.max(v.value));
        parts.push(format!("{name} p={p}: rel {worst_rel:.1e}, abs {worst_abs:.1e}"));
        bad.extend(failures(&rep));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "5 fields each (rel < 1e-3, abs < 1e-6 when the integral vanishes): {}{}",
            parts.join("; "),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn complex_identities() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for name in ["linear-cp1-cp2", "quadric-cp2", "quadric-cp3"] {
        let rep = run_cmd(Command::ElCheck, ManifoldDescriptor::named(name), None);
        let ids = section(&rep, "complex-identities");
        for key in [
            "curvature identities",
            "second fundamental form pairing",
            "relative curvature J-invariance",
            "|H_2p+1|",
            "|L_2p|",
        ] {
            let v = ids.verdicts.iter().find(|v| v.check == key);
            match v {
                Some(v) if v.passed && v.bound <= 1e-5 => worst = worst.max(v.value),
                Some(v) => bad.push(format!("{name}: {key} = {:.2e}", v.value)),
                None => bad.push(format!("{name}: {key} missing")),
            }
        }
        bad.extend(failures(&rep));
    }
    let rep = run_cmd(Command::ElCheck, ManifoldDescriptor::named("perturbed-quadric-cp2"), None);
    let control = section(&rep, "complex-identities").totals["second fundamental form pairing"];
    if control <= 1e-2 {
        bad.push(format!("negative control pairing residual only {control:.2e}"));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "max residual {worst:.2e} (< 1e-5); negative control pairing residual {control:.2e} (> 1e-2){}",
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn tube_formula() -> Outcome {
    let mut parts = Vec::new();
    let mut bad = Vec::new();
    // Closed forms: V(r) for the torus is 8π²Ra since ∫K = 0.
    let closed: [(&str, Box<dyn Fn(f64, &Section) -> Option<f64>>); 4] = [
        ("curve-r3", Box::new(|r, s| Some(2.0 * std::f64::consts::PI * s.totals["M_0"] * r))),
        ("sphere", Box::new(|r, _| Some(8.0 * std::f64::consts::PI * (1.0 + r * r)))),
        ("torus-of-revolution", Box::new(|_, _| Some(8.0 * std::f64::consts::PI.powi(2) * 2.0 * 0.7))),
        ("fourier-perturbed-torus", Box::new(|_, _| None)),
    ];
    for (name, expect) in &closed {
        let rep = run_cmd(Command::Tube, ManifoldDescriptor::named(*name), None);
        let s = section(&rep, "tube");
        let radii = s.table.column("r").unwrap();
        let formula = s.table.column("formula").unwrap();
        let numeric = s.table.column("numeric").unwrap();
        if radii.len() != 3 {
            bad.push(format!("{name}: {} radii", radii.len()));
        }
        let mut worst = 0.0f64;
        for i in 0..radii.len() {
            worst = worst.max((numeric[i] - formula[i]).abs() / formula[i].abs());
            if let Some(v) = expect(radii[i], s) {
                worst = worst.max((formula[i] - v).abs() / v.abs());
            }
        }
        if !(worst < 1e-3) {
            bad.push(format!("{name}: gap {worst:.2e}"));
        }
        parts.push(format!("{name} {worst:.1e}"));
        bad.extend(failures(&rep));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "3 radii each, max relative gap (< 1e-3): {}{}",
            parts.join(", "),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn austerity() -> Outcome {
    let flags = ["flag_HM_vanishes", "flag_H_vanishes", "flag_relatively_minimal", "flag_tube_critical"];
    let mut bad = Vec::new();
    let mut parts = Vec::new();
    let cases = [
        (descriptor("clifford-torus-s3", &[]), true),
        (descriptor("holomorphic-graph-c3", &[]), true),
        (descriptor("sphere", &[("n", 2.0), ("r", 1.0)]), false),
        (descriptor("sphere", &[("n", 3.0), ("r", 2.0)]), false),
    ];
    for (desc, expect) in cases {
        let label = format!("{}{:?}", desc.name, desc.params.values().collect::<Vec<_>>());
        let rep = run_cmd(Command::Austere, desc, None);
        let austere = section(&rep, "austerity").totals["austere"] == 1.0;
        let mins = section(&rep, "tubular-minimality");
        let got: Vec<bool> = flags.iter().map(|f| mins.totals[*f] == 1.0).collect();
        if austere != expect || got.iter().any(|&g| g != expect) {
            bad.push(format!("{label}: austere {austere}, flags {got:?}"));
        }
        bad.extend(failures(&rep));
        parts.push(format!("{label} {}", if austere { "austere" } else { "not austere" }));
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "{}; unanimous flags (< 1e-5), (-1)^p K >= -1e-8, |H_odd| < 1e-6{}",
            parts.join(", "),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("curvatura-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut bad = Vec::new();
    let mut runs = 0;
    for name in ["fourier-perturbed-torus", "quadric-cp2", "ellipsoid"] {
        let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
        for (tag, workers) in [("a", "1"), ("b", "3"), ("c", "1"), ("d", "0")] {
            let out: PathBuf = dir.join(format!("{name}-{tag}.json"));
            let status = Proc::new(env!("CARGO_BIN_EXE_curvatura"))
                .args(["report-all", "--manifold", name, "--seed", "11", "--out"])
                .arg(&out)
                .env("CURVATURA_WORKERS", workers)
                .status()
                .expect("binary runs");
            if status.code() != Some(0) {
                bad.push(format!("{name} with {workers} workers exited {status}"));
            }
            outputs.push((workers.to_string(), std::fs::read(&out).unwrap_or_default()));
            runs += 1;
        }
        for (w, bytes) in &outputs[1..] {
            if bytes.is_empty() || *bytes != outputs[0].1 {
                bad.push(format!("{name}: report with {w} workers differs from 1 worker"));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Outcome::new(
        bad.is_empty(),
        format!(
            "{runs} report-all runs (workers 1, 3, 1, default): {}",
            if bad.is_empty() { "byte-identical".to_string() } else { bad.join("; ") }
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 9] = [
        (1, "hypersurface reduction", hypersurface_reduction, Some(Duration::from_secs(10))),
        (2, "route equivalence", route_equivalence, Some(Duration::from_secs(30))),
        (3, "intrinsic/relative relation", intrinsic_relation, None),
        (4, "space-form EL consistency", space_form_el, Some(Duration::from_secs(120))),
        (5, "first variation", first_variation, Some(Duration::from_secs(300))),
        (6, "complex projective identities", complex_identities, Some(Duration::from_secs(300))),
        (7, "tube formula", tube_formula, Some(Duration::from_secs(120))),
        (8, "austerity", austerity, Some(Duration::from_secs(120))),
        (9, "determinism", determinism, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all = true;
    for (id, title, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| title.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let passed = outcome.passed && in_time;
        all &= passed;
        let budget_note = budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        println!(
            "criterion {id} {title}: {} — {} [{:.1}s{budget_note}]",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
