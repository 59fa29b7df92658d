//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p dfotr-cli --test acceptance`. Dataset-backed checks
//! read `data/datasets.toml`; point `DFOTR_DATA_DIR` at a directory holding
//! the LIBSVM files to override the location.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use common::*;
use dfotr::data::LabeledDataset;
use dfotr::model::build_model;
use dfotr::objectives::{
    auc, auc_from_scores, expected_auc_gaussian, pairwise_hinge, pairwise_hinge_loss, AucObjective,
    Benchmark, GaussianPairSpec, Negated,
};
use dfotr::trsub::solve_trust_region;
use dfotr::{minimize, minimize_stochastic, sample_schedule, EvaluatedPoint, Point, SolverConfig};
use dfotr_cli::auc::{
    random_start, run_dataset, AucOptions, AucSummary, HarnessConfig, Method, Mode,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Check; 8] = [
        ("1 branin", branin),
        ("2 camelback", camelback),
        ("3 hartmann6", hartmann6),
        ("4 auc tables", auc_tables),
        ("5 random-search dominance", random_search_dominance),
        ("6 stochastic variant", stochastic_variant),
        ("7 property suites", property_suites),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} [{name}] {detail} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1-3

struct BenchStats {
    hits: usize,
    median_to_1e3: Option<usize>,
    seconds: f64,
}

fn bench_stats(b: Benchmark, budget: usize, tol: f64) -> BenchStats {
    let t = Instant::now();
    let d = b.dimension();
    let mut hits = 0;
    let mut to_1e3 = Vec::new();
    for seed in 0..20 {
        let mut f = b;
        let cfg = SolverConfig::defaults(d)
            .with_budget(budget)
            .with_seed(seed);
        let h = minimize(&mut f, &vec![0.0; d], &cfg).expect("benchmark run");
        if h.best_after(budget).is_some_and(|v| v - b.f_opt() <= tol) {
            hits += 1;
        }
        to_1e3.push(h.evals_to_reach(b.f_opt() + 1e-3).unwrap_or(usize::MAX));
    }
    to_1e3.sort_unstable();
    // Upper median of 20 values.
    let median = to_1e3[10];
    BenchStats {
        hits,
        median_to_1e3: (median != usize::MAX).then_some(median),
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn branin() -> Outcome {
    let s = bench_stats(Benchmark::Branin, 100, 1e-4);
    let median_ok = s.median_to_1e3.is_some_and(|m| m <= 30);
    verdict(
        s.hits >= 18 && median_ok && s.seconds < 5.0,
        format!(
            "{}/20 seeds within 1e-4 at 100 evals (need 18); median evals to 1e-3 = {:?} (need <= 30); {:.2}s (need < 5)",
            s.hits, s.median_to_1e3, s.seconds
        ),
    )
}

fn camelback() -> Outcome {
    let s = bench_stats(Benchmark::Camelback, 100, 1e-4);
    verdict(
        s.hits >= 18 && s.seconds < 5.0,
        format!(
            "{}/20 seeds within 1e-4 at 100 evals (need 18); {:.2}s (need < 5)",
            s.hits, s.seconds
        ),
    )
}

fn hartmann6() -> Outcome {
    let s = bench_stats(Benchmark::Hartmann6, 250, 1e-3);
    verdict(
        s.hits >= 16 && s.seconds < 10.0,
        format!(
            "{}/20 seeds within 1e-3 at 250 evals (need 16); {:.2}s (need < 10)",
            s.hits, s.seconds
        ),
    )
}

// ---------------------------------------------------------------- 4-5

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/datasets.toml")
}

fn run_auc(name: &str, methods: Vec<Method>, repeats: usize) -> Result<Vec<AucSummary>, String> {
    let cfg = HarnessConfig::load(&config_path()).map_err(|e| format!("{e:#}"))?;
    let entry = cfg
        .find(name)
        .ok_or_else(|| format!("dataset `{name}` missing from registry"))?;
    let opts = AucOptions {
        methods,
        mode: Mode::Deterministic,
        repeats,
        seed: 0,
        budget: None,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        timing: false,
    };
    run_dataset(entry, &opts).map_err(|e| format!("{e:#}"))
}

fn auc_tables() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, reference) in [
        ("fourclass", 0.835),
        ("svmguide1", 0.988),
        ("diabetes", 0.829),
    ] {
        match run_auc(name, vec![Method::DfoTr], 1) {
            Ok(s) => {
                let (mean, _) = s[0].test_mean_std();
                let good = (mean - reference).abs() <= 0.03;
                ok &= good;
                parts.push(format!(
                    "{name} {mean:.4} vs {reference} {}",
                    if good { "ok" } else { "off" }
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    verdict(
        ok,
        format!("{} (tolerance 0.03, under 120s)", parts.join("; ")),
    )
}

fn random_search_dominance() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["diabetes", "svmguide1"] {
        match run_auc(name, vec![Method::DfoTr, Method::RandomSearch], 20) {
            Ok(s) => {
                let mean = |m: Method| {
                    s.iter()
                        .find(|x| x.method == m)
                        .map(|x| x.test_mean_std().0)
                        .expect("method ran")
                };
                let (dfo, rs) = (mean(Method::DfoTr), mean(Method::RandomSearch));
                ok &= dfo - rs >= 0.01;
                parts.push(format!(
                    "{name} dfo-tr {dfo:.4} vs random {rs:.4} (margin {:.4})",
                    dfo - rs
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(
        ok,
        format!("{} (need margin >= 0.01 over 20 seeds)", parts.join("; ")),
    )
}

// ---------------------------------------------------------------- 6

fn stochastic_variant() -> Outcome {
    let d = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = GaussianPairSpec::independent(
        DVector::from_fn(d, |_, _| rng.random_range(0.0..0.5)),
        DVector::zeros(d),
        DMatrix::identity(d, d),
        DMatrix::identity(d, d) * 1.5,
    )
    .expect("valid spec");
    let data = Arc::new(spec.sample_dataset(20_000, 20_000, &mut rng));
    let n_total = data.len();
    let budget = 100;
    let seeds = 0..20u64;
    let (mut det_auc, mut sto_auc, mut det_samples, mut sto_samples) = (0.0, 0.0, 0usize, 0usize);
    for seed in seeds.clone() {
        let cfg = SolverConfig::defaults(d)
            .with_budget(budget)
            .with_seed(seed);
        let w0 = random_start(d, seed);
        let mut obj = Negated(AucObjective::new(Arc::clone(&data)).expect("non-empty"));
        let det = minimize(&mut obj, &w0, &cfg).expect("deterministic run");
        let sto = minimize_stochastic(&mut obj, &w0, &cfg).expect("stochastic run");
        det_auc += auc(det.best.point.as_slice(), &data).expect("auc");
        sto_auc += auc(sto.final_center.point.as_slice(), &data).expect("auc");
        det_samples += det.evals_used() * n_total;
        sto_samples += sto.total_samples();
    }
    let k = seeds.count() as f64;
    let (det_auc, sto_auc) = (det_auc / k, sto_auc / k);
    let ratio = sto_samples as f64 / det_samples as f64;
    verdict(
        (det_auc - sto_auc).abs() <= 0.02 && ratio <= 0.6,
        format!(
            "full-data AUC deterministic {det_auc:.4} vs stochastic {sto_auc:.4} (need within 0.02); sample ratio {ratio:.3} (need <= 0.6)"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn property_suites() -> Outcome {
    let checks: [Check; 6] = [
        ("auc", prop_auc),
        ("trust-region", prop_trust_region),
        ("model", prop_model),
        ("hinge", prop_hinge),
        ("gaussian", prop_gaussian),
        ("schedule", prop_schedule),
    ];
    let mut failures = Vec::new();
    let mut passes = Vec::new();
    for (name, f) in checks {
        match f() {
            Ok(d) => passes.push(format!("{name}: {d}")),
            Err(d) => failures.push(format!("{name}: {d}")),
        }
    }
    if failures.is_empty() {
        Ok(passes.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

fn prop_auc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for i in 0..500 {
        let (p, n) = random_scores(&mut rng);
        let fast = auc_from_scores(&p, &n).map_err(|e| e.to_string())?;
        if fast != brute_force_auc(&p, &n) {
            return Err(format!("instance {i} differs"));
        }
    }
    Ok("500/500 exact".into())
}

fn prop_trust_region() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut worst = 0.0f64;
    let (mut hard, mut gridded) = (0, 0);
    for i in 0..1000 {
        let d = 1 + i % 5;
        let inst = if i % 5 == 4 || (i % 7 == 0 && d >= 2) {
            hard += 1;
            random_hard_case(d.max(2), &mut rng)
        } else {
            random_tr_instance(d, &mut rng)
        };
        let sol = solve_trust_region(&inst.g, &inst.h, inst.delta).map_err(|e| e.to_string())?;
        let r = kkt_residual(&inst, &sol);
        worst = worst.max(r);
        if r > 1e-8 {
            return Err(format!("instance {i}: KKT residual {r:e}"));
        }
        if inst.g.len() <= 3 {
            gridded += 1;
            let got = inst.model(&sol.step);
            let grid = grid_minimum(&inst);
            let scale = 1.0 + inst.g.norm() * inst.delta + inst.h.norm() * inst.delta * inst.delta;
            if got > grid + 1e-10 * scale {
                return Err(format!(
                    "instance {i}: grid point {grid} beats solution {got}"
                ));
            }
        }
    }
    Ok(format!(
        "1000 instances ({hard} hard, {gridded} grid-checked), worst KKT {worst:.1e}"
    ))
}

fn prop_model() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let (mut worst_fit, mut worst_shift) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let q = Quadratic::random(d, &mut rng);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pts = points_around(&center, quadratic_terms(d) - 1, 1.0, &mut rng);
        let set = evaluated(&pts, |x| q.value(x));
        let fc = q.value(&center);
        let m = build_model(&set, &Point::new(center.clone()).unwrap(), fc)
            .map_err(|e| e.to_string())?;
        for (p, e) in pts.iter().zip(&set) {
            let err = (m.evaluate(p).unwrap() - e.value).abs() / (1.0 + e.value.abs());
            worst_fit = worst_fit.max(err);
        }
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect())
            .collect();
        let moved_center: Vec<f64> = center.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let moved_set: Vec<EvaluatedPoint> = moved
            .iter()
            .zip(&set)
            .map(|(p, e)| EvaluatedPoint::new(Point::new(p.clone()).unwrap(), e.value).unwrap())
            .collect();
        let m2 = build_model(&moved_set, &Point::new(moved_center).unwrap(), fc)
            .map_err(|e| e.to_string())?;
        let scale = 1.0 + m.gradient.amax().max(m.hessian.amax());
        let diff = (&m.gradient - &m2.gradient)
            .amax()
            .max((&m.hessian - &m2.hessian).amax());
        worst_shift = worst_shift.max(diff / scale);
    }
    verdict(
        worst_fit <= 1e-8 && worst_shift <= 1e-10,
        format!("worst interpolation error {worst_fit:.1e} (<= 1e-8), worst shift change {worst_shift:.1e} (<= 1e-10)"),
    )
}

fn prop_hinge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 200 {
        let d = rng.random_range(1..=6);
        let data = random_dense_dataset(
            d,
            rng.random_range(2..25),
            rng.random_range(2..25),
            &mut rng,
        );
        let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let kink = distance_to_kink(&w, &data);
        if kink < 1e-6 {
            continue;
        }
        let x_max = max_abs_feature(&data);
        let h = (0.25 * kink / x_max).min(1e-4);
        let (_, g) = pairwise_hinge(&w, &data).map_err(|e| e.to_string())?;
        let g_scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for k in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let fd = (pairwise_hinge_loss(&wp, &data).unwrap()
                - pairwise_hinge_loss(&wm, &data).unwrap())
                / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / g_scale);
        }
        done += 1;
    }
    verdict(
        worst <= 1e-5,
        format!("200 instances, worst relative error {worst:.1e} (<= 1e-5)"),
    )
}

fn max_abs_feature(data: &LabeledDataset) -> f64 {
    data.positives
        .iter()
        .chain(&data.negatives)
        .flat_map(|x| x.entries().iter().map(|(_, v)| v.abs()))
        .fold(1e-12, f64::max)
}

fn prop_gaussian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let mut worst_mc = 0.0f64;
    for i in 0..10 {
        let d = 2 + i % 4;
        let spec = random_gaussian_spec(d, &mut rng);
        let w = random_vector(d, &mut rng);
        let exact = expected_auc_gaussian(w.as_slice(), &spec).map_err(|e| e.to_string())?;
        let mc = monte_carlo_auc(w.as_slice(), &spec, 10_000_000, &mut rng);
        worst_mc = worst_mc.max((mc - exact).abs());
    }
    let spec = without_cross_covariance(&random_gaussian_spec(5, &mut rng));
    let data = spec.sample_dataset(20_000, 20_000, &mut rng);
    let mut worst_emp = 0.0f64;
    for _ in 0..10 {
        let w = random_vector(5, &mut rng);
        let exact = expected_auc_gaussian(w.as_slice(), &spec).map_err(|e| e.to_string())?;
        worst_emp = worst_emp.max((auc(w.as_slice(), &data).unwrap() - exact).abs());
    }
    verdict(
        worst_mc <= 3e-4 && worst_emp <= 0.01,
        format!(
            "Monte-Carlo gap {worst_mc:.1e} (<= 3e-4), empirical gap {worst_emp:.1e} (<= 0.01)"
        ),
    )
}

fn prop_schedule() -> Outcome {
    // (k, N, N+, N-, expected)
    let cases: [(usize, usize, usize, usize, usize); 8] = [
        (0, 1000, 1000, 1000, 500),
        (10, 1000, 1000, 1000, 750),
        (0, 43_500, 43_500, 1, 4350),
        (2, 100, 100, 9900, 10),
        (0, 9900, 100, 9900, 990),
        (100, 9900, 100, 9900, 5890),
        (1_000_000, 1000, 1000, 1000, 1000),
        (usize::MAX, 7, 7, 3, 7),
    ];
    for (k, n, p, q, want) in cases {
        let got = sample_schedule(k, n, p, q).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!(
                "schedule({k}, {n}, {p}, {q}) = {got}, expected {want}"
            ));
        }
    }
    if sample_schedule(0, 0, 1, 1).is_ok() {
        return Err("empty class accepted".into());
    }
    Ok(format!("{} formula cases exact", cases.len()))
}

// ---------------------------------------------------------------- 8

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_dfotr");
    let config = config_path();
    let runs: Vec<Vec<String>> = vec![
        vec!["bench", "hartmann6", "--seeds", "3", "--with-random"],
        vec!["random-search", "camelback", "--seeds", "3"],
        vec![
            "auc",
            "--dataset",
            "diabetes",
            "--mode",
            "stochastic",
            "--method",
            "dfo-tr",
            "--method",
            "hinge-gd",
            "--jobs",
            "4",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut checked = Vec::new();
    for args in runs {
        let mut full = args.clone();
        if args[0] == "auc" {
            if HarnessConfig::load(&config)
                .ok()
                .and_then(|c| c.find("diabetes").map(|d| d.path.exists()))
                != Some(true)
            {
                continue;
            }
            full.extend(["--config".to_string(), config.display().to_string()]);
        }
        let run = || {
            Command::new(exe)
                .args(&full)
                .output()
                .map_err(|e| e.to_string())
                .and_then(|o| {
                    if o.status.success() {
                        Ok(o.stdout)
                    } else {
                        Err(String::from_utf8_lossy(&o.stderr).into_owned())
                    }
                })
        };
        let (a, b) = (run()?, run()?);
        if a != b {
            return Err(format!(
                "`dfotr {}` output differs between runs",
                args.join(" ")
            ));
        }
        checked.push(args[..2].join(" "));
    }
    Ok(format!(
        "identical CSV on repeat for: {}",
        checked.join(", ")
    ))
}
