//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qb_core::barycenter::{estimate_objective, sgd_gaussian_mixture, sgd_quotient, SgdConfig};
use qb_core::baselines::{boundary_index, pivot_relabel};
use qb_core::bures::{
    bures_distance_sq, bures_exp, bures_grad_cholesky, bures_log, lyapunov_solve, transport_map,
    GaussianComponent, GaussianManifold, SpdMatrix,
};
use qb_core::cli::format::{parse_record, read_records};
use qb_core::group::{align_symmetric, quotient_distance, sort_align_1d, GroupSpec};
use qb_core::manifold::{Euclidean, Manifold, Point, Product, ProductPoint};
use qb_core::metrics::{covariance_error, matched_mean_errors};
use qb_core::samplers::{
    default_template, ellipse_scenario, gmm5_scenario, line_scenario, mra_generate, mra_gibbs,
    mra_reconstruct, relative_error, sigma_for_snr, EmpiricalStream,
};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: f64) -> Result<(), String> {
    let t = start.elapsed().as_secs_f64();
    check(t < limit, || format!("took {t:.2} s, limit {limit} s"))
}

fn random_tuple(rng: &mut ChaCha8Rng, k: usize, d: usize) -> ProductPoint<Point> {
    ProductPoint::from_rows(
        (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SpdMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * 0.5).unwrap()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn lap_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..500 {
        let k = 2 + case % 5;
        let c = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.0..10.0));
        let brute = (0..k)
            .permutations(k)
            .map(|p| (0..k).map(|i| c[(i, p[i])]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let solved = qb_core::group::solve_lap(&c).map_err(|e| e.to_string())?;
        check(solved.cost == brute, || {
            format!("case {case}: solver {} vs brute force {brute}", solved.cost)
        })?;
    }
    within_time(start, 5.0)
}

fn isometry_and_invariance() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let e = Euclidean::new(2);
    for kind in ["sym", "cyc", "none"] {
        for case in 0..1000 {
            let k = 2 + case % 5;
            let g_spec = GroupSpec::new(kind.parse().unwrap(), k).unwrap();
            let product = Product::new(e, k);
            let p = random_tuple(&mut rng, k, 2);
            let q = random_tuple(&mut rng, k, 2);
            let g = g_spec.random_element(&mut rng);
            let h = g_spec.random_element(&mut rng);
            let (gp, gq, hq) = (g.apply(&p).unwrap(), g.apply(&q).unwrap(), h.apply(&q).unwrap());
            let d0 = product.dist(&p, &q).unwrap();
            let d1 = product.dist(&gp, &gq).unwrap();
            check((d0 - d1).abs() < 1e-12, || format!("{kind} case {case}: isometry {d0} vs {d1}"))?;
            let q0 = quotient_distance(&e, &p, &q, &g_spec).unwrap();
            let q1 = quotient_distance(&e, &gp, &hq, &g_spec).unwrap();
            check((q0 - q1).abs() < 1e-12, || format!("{kind} case {case}: quotient {q0} vs {q1}"))?;
        }
    }
    within_time(start, 5.0)
}

fn ordering_recovery() -> Result<(), String> {
    let start = Instant::now();
    let scenario = line_scenario(5, 103).unwrap();
    let draws: Vec<_> = scenario.sampler().unwrap().take(5000).collect();
    let mut cfg = SgdConfig::new(4999);
    cfg.eval_samples = 0;
    let group = GroupSpec::symmetric(5).unwrap();
    let report = sgd_quotient(draws.clone(), &Euclidean::new(1), &group, &cfg).map_err(|e| e.to_string())?;
    let mut estimate = report.estimate.flatten();
    estimate.sort_by(f64::total_cmp);
    // The first draw only initializes; every later draw enters the running mean.
    let mut mean = vec![0.0; 5];
    for d in &draws[1..] {
        let mut s = d.flatten();
        s.sort_by(f64::total_cmp);
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for (i, m) in mean.iter().enumerate() {
        let m = m / 4999.0;
        check((estimate[i] - m).abs() < 1e-10, || {
            format!("order statistic {i}: estimate {} vs sorted mean {m}", estimate[i])
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let line = Euclidean::new(1);
    for case in 0..1000 {
        let k = 2 + case % 6;
        let p = random_tuple(&mut rng, k, 1);
        let q = random_tuple(&mut rng, k, 1);
        let sorted = sort_align_1d(&p, &q).unwrap().cost;
        let lap = align_symmetric(&line, &p, &q).unwrap().cost;
        check(sorted == lap, || format!("case {case}: sort {sorted} vs assignment {lap}"))?;
    }
    within_time(start, 10.0)
}

fn bures_suite() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for case in 0..100 {
        let d = 1 + case % 5;
        let s1 = random_spd(&mut rng, d);
        let s2 = random_spd(&mut rng, d);
        let c = GaussianComponent::new(DVector::zeros(d), s1.clone()).unwrap();
        let grad = bures_grad_cholesky(&c, &s2).unwrap();
        let l = c.factor().clone();
        let f = |l: &DMatrix<f64>| {
            0.5 * bures_distance_sq(&SpdMatrix::new(l * l.transpose()).unwrap(), &s2).unwrap()
        };
        let h = 1e-5;
        let fd = DMatrix::from_fn(d, d, |i, j| {
            let mut up = l.clone();
            let mut down = l.clone();
            up[(i, j)] += h;
            down[(i, j)] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        });
        let err = (&grad - &fd).norm() / fd.norm().max(1e-12);
        check(err < 1e-5, || format!("case {case}: gradient relative error {err:e}"))?;

        let t = transport_map(&s1, &s2).unwrap();
        let pushed = &t * s1.matrix() * &t;
        check(rel(&pushed, s2.matrix()) < 1e-8, || format!("case {case}: pushforward"))?;

        let xi = {
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            (&a + a.transpose()) * 0.5
        };
        let sol = lyapunov_solve(&s1, &xi).unwrap();
        let residual = &sol * s1.matrix() + s1.matrix() * &sol - &xi;
        check(residual.norm() / xi.norm() < 1e-10, || format!("case {case}: Lyapunov residual"))?;

        let back = bures_exp(&s1, &bures_log(&s1, &s2).unwrap()).unwrap();
        check(rel(back.matrix(), s2.matrix()) < 1e-8, || format!("case {case}: exp(log) roundtrip"))?;

        // Commuting pair: shared eigenvectors, so the distance is sum (sqrt a - sqrt b)^2.
        let q = s1.eigen().eigenvectors;
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..4.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..4.0)).collect();
        let build = |v: &[f64]| {
            let m = &q * DMatrix::from_diagonal(&DVector::from_row_slice(v)) * q.transpose();
            SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
        };
        let closed: f64 = a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
        let got = bures_distance_sq(&build(&a), &build(&b)).unwrap();
        check((got - closed).abs() < 1e-9, || format!("case {case}: commuting {got} vs {closed}"))?;
    }
    within_time(start, 10.0)
}

fn non_uniqueness() -> Result<(), String> {
    let start = Instant::now();
    let e = Euclidean::new(2);
    let g = GroupSpec::symmetric(2).unwrap();
    let pair = |a: [f64; 2], b: [f64; 2]| ProductPoint::from_rows(vec![a.to_vec(), b.to_vec()]).unwrap();
    let samples = vec![pair([1.0, 0.0], [-1.0, 0.0]), pair([0.0, 1.0], [0.0, -1.0])];
    let red = pair([0.5, 0.5], [-0.5, -0.5]);
    let blue = pair([0.5, -0.5], [-0.5, 0.5]);
    let obj = |c: &ProductPoint<Point>| estimate_objective(&e, c, &samples, &g).unwrap();
    let (r, b) = (obj(&red), obj(&blue));
    check((r - b).abs() < 1e-12, || format!("diamonds differ: {r} vs {b}"))?;
    for candidate in [&red, &blue] {
        let base = candidate.flatten();
        for axis in 0..2 {
            // sign 1 spreads the pair apart along the axis, sign -1 translates it.
            for sign in [-1.0, 1.0] {
                let mut spread = base.clone();
                spread[axis] += 0.1;
                spread[2 + axis] -= sign * 0.1;
                let perturbed = pair([spread[0], spread[1]], [spread[2], spread[3]]);
                let v = obj(&perturbed);
                check(v > r, || format!("perturbed candidate {spread:?} has objective {v} <= {r}"))?;
            }
        }
    }
    within_time(start, 1.0)
}

fn trailing_below_first<P>(report: &qb_core::barycenter::BarycenterReport<P>) -> Result<(), String> {
    let first = report.objective_trace[0].objective;
    let trailing = report.trailing_objective(0.1).unwrap();
    check(trailing <= first, || format!("trailing objective {trailing} above initial {first}"))
}

fn gmm_recovery() -> Result<(), String> {
    let start = Instant::now();
    let scenario = gmm5_scenario(106);
    let draws: Vec<_> = scenario.sampler().unwrap().take(2000).collect();
    let cfg = SgdConfig::new(5000);
    let stream = EmpiricalStream::new(draws, 106).unwrap();
    let report = sgd_gaussian_mixture(stream, &scenario.group, &cfg).map_err(|e| e.to_string())?;
    let errors = matched_mean_errors(&report.estimate, &scenario.true_components).unwrap();
    for (i, e) in errors.iter().enumerate() {
        check(*e < 0.05, || format!("component {i}: mean error {e}"))?;
    }
    trailing_below_first(&report)?;
    within_time(start, 60.0)
}

fn pivot_failure() -> Result<(), String> {
    let start = Instant::now();
    let scenario = ellipse_scenario();
    let draws: Vec<_> = scenario.sampler().unwrap().take(2000).collect();
    let cfg = SgdConfig::new(4000);
    let stream = EmpiricalStream::new(draws.clone(), scenario.seed).unwrap();
    let report = sgd_gaussian_mixture(stream, &scenario.group, &cfg).map_err(|e| e.to_string())?;
    trailing_below_first(&report)?;
    let sgd_err = covariance_error(&report.estimate, &scenario.true_components).unwrap();

    let pivot = boundary_index(&draws).unwrap();
    let (relabeled, mean) = pivot_relabel(&draws, pivot, &scenario.group).unwrap();
    let pivot_err = covariance_error(&mean, &scenario.true_components).unwrap();
    check(sgd_err < pivot_err, || {
        format!("SGD covariance error {sgd_err} not below pivot error {pivot_err}")
    })?;

    let space = GaussianManifold::new(2);
    for (n, (orig, r)) in draws.iter().zip(&relabeled).enumerate() {
        let d = quotient_distance(&space, orig, r, &scenario.group).unwrap();
        check(d == 0.0, || format!("draw {n} left its orbit ({d})"))?;
    }
    let (again, _) = pivot_relabel(&relabeled, pivot, &scenario.group).unwrap();
    check(again == relabeled, || "relabeling is not idempotent".into())?;
    println!("    covariance error: sgd {sgd_err:.4}, boundary pivot {pivot_err:.4}");
    within_time(start, 60.0)
}

fn adjacent_inversions(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] > w[0]).count()
}

fn mra_pipeline() -> Result<(), String> {
    let start = Instant::now();
    let x = default_template();
    let group = GroupSpec::cyclic(x.len()).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0];
    let run = |sigma: f64, seed: u64| -> f64 {
        let scenario = qb_core::samplers::MraScenario {
            template: x.clone(),
            noise_std: sigma,
            num_observations: 200,
            seed,
        };
        let draws: Vec<_> = mra_gibbs(mra_generate(&scenario).unwrap(), sigma, 2000, seed + 1)
            .unwrap()
            .collect();
        let mut cfg = SgdConfig::new(2000);
        cfg.eval_samples = 0;
        cfg.seed = seed + 2;
        relative_error(&mra_reconstruct(&draws, &cfg).unwrap(), &x, &group).unwrap()
    };
    let mut table = Vec::new();
    for seed in [201u64, 202, 203] {
        let errors: Vec<f64> = grid
            .iter()
            .map(|&snr| run(sigma_for_snr(&x, snr).unwrap(), seed))
            .collect();
        check(adjacent_inversions(&errors) <= 1, || format!("seed {seed}: errors {errors:?}"))?;
        table.push(errors);
    }
    let medians: Vec<f64> = (0..grid.len())
        .map(|i| {
            let mut col: Vec<f64> = table.iter().map(|row| row[i]).collect();
            col.sort_by(f64::total_cmp);
            col[1]
        })
        .collect();
    check(adjacent_inversions(&medians) == 0, || format!("median errors {medians:?}"))?;
    let noiseless = run(1e-6, 204);
    check(noiseless < 1e-3, || format!("noiseless relative error {noiseless}"))?;
    println!("    median relative error over SNR {grid:?}: {medians:.4?}; sigma=1e-6: {noiseless:.2e}");
    within_time(start, 120.0)
}

fn qb(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qb"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("qb {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism_and_roundtrip() -> Result<(), String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let runs: [&[&str]; 5] = [
        &["gen", "--scenario", "gmm5", "--n", "300", "--seed", "7"],
        &["barycenter", "--input", "s1.csv", "--truth", "gmm5", "--iters", "600", "--eval-samples", "32"],
        &["pivot", "--input", "s1.csv", "--truth", "gmm5", "--pivot", "map"],
        &["compare", "--grid", "100,200", "--iters", "400"],
        &["mra", "--observations", "60", "--sweeps", "200", "--burn-in", "20"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let ext = if i == 0 { "csv" } else { "jsonl" };
        for copy in 1..=2 {
            let out = format!("{}{copy}.{ext}", if i == 0 { "s" } else { args[0] });
            let mut full = args.to_vec();
            full.extend(["--out", out.as_str()]);
            qb(&full, d)?;
        }
        if i == 0 {
            let a = std::fs::read(d.join("s1.csv")).unwrap();
            let b = std::fs::read(d.join("s2.csv")).unwrap();
            check(a == b, || "gen output differs between runs".into())?;
            continue;
        }
        let name = args[0];
        let first = read_records(&d.join(format!("{name}1.jsonl"))).map_err(|e| e.to_string())?;
        let second = read_records(&d.join(format!("{name}2.jsonl"))).map_err(|e| e.to_string())?;
        check(first.len() == 1 && second.len() == 1, || format!("{name}: expected one record"))?;
        let (a, b) = (&first[0], &second[0]);
        check(a.metrics == b.metrics && a.traces == b.traces && a.estimate == b.estimate, || {
            format!("{name}: records differ between runs")
        })?;
        let text = std::fs::read_to_string(d.join(format!("{name}1.jsonl"))).unwrap();
        let line = text.lines().next().unwrap();
        let parsed = parse_record(line).map_err(|e| e.to_string())?;
        check(parsed == *a && parsed.to_line() == line, || format!("{name}: record does not round-trip"))?;
    }
    within_time(start, 30.0)
}

fn main() {
    let criteria: [(&str, fn() -> Result<(), String>); 9] = [
        ("assignment solver matches brute force", lap_oracle),
        ("isometry and quotient invariance", isometry_and_invariance),
        ("1D ordering recovery", ordering_recovery),
        ("Bures numerical suite", bures_suite),
        ("non-uniqueness counterexample", non_uniqueness),
        ("GMM recovery, five Gaussians in R^5", gmm_recovery),
        ("SGD beats a boundary pivot on the ellipse scenario", pivot_failure),
        ("MRA error falls with SNR", mra_pipeline),
        ("CLI determinism and round-trip", determinism_and_roundtrip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = Duration::as_secs_f64(&start.elapsed());
        match outcome {
            Ok(()) => println!("criterion {}: PASS  {name} ({secs:.2} s)", n + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2} s): {msg}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
