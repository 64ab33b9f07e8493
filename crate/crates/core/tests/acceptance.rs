//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use htcompress::bounds::*;
use htcompress::fcnn::*;
use htcompress::matrix::{spectral_norm, stable_rank, DenseMatrix};
use htcompress::powerlaw::{fit_alpha_mle, sample_pareto, ParetoParams};
use htcompress::rng::{derive_seed, rng_from_seed};
use htcompress::verify::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn toy() -> &'static ToyRun {
    static RUN: OnceLock<ToyRun> = OnceLock::new();
    RUN.get_or_init(|| ToyProblem::default().run().expect("toy training"))
}

fn chernoff_dominance() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    let mut worst_gap = f64::INFINITY;
    for n in 1..=30u64 {
        for (num, p) in [(1, 0.1), (3, 0.3), (5, 0.5), (9, 0.9)] {
            for k in 0..=n {
                if k as f64 <= n as f64 * p {
                    continue;
                }
                let bound = sparsity_tail_bound(SparsityBoundInput { n, p, k }).unwrap().value;
                let exact = binomial_tail_exact(n, p, k).unwrap();
                let oracle = common::rational_binomial_tail(n, num, 10, k);
                if (exact - oracle).abs() > 1e-12 {
                    return Err(format!("exact tail {exact} vs rational {oracle} at n={n} p={p} k={k}"));
                }
                worst_gap = worst_gap.min(bound - exact);
                if bound < exact - 1e-12 {
                    return Err(format!("bound {bound} below exact {exact} at n={n} p={p} k={k}"));
                }
                checked += 1;
            }
        }
    }
    let b = sparsity_tail_bound(SparsityBoundInput { n: 4, p: 0.5, k: 3 }).unwrap().value;
    let e = binomial_tail_exact(4, 0.5, 3).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        (b - 16.0 / 27.0).abs() <= 1e-12 && (e - 5.0 / 16.0).abs() <= 1e-12 && elapsed < 1.0,
        format!("{checked} cases, min slack {worst_gap:.3e}, (4, 0.5, 3) -> ({b:.12}, {e:.12}), {elapsed:.3}s"),
    )
}

fn concentration() -> Check {
    let start = Instant::now();
    let r = verify_concentration(&ConcentrationSetup {
        alpha: 3.0,
        w_min: 1.0,
        rows: 200,
        cols: 200,
        epsilon: 0.5,
        eta: 0.1,
        tau_mode: TauMode::Balanced,
        variance: VarianceMode::Conservative,
        trials: 10_000,
        seed: 2024,
    })
    .map_err(|e| e.to_string())?;
    let limit = 0.1 + 3.0 * (0.09f64 / 1e4).sqrt();
    ensure(
        r.empirical_rate <= limit,
        format!(
            "{} failures in {} trials, rate {:.4} <= {limit:.4}, {:.1}s",
            r.failures,
            r.trials,
            r.empirical_rate,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn spiked_expectation() -> Check {
    // A unit vector spread over 64 coordinates.
    let x = vec![0.125; 64];
    let r = verify_spiked_expectation(3.0, 1.0, 2.0, &x, 100_000, 7).map_err(|e| e.to_string())?;
    ensure(
        (r.closed_form - 1.5).abs() <= 1e-12 && r.relative_error <= 0.05,
        format!(
            "closed form {:.6}, Monte Carlo {:.6}, relative error {:.4}",
            r.closed_form, r.monte_carlo, r.relative_error
        ),
    )
}

fn spectral() -> Check {
    let mut worst: f64 = 0.0;
    for s in 0..20 {
        let mut rng = rng_from_seed(derive_seed(99, s));
        let values = (0..2500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = DenseMatrix::new(50, 50, values).unwrap();
        let oracle = common::jacobi_singular_values(&m)[0];
        let est = spectral_norm(&m);
        worst = worst.max((est.value - oracle).abs() / oracle);
    }
    let sr = stable_rank(&DenseMatrix::identity(5)).unwrap();
    ensure(
        worst <= 1e-6 && sr == 5.0,
        format!("max relative error {worst:.3e} over 20 matrices, stable_rank(I5) = {sr}"),
    )
}

fn tail_fit() -> Check {
    let params = ParetoParams::new(2.5, 1.0).unwrap();
    let hits = (0..100u64)
        .filter(|&s| {
            let data = sample_pareto(params, 100_000, derive_seed(5, s), false).unwrap();
            let a = fit_alpha_mle(&data, 1.0).unwrap().alpha_hat;
            (2.45..=2.55).contains(&a)
        })
        .count();
    ensure(hits >= 95, format!("{hits}/100 seeds in [2.45, 2.55]"))
}

fn stddev_accuracy() -> Check {
    let run = toy();
    let net = &run.trained.network;
    let row = accuracy_experiment("toy-relu", "blobs-held-out", net, &run.test, &CompressionConfig::stddev_final(net), 10, 11)
        .map_err(|e| e.to_string())?;
    let gap = (row.original_accuracy - row.compressed_mean).abs() * 100.0;
    ensure(
        row.original_accuracy >= 0.95 && gap <= 2.0,
        format!(
            "held-out accuracy {:.2}%, compressed {:.2}% ± {:.2}, gap {gap:.2} points",
            100.0 * row.original_accuracy,
            100.0 * row.compressed_mean,
            100.0 * row.compressed_std
        ),
    )
}

fn non_vacuity() -> Check {
    let run = toy();
    let net = &run.trained.network;
    let mut opts = ReportOptions::new(
        CompressionConfig::theory_uniform(net, 1.0, 0.1),
        vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0],
    );
    opts.quantization_levels = 1 << 8;
    let r = end_to_end_bound_report(net, &run.train, &opts).map_err(|e| e.to_string())?;
    let complexity = r.margins[0].bound.complexity;
    let eligible: Vec<_> = r.rows_with_loss_at_most(0.2).collect();
    let all_below = eligible.iter().all(|row| row.bound.total < 1.0);
    let worst = eligible.iter().map(|row| row.bound.total).fold(0.0, f64::max);
    ensure(
        r.q <= 200 && complexity <= 0.75 && !eligible.is_empty() && all_below,
        format!(
            "sum k = {} {:?}, complexity {complexity:.4}, largest total {worst:.4} over {} margins with loss <= 0.2",
            r.q,
            r.compression.k_per_layer,
            eligible.len()
        ),
    )
}

fn contour() -> Check {
    let alphas: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    let brackets: Vec<u32> = (1..=5).collect();
    let grid = contour_grid(&alphas, &brackets, 1.3, 5, 64).map_err(|e| e.to_string())?;
    let mut valid = 0;
    for cell in &grid.cells {
        if !cell.valid {
            continue;
        }
        valid += 1;
        let v = cell.bound.unwrap();
        let scalar = resilient_path_bound(cell.alpha, 1.3, 5, 64, cell.bracket).map_err(|e| e.to_string())?;
        let exact = binomial_tail_exact(64, scalar.p, scalar.kappa.ceil() as u64).unwrap();
        if !(0.0..=1.0).contains(&v) || v != scalar.bound.value || v < exact - 1e-12 {
            return Err(format!("cell alpha={} i={}: {v} vs scalar {:?}, exact {exact}", cell.alpha, cell.bracket, scalar));
        }
    }
    ensure(valid > 0, format!("{valid} valid of {} cells checked", grid.cells.len()))
}

fn dudley() -> Check {
    let mut rng = rng_from_seed(31);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let q = rng.random_range(1.0..500.0f64).round();
        let kappa = 10f64.powf(rng.random_range(0.0..6.0));
        let upper = rng.random_range(0.05..(2.0f64 * q * kappa).min(5.0));
        let d = dudley_integral(q, kappa, upper).map_err(|e| e.to_string())?;
        let oracle = common::trapezoid_dudley(q, kappa, upper, 1_000_000);
        worst = worst.max((d.value - oracle).abs() / oracle);
    }
    ensure(worst <= 1e-6, format!("max relative difference {worst:.3e} over 10 configurations"))
}

fn error_chain() -> Check {
    let run = toy();
    let net = &run.trained.network;
    let (epsilon, delta) = (0.5, 0.1);
    let cushions = measure_cushions(net, &run.train, &CushionOptions::default()).map_err(|e| e.to_string())?;
    let widest = *net.widths().iter().max().unwrap();
    let budget = layer_error_budget(&cushions, widest, run.train.len(), epsilon, delta).map_err(|e| e.to_string())?;
    let config = CompressionConfig::Theory {
        variance: VarianceMode::Conservative,
        targets: budget
            .iter()
            .enumerate()
            .map(|(i, &(eps_i, eta_i))| LayerTarget {
                layer: i + 1,
                epsilon: eps_i,
                eta: eta_i,
                tau: TauRule::BudgetFraction(0.5),
                t: None,
            })
            .collect(),
    };
    let gammas = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];
    let original: Vec<f64> = gammas.iter().map(|&g| net.empirical_margin_loss(&run.train, g).unwrap()).collect();
    let (mut within, mut transfers, mut violations) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let c = compress_network(net, &config, derive_seed(77, s)).map_err(|e| e.to_string())?;
        let (rel, abs) = common::output_errors(net, &c.compressed, &run.train);
        worst = worst.max(rel);
        if rel <= epsilon {
            within += 1;
        }
        let max_abs = abs.iter().cloned().fold(0.0, f64::max);
        let l0 = c.compressed.empirical_margin_loss(&run.train, 0.0).unwrap();
        for (&g, &lg) in gammas.iter().zip(&original) {
            if max_abs <= g / 2f64.sqrt() {
                transfers += 1;
                if l0 > lg {
                    violations += 1;
                }
            }
        }
    }
    ensure(
        within >= 90 && violations == 0 && transfers > 0,
        format!(
            "{within}/100 within epsilon (worst relative error {worst:.3e}), eps_i {:?}, {transfers} margin transfers, {violations} violations",
            budget.iter().map(|b| format!("{:.2e}", b.0)).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("chernoff dominance", chernoff_dominance),
        ("concentration verification", concentration),
        ("spiked expectation", spiked_expectation),
        ("spectral norm and stable rank", spectral),
        ("tail-fit recovery", tail_fit),
        ("accuracy under stddev compression", stddev_accuracy),
        ("non-vacuous bound", non_vacuity),
        ("resilient path grid", contour),
        ("entropy integral quadrature", dudley),
        ("compression error and margin transfer", error_chain),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
