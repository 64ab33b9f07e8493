use std::fs;
use std::path::Path;

use anyhow::Context;
use htcompress::bounds::{
    binomial_tail_exact, concentration_tail, covering_kappa, dudley_integral, max_feasible_tau, resilient_path_bound,
    simple_generalization_bound, sparsity_tail_bound, spiked_component_expectation, variance_budget, contour_grid,
    ConcentrationParams, CushionSet, GenBoundInput, SparsityBoundInput, VarianceMode,
};
use htcompress::fcnn::{
    compress_network, measure_cushions, read_dataset, write_dataset, CompressionConfig, CushionOptions, LayerTarget,
    Network, SmoothnessOptions, TauRule, ToyProblem, TrainConfig,
};
use htcompress::matrix::{
    read_archive, read_csv_matrix, spectral_norm_with, split_by_threshold, write_archive, ArchiveLayer, DenseMatrix,
    SplitMode, WeightArchive, DEFAULT_POWER_TOL,
};
use htcompress::powerlaw::{fit_alpha_mle, wmin_from_stddev, ParetoParams};
use htcompress::rng::derive_seed;
use htcompress::verify::{
    accuracy_experiment, end_to_end_bound_report, fit_linear_mixture_em, planted_pareto_archive, stable_rank_alpha_sweep,
    verify_concentration, verify_sparsity, verify_spiked_expectation, write_accuracy_table, write_sweep_csv,
    ConcentrationSetup, EmOptions, ReportOptions, TauMode, WminRule,
};
use serde_json::{json, Value};

use crate::cli::*;
use crate::output;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let echo = serde_json::to_value(&cli.command)?;
    let result = match &cli.command {
        Command::Fit(a) => fit(a, &echo)?,
        Command::Split(a) => split(a, &echo)?,
        Command::Compress(a) => compress(a, &echo)?,
        Command::Bounds(b) => bounds(b)?,
        Command::Cushions(a) => cushions(a, &echo)?,
        Command::StableRank(a) => stable_rank(a)?,
        Command::Sweep(a) => sweep(a, &echo)?,
        Command::Contour(a) => match contour(a, &echo)? {
            Some(v) => v,
            None => return Ok(()),
        },
        Command::Verify(v) => verify(v)?,
        Command::TrainToy(a) => train_toy(a, &echo)?,
        Command::Experiment(a) => experiment(a, &echo)?,
        Command::Report(a) => report(a, &echo)?,
    };
    output::print(cli.format, &echo, &result)
}

fn load_matrix(source: &MatrixSource) -> anyhow::Result<(DenseMatrix, String)> {
    if let Some(csv) = &source.csv {
        return Ok((read_csv_matrix(csv)?, csv.display().to_string()));
    }
    let dir = source.archive.as_ref().context("either --archive or --csv is required")?;
    let archive = read_archive(dir)?;
    let layer = match &source.layer {
        Some(name) => archive.layer(name)?,
        None => archive.final_layer()?,
    };
    Ok((layer.matrix.clone(), format!("{}:{}", archive.name, layer.name)))
}

fn load_network(dir: &Path) -> anyhow::Result<(Network, WeightArchive)> {
    let archive = read_archive(dir)?;
    Ok((Network::from_archive(&archive)?, archive))
}

fn variance(v: VarianceArg) -> VarianceMode {
    match v {
        VarianceArg::Conservative => VarianceMode::Conservative,
        VarianceArg::Paper => VarianceMode::Paper,
    }
}

fn w_min_for(rule: WminChoice, fixed: Option<f64>, values: &[f64]) -> anyhow::Result<f64> {
    Ok(match rule {
        WminChoice::Stddev => wmin_from_stddev(values)?,
        WminChoice::Fixed => fixed.context("--w-min is required with --w-min-rule fixed")?,
    })
}

fn fit(a: &FitArgs, echo: &Value) -> anyhow::Result<Value> {
    let (m, label) = load_matrix(&a.source)?;
    let w_min = w_min_for(a.w_min_rule, a.w_min, m.values())?;
    let f = fit_alpha_mle(m.values(), w_min)?;
    let result = json!({
        "source": label,
        "entries": m.len(),
        "w_min": f.w_min_used,
        "n_tail": f.n_tail,
        "alpha_hat": f.alpha_hat,
        "density_exponent": f.density_exponent(),
        "standard_error": f.standard_error(),
    });
    if let Some(out) = &a.out {
        output::write_json(out, echo, &result)?;
    }
    Ok(result)
}

fn split(a: &SplitArgs, echo: &Value) -> anyhow::Result<Value> {
    let (m, label) = load_matrix(&a.source)?;
    let mode = match a.mode {
        SplitModeArg::SignedAbsolute => SplitMode::SignedAbsolute,
        SplitModeArg::PositiveSupport => SplitMode::PositiveSupport,
    };
    let s = split_by_threshold(&m, a.tau, mode)?;
    if let Some(path) = &a.spikes {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["row", "col", "value"])?;
        for &(r, c, v) in s.high.triplets() {
            w.write_record([r.to_string(), c.to_string(), format!("{v:?}")])?;
        }
        w.flush()?;
        output::write_csv_echo(path, echo)?;
    }
    let result = json!({
        "source": label,
        "tau": a.tau,
        "entries": m.len(),
        "k": s.high.nnz(),
        "bulk_entries": m.len() - s.high.nnz(),
        "bulk_frobenius": s.low.frobenius_norm(),
        "spike_frobenius": s.high.frobenius_norm(),
    });
    if let Some(out) = &a.out {
        output::write_json(out, echo, &result)?;
    }
    Ok(result)
}

fn compression_config(net: &Network, f: &CompressionFlags) -> anyhow::Result<CompressionConfig> {
    if let Some(plan) = &f.plan {
        let text = fs::read_to_string(plan).with_context(|| format!("cannot read {}", plan.display()))?;
        return Ok(serde_json::from_str(&text).map_err(htcompress::Error::from)?);
    }
    Ok(match f.mode {
        CompressModeArg::Stddev => CompressionConfig::StdDev {
            layers: if f.layers.is_empty() { vec![net.depth()] } else { f.layers.clone() },
        },
        CompressModeArg::Theory => {
            let layers: Vec<usize> = if f.layers.is_empty() { (1..=net.depth()).collect() } else { f.layers.clone() };
            CompressionConfig::Theory {
                variance: variance(f.variance),
                targets: layers
                    .into_iter()
                    .map(|layer| LayerTarget {
                        layer,
                        epsilon: f.epsilon,
                        eta: f.eta,
                        tau: f.tau.map_or(TauRule::Quantile(f.tau_quantile), TauRule::Fixed),
                        t: None,
                    })
                    .collect(),
            }
        }
    })
}

fn compress(a: &CompressArgs, echo: &Value) -> anyhow::Result<Value> {
    let (net, archive) = load_network(&a.archive)?;
    let config = compression_config(&net, &a.compression)?;
    let r = compress_network(&net, &config, a.seed)?;
    if let Some(out) = &a.out {
        let compressed = WeightArchive {
            name: archive.name.clone(),
            layers: archive
                .layers
                .iter()
                .zip(r.compressed.weights())
                .map(|(l, w)| ArchiveLayer {
                    name: l.name.clone(),
                    dtype: l.dtype,
                    matrix: w.clone(),
                })
                .collect(),
        };
        write_archive(out, &compressed)?;
    }
    let result = json!({
        "mode": r.mode,
        "k_per_layer": r.k_per_layer,
        "total_k": r.total_k(),
        "parameter_count": net.parameter_count(),
        "layers": r.layers,
        "plan": config,
    });
    if let Some(path) = &a.summary {
        output::write_json(path, echo, &result)?;
    }
    Ok(result)
}

fn bounds(b: &BoundsCommand) -> anyhow::Result<Value> {
    Ok(match b {
        BoundsCommand::Sparsity(a) => {
            let bound = sparsity_tail_bound(SparsityBoundInput { n: a.n, p: a.p, k: a.k })?;
            json!({ "bound": bound.value, "bound_raw": bound.raw, "exact": binomial_tail_exact(a.n, a.p, a.k)? })
        }
        BoundsCommand::Concentration(a) => {
            let mode = variance(a.variance);
            let budget = variance_budget(a.epsilon, a.eta, mode)?;
            let max_tau = max_feasible_tau(a.epsilon, a.eta, mode)?;
            let p = ConcentrationParams::solve(a.epsilon, a.eta, a.tau, mode)?;
            let mut v = json!({
                "budget": budget,
                "max_tau": max_tau,
                "t": p.t,
                "lambda": p.lambda,
                "lambda_from_error": p.lambda_from_error(),
            });
            if let (Some(s), Some(uv)) = (a.s, a.uv_frobenius) {
                v["tail_bound"] = json!(concentration_tail(s, uv, a.tau, p.t)?.value);
            }
            v
        }
        BoundsCommand::Spiked(a) => {
            let params = ParetoParams::new(a.alpha, a.w_min)?;
            json!({ "expectation": spiked_component_expectation(params, a.tau, &a.x)? })
        }
        BoundsCommand::Resilient(a) => {
            let r = resilient_path_bound(a.alpha, a.c, a.big_m, a.big_n, a.i)?;
            json!({ "p": r.p, "kappa": r.kappa, "bound": r.bound.value, "bound_raw": r.bound.raw })
        }
        BoundsCommand::Generalization(a) => {
            let g = simple_generalization_bound(GenBoundInput {
                k_per_layer: a.k.clone(),
                m: a.m,
                margin_loss: a.margin_loss,
                r: a.r,
                constant_c: a.constant,
            })?;
            json!({ "q": g.q, "complexity": g.complexity, "total": g.total })
        }
        BoundsCommand::Covering(a) => {
            let set = CushionSet {
                mu_per_layer: a.mu.clone(),
                mu_min_interlayer: vec![1.0; a.mu.len()],
                contraction_c: a.c,
                smoothness_rho: None,
                depth_d: a.mu.len(),
                f_max: a.f_max,
            };
            json!({ "kappa": covering_kappa(&set)? })
        }
        BoundsCommand::Dudley(a) => serde_json::to_value(dudley_integral(a.q, a.kappa, a.upper)?)?,
    })
}

fn cushions(a: &CushionsArgs, echo: &Value) -> anyhow::Result<Value> {
    let (net, _) = load_network(&a.archive)?;
    let data = read_dataset(&a.data)?;
    let opts = CushionOptions {
        smoothness: a.smoothness_noise.map(|relative_noise| SmoothnessOptions {
            relative_noise,
            draws: a.draws,
            delta: a.delta,
            seed: a.seed,
        }),
    };
    let report = measure_cushions(&net, &data, &opts)?;
    let kappa = covering_kappa(&report.to_cushion_set())?;
    let mut result = serde_json::to_value(&report)?;
    result["kappa"] = json!(kappa);
    if let Some(out) = &a.out {
        output::write_json(out, echo, &result)?;
    }
    Ok(result)
}

fn stable_rank(a: &StableRankArgs) -> anyhow::Result<Value> {
    let (m, label) = load_matrix(&a.source)?;
    let est = spectral_norm_with(&m, a.iterations, DEFAULT_POWER_TOL, a.seed);
    if est.degenerate {
        return Err(htcompress::Error::Degenerate("stable rank of a zero matrix is undefined".into()).into());
    }
    Ok(json!({
        "source": label,
        "spectral_norm": est.value,
        "frobenius_norm": m.frobenius_norm(),
        "stable_rank": m.frobenius_norm_squared() / est.value_squared,
        "iterations": est.iterations,
        "converged": est.converged,
    }))
}

fn sweep(a: &SweepArgs, echo: &Value) -> anyhow::Result<Value> {
    let mut archives = a.archives.iter().map(read_archive).collect::<Result<Vec<_>, _>>()?;
    let mut index = 0u64;
    for &alpha in &a.planted_alphas {
        for s in 0..a.planted_seeds {
            let name = format!("planted-alpha{alpha}-seed{s}");
            archives.push(planted_pareto_archive(&name, alpha, 1.0, a.rows, a.cols, derive_seed(a.seed, index))?);
            index += 1;
        }
    }
    let rule = match a.w_min_rule {
        WminChoice::Stddev => WminRule::StdDev,
        WminChoice::Fixed => WminRule::Fixed(a.w_min.context("--w-min is required with --w-min-rule fixed")?),
    };
    let rows = stable_rank_alpha_sweep(&archives, rule)?;
    if let Some(out) = &a.out {
        let file = fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
        write_sweep_csv(&rows, file)?;
        output::write_csv_echo(out, echo)?;
    }
    let mixture = if a.components > 0 && !rows.is_empty() {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha_fit, r.stable_rank)).collect();
        let fit = fit_linear_mixture_em(
            &points,
            &EmOptions {
                n_components: a.components,
                seed: a.seed,
                ..EmOptions::default()
            },
        )?;
        json!({
            "components": fit.components,
            "log_likelihood": fit.log_likelihood,
            "iterations": fit.iterations,
        })
    } else {
        Value::Null
    };
    Ok(json!({ "rows": rows, "mixture": mixture }))
}

fn contour(a: &ContourArgs, echo: &Value) -> anyhow::Result<Option<Value>> {
    if a.alpha_steps == 0 {
        return Err(htcompress::Error::EmptyRequest("alpha grid").into());
    }
    let alphas: Vec<f64> = if a.alpha_steps == 1 {
        vec![a.alpha_min]
    } else {
        let h = (a.alpha_max - a.alpha_min) / (a.alpha_steps - 1) as f64;
        (0..a.alpha_steps).map(|i| a.alpha_min + h * i as f64).collect()
    };
    let brackets: Vec<u32> = (1..=a.max_bracket.unwrap_or(a.big_m)).collect();
    let grid = contour_grid(&alphas, &brackets, a.c, a.big_m, a.big_n)?;
    match &a.out {
        Some(out) => {
            let file = fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
            grid.write_csv(file)?;
            output::write_csv_echo(out, echo)?;
            let valid = grid.cells.iter().filter(|c| c.valid).count();
            Ok(Some(json!({ "cells": grid.cells.len(), "valid": valid, "table": out })))
        }
        None => {
            grid.write_csv(std::io::stdout().lock())?;
            Ok(None)
        }
    }
}

fn verify(v: &VerifyCommand) -> anyhow::Result<Value> {
    Ok(match v {
        VerifyCommand::Concentration(a) => {
            let tau_mode = match a.tau_mode {
                TauModeArg::Balanced => TauMode::Balanced,
                TauModeArg::MaxFeasible => TauMode::MaxFeasible,
                TauModeArg::Fixed => TauMode::Fixed(a.tau.context("--tau is required with --tau-mode fixed")?),
            };
            serde_json::to_value(verify_concentration(&ConcentrationSetup {
                alpha: a.alpha,
                w_min: a.w_min,
                rows: a.rows,
                cols: a.cols,
                epsilon: a.epsilon,
                eta: a.eta,
                tau_mode,
                variance: variance(a.variance),
                trials: a.trials,
                seed: a.seed,
            })?)?
        }
        VerifyCommand::Sparsity(a) => {
            serde_json::to_value(verify_sparsity(a.alpha, a.w_min, a.tau, a.n, a.k, a.trials, a.seed)?)?
        }
        VerifyCommand::Spiked(a) => {
            serde_json::to_value(verify_spiked_expectation(a.alpha, a.w_min, a.tau, &a.x, a.trials, a.seed)?)?
        }
    })
}

fn train_toy(a: &TrainToyArgs, echo: &Value) -> anyhow::Result<Value> {
    let problem = ToyProblem {
        dim: a.dim,
        classes: a.classes,
        hidden: a.hidden.clone(),
        train_samples: a.train_samples,
        test_samples: a.test_samples,
        spread: a.spread,
        center_scale: a.center_scale,
        train: TrainConfig {
            step_size: a.step_size,
            batch_size: a.batch_size,
            epochs: a.epochs,
            seed: derive_seed(a.seed, 10),
        },
        seed: a.seed,
    };
    let run = problem.run()?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let net = &run.trained.network;
    write_archive(a.out.join("network"), &net.to_archive("toy-relu", htcompress::matrix::Dtype::F64))?;
    write_dataset(&a.out.join("train.csv"), &run.train)?;
    write_dataset(&a.out.join("test.csv"), &run.test)?;
    let result = json!({
        "widths": net.widths(),
        "train_accuracy": net.accuracy(&run.train)?,
        "test_accuracy": net.accuracy(&run.test)?,
        "initial_loss": run.trained.initial_loss(),
        "final_loss": run.trained.final_loss(),
        "loss_history": run.trained.loss_history,
    });
    output::write_json(&a.out.join("summary.json"), echo, &result)?;
    Ok(result)
}

fn experiment(a: &ExperimentArgs, echo: &Value) -> anyhow::Result<Value> {
    let (net, _) = load_network(&a.archive)?;
    let data = read_dataset(&a.data)?;
    let row = accuracy_experiment(&a.name, &a.dataset_name, &net, &data, &CompressionConfig::stddev_final(&net), a.trials, a.seed)?;
    if let Some(out) = &a.out {
        let file = fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
        write_accuracy_table(std::slice::from_ref(&row), file)?;
        output::write_csv_echo(out, echo)?;
    }
    Ok(serde_json::to_value(&row)?)
}

fn report(a: &ReportArgs, echo: &Value) -> anyhow::Result<Value> {
    let (net, _) = load_network(&a.archive)?;
    let data = read_dataset(&a.data)?;
    let mut opts = ReportOptions::new(compression_config(&net, &a.compression)?, a.gammas.clone());
    opts.seed = a.seed;
    opts.quantization_levels = a.r;
    opts.constant_c = a.constant;
    opts.dudley_upper = a.dudley_upper;
    let r = end_to_end_bound_report(&net, &data, &opts)?;
    let full = serde_json::to_value(&r)?;
    if let Some(out) = &a.out {
        output::write_json(out, echo, &full)?;
    }
    Ok(json!({
        "samples": r.samples,
        "parameter_count": r.parameter_count,
        "k_per_layer": r.compression.k_per_layer,
        "q": r.q,
        "kappa": r.kappa,
        "dudley": r.dudley.value,
        "margins": r.margins.iter().map(|m| json!({
            "gamma": m.gamma,
            "margin_loss": m.margin_loss,
            "complexity": m.bound.complexity,
            "total": m.bound.total,
        })).collect::<Vec<_>>(),
        "compressed_training_loss": r.margins.first().map(|m| m.compressed_loss),
    }))
}
