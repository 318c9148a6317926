use serde_json::json;

use super::stats::{wilson_interval, within_upper_bound, Z95};
use super::{fmt_f64, run_cell, DistKind, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentReport, TrialRecord};
use crate::gf2::{random_matrix, rank, rank_failure_limit, Density, Ensemble};

/// Rank of random `(k + epsilon) x k` matrices per `(k, epsilon)` cell.
pub fn run_rank_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (ci, cell) in config.cells().into_iter().enumerate() {
        let (k, eps) = (cell.k, cell.epsilon);
        let rows = k + eps;
        let ensemble = match (config.dist, config.density) {
            (_, Some(p)) => Ensemble::Bernoulli(Density::from_probability(p).map_err(|e| ExperimentError::Config(e.to_string()))?),
            (DistKind::Log, None) => Ensemble::Bernoulli(config.coding_distribution().density(k)),
            _ => Ensemble::Uniform,
        };
        let density = match ensemble {
            Ensemble::Uniform => 0.5,
            Ensemble::Bernoulli(d) => d.probability(),
        };
        let trials = run_cell(config, ci, |rng| rank(&random_matrix(rows, k, ensemble, rng)));
        let failures = trials.iter().filter(|t| t.value < k).count();
        let bound = 0.5f64.powi(eps as i32);
        let limit = rank_failure_limit(eps as u32);
        let (lo, hi) = wilson_interval(failures, config.trials, Z95);
        let (lo3, hi3) = wilson_interval(failures, config.trials, 3.0);
        cells.push(json!({
            "k": k,
            "epsilon": eps,
            "rows": rows,
            "density": density,
            "trials": config.trials,
            "failures": failures,
            "failure_rate": failures as f64 / config.trials as f64,
            "wilson95": [lo, hi],
            "wilson_z3": [lo3, hi3],
            "bound": bound,
            "limit": limit,
            "within_bound": within_upper_bound(failures, config.trials, bound, 3.0),
        }));
        records.extend(trials.into_iter().map(|t| TrialRecord {
            cell: ci,
            trial: t.trial,
            seed: t.seed,
            values: vec![
                k.to_string(),
                eps.to_string(),
                fmt_f64(density),
                t.value.to_string(),
                (t.value == k).to_string(),
            ],
            elapsed_us: t.elapsed_us,
        }));
    }
    Ok(ExperimentReport {
        kind: ExperimentKind::Rank,
        config: config.clone(),
        columns: vec!["k", "epsilon", "density", "rank", "full_rank"],
        records,
        cells,
    })
}
