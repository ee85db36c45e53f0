//! Simulation-study harness: generate a ground-truth model, fit it, score
//! the fit, and aggregate cells of replications into a report table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Rng;
use crate::error::Result;
use crate::gibbs::{run_gibbs, select_edges, GibbsSettings};
use crate::lattice::{build_weights, Layout};
use crate::metrics::{f1_of_selection, frobenius, rmse};
use crate::params::Restriction;
use crate::simulate::{gen_data, gen_effects, gen_network, gen_precision, NetworkKind};
use crate::spatial_mh::EffectPrior;

/// One cell of the simulation grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub network: NetworkKind,
    pub prior: EffectPrior,
    pub restriction: Restriction,
    pub n: usize,
    pub p: usize,
    pub edge_prob: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub tau: f64,
    pub mh_step: f64,
    pub credible_level: f64,
}

impl Scenario {
    /// Whether the ground-truth effects are drawn sparse (the shrinkage-prior
    /// scenarios) or dense.
    pub fn sparse_truth(&self) -> bool {
        matches!(self.prior, EffectPrior::NormalGamma { .. })
    }

    pub fn settings(&self, seed: u64) -> GibbsSettings {
        GibbsSettings {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed,
            stream: 0,
            mh_step: self.mh_step,
            max_redraws: 100,
            greedy: false,
            prior: self.prior,
            restriction: self.restriction.clone(),
            tau: self.tau,
            mu_diag: 0.0,
            credible_level: self.credible_level,
            init_eps: 1e-4,
            abort_dump: None,
        }
    }
}

/// Scores of one fitted replication.
#[derive(Clone, Debug)]
pub struct ReplicationResult {
    pub seed: u64,
    pub frobenius: f64,
    pub rmse: f64,
    pub f1: Option<f64>,
    pub acceptance_rate: f64,
}

/// Truth generation uses an rng stream separate from the chain's.
const TRUTH_STREAM: u64 = 1000;

/// Generate truth and data for one seed, fit, and score.
pub fn run_replication(scenario: &Scenario, seed: u64) -> Result<ReplicationResult> {
    let layout = Layout::strip(scenario.n);
    let weights = build_weights(&layout)?;
    let mut rng = Rng::split(seed, TRUTH_STREAM);
    let adj = gen_network(scenario.network, scenario.p, scenario.edge_prob, &mut rng)?;
    let theta_true = gen_precision(&adj, &mut rng)?;
    let effects_true = gen_effects(
        scenario.restriction.clone(),
        scenario.sparse_truth(),
        scenario.p,
        scenario.tau,
        &weights,
        &mut rng,
    )?;
    let x = gen_data(&effects_true, &theta_true, &weights, scenario.n, &mut rng)?;

    let chain = run_gibbs(&x, &weights, &scenario.settings(seed))?;
    let (psi1_hat, psi2_hat, theta_hat) = chain.posterior_mean_matrices();

    let fnorm = frobenius(&theta_true, &theta_hat)?;
    let rmse_value = rmse(
        (&effects_true.psi1, &effects_true.psi2),
        (&psi1_hat, &psi2_hat),
    )?;
    let f1_value = if scenario.sparse_truth() {
        let selection = select_edges(&chain, scenario.credible_level)?;
        let universe = effects_true.free_mask();
        Some(f1_of_selection(
            (&effects_true.psi1, &effects_true.psi2),
            &selection,
            [&universe[0], &universe[1]],
        )?)
    } else {
        None
    };
    Ok(ReplicationResult {
        seed,
        frobenius: fnorm,
        rmse: rmse_value,
        f1: f1_value,
        acceptance_rate: chain.acceptance.acceptance_rate(),
    })
}

/// Mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Aggregated scores for one grid cell.
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub seeds: usize,
    pub mean_fn: f64,
    pub se_fn: f64,
    pub mean_rmse: f64,
    pub se_rmse: f64,
    pub mean_f1: Option<f64>,
    pub se_f1: Option<f64>,
    pub mean_acceptance: f64,
}

/// Run `seeds` replications of a scenario (fanned across the current rayon
/// pool) and aggregate. Results are merged in seed order regardless of the
/// pool size.
pub fn run_cell(scenario: &Scenario, base_seed: u64, seeds: usize) -> Result<CellSummary> {
    let results: Vec<Result<ReplicationResult>> = (0..seeds as u64)
        .into_par_iter()
        .map(|r| run_replication(scenario, base_seed + r))
        .collect();
    let mut done = Vec::with_capacity(seeds);
    for r in results {
        done.push(r?);
    }
    let (mean_fn, se_fn) = mean_se(&done.iter().map(|r| r.frobenius).collect::<Vec<_>>());
    let (mean_rmse, se_rmse) = mean_se(&done.iter().map(|r| r.rmse).collect::<Vec<_>>());
    let f1s: Vec<f64> = done.iter().filter_map(|r| r.f1).collect();
    let (mean_f1, se_f1) = if f1s.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_se(&f1s);
        (Some(m), Some(s))
    };
    let mean_acceptance =
        done.iter().map(|r| r.acceptance_rate).sum::<f64>() / done.len().max(1) as f64;
    Ok(CellSummary {
        scenario: scenario.clone(),
        seeds,
        mean_fn,
        se_fn,
        mean_rmse,
        se_rmse,
        mean_f1,
        se_f1,
        mean_acceptance,
    })
}

fn restriction_name(r: &Restriction) -> &'static str {
    match r {
        Restriction::Symmetric => "symmetric",
        Restriction::Triangular(crate::params::Orientation::Upper) => "triangular-upper",
        Restriction::Triangular(crate::params::Orientation::Lower) => "triangular-lower",
        Restriction::KnownMask(_) => "known-mask",
    }
}

fn prior_name(p: &EffectPrior) -> &'static str {
    match p {
        EffectPrior::Normal { .. } => "normal",
        EffectPrior::NormalGamma { .. } => "normal-gamma",
    }
}

fn network_name(n: NetworkKind) -> &'static str {
    match n {
        NetworkKind::Random => "random",
        NetworkKind::ScaleFree => "scale-free",
        NetworkKind::Star => "star",
    }
}

/// Report table: one row per cell with means and standard errors.
pub fn report_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(
        "network,prior,restriction,n,p,seeds,mean_fn,se_fn,mean_rmse,se_rmse,mean_f1,se_f1,mean_acceptance\n",
    );
    for c in cells {
        let f1m = c.mean_f1.map(|v| format!("{v}")).unwrap_or_default();
        let f1s = c.se_f1.map(|v| format!("{v}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            network_name(c.scenario.network),
            prior_name(&c.scenario.prior),
            restriction_name(&c.scenario.restriction),
            c.scenario.n,
            c.scenario.p,
            c.seeds,
            c.mean_fn,
            c.se_fn,
            c.mean_rmse,
            c.se_rmse,
            f1m,
            f1s,
            c.mean_acceptance,
        ));
    }
    out
}

/// The desk-scale grid: the p = 4 random-network cells behind the acceptance
/// checks, at the protocol's 1000 + 1000 iterations and 20 seeds.
pub fn desk_preset() -> Vec<(Scenario, usize)> {
    let normal = EffectPrior::Normal { mean: 0.0, sd: 1.0 };
    let ng = EffectPrior::NormalGamma { kappa: 0.1, b0: 0.01, b1: 0.01 };
    let base = Scenario {
        network: NetworkKind::Random,
        prior: normal,
        restriction: Restriction::Symmetric,
        n: 25,
        p: 4,
        edge_prob: 0.2,
        iterations: 2000,
        burn_in: 1000,
        tau: 0.001,
        mh_step: 0.1,
        credible_level: 0.5,
    };
    let mut cells = Vec::new();
    for n in [25, 50, 100] {
        cells.push((Scenario { n, ..base.clone() }, 20));
    }
    cells.push((
        Scenario {
            n: 100,
            prior: ng,
            restriction: Restriction::Triangular(crate::params::Orientation::Upper),
            ..base.clone()
        },
        20,
    ));
    cells
}

/// A fast sanity grid for smoke runs.
pub fn smoke_preset() -> Vec<(Scenario, usize)> {
    let mut cells = desk_preset();
    for (scenario, seeds) in cells.iter_mut() {
        scenario.iterations = 60;
        scenario.burn_in = 20;
        *seeds = 2;
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_is_deterministic_per_seed() {
        let scenario = Scenario {
            network: NetworkKind::Random,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            restriction: Restriction::Symmetric,
            n: 10,
            p: 2,
            edge_prob: 0.2,
            iterations: 40,
            burn_in: 10,
            tau: 0.001,
            mh_step: 0.1,
            credible_level: 0.5,
        };
        let a = run_replication(&scenario, 5).unwrap();
        let b = run_replication(&scenario, 5).unwrap();
        assert_eq!(a.rmse, b.rmse);
        assert_eq!(a.frobenius, b.frobenius);
    }

    #[test]
    fn cell_aggregation_matches_direct_mean() {
        let scenario = Scenario {
            network: NetworkKind::Star,
            prior: EffectPrior::NormalGamma { kappa: 0.1, b0: 0.01, b1: 0.01 },
            restriction: Restriction::Triangular(crate::params::Orientation::Upper),
            n: 8,
            p: 2,
            edge_prob: 0.2,
            iterations: 30,
            burn_in: 10,
            tau: 0.001,
            mh_step: 0.1,
            credible_level: 0.5,
        };
        let cell = run_cell(&scenario, 100, 3).unwrap();
        let direct: Vec<f64> = (100..103)
            .map(|s| run_replication(&scenario, s).unwrap().rmse)
            .collect();
        let mean = direct.iter().sum::<f64>() / 3.0;
        assert!((cell.mean_rmse - mean).abs() < 1e-12);
        assert!(cell.mean_f1.is_some());
    }
}
