//! Metropolis-Hastings updates for the spatial effect matrices and the
//! normal-gamma shrinkage hierarchy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_gamma, sample_gig, Rng};
use crate::error::{Error, Result};
use crate::lattice::WeightPair;
use crate::likelihood::trace_prod;
use crate::params::{ElementClass, FilterEngine, Restriction, SpatialEffects};

/// Prior on the free spatial effects.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EffectPrior {
    /// Independent N(mean, sd^2) priors.
    Normal { mean: f64, sd: f64 },
    /// Global-local shrinkage: psi | alpha ~ N(0, 2 alpha / omega^2),
    /// alpha ~ G(kappa, kappa), omega^2 ~ G(b0, b1).
    NormalGamma { kappa: f64, b0: f64, b1: f64 },
}

/// Tuning of the per-element random-walk step.
#[derive(Clone, Copy, Debug)]
pub struct MhConfig {
    /// Proposal standard deviation.
    pub mh_step: f64,
    pub prior: EffectPrior,
    /// Redraw budget per element before the element is skipped for the
    /// iteration.
    pub max_redraws: usize,
    /// Accept whenever the posterior kernel increases instead of the standard
    /// Metropolis rule (comparison mode).
    pub greedy: bool,
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mh_step > 0.0) {
            return Err(Error::Config(format!("mh_step must be positive, got {}", self.mh_step)));
        }
        if self.max_redraws == 0 {
            return Err(Error::Config("max_redraws must be at least 1".into()));
        }
        match self.prior {
            EffectPrior::Normal { sd, .. } if !(sd > 0.0) => {
                Err(Error::Config("normal prior sd must be positive".into()))
            }
            EffectPrior::NormalGamma { kappa, b0, b1 }
                if !(kappa > 0.0) || !(b0 > 0.0) || !(b1 > 0.0) =>
            {
                Err(Error::Config("normal-gamma hyperparameters must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Local and global shrinkage state of the normal-gamma prior.
#[derive(Clone, Debug)]
pub struct NgShrinkState {
    pub alpha1: DMatrix<f64>,
    pub alpha2: DMatrix<f64>,
    pub omega_sq: f64,
    pub kappa: f64,
    pub b0: f64,
    pub b1: f64,
}

impl NgShrinkState {
    pub fn init(p: usize, kappa: f64, b0: f64, b1: f64) -> NgShrinkState {
        NgShrinkState {
            alpha1: DMatrix::from_element(p, p, 1.0),
            alpha2: DMatrix::from_element(p, p, 1.0),
            omega_sq: 1.0,
            kappa,
            b0,
            b1,
        }
    }

    pub fn alpha(&self, k: usize) -> &DMatrix<f64> {
        if k == 0 {
            &self.alpha1
        } else {
            &self.alpha2
        }
    }
}

/// Per-run cache: the weight-data products are fixed while the effects move.
pub struct MhContext {
    pub x: DMatrix<f64>,
    w21x: DMatrix<f64>,
    w12x: DMatrix<f64>,
    pub engine: FilterEngine,
    pub n: usize,
}

impl MhContext {
    pub fn new(x: &DMatrix<f64>, weights: &WeightPair) -> Result<MhContext> {
        if x.nrows() != weights.n {
            return Err(Error::Shape(format!(
                "data has {} rows but weights are {} x {}",
                x.nrows(),
                weights.n,
                weights.n
            )));
        }
        Ok(MhContext {
            x: x.clone(),
            w21x: &weights.w21 * x,
            w12x: &weights.w12 * x,
            engine: FilterEngine::new(weights)?,
            n: x.nrows(),
        })
    }

    /// Constant-free log-likelihood kernel: log det R - tr(S theta)/2.
    pub fn kernel(&self, effects: &SpatialEffects, theta: &DMatrix<f64>) -> Result<f64> {
        let log_det = self.engine.log_det_filter(effects)?;
        let e = &self.x - &self.w21x * &effects.psi1 - &self.w12x * &effects.psi2;
        let s = e.transpose() * e;
        Ok(log_det - 0.5 * trace_prod(&s, theta))
    }
}

/// Acceptance bookkeeping for one or more MH scans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MhOutcome {
    pub proposed: u64,
    pub accepted: u64,
    /// Elements skipped because no stable proposal was found within the
    /// redraw budget.
    pub redraw_exhausted: u64,
}

impl MhOutcome {
    pub fn merge(&mut self, other: MhOutcome) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
        self.redraw_exhausted += other.redraw_exhausted;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

fn element_log_prior(
    effects: &SpatialEffects,
    class: ElementClass,
    prior: &EffectPrior,
    ng: Option<&NgShrinkState>,
    k: usize,
    i: usize,
    j: usize,
    value: f64,
) -> Result<f64> {
    match class {
        ElementClass::TightDiag => Ok(log_normal_density(value, effects.mu_diag, effects.tau)),
        ElementClass::TightZero => Ok(log_normal_density(value, 0.0, effects.tau)),
        ElementClass::Informative { mean, sd } => Ok(log_normal_density(value, mean, sd * sd)),
        ElementClass::Free => match prior {
            EffectPrior::Normal { mean, sd } => Ok(log_normal_density(value, *mean, sd * sd)),
            EffectPrior::NormalGamma { .. } => {
                let ng = ng.ok_or_else(|| {
                    Error::Config("normal-gamma prior requires shrinkage state".into())
                })?;
                let var = (2.0 * ng.alpha(k)[(i, j)] / ng.omega_sq).max(1e-300);
                Ok(log_normal_density(value, 0.0, var))
            }
        },
    }
}

/// One MH scan over every element of both effect matrices.
///
/// Each element gets a random-walk proposal, redrawn until the stability
/// condition holds (up to `max_redraws`, after which the element keeps its
/// value for this iteration), and is accepted with probability
/// min(1, exp(kernel + prior difference)). The symmetric restriction writes
/// both (i, j) and (j, i) before evaluating, so the scan covers p(p+1)
/// parameters there and 2 p^2 otherwise.
pub fn mh_update_effects(
    effects: &mut SpatialEffects,
    theta: &DMatrix<f64>,
    ctx: &MhContext,
    cfg: &MhConfig,
    ng: Option<&NgShrinkState>,
    rng: &mut Rng,
) -> Result<MhOutcome> {
    cfg.validate()?;
    let mut outcome = MhOutcome::default();
    let mut current_kernel = ctx.kernel(effects, theta)?;
    let symmetric = matches!(effects.restriction, Restriction::Symmetric);

    for (k, i, j, class) in effects.scan_elements() {
        let old = effects.psi(k)[(i, j)];
        let mut found = None;
        for _ in 0..cfg.max_redraws {
            let candidate = old + cfg.mh_step * rng.standard_normal();
            set_element(effects, k, i, j, candidate, symmetric);
            if ctx.engine.stable(effects)? {
                found = Some(candidate);
                break;
            }
        }
        let Some(candidate) = found else {
            set_element(effects, k, i, j, old, symmetric);
            outcome.redraw_exhausted += 1;
            continue;
        };

        outcome.proposed += 1;
        let proposal_kernel = ctx.kernel(effects, theta)?;
        let delta = proposal_kernel - current_kernel
            + element_log_prior(effects, class, &cfg.prior, ng, k, i, j, candidate)?
            - element_log_prior(effects, class, &cfg.prior, ng, k, i, j, old)?;
        let accept = if cfg.greedy { delta > 0.0 } else { rng.uniform().ln() < delta };
        if accept {
            outcome.accepted += 1;
            current_kernel = proposal_kernel;
        } else {
            set_element(effects, k, i, j, old, symmetric);
        }
    }
    Ok(outcome)
}

fn set_element(
    effects: &mut SpatialEffects,
    k: usize,
    i: usize,
    j: usize,
    value: f64,
    symmetric: bool,
) {
    let m = effects.psi_mut(k);
    m[(i, j)] = value;
    if symmetric && i != j {
        m[(j, i)] = value;
    }
}

/// Posterior shape of the global shrinkage parameter: b0 + kappa 2 p^2.
pub fn omega_sq_posterior_shape(p: usize, kappa: f64, b0: f64) -> f64 {
    b0 + kappa * 2.0 * (p * p) as f64
}

fn draw_omega_sq(
    rng: &mut Rng,
    p: usize,
    kappa: f64,
    b0: f64,
    b1: f64,
    alpha_sum: f64,
) -> Result<f64> {
    sample_gamma(
        rng,
        omega_sq_posterior_shape(p, kappa, b0),
        b1 + 0.5 * kappa * alpha_sum,
    )
}

/// Refresh the local shrinkage parameters from their GIG conditionals
/// `alpha_kij ~ GIG(kappa - 1/2, psi_kij^2, kappa omega^2)` and the global
/// one from `omega^2 ~ G(b0 + kappa 2 p^2, b1 + kappa/2 sum(alpha))`.
///
/// psi_kij^2 is floored at 1e-12 so that elements sitting exactly at zero
/// stay inside the GIG domain (kappa < 1/2 makes chi = 0 invalid there).
pub fn update_ng_shrinkage(
    effects: &SpatialEffects,
    ng: &mut NgShrinkState,
    rng: &mut Rng,
) -> Result<()> {
    let p = effects.p();
    let lambda = ng.kappa - 0.5;
    let rate = ng.kappa * ng.omega_sq;
    let mut alpha_sum = 0.0;
    for k in 0..2 {
        for i in 0..p {
            for j in 0..p {
                let psi = effects.psi(k)[(i, j)];
                let chi = (psi * psi).max(1e-12);
                let draw = sample_gig(rng, lambda, chi, rate)?;
                alpha_sum += draw;
                if k == 0 {
                    ng.alpha1[(i, j)] = draw;
                } else {
                    ng.alpha2[(i, j)] = draw;
                }
            }
        }
    }
    ng.omega_sq = draw_omega_sq(rng, p, ng.kappa, ng.b0, ng.b1, alpha_sum)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_weights, Layout};
    use crate::params::{apply_restriction, Orientation};
    use approx::assert_relative_eq;

    fn small_context(n: usize, p: usize, seed: u64) -> (MhContext, DMatrix<f64>) {
        let weights = build_weights(&Layout::strip(n)).unwrap();
        let mut rng = Rng::from_seed(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
        (MhContext::new(&x, &weights).unwrap(), DMatrix::identity(p, p))
    }

    fn symmetric_effects(p: usize, tau: f64) -> SpatialEffects {
        apply_restriction(
            DMatrix::from_element(p, p, 1e-4),
            DMatrix::from_element(p, p, 1e-4),
            Restriction::Symmetric,
            tau,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_identical_trajectory() {
        let (ctx, theta) = small_context(8, 2, 3);
        let cfg = MhConfig {
            mh_step: 0.1,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            max_redraws: 100,
            greedy: false,
        };
        let mut e1 = symmetric_effects(2, 1e-3);
        let mut e2 = symmetric_effects(2, 1e-3);
        let mut r1 = Rng::from_seed(77);
        let mut r2 = Rng::from_seed(77);
        let mut o1 = MhOutcome::default();
        let mut o2 = MhOutcome::default();
        for _ in 0..200 {
            o1.merge(mh_update_effects(&mut e1, &theta, &ctx, &cfg, None, &mut r1).unwrap());
            o2.merge(mh_update_effects(&mut e2, &theta, &ctx, &cfg, None, &mut r2).unwrap());
        }
        assert_eq!(e1.psi1, e2.psi1);
        assert_eq!(e1.psi2, e2.psi2);
        assert_eq!(o1, o2);
    }

    #[test]
    fn tight_diagonal_prior_dominates() {
        // tau = 1e-6: posterior means of the diagonal entries stay within
        // 3 sqrt(tau) * 10 = 0.03 in magnitude
        let (ctx, theta) = small_context(10, 2, 4);
        let cfg = MhConfig {
            mh_step: 0.05,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            max_redraws: 100,
            greedy: false,
        };
        let mut effects = symmetric_effects(2, 1e-6);
        let mut rng = Rng::from_seed(5);
        let mut diag_mean = [0.0f64; 4];
        let iters = 2000;
        for _ in 0..iters {
            mh_update_effects(&mut effects, &theta, &ctx, &cfg, None, &mut rng).unwrap();
            for (slot, (k, d)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                diag_mean[slot] += effects.psi(*k)[(*d, *d)];
            }
        }
        for m in diag_mean {
            assert!(
                (m / iters as f64).abs() < 0.03,
                "diagonal posterior mean {} escapes the tight prior",
                m / iters as f64
            );
        }
    }

    #[test]
    fn accepted_states_always_stable() {
        let (ctx, theta) = small_context(6, 2, 6);
        let weights = build_weights(&Layout::strip(6)).unwrap();
        let cfg = MhConfig {
            mh_step: 0.3,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            max_redraws: 100,
            greedy: false,
        };
        let mut effects = symmetric_effects(2, 1e-3);
        let mut rng = Rng::from_seed(8);
        for t in 0..10_000 {
            mh_update_effects(&mut effects, &theta, &ctx, &cfg, None, &mut rng).unwrap();
            if t % 500 == 0 {
                assert!(crate::params::stability_check(&effects, &weights).unwrap());
            }
            assert!(ctx.engine.stable(&effects).unwrap(), "unstable state stored at {t}");
        }
    }

    #[test]
    fn symmetric_restriction_preserved_exactly() {
        let (ctx, theta) = small_context(8, 3, 9);
        let cfg = MhConfig {
            mh_step: 0.1,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            max_redraws: 100,
            greedy: false,
        };
        let mut effects = symmetric_effects(3, 1e-3);
        let mut rng = Rng::from_seed(10);
        for _ in 0..300 {
            mh_update_effects(&mut effects, &theta, &ctx, &cfg, None, &mut rng).unwrap();
            assert!(effects.restriction_holds());
        }
    }

    #[test]
    fn omega_posterior_shape_is_exact() {
        assert_relative_eq!(omega_sq_posterior_shape(4, 0.1, 0.01), 3.21, epsilon = 1e-12);
    }

    #[test]
    fn omega_draws_match_gamma_moments_with_frozen_alpha() {
        let mut rng = Rng::from_seed(12);
        let (p, kappa, b0, b1) = (4usize, 0.1, 0.01, 0.01);
        let alpha_sum = 17.3;
        let shape = omega_sq_posterior_shape(p, kappa, b0);
        let rate = b1 + 0.5 * kappa * alpha_sum;
        let reps = 100_000;
        let mean: f64 = (0..reps)
            .map(|_| draw_omega_sq(&mut rng, p, kappa, b0, b1, alpha_sum).unwrap())
            .sum::<f64>()
            / reps as f64;
        assert_relative_eq!(mean, shape / rate, max_relative = 0.01);
    }

    #[test]
    fn shrinkage_update_handles_zero_effects() {
        // kappa = 0.1 puts the GIG order at -0.4; all draws must stay finite
        // and positive even when every psi is exactly zero
        let effects = apply_restriction(
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 3),
            Restriction::Triangular(Orientation::Upper),
            1e-3,
            0.0,
        )
        .unwrap();
        let mut ng = NgShrinkState::init(3, 0.1, 0.01, 0.01);
        let mut rng = Rng::from_seed(13);
        for _ in 0..200 {
            update_ng_shrinkage(&effects, &mut ng, &mut rng).unwrap();
            for a in ng.alpha1.iter().chain(ng.alpha2.iter()) {
                assert!(a.is_finite() && *a > 0.0);
            }
            assert!(ng.omega_sq.is_finite() && ng.omega_sq > 0.0);
        }
    }

    #[test]
    fn marginal_matches_two_dimensional_quadrature() {
        // p = 1, n = 2 toy model: the posterior over (psi1, psi2) is
        //   (1 - psi1 psi2) exp(-((x1 - psi1 x2)^2 + (x2 - psi2 x1)^2)/2)
        //   * N(psi1; 0, tau) N(psi2; 0, tau)   on { psi1 psi2 < 1 },
        // with theta fixed at 1. The MH marginal histogram of psi1 must match
        // the quadrature marginal within 2% total variation.
        let layout = Layout::strip(2);
        let weights = build_weights(&layout).unwrap();
        let x = DMatrix::from_row_slice(2, 1, &[0.8, -0.6]);
        let ctx = MhContext::new(&x, &weights).unwrap();
        let theta = DMatrix::identity(1, 1);
        let tau = 1.0;
        let cfg = MhConfig {
            mh_step: 0.6,
            prior: EffectPrior::Normal { mean: 0.0, sd: 1.0 },
            max_redraws: 100,
            greedy: false,
        };
        let mut effects = apply_restriction(
            DMatrix::from_element(1, 1, 1e-4),
            DMatrix::from_element(1, 1, 1e-4),
            Restriction::Symmetric,
            tau,
            0.0,
        )
        .unwrap();

        let lo = -3.0;
        let hi = 3.0;
        let bins = 30usize;
        let width = (hi - lo) / bins as f64;

        // quadrature marginal of psi1 on the same bins
        let grid = 800usize;
        let step = (hi - lo) / grid as f64;
        let mut marginal = vec![0.0f64; bins];
        let (x1, x2) = (x[(0, 0)], x[(1, 0)]);
        for a in 0..grid {
            let p1 = lo + (a as f64 + 0.5) * step;
            let mut rowmass = 0.0;
            for b in 0..grid {
                let p2 = lo + (b as f64 + 0.5) * step;
                let det = 1.0 - p1 * p2;
                if det <= 0.0 {
                    continue;
                }
                let e1 = x1 - p1 * x2;
                let e2 = x2 - p2 * x1;
                let logd = det.ln() - 0.5 * (e1 * e1 + e2 * e2)
                    - 0.5 * p1 * p1 / tau
                    - 0.5 * p2 * p2 / tau;
                rowmass += logd.exp();
            }
            let bin = (((p1 - lo) / width) as usize).min(bins - 1);
            marginal[bin] += rowmass;
        }
        let total: f64 = marginal.iter().sum();
        for m in marginal.iter_mut() {
            *m /= total;
        }

        let mut rng = Rng::from_seed(21);
        let iters = 1_000_000usize;
        let burn = 20_000;
        let mut hist = vec![0.0f64; bins];
        let mut kept = 0.0;
        for t in 0..iters {
            mh_update_effects(&mut effects, &theta, &ctx, &cfg, None, &mut rng).unwrap();
            if t >= burn {
                let v = effects.psi1[(0, 0)];
                if v >= lo && v < hi {
                    let bin = (((v - lo) / width) as usize).min(bins - 1);
                    hist[bin] += 1.0;
                }
                kept += 1.0;
            }
        }
        for h in hist.iter_mut() {
            *h /= kept;
        }
        let tv: f64 = 0.5
            * hist
                .iter()
                .zip(marginal.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "total variation {tv} exceeds 2%");
    }
}
