//! Column-wise block Gibbs sweep for the within-location precision matrix
//! under element-wise horseshoe priors.

use nalgebra::{DMatrix, DVector};

use crate::dist::{sample_gamma, sample_inverse_gamma, Rng};
use crate::error::{Error, Result};
use crate::linalg;

/// How often the running inverse is recomputed from scratch to bound float
/// drift from the incremental rank-one updates.
const SIGMA_REFRESH_EVERY: u64 = 500;

/// Precision-matrix state with its horseshoe auxiliaries.
///
/// `sigma` caches the inverse of `theta` and is maintained incrementally
/// through the column updates; `lambda_sq` and `nu` hold the squared local
/// scales and their auxiliaries (upper triangle meaningful, stored
/// symmetrically), `xi_sq`/`zeta_hs` the global scale and its auxiliary.
#[derive(Clone, Debug)]
pub struct PrecisionState {
    pub theta: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub lambda_sq: DMatrix<f64>,
    pub nu: DMatrix<f64>,
    pub xi_sq: f64,
    pub zeta_hs: f64,
    sweeps: u64,
}

impl PrecisionState {
    /// Initial state: theta = sigma = I, all scales and auxiliaries 1.
    pub fn init(p: usize) -> PrecisionState {
        PrecisionState {
            theta: DMatrix::identity(p, p),
            sigma: DMatrix::identity(p, p),
            lambda_sq: DMatrix::from_element(p, p, 1.0),
            nu: DMatrix::from_element(p, p, 1.0),
            xi_sq: 1.0,
            zeta_hs: 1.0,
            sweeps: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.theta.nrows()
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Recompute `sigma` directly from `theta`; returns the max-abs drift of
    /// the incremental inverse against the direct one.
    pub fn refresh_sigma(&mut self) -> Result<f64> {
        let direct = linalg::spd_inverse(&self.theta)?;
        let drift = (&direct - &self.sigma).abs().max();
        self.sigma = direct;
        Ok(drift)
    }
}

/// Indices 0..p without `i`.
fn minus(p: usize, i: usize) -> Vec<usize> {
    (0..p).filter(|&t| t != i).collect()
}

fn gather_matrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn gather_column(m: &DMatrix<f64>, rows: &[usize], col: usize) -> DVector<f64> {
    DVector::from_fn(rows.len(), |a, _| m[(rows[a], col)])
}

/// One full sweep of the adapted graphical horseshoe sampler given the
/// current scatter matrix `s` and sample count `n`.
///
/// Per column i: gamma ~ G(n/2 + 1, s_ii/2); the inverse of the reduced
/// precision block comes from the rank-one downdate of sigma; the
/// off-diagonal block is drawn from N(-C s_{-i,i}, C) with
/// C = (s_ii inv + diag(lambda_sq xi_sq)^{-1})^{-1}; theta_ii = gamma +
/// beta' inv beta; local scales and auxiliaries are refreshed from their
/// inverse-gamma conditionals and sigma is patched with the matching block
/// inverse formulas. After the loop the global scale and its auxiliary are
/// updated. Both triangles of theta are written from the same draw, so the
/// state stays exactly symmetric and positive definite.
pub fn horseshoe_sweep(
    state: &mut PrecisionState,
    s: &DMatrix<f64>,
    n: usize,
    rng: &mut Rng,
) -> Result<()> {
    let p = state.p();
    if s.nrows() != p || s.ncols() != p {
        return Err(Error::Shape(format!(
            "scatter matrix must be {p} x {p}, got {} x {}",
            s.nrows(),
            s.ncols()
        )));
    }
    for i in 0..p {
        let gamma = sample_gamma(rng, n as f64 / 2.0 + 1.0, s[(i, i)].max(1e-300) / 2.0)?;
        if p == 1 {
            state.theta[(0, 0)] = gamma;
            state.sigma[(0, 0)] = 1.0 / gamma;
            continue;
        }
        let rest = minus(p, i);

        // inverse of theta_{-i,-i} via the rank-one downdate of sigma
        let sigma_11 = gather_matrix(&state.sigma, &rest, &rest);
        let sigma_col = gather_column(&state.sigma, &rest, i);
        let theta_11_inv = &sigma_11 - &sigma_col * sigma_col.transpose() / state.sigma[(i, i)];

        let lam_col = gather_column(&state.lambda_sq, &rest, i);
        let s_col = gather_column(s, &rest, i);

        // precision of the conditional: C^{-1} = s_ii inv + diag(1/(lambda^2 xi^2))
        let mut c_inv = &theta_11_inv * s[(i, i)];
        for (a, lam) in lam_col.iter().enumerate() {
            c_inv[(a, a)] += 1.0 / (lam * state.xi_sq).max(1e-300);
        }
        let chol = match c_inv.clone().cholesky() {
            Some(c) => c,
            None => {
                let jitter = 1e-10 * c_inv.trace() / p as f64;
                for a in 0..rest.len() {
                    c_inv[(a, a)] += jitter;
                }
                c_inv.clone().cholesky().ok_or_else(|| {
                    Error::Numeric(format!(
                        "conditional precision not SPD at sweep {}, column {} (trace {:.3e})",
                        state.sweeps,
                        i + 1,
                        c_inv.trace()
                    ))
                })?
            }
        };
        // beta ~ N(-C s_{-i,i}, C) with C = (LL')^{-1}: mean via solve, noise
        // via a triangular backsolve
        let mean = chol.solve(&(-&s_col));
        let z = DVector::from_fn(rest.len(), |_, _| rng.standard_normal());
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numeric("triangular solve failed in horseshoe column".into()))?;
        let beta = mean + noise;

        for (a, &t) in rest.iter().enumerate() {
            state.theta[(t, i)] = beta[a];
            state.theta[(i, t)] = beta[a];
        }
        let inv_beta = &theta_11_inv * &beta;
        state.theta[(i, i)] = gamma + beta.dot(&inv_beta);

        // local scales and auxiliaries
        for (a, &t) in rest.iter().enumerate() {
            let lam = sample_inverse_gamma(
                rng,
                1.0,
                1.0 / state.nu[(t, i)] + beta[a] * beta[a] / (2.0 * state.xi_sq),
            )?
            .clamp(1e-300, 1e300);
            state.lambda_sq[(t, i)] = lam;
            state.lambda_sq[(i, t)] = lam;
            let nu = sample_inverse_gamma(rng, 1.0, 1.0 + 1.0 / lam)?.clamp(1e-300, 1e300);
            state.nu[(t, i)] = nu;
            state.nu[(i, t)] = nu;
        }

        // patch sigma with the block-inverse identities
        for (a, &ta) in rest.iter().enumerate() {
            for (b, &tb) in rest.iter().enumerate() {
                state.sigma[(ta, tb)] = theta_11_inv[(a, b)] + inv_beta[a] * inv_beta[b] / gamma;
            }
            state.sigma[(ta, i)] = -inv_beta[a] / gamma;
            state.sigma[(i, ta)] = -inv_beta[a] / gamma;
        }
        state.sigma[(i, i)] = 1.0 / gamma;
    }

    if p > 1 {
        let mut quad = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                quad += state.theta[(i, j)].powi(2) / state.lambda_sq[(i, j)];
            }
        }
        let pairs = (p * (p - 1) / 2) as f64;
        state.xi_sq = sample_inverse_gamma(
            rng,
            (pairs + 1.0) / 2.0,
            1.0 / state.zeta_hs + quad / 2.0,
        )?
        .clamp(1e-300, 1e300);
        state.zeta_hs = sample_inverse_gamma(rng, 1.0, 1.0 + 1.0 / state.xi_sq)?
            .clamp(1e-300, 1e300);
    }

    state.sweeps += 1;
    if state.sweeps % SIGMA_REFRESH_EVERY == 0 {
        let drift = state.refresh_sigma()?;
        if drift > 1e-6 {
            return Err(Error::Numeric(format!(
                "incremental inverse drifted by {drift:.3e} after {} sweeps",
                state.sweeps
            )));
        }
    }
    if state.theta.clone().cholesky().is_none() {
        return Err(Error::Numeric(format!(
            "theta lost positive definiteness at sweep {}",
            state.sweeps
        )));
    }
    Ok(())
}
