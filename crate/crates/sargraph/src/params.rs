//! Model parameters: the spatial effect matrix pair, identifiability
//! restrictions, the stability condition, and the spatial filter.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::WeightPair;
use crate::linalg;

/// Orientation of the triangular restriction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Upper,
    Lower,
}

/// One informative prior on a known spatial effect: matrix `k` (0 or 1),
/// 0-based element (i, j), prior mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Identifiability restriction on the spatial effect matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Restriction {
    /// Both matrices symmetric; diagonals carry the tight prior.
    Symmetric,
    /// Off-orientation entries carry the tight zero-mean prior. They are
    /// still sampled, not hard-zeroed, matching the stated prior structure.
    Triangular(Orientation),
    /// Informative priors on known entries; at least ceil(p^2/2) masked
    /// entries per matrix are required for identifiability.
    KnownMask(Vec<MaskEntry>),
}

/// Role of one element of a spatial effect matrix in the MH scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementClass {
    /// Carries the main effect prior (normal or normal-gamma).
    Free,
    /// Diagonal under restrictions (i)-(iii): N(mu_diag, tau).
    TightDiag,
    /// Restricted off-orientation entry: N(0, tau).
    TightZero,
    /// Masked entry with an informative prior.
    Informative { mean: f64, sd: f64 },
}

/// The pair of p x p spatial effect matrices with their restriction.
/// `psi1` acts through `w21` (category-2 values onto category-1 locations),
/// `psi2` through `w12`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialEffects {
    pub psi1: DMatrix<f64>,
    pub psi2: DMatrix<f64>,
    pub restriction: Restriction,
    /// Variance of the tight priors in restrictions (i)-(iii).
    pub tau: f64,
    /// Mean of the diagonal priors.
    pub mu_diag: f64,
}

impl SpatialEffects {
    pub fn p(&self) -> usize {
        self.psi1.nrows()
    }

    pub fn psi(&self, k: usize) -> &DMatrix<f64> {
        if k == 0 {
            &self.psi1
        } else {
            &self.psi2
        }
    }

    pub fn psi_mut(&mut self, k: usize) -> &mut DMatrix<f64> {
        if k == 0 {
            &mut self.psi1
        } else {
            &mut self.psi2
        }
    }

    /// Class of element (k, i, j) under the current restriction.
    pub fn element_class(&self, k: usize, i: usize, j: usize) -> ElementClass {
        match &self.restriction {
            Restriction::Symmetric => {
                if i == j {
                    ElementClass::TightDiag
                } else {
                    ElementClass::Free
                }
            }
            Restriction::Triangular(orient) => {
                if i == j {
                    ElementClass::TightDiag
                } else {
                    let restricted = match orient {
                        Orientation::Upper => i > j,
                        Orientation::Lower => i < j,
                    };
                    if restricted {
                        ElementClass::TightZero
                    } else {
                        ElementClass::Free
                    }
                }
            }
            Restriction::KnownMask(mask) => mask
                .iter()
                .find(|m| m.k == k && m.i == i && m.j == j)
                .map(|m| ElementClass::Informative { mean: m.mean, sd: m.sd })
                .unwrap_or(ElementClass::Free),
        }
    }

    /// The elements visited by one MH scan, with their classes. Symmetric
    /// restriction scans the upper triangle including the diagonal of each
    /// matrix (p(p+1) parameters); the other restrictions scan all 2p^2.
    pub fn scan_elements(&self) -> Vec<(usize, usize, usize, ElementClass)> {
        let p = self.p();
        let mut out = Vec::new();
        for k in 0..2 {
            for i in 0..p {
                for j in 0..p {
                    if matches!(self.restriction, Restriction::Symmetric) && j < i {
                        continue;
                    }
                    out.push((k, i, j, self.element_class(k, i, j)));
                }
            }
        }
        out
    }

    /// Mask of free entries per matrix (the default F1 universe).
    pub fn free_mask(&self) -> [DMatrix<bool>; 2] {
        let p = self.p();
        let build = |k: usize| {
            DMatrix::from_fn(p, p, |i, j| matches!(self.element_class(k, i, j), ElementClass::Free))
        };
        [build(0), build(1)]
    }

    /// True iff the matrices satisfy the structural part of the restriction
    /// exactly (used by chain verification).
    pub fn restriction_holds(&self) -> bool {
        match self.restriction {
            Restriction::Symmetric => {
                linalg::is_symmetric(&self.psi1, 0.0) && linalg::is_symmetric(&self.psi2, 0.0)
            }
            _ => true,
        }
    }
}

/// Validate a draft matrix pair against a restriction and assemble the
/// effects state. Symmetric overwrites the lower triangle from the upper;
/// triangular keeps values (the restricted entries are prior targets, not
/// zeros); known-mask validates the mask size.
pub fn apply_restriction(
    draft1: DMatrix<f64>,
    draft2: DMatrix<f64>,
    restriction: Restriction,
    tau: f64,
    mu_diag: f64,
) -> Result<SpatialEffects> {
    let p = draft1.nrows();
    if draft1.ncols() != p || draft2.nrows() != p || draft2.ncols() != p {
        return Err(Error::Shape("spatial effect matrices must be square with equal size".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if draft1.iter().chain(draft2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("spatial effect draft contains non-finite values".into()));
    }
    let (psi1, psi2) = match &restriction {
        Restriction::Symmetric => {
            let sym = |m: &DMatrix<f64>| {
                let mut s = m.clone();
                for i in 0..p {
                    for j in 0..i {
                        s[(i, j)] = s[(j, i)];
                    }
                }
                s
            };
            (sym(&draft1), sym(&draft2))
        }
        Restriction::Triangular(_) => (draft1, draft2),
        Restriction::KnownMask(mask) => {
            let need = p * p / 2 + usize::from(p * p % 2 != 0);
            for k in 0..2 {
                let count = mask.iter().filter(|m| m.k == k).count();
                if count < need {
                    return Err(Error::Identifiability(format!(
                        "known-mask restriction needs at least {need} masked entries in matrix {} for p = {p}, got {count}",
                        k + 1
                    )));
                }
            }
            for m in mask {
                if m.k > 1 || m.i >= p || m.j >= p {
                    return Err(Error::Config(format!(
                        "mask entry ({}, {}, {}) out of range",
                        m.k + 1,
                        m.i + 1,
                        m.j + 1
                    )));
                }
                if !(m.sd > 0.0) {
                    return Err(Error::Config("mask prior sd must be positive".into()));
                }
            }
            (draft1, draft2)
        }
    };
    Ok(SpatialEffects { psi1, psi2, restriction, tau, mu_diag })
}

/// Assemble the np x np spatial filter matrix
/// `R = I - psi1^T (x) w21 - psi2^T (x) w12` (column-major vec convention).
pub fn filter_matrix(effects: &SpatialEffects, weights: &WeightPair) -> Result<DMatrix<f64>> {
    let p = effects.p();
    let n = weights.n;
    check_dims(effects, weights)?;
    let mut r = DMatrix::identity(n * p, n * p);
    r -= linalg::kron(&effects.psi1.transpose(), &weights.w21);
    r -= linalg::kron(&effects.psi2.transpose(), &weights.w12);
    Ok(r)
}

fn check_dims(effects: &SpatialEffects, weights: &WeightPair) -> Result<()> {
    if effects.psi1.nrows() != effects.psi2.nrows() {
        return Err(Error::Shape("psi matrices differ in size".into()));
    }
    if weights.w21.nrows() != weights.n || weights.w12.nrows() != weights.n {
        return Err(Error::Shape("weight matrices differ in size".into()));
    }
    Ok(())
}

/// Assumption-1 stability check on the np x np matrix
/// `M = psi1^T (x) w21 + psi2^T (x) w12`: all real parts of the spectrum in
/// (-1, 1) and det(I - M) > 0. Eigenvalues can be complex for non-symmetric
/// inputs, so real parts are tested.
///
/// For np beyond dense-eigensolver territory a conservative norm bound on the
/// spectral radius short-circuits clear-pass cases before the dense solve.
pub fn stability_check(effects: &SpatialEffects, weights: &WeightPair) -> Result<bool> {
    check_dims(effects, weights)?;
    let p = effects.p();
    let n = weights.n;
    let np = n * p;
    if np > 2000 && norm_bound(effects, weights) < 1.0 {
        return Ok(true);
    }
    let mut m = linalg::kron(&effects.psi1.transpose(), &weights.w21);
    m += linalg::kron(&effects.psi2.transpose(), &weights.w12);
    let eigs = linalg::eig_complex(&m)?;
    let re_ok = eigs.iter().all(|e| e.re > -1.0 && e.re < 1.0);
    if !re_ok {
        return Ok(false);
    }
    let r = DMatrix::identity(np, np) - m;
    let (_, sign) = linalg::logdet_lu(&r)?;
    Ok(sign > 0.0)
}

/// Upper bound on the spectral radius of M from the row-sum norm. Weight rows
/// sum to at most 1 and the two Kronecker terms have disjoint row supports,
/// so the bound reduces to the largest column 1-norm over both psi matrices.
fn norm_bound(effects: &SpatialEffects, weights: &WeightPair) -> f64 {
    let p = effects.p();
    let mut worst: f64 = 0.0;
    for (psi, w) in [(&effects.psi1, &weights.w21), (&effects.psi2, &weights.w12)] {
        let wmax = (0..weights.n)
            .map(|i| w.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        for j in 0..p {
            let col: f64 = psi.column(j).iter().map(|v| v.abs()).sum();
            worst = worst.max(col * wmax);
        }
    }
    worst
}

/// Apply the spatial filter: `E = X - w21 X psi1 - w12 X psi2`.
pub fn spatial_filter_apply(
    effects: &SpatialEffects,
    weights: &WeightPair,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = effects.p();
    let n = weights.n;
    if x.nrows() != n || x.ncols() != p {
        return Err(Error::Shape(format!(
            "data must be {n} x {p}, got {} x {}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x - &weights.w21 * x * &effects.psi1 - &weights.w12 * x * &effects.psi2)
}

/// Fast exact spectral engine for the filter determinant and the stability
/// check.
///
/// With exactly two categories the weight matrices have complementary
/// supports: w21 maps category-2 columns onto category-1 rows and w12 the
/// reverse, so both are nilpotent and M is block anti-diagonal after
/// partitioning the locations. Its nonzero spectrum is
/// `{ +-sqrt(mu * nu) : mu in eig(Q P), nu in eig(psi1 psi2) }` and
/// `det(I - M) = prod (1 - mu nu)` over all pairs, where P and Q are the
/// active blocks of w21 and w12. Only the p x p eigensolve depends on the
/// effects, so per-proposal cost drops from an np x np factorization to p x p.
/// Arbitrary weight matrices that lack this structure fall back to the dense
/// route.
#[derive(Clone, Debug)]
pub struct FilterEngine {
    kind: EngineKind,
}

#[derive(Clone, Debug)]
enum EngineKind {
    Bipartite { mu: Vec<Complex<f64>> },
    Dense { weights: WeightPair },
}

impl FilterEngine {
    pub fn new(weights: &WeightPair) -> Result<FilterEngine> {
        match bipartite_partition(weights) {
            Some((s1, s2)) => {
                let mu = if s1.is_empty() || s2.is_empty() {
                    Vec::new()
                } else {
                    let p_blk = submatrix(&weights.w21, &s1, &s2);
                    let q_blk = submatrix(&weights.w12, &s2, &s1);
                    // eig(QP) and eig(PQ) share nonzero values; take the smaller product
                    let prod = if s2.len() <= s1.len() {
                        &q_blk * &p_blk
                    } else {
                        &p_blk * &q_blk
                    };
                    linalg::eig_complex(&prod)?
                };
                Ok(FilterEngine { kind: EngineKind::Bipartite { mu } })
            }
            None => Ok(FilterEngine { kind: EngineKind::Dense { weights: weights.clone() } }),
        }
    }

    /// True when the cheap reduced route is active.
    pub fn is_bipartite(&self) -> bool {
        matches!(self.kind, EngineKind::Bipartite { .. })
    }

    /// log det(I - M); `Err(Stability)` when the determinant is not positive.
    pub fn log_det_filter(&self, effects: &SpatialEffects) -> Result<f64> {
        match &self.kind {
            EngineKind::Bipartite { mu } => {
                let nu = linalg::eig_complex(&(&effects.psi1 * &effects.psi2))?;
                let mut log_abs = 0.0;
                let mut phase = 0.0;
                for m in mu {
                    for v in &nu {
                        let z = Complex::new(1.0, 0.0) - m * v;
                        let nrm = z.norm();
                        if nrm == 0.0 {
                            return Err(Error::Stability("det(I - M) = 0".into()));
                        }
                        log_abs += nrm.ln();
                        phase += z.im.atan2(z.re);
                    }
                }
                // conjugate pairs cancel the phase up to multiples of 2 pi;
                // an odd multiple of pi means a negative determinant
                let sign = phase.cos();
                if sign <= 0.0 {
                    return Err(Error::Stability("det(I - M) <= 0".into()));
                }
                Ok(log_abs)
            }
            EngineKind::Dense { weights } => {
                let r = filter_matrix(effects, weights)?;
                let (log_abs, sign) = linalg::logdet_lu(&r)?;
                if sign <= 0.0 {
                    return Err(Error::Stability("det(I - M) <= 0".into()));
                }
                Ok(log_abs)
            }
        }
    }

    /// Assumption-1 check, equivalent to `stability_check`.
    pub fn stable(&self, effects: &SpatialEffects) -> Result<bool> {
        match &self.kind {
            EngineKind::Bipartite { mu } => {
                let nu = linalg::eig_complex(&(&effects.psi1 * &effects.psi2))?;
                let mut det_phase = 0.0;
                for m in mu {
                    for v in &nu {
                        let prod = m * v;
                        if prod.sqrt().re.abs() >= 1.0 {
                            return Ok(false);
                        }
                        let z = Complex::new(1.0, 0.0) - prod;
                        if z.norm() == 0.0 {
                            return Ok(false);
                        }
                        det_phase += z.im.atan2(z.re);
                    }
                }
                Ok(det_phase.cos() > 0.0)
            }
            EngineKind::Dense { weights } => stability_check(effects, weights),
        }
    }
}

/// Partition locations into (category-1 set, category-2 set) from the weight
/// supports, or None when the matrices lack the two-category structure.
fn bipartite_partition(weights: &WeightPair) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = weights.n;
    let mut in_s1 = vec![false; n];
    let mut in_s2 = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if weights.w21[(i, j)] != 0.0 {
                in_s1[i] = true;
                in_s2[j] = true;
            }
            if weights.w12[(i, j)] != 0.0 {
                in_s2[i] = true;
                in_s1[j] = true;
            }
        }
    }
    if (0..n).any(|i| in_s1[i] && in_s2[i]) {
        return None;
    }
    let s1: Vec<usize> = (0..n).filter(|&i| in_s1[i]).collect();
    let s2: Vec<usize> = (0..n).filter(|&i| in_s2[i]).collect();
    Some((s1, s2))
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}
