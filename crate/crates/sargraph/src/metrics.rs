//! Discrepancy measures between ground truth and estimates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gibbs::EdgeSelection;

/// Frobenius norm of the difference.
pub fn frobenius(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::Shape(format!(
            "frobenius: {:?} vs {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    Ok((truth - estimate).norm())
}

/// Root mean square error over all 2 p^2 spatial effect entries, diagonals
/// and restricted entries included.
pub fn rmse(
    truth: (&DMatrix<f64>, &DMatrix<f64>),
    estimate: (&DMatrix<f64>, &DMatrix<f64>),
) -> Result<f64> {
    let p = truth.0.nrows();
    for m in [truth.0, truth.1, estimate.0, estimate.1] {
        if m.shape() != (p, p) {
            return Err(Error::Shape("rmse: all matrices must be p x p".into()));
        }
    }
    let mut sum = 0.0;
    for (t, e) in [(truth.0, estimate.0), (truth.1, estimate.1)] {
        for i in 0..p {
            for j in 0..p {
                let d = t[(i, j)] - e[(i, j)];
                sum += d * d;
            }
        }
    }
    Ok((sum / (2.0 * (p * p) as f64)).sqrt())
}

/// F1 score of the selected spatial effects against the true nonzero masks,
/// restricted to the `universe` entries (by default the free entries; the
/// tight-prior restricted ones are excluded unless the caller opts in).
///
/// Conventions at the boundaries: no discoveries with true edges present
/// gives 0; both sets empty gives 1.
pub fn f1(
    true_nonzero: [&DMatrix<bool>; 2],
    selected: [&DMatrix<bool>; 2],
    universe: [&DMatrix<bool>; 2],
) -> Result<f64> {
    let shape = true_nonzero[0].shape();
    for m in true_nonzero.iter().chain(selected.iter()).chain(universe.iter()) {
        if m.shape() != shape {
            return Err(Error::Shape("f1: mask shapes differ".into()));
        }
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for k in 0..2 {
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                if !universe[k][(i, j)] {
                    continue;
                }
                let truth = true_nonzero[k][(i, j)];
                let hit = selected[k][(i, j)];
                match (truth, hit) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
    }
    if tp == 0 {
        return Ok(if fp == 0 && fn_ == 0 { 1.0 } else { 0.0 });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F1 of an edge selection against true effect matrices.
pub fn f1_of_selection(
    truth: (&DMatrix<f64>, &DMatrix<f64>),
    selection: &EdgeSelection,
    universe: [&DMatrix<bool>; 2],
) -> Result<f64> {
    let nz = |m: &DMatrix<f64>| m.map(|v| v != 0.0);
    let t1 = nz(truth.0);
    let t2 = nz(truth.1);
    f1([&t1, &t2], [&selection.between1, &selection.between2], universe)
}

/// One metrics record as a comma-separated row.
pub fn metrics_csv_row(
    frobenius_norm: f64,
    rmse_value: f64,
    f1_value: Option<f64>,
    seed: u64,
    config_hash: &str,
) -> String {
    let f1s = f1_value.map(|v| format!("{v}")).unwrap_or_default();
    format!("fn,rmse,f1,seed,config_hash\n{frobenius_norm},{rmse_value},{f1s},{seed},{config_hash}\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bmat(p: usize, trues: &[(usize, usize)]) -> DMatrix<bool> {
        DMatrix::from_fn(p, p, |i, j| trues.contains(&(i, j)))
    }

    #[test]
    fn frobenius_examples() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert_eq!(frobenius(&a, &a).unwrap(), 0.0);
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_relative_eq!(frobenius(&a, &z).unwrap(), 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn frobenius_matches_double_loop_oracle() {
        let a = DMatrix::from_fn(4, 4, |i, j| ((i * 5 + j) as f64).sin());
        let b = DMatrix::from_fn(4, 4, |i, j| ((i + j * 3) as f64).cos());
        let mut sum = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                sum += (a[(i, j)] - b[(i, j)]).powi(2);
            }
        }
        assert_relative_eq!(frobenius(&a, &b).unwrap(), sum.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rmse_examples() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(rmse((&z, &z), (&z, &z)).unwrap(), 0.0);
        let mut e = z.clone();
        e[(0, 1)] = 0.4;
        // single entry differing by 0.4 over 2 p^2 = 8 slots
        assert_relative_eq!(
            rmse((&z, &z), (&e, &z)).unwrap(),
            (0.16_f64 / 8.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn f1_boundary_conventions() {
        let all = DMatrix::from_element(2, 2, true);
        let none = DMatrix::from_element(2, 2, false);
        let some = bmat(2, &[(0, 1), (1, 0), (1, 1)]);
        // perfect selection
        assert_eq!(f1([&some, &none], [&some, &none], [&all, &all]).unwrap(), 1.0);
        // no discoveries, true edges exist
        assert_eq!(f1([&some, &none], [&none, &none], [&all, &all]).unwrap(), 0.0);
        // both empty
        assert_eq!(f1([&none, &none], [&none, &none], [&all, &all]).unwrap(), 1.0);
    }

    #[test]
    fn f1_partial_example() {
        // 3 true, 2 selected of which 2 correct: precision 1, recall 2/3
        let all = DMatrix::from_element(2, 2, true);
        let none = DMatrix::from_element(2, 2, false);
        let truth = bmat(2, &[(0, 0), (0, 1), (1, 0)]);
        let sel = bmat(2, &[(0, 0), (0, 1)]);
        assert_relative_eq!(
            f1([&truth, &none], [&sel, &none], [&all, &all]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn universe_filters_restricted_entries() {
        let none = DMatrix::from_element(2, 2, false);
        let truth = bmat(2, &[(0, 0)]);
        let sel = bmat(2, &[(0, 0)]);
        // the only true/selected entry is outside the universe
        let uni = bmat(2, &[(0, 1), (1, 0)]);
        assert_eq!(
            f1([&truth, &none], [&sel, &none], [&uni, &uni]).unwrap(),
            1.0
        );
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_simultaneous_permutation(seed in 0u64..500) {
            let mut rng = crate::dist::Rng::from_seed(seed);
            let p = 4;
            let a1 = DMatrix::from_fn(p, p, |_, _| rng.standard_normal());
            let a2 = DMatrix::from_fn(p, p, |_, _| rng.standard_normal());
            let b1 = DMatrix::from_fn(p, p, |_, _| rng.standard_normal());
            let b2 = DMatrix::from_fn(p, p, |_, _| rng.standard_normal());
            let perm = [2usize, 0, 3, 1];
            let pm = DMatrix::from_fn(p, p, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
            let conj = |m: &DMatrix<f64>| &pm * m * pm.transpose();
            let r1 = rmse((&a1, &a2), (&b1, &b2)).unwrap();
            let r2 = rmse((&conj(&a1), &conj(&a2)), (&conj(&b1), &conj(&b2))).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-12);
            let f_1 = frobenius(&a1, &b1).unwrap();
            let f_2 = frobenius(&conj(&a1), &conj(&b1)).unwrap();
            prop_assert!((f_1 - f_2).abs() < 1e-12);
        }
    }
}
