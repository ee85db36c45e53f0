//! Ground-truth model and data generation for the simulation protocol:
//! network-structured precision matrices, restricted sparse or dense effect
//! matrices, and lattice data drawn through the inverse spatial filter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::Rng;
use crate::error::{Error, Result};
use crate::lattice::WeightPair;
use crate::linalg;
use crate::params::{
    apply_restriction, filter_matrix, FilterEngine, Restriction, SpatialEffects,
};

/// Network structure underlying the within-location precision matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    Random,
    ScaleFree,
    Star,
}

impl std::str::FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<NetworkKind> {
        match s {
            "random" => Ok(NetworkKind::Random),
            "scale-free" | "scale_free" => Ok(NetworkKind::ScaleFree),
            "star" => Ok(NetworkKind::Star),
            other => Err(Error::Config(format!("unknown network kind `{other}`"))),
        }
    }
}

/// Binary symmetric adjacency with zero diagonal.
///
/// `random` draws each pair independently with `edge_prob`; `scale_free`
/// grows by preferential attachment adding one edge per new node (a tree);
/// `star` attaches every node to node 1.
pub fn gen_network(
    kind: NetworkKind,
    p: usize,
    edge_prob: f64,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::Config(format!("network needs p >= 2, got {p}")));
    }
    let mut adj = DMatrix::zeros(p, p);
    let connect = |a: usize, b: usize, adj: &mut DMatrix<f64>| {
        adj[(a, b)] = 1.0;
        adj[(b, a)] = 1.0;
    };
    match kind {
        NetworkKind::Random => {
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(Error::Config(format!("edge_prob must be in [0,1], got {edge_prob}")));
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    if rng.uniform() < edge_prob {
                        connect(i, j, &mut adj);
                    }
                }
            }
        }
        NetworkKind::ScaleFree => {
            // start from a single edge, then attach each new node to one
            // existing node chosen proportionally to its degree
            let mut degree = vec![0usize; p];
            connect(0, 1, &mut adj);
            degree[0] = 1;
            degree[1] = 1;
            for new in 2..p {
                let total: usize = degree[..new].iter().sum();
                let mut ticket = rng.uniform() * total as f64;
                let mut target = 0;
                for (node, d) in degree[..new].iter().enumerate() {
                    ticket -= *d as f64;
                    if ticket <= 0.0 {
                        target = node;
                        break;
                    }
                }
                connect(new, target, &mut adj);
                degree[new] += 1;
                degree[target] += 1;
            }
        }
        NetworkKind::Star => {
            for j in 1..p {
                connect(0, j, &mut adj);
            }
        }
    }
    Ok(adj)
}

/// SPD precision matrix whose off-diagonal support matches the adjacency:
/// edge magnitudes uniform on [0.2, 0.6] with random sign, diagonal set to
/// the row-wise absolute sum plus 0.1 so diagonal dominance forces positive
/// definiteness.
pub fn gen_precision(adjacency: &DMatrix<f64>, rng: &mut Rng) -> Result<DMatrix<f64>> {
    let p = adjacency.nrows();
    if adjacency.ncols() != p {
        return Err(Error::Shape("adjacency must be square".into()));
    }
    if !linalg::is_symmetric(adjacency, 0.0) || (0..p).any(|i| adjacency[(i, i)] != 0.0) {
        return Err(Error::Config("adjacency must be symmetric with zero diagonal".into()));
    }
    let mut theta = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if adjacency[(i, j)] != 0.0 {
                let magnitude = rng.uniform_range(0.2, 0.6);
                let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                theta[(i, j)] = sign * magnitude;
                theta[(j, i)] = theta[(i, j)];
            }
        }
    }
    for i in 0..p {
        let row_abs: f64 = (0..p).filter(|j| *j != i).map(|j| theta[(i, j)].abs()).sum();
        theta[(i, i)] = row_abs + 0.1;
    }
    Ok(theta)
}

/// How many nonzero effects the sparse scenario draws per triangle.
pub fn sparse_nonzero_count(p: usize) -> usize {
    3 * p * (p - 1) / 8
}

/// Ground-truth spatial effects per the simulation protocol.
///
/// Sparse draws `3p(p-1)/8` triangular off-diagonal entries uniform on
/// (-1, 1) and zeroes the rest; dense draws all of them. Diagonals come from
/// N(0, tau). The draft is then shaped by the restriction and both matrices
/// are jointly rescaled by the smallest factor in {1, 0.9, 0.81, ...} that
/// satisfies the stability condition for the target weights.
pub fn gen_effects(
    restriction: Restriction,
    sparse: bool,
    p: usize,
    tau: f64,
    weights: &WeightPair,
    rng: &mut Rng,
) -> Result<SpatialEffects> {
    let upper: Vec<(usize, usize)> =
        (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let mut drafts = [DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    for draft in drafts.iter_mut() {
        if sparse {
            let take = sparse_nonzero_count(p);
            let mut slots = upper.clone();
            // Fisher-Yates prefix shuffle
            let len = slots.len();
            for t in 0..take.min(len) {
                let pick = t + (rng.uniform() * (len - t) as f64) as usize;
                slots.swap(t, pick.min(len - 1));
            }
            for &(i, j) in slots.iter().take(take) {
                draft[(i, j)] = rng.uniform_range(-1.0, 1.0);
            }
        } else {
            for &(i, j) in &upper {
                draft[(i, j)] = rng.uniform_range(-1.0, 1.0);
            }
        }
        for i in 0..p {
            draft[(i, i)] = rng.standard_normal() * tau.sqrt();
        }
    }
    // masked entries are the known truth; unmasked entries keep their draws
    if let Restriction::KnownMask(mask) = &restriction {
        for m in mask {
            drafts[m.k][(m.i, m.j)] = m.mean;
        }
    }
    let effects = apply_restriction(
        drafts[0].clone(),
        drafts[1].clone(),
        restriction,
        tau,
        0.0,
    )?;
    let engine = FilterEngine::new(weights)?;
    let mut factor = 1.0;
    for _ in 0..200 {
        let mut candidate = effects.clone();
        candidate.psi1 *= factor;
        candidate.psi2 *= factor;
        if engine.stable(&candidate)? {
            return Ok(candidate);
        }
        factor *= 0.9;
    }
    Err(Error::Stability(
        "could not rescale the drawn effects into the stable region".into(),
    ))
}

/// Draw lattice data: residual rows iid N(0, theta^{-1}), then
/// `vec(X) = R(psi)^{-1} vec(E)` through a dense linear solve.
pub fn gen_data(
    effects: &SpatialEffects,
    theta: &DMatrix<f64>,
    weights: &WeightPair,
    n: usize,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    gen_data_with_residuals(effects, theta, weights, n, rng).map(|(x, _)| x)
}

/// `gen_data` variant that also returns the residual matrix the data were
/// built from, for round-trip checks against the spatial filter.
pub fn gen_data_with_residuals(
    effects: &SpatialEffects,
    theta: &DMatrix<f64>,
    weights: &WeightPair,
    n: usize,
    rng: &mut Rng,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = effects.p();
    if weights.n != n {
        return Err(Error::Shape(format!(
            "weights describe {} locations but n = {n}",
            weights.n
        )));
    }
    let engine = FilterEngine::new(weights)?;
    if !engine.stable(effects)? {
        return Err(Error::Stability("effects violate the stability condition".into()));
    }
    let chol = theta
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("theta must be positive definite".into()))?;
    let mut e = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_fn(p, |_, _| rng.standard_normal());
        // L^T x = z gives x ~ N(0, (L L^T)^{-1}) = N(0, theta^{-1})
        let row = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numeric("triangular solve failed in data generation".into()))?;
        for j in 0..p {
            e[(i, j)] = row[j];
        }
    }
    let r = filter_matrix(effects, weights)?;
    let vec_e = DVector::from_fn(n * p, |t, _| e[(t % n, t / n)]);
    let lu = r.lu();
    let vec_x = lu
        .solve(&vec_e)
        .ok_or_else(|| Error::Numeric("filter matrix is singular".into()))?;
    Ok((DMatrix::from_fn(n, p, |i, j| vec_x[j * n + i]), e))
}

/// Data file with header `v1..vp`.
pub fn data_to_csv(x: &DMatrix<f64>) -> String {
    let p = x.ncols();
    let header: Vec<String> = (1..=p).map(|j| format!("v{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..x.nrows() {
        let fields: Vec<String> = (0..p).map(|j| format!("{}", x[(i, j)])).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parse the data file format written by `data_to_csv`.
pub fn data_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("data file is empty".into()))?;
    let p = header.split(',').count();
    let mut values = Vec::new();
    let mut n = 0;
    for (lineno, line) in lines.enumerate() {
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != p {
            return Err(Error::Parse(format!(
                "data line {}: {} fields, expected {p}",
                lineno + 2,
                row.len()
            )));
        }
        for field in row {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("data line {}: bad float `{field}`", lineno + 2)))?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse("data file has no rows".into()));
    }
    Ok(DMatrix::from_row_slice(n, p, &values))
}

/// Ground-truth file payload for the metrics harness.
#[derive(Serialize, Deserialize)]
pub struct TruthFile {
    pub seed: u64,
    pub config_hash: String,
    pub psi1: Vec<Vec<f64>>,
    pub psi2: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

impl TruthFile {
    pub fn new(
        effects: &SpatialEffects,
        theta: &DMatrix<f64>,
        seed: u64,
        config_hash: &str,
    ) -> TruthFile {
        let rows = |m: &DMatrix<f64>| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        TruthFile {
            seed,
            config_hash: config_hash.to_string(),
            psi1: rows(&effects.psi1),
            psi2: rows(&effects.psi2),
            theta: rows(theta),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("truth serializes")
    }

    pub fn from_toml(text: &str) -> Result<TruthFile> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("truth file: {e}")))
    }

    pub fn matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let build = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
            let r = rows.len();
            if r == 0 || rows.iter().any(|row| row.len() != rows[0].len()) {
                return Err(Error::Parse("ragged matrix in truth file".into()));
            }
            Ok(DMatrix::from_fn(r, rows[0].len(), |i, j| rows[i][j]))
        };
        Ok((build(&self.psi1)?, build(&self.psi2)?, build(&self.theta)?))
    }
}
