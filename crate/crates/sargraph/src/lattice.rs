//! Lattice layouts and category-pair spatial weight matrices.
//!
//! A layout is an explicit list of locations with a category label (at most
//! two distinct labels) and a symmetric neighbour relation. Weight matrices
//! restrict the row-normalized adjacency to cross-category neighbour pairs:
//! `w21` carries the effects of category-2 values onto category-1 locations,
//! `w12` the reverse ordering.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Explicit lattice layout. Locations are 0-indexed internally; the file
/// format uses 1-based ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    /// Distinct category labels in lexicographic order (1 or 2). The first
    /// label plays the role of "category 1" in `WeightPair`.
    labels: Vec<String>,
    /// Per-location index into `labels`.
    cats: Vec<usize>,
    /// Unordered neighbour pairs, stored as (i, j) with i < j, sorted, deduped.
    pairs: Vec<(usize, usize)>,
}

impl Layout {
    /// Build a layout from per-location labels and unordered neighbour pairs.
    pub fn new<S: AsRef<str>>(categories: &[S], neighbours: &[(usize, usize)]) -> Result<Layout> {
        let n = categories.len();
        if n == 0 {
            return Err(Error::Config("layout has no locations".into()));
        }
        let mut labels: Vec<String> = categories.iter().map(|c| c.as_ref().to_string()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() > 2 {
            return Err(Error::Config(format!(
                "layout has {} distinct categories; at most two are supported",
                labels.len()
            )));
        }
        let cats: Vec<usize> = categories
            .iter()
            .map(|c| labels.iter().position(|l| l == c.as_ref()).unwrap())
            .collect();
        let mut pairs = Vec::with_capacity(neighbours.len());
        for &(a, b) in neighbours {
            if a == b {
                return Err(Error::Config(format!(
                    "neighbour relation must be irreflexive (location {})",
                    a + 1
                )));
            }
            if a >= n || b >= n {
                return Err(Error::Config(format!(
                    "neighbour pair ({}, {}) is out of range for {} locations",
                    a + 1,
                    b + 1,
                    n
                )));
            }
            pairs.push((a.min(b), a.max(b)));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Layout { labels, cats, pairs })
    }

    /// Alternating-category strip of `n` locations along a chain, the toy
    /// design used for the simulation weight matrices.
    pub fn strip(n: usize) -> Layout {
        let categories: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "c1" } else { "c2" }).collect();
        let pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Layout::new(&categories, &pairs).expect("strip layout is always valid")
    }

    /// Rectangular grid of labels with 4-neighbour adjacency. Row-major
    /// location ids; all rows must have equal length.
    pub fn from_grid<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Layout> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Config("grid must be non-empty".into()));
        }
        let w = rows[0].len();
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::Config("grid rows must have equal length".into()));
        }
        let h = rows.len();
        let mut categories = Vec::with_capacity(w * h);
        for row in rows {
            for c in row {
                categories.push(c.as_ref().to_string());
            }
        }
        let mut pairs = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let id = r * w + c;
                if c + 1 < w {
                    pairs.push((id, id + 1));
                }
                if r + 1 < h {
                    pairs.push((id, id + w));
                }
            }
        }
        Layout::new(&categories, &pairs)
    }

    pub fn len(&self) -> usize {
        self.cats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cats.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn category_of(&self, i: usize) -> &str {
        &self.labels[self.cats[i]]
    }

    pub fn neighbour_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn are_neighbours(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search(&key).is_ok()
    }

    fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("unknown category label `{label}`")))
    }

    /// Parse the layout file format: comma-separated with header
    /// `id,category,neighbours`, where neighbours is a semicolon-separated
    /// list of 1-based ids. The relation is symmetrized on load; warnings
    /// report pairs that were only listed on one side.
    pub fn parse_csv(text: &str) -> Result<(Layout, Vec<String>)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("layout file is empty".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["id", "category", "neighbours"] {
            return Err(Error::Parse(format!(
                "layout header must be `id,category,neighbours`, got `{header}`"
            )));
        }
        let mut entries: Vec<(usize, String, Vec<usize>)> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "layout line {}: expected 3 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("layout line {}: bad id `{}`", lineno + 2, fields[0])))?;
            let mut nbrs = Vec::new();
            if !fields[2].is_empty() {
                for tok in fields[2].split(';') {
                    let tok = tok.trim();
                    if tok.is_empty() {
                        continue;
                    }
                    let j: usize = tok.parse().map_err(|_| {
                        Error::Parse(format!("layout line {}: bad neighbour id `{tok}`", lineno + 2))
                    })?;
                    nbrs.push(j);
                }
            }
            entries.push((id, fields[1].to_string(), nbrs));
        }
        let n = entries.len();
        let mut seen = vec![false; n + 1];
        for (id, _, _) in &entries {
            if *id < 1 || *id > n || seen[*id] {
                return Err(Error::Parse(format!(
                    "ids must be exactly 1..{n} with no repeats (offending id {id})"
                )));
            }
            seen[*id] = true;
        }
        entries.sort_by_key(|e| e.0);
        let categories: Vec<String> = entries.iter().map(|e| e.1.clone()).collect();

        let mut listed = std::collections::BTreeSet::new();
        for (id, _, nbrs) in &entries {
            for &j in nbrs {
                if j < 1 || j > n {
                    return Err(Error::Parse(format!(
                        "location {id} lists out-of-range neighbour {j}"
                    )));
                }
                if j == *id {
                    return Err(Error::Parse(format!("location {id} lists itself as neighbour")));
                }
                listed.insert((*id, j));
            }
        }
        let mut warnings = Vec::new();
        let mut pairs = Vec::new();
        for &(a, b) in &listed {
            if a < b {
                pairs.push((a - 1, b - 1));
                if !listed.contains(&(b, a)) {
                    warnings.push(format!(
                        "neighbour relation symmetrized: {a} lists {b} but {b} does not list {a}"
                    ));
                }
            } else if !listed.contains(&(b, a)) {
                pairs.push((b - 1, a - 1));
                warnings.push(format!(
                    "neighbour relation symmetrized: {a} lists {b} but {b} does not list {a}"
                ));
            }
        }
        Ok((Layout::new(&categories, &pairs)?, warnings))
    }

    /// Serialize to the layout file format (inverse of `parse_csv`).
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.pairs {
            nbrs[a].push(b + 1);
            nbrs[b].push(a + 1);
        }
        let mut out = String::from("id,category,neighbours\n");
        for i in 0..n {
            nbrs[i].sort_unstable();
            let list: Vec<String> = nbrs[i].iter().map(|j| j.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", i + 1, self.category_of(i), list.join(";")));
        }
        out
    }
}

/// Row-normalized cross-category weight matrices for one layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightPair {
    /// Effects of category-2 values onto category-1 locations.
    pub w21: DMatrix<f64>,
    /// Effects of category-1 values onto category-2 locations.
    pub w12: DMatrix<f64>,
    pub n: usize,
}

impl WeightPair {
    pub fn new(w21: DMatrix<f64>, w12: DMatrix<f64>) -> Result<WeightPair> {
        let n = w21.nrows();
        if w21.ncols() != n || w12.nrows() != n || w12.ncols() != n {
            return Err(Error::Shape(format!(
                "weight matrices must both be n x n, got {}x{} and {}x{}",
                w21.nrows(),
                w21.ncols(),
                w12.nrows(),
                w12.ncols()
            )));
        }
        Ok(WeightPair { w21, w12, n })
    }
}

/// Binary cross-category adjacency: entry (i, j) is 1 iff location i has
/// category `to_cat`, location j has category `from_cat`, and i, j are
/// neighbours.
pub fn build_adjacency(layout: &Layout, from_cat: &str, to_cat: &str) -> Result<DMatrix<f64>> {
    if from_cat == to_cat {
        return Err(Error::Config(
            "within-category spatial effects are not modeled (from_cat = to_cat)".into(),
        ));
    }
    let from = layout.label_index(from_cat)?;
    let to = layout.label_index(to_cat)?;
    let n = layout.len();
    let mut a = DMatrix::zeros(n, n);
    for &(i, j) in layout.neighbour_pairs() {
        if layout.cats[i] == to && layout.cats[j] == from {
            a[(i, j)] = 1.0;
        }
        if layout.cats[j] == to && layout.cats[i] == from {
            a[(j, i)] = 1.0;
        }
    }
    Ok(a)
}

/// Divide each nonzero row by its count of nonzero entries; zero rows stay
/// zero (they are legal and expected for locations without cross-category
/// neighbours).
pub fn row_normalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = a.clone();
    for i in 0..w.nrows() {
        let count = w.row(i).iter().filter(|v| **v != 0.0).count();
        if count > 0 {
            let inv = 1.0 / count as f64;
            for j in 0..w.ncols() {
                w[(i, j)] *= inv;
            }
        }
    }
    w
}

/// Both weight matrices for a layout. A single-category layout yields zero
/// matrices.
pub fn build_weights(layout: &Layout) -> Result<WeightPair> {
    let n = layout.len();
    if layout.labels.len() < 2 {
        return WeightPair::new(DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    }
    let c1 = layout.labels[0].clone();
    let c2 = layout.labels[1].clone();
    let w21 = row_normalize(&build_adjacency(layout, &c2, &c1)?);
    let w12 = row_normalize(&build_adjacency(layout, &c1, &c2)?);
    WeightPair::new(w21, w12)
}
