//! Spatial chain graph construction and export.
//!
//! Vertices are (variable, category) pairs. Undirected within-location edges
//! come from the precision off-diagonals; directed between-location edges
//! from the two effect matrices: `psi2[i, j]` selected puts an edge from
//! variable i of category 1 onto variable j of category 2, `psi1[i, j]` the
//! reverse ordering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::EdgeSelection;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UndirectedEdge {
    /// 0-based variable indices, i < j.
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectedEdge {
    /// Category index of the source vertex (0 or 1).
    pub from_cat: usize,
    pub from_var: usize,
    pub to_var: usize,
    pub weight: f64,
}

/// Mixed graph with undirected within-location and directed between-location
/// weighted edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainGraph {
    pub p: usize,
    /// Category labels, index 0 and 1.
    pub labels: [String; 2],
    pub undirected: Vec<UndirectedEdge>,
    pub directed: Vec<DirectedEdge>,
}

/// Assemble the chain graph from estimates and the credible-interval
/// selection; weights are the posterior means of the selected elements.
pub fn build_chain_graph(
    theta_hat: &DMatrix<f64>,
    effects_hat: (&DMatrix<f64>, &DMatrix<f64>),
    selection: &EdgeSelection,
    labels: [String; 2],
) -> Result<ChainGraph> {
    let p = theta_hat.nrows();
    if theta_hat.ncols() != p
        || effects_hat.0.shape() != (p, p)
        || effects_hat.1.shape() != (p, p)
        || selection.within.shape() != (p, p)
        || selection.between1.shape() != (p, p)
        || selection.between2.shape() != (p, p)
    {
        return Err(Error::Shape("graph inputs must all be p x p".into()));
    }
    let mut undirected = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if selection.within[(i, j)] {
                undirected.push(UndirectedEdge { i, j, weight: theta_hat[(i, j)] });
            }
        }
    }
    let mut directed = Vec::new();
    // psi2: category 1 onto category 2; psi1: category 2 onto category 1
    for i in 0..p {
        for j in 0..p {
            if selection.between2[(i, j)] {
                directed.push(DirectedEdge {
                    from_cat: 0,
                    from_var: i,
                    to_var: j,
                    weight: effects_hat.1[(i, j)],
                });
            }
            if selection.between1[(i, j)] {
                directed.push(DirectedEdge {
                    from_cat: 1,
                    from_var: i,
                    to_var: j,
                    weight: effects_hat.0[(i, j)],
                });
            }
        }
    }
    undirected.sort_by_key(|e| (e.i, e.j));
    directed.sort_by_key(|e| (e.from_cat, e.from_var, e.to_var));
    Ok(ChainGraph { p, labels, undirected, directed })
}

impl ChainGraph {
    pub fn edge_count(&self) -> usize {
        self.undirected.len() + self.directed.len()
    }

    /// Graphviz dot text. Vertex ordering and attribute layout are
    /// deterministic, so identical graphs give byte-identical output.
    /// Within-location edges are dotted and drawn once between the category-1
    /// vertices; category-1 -> category-2 effects are dashed, the reverse
    /// solid; edge color encodes the sign and width the magnitude.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph spatial_chain_graph {\n");
        out.push_str("  rankdir=LR;\n  node [shape=ellipse];\n");
        for (cat, label) in self.labels.iter().enumerate() {
            out.push_str(&format!("  subgraph cluster_{cat} {{\n    label=\"{label}\";\n"));
            for v in 0..self.p {
                out.push_str(&format!("    c{cat}_v{} [label=\"v{} ({label})\"];\n", v + 1, v + 1));
            }
            out.push_str("  }\n");
        }
        for e in &self.undirected {
            for cat in 0..2 {
                out.push_str(&format!(
                    "  c{cat}_v{} -> c{cat}_v{} [dir=none, style=dotted, color={}, penwidth={:.2}];\n",
                    e.i + 1,
                    e.j + 1,
                    sign_color(e.weight),
                    penwidth(e.weight)
                ));
            }
        }
        for e in &self.directed {
            let (from_cat, to_cat) = (e.from_cat, 1 - e.from_cat);
            let style = if e.from_cat == 0 { "dashed" } else { "solid" };
            out.push_str(&format!(
                "  c{from_cat}_v{} -> c{to_cat}_v{} [style={style}, color={}, penwidth={:.2}];\n",
                e.from_var + 1,
                e.to_var + 1,
                sign_color(e.weight),
                penwidth(e.weight)
            ));
        }
        out.push_str("}\n");
        out
    }

    /// Structured text serialization with full weights.
    pub fn to_structured(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_structured(text: &str) -> Result<ChainGraph> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph file: {e}")))
    }
}

fn sign_color(w: f64) -> &'static str {
    if w >= 0.0 {
        "blue"
    } else {
        "red"
    }
}

fn penwidth(w: f64) -> f64 {
    1.0 + 2.0 * w.abs().min(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked 4-variable example: zero patterns of the estimate matrices
    /// translate into the figure's edge sets.
    fn worked_example() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, EdgeSelection) {
        let p = 4;
        // psi_{c1,c2}: effects of category 1 on category 2 (our psi2)
        let psi_c1c2 = DMatrix::from_row_slice(
            p,
            p,
            &[
                0.5, 0.0, 0.0, 0.6, //
                0.0, 0.0, 0.7, 0.0, //
                0.0, 0.0, 0.0, -0.4, //
                0.0, 0.0, 0.0, 0.3,
            ],
        );
        // psi_{c2,c1} (our psi1)
        let psi_c2c1 = DMatrix::from_row_slice(
            p,
            p,
            &[
                0.0, 0.2, 0.0, 0.0, //
                0.0, -0.5, 0.0, 0.9, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        let theta = DMatrix::from_row_slice(
            p,
            p,
            &[
                1.0, 0.0, 0.3, -0.2, //
                0.0, 1.0, 0.4, 0.0, //
                0.3, 0.4, 1.0, 0.5, //
                -0.2, 0.0, 0.5, 1.0,
            ],
        );
        let sel = EdgeSelection {
            within: theta.map(|v| v != 0.0 && v != 1.0),
            between1: psi_c2c1.map(|v| v != 0.0),
            between2: psi_c1c2.map(|v| v != 0.0),
        };
        (psi_c2c1, psi_c1c2, theta, sel)
    }

    #[test]
    fn worked_example_edge_sets() {
        let (psi1, psi2, theta, sel) = worked_example();
        let g = build_chain_graph(
            &theta,
            (&psi1, &psi2),
            &sel,
            ["c1".into(), "c2".into()],
        )
        .unwrap();
        let undirected: Vec<(usize, usize)> = g.undirected.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(undirected, vec![(0, 2), (0, 3), (1, 2), (2, 3)]);
        // directed c1 -> c2 edges from psi_{c1,c2}: 1->1, 1->4, 2->3, 3->4, 4->4
        let c1_to_c2: Vec<(usize, usize)> = g
            .directed
            .iter()
            .filter(|e| e.from_cat == 0)
            .map(|e| (e.from_var, e.to_var))
            .collect();
        assert_eq!(c1_to_c2, vec![(0, 0), (0, 3), (1, 2), (2, 3), (3, 3)]);
        let c2_to_c1: Vec<(usize, usize)> = g
            .directed
            .iter()
            .filter(|e| e.from_cat == 1)
            .map(|e| (e.from_var, e.to_var))
            .collect();
        assert_eq!(c2_to_c1, vec![(0, 1), (1, 1), (1, 3)]);
        // edge count matches the printed zero patterns: 4 + 5 + 3
        assert_eq!(g.edge_count(), 12);
    }

    #[test]
    fn empty_selection_gives_vertices_only() {
        let p = 3;
        let z = DMatrix::<f64>::zeros(p, p);
        let sel = EdgeSelection {
            within: DMatrix::from_element(p, p, false),
            between1: DMatrix::from_element(p, p, false),
            between2: DMatrix::from_element(p, p, false),
        };
        let g = build_chain_graph(&z, (&z, &z), &sel, ["a".into(), "b".into()]).unwrap();
        assert_eq!(g.edge_count(), 0);
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.ends_with("}\n"));
        assert!(dot.contains("c0_v1"));
        assert!(!dot.contains("->  "));
    }

    #[test]
    fn dot_export_is_deterministic() {
        let (psi1, psi2, theta, sel) = worked_example();
        let g1 = build_chain_graph(&theta, (&psi1, &psi2), &sel, ["c1".into(), "c2".into()])
            .unwrap();
        let g2 = build_chain_graph(&theta, (&psi1, &psi2), &sel, ["c1".into(), "c2".into()])
            .unwrap();
        assert_eq!(g1.to_dot(), g2.to_dot());
        // dot line count scales with edge count: 12 edges + 4 undirected mirror
        let edges_in_dot = g1.to_dot().matches("->").count();
        assert_eq!(edges_in_dot, g1.directed.len() + 2 * g1.undirected.len());
    }

    #[test]
    fn structured_roundtrip_is_identity() {
        let (psi1, psi2, theta, sel) = worked_example();
        let g = build_chain_graph(&theta, (&psi1, &psi2), &sel, ["c1".into(), "c2".into()])
            .unwrap();
        let back = ChainGraph::from_structured(&g.to_structured()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn undirected_edges_sorted_and_irreflexive() {
        let (psi1, psi2, theta, sel) = worked_example();
        let g = build_chain_graph(&theta, (&psi1, &psi2), &sel, ["c1".into(), "c2".into()])
            .unwrap();
        for e in &g.undirected {
            assert!(e.i < e.j);
        }
    }
}
