//! Benchmark plants built on communication graphs.
//!
//! Each preset uses `A = M − 2I` where `M` is the Metropolis–Hastings weight
//! matrix of the graph, with `B = Q = R = Σ = I` and `K₀ = 0`. Because `M` is
//! symmetric and doubly stochastic its spectrum lies in `[−1, 1]`, so `A` is
//! Hurwitz with abscissa at most `−1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lqr::Plant;
use crate::structured::{pattern_from_graph, SparsityPattern};

/// Undirected simple graph on nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { n, edges: BTreeSet::new() }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Adds the undirected edge `{i, j}` (1-indexed). Duplicates are errors.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::Parse(format!("self-loop at node {i}")));
        }
        if i == 0 || j == 0 || i > self.n || j > self.n {
            return Err(Error::Parse(format!("edge ({i}, {j}) outside nodes 1..={}", self.n)));
        }
        if !self.edges.insert((i.min(j), i.max(j))) {
            return Err(Error::Parse(format!("duplicate edge ({i}, {j})")));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, 1-indexed.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i - 1] += 1;
            d[j - 1] += 1;
        }
        d
    }
}

impl fmt::Display for Graph {
    /// `n e` header followed by one `i j` line per edge.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.edges.len())?;
        for (i, j) in self.edges() {
            writeln!(f, "{i} {j}")?;
        }
        Ok(())
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let (n, e) = parse_pair(header)?;
        let mut g = Graph::empty(n);
        for line in lines.by_ref().take(e) {
            let (i, j) = parse_pair(line)?;
            g.add_edge(i, j)?;
        }
        if g.edge_count() != e {
            return Err(Error::Parse(format!("expected {e} edges, found {}", g.edge_count())));
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing lines after edge list".into()));
        }
        Ok(g)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(|t| {
        t.parse::<usize>().map_err(|e| Error::Parse(format!("{t:?}: {e}")))
    });
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a?, b?)),
        _ => Err(Error::Parse(format!("expected two integers, got {line:?}"))),
    }
}

pub fn path_graph(n: usize) -> Graph {
    let mut g = Graph::empty(n);
    for i in 1..n {
        g.edges.insert((i, i + 1));
    }
    g
}

pub fn complete_graph(n: usize) -> Graph {
    let mut g = Graph::empty(n);
    for i in 1..=n {
        for j in i + 1..=n {
            g.edges.insert((i, j));
        }
    }
    g
}

/// Complete graph on nodes `1..=m`, path on `m+1..=m+k`, bridge `(m, m+1)`.
pub fn lollipop_graph(m: usize, k: usize) -> Graph {
    let mut g = complete_graph(m);
    g.n = m + k;
    for i in m..m + k {
        g.edges.insert((i, i + 1));
    }
    g
}

/// Metropolis–Hastings weights: `1/(1 + max(dᵢ, dⱼ))` on edges, diagonal
/// filled so rows sum to one.
pub fn metropolis_hastings(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let d = g.degrees();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, j) in g.edges() {
        let w = 1.0 / (1 + d[i - 1].max(d[j - 1])) as f64;
        m[(i - 1, j - 1)] = w;
        m[(j - 1, i - 1)] = w;
    }
    for i in 0..n {
        let off: f64 = m.row(i).sum();
        m[(i, i)] = 1.0 - off;
    }
    m
}

/// Plant `A = MH(g) − 2I`, `B = Q = R = Σ = I`.
pub fn graph_plant(g: &Graph) -> Result<Plant> {
    let n = g.node_count();
    let eye = DMatrix::<f64>::identity(n, n);
    Plant::new(metropolis_hastings(g) - &eye * 2.0, eye.clone(), eye.clone(), eye.clone(), eye)
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub graph: Graph,
    pub plant: Plant,
    pub k0: DMatrix<f64>,
    pub pattern: Option<SparsityPattern>,
}

pub const PRESET_NAMES: [&str; 2] = ["path20", "lollipop10_10"];

pub fn preset(name: &str) -> Result<Preset> {
    let (name, graph, structured) = match name {
        "path20" => ("path20", path_graph(20), false),
        "lollipop10_10" => ("lollipop10_10", lollipop_graph(10, 10), true),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let plant = graph_plant(&graph)?;
    let n = graph.node_count();
    let pattern = if structured { Some(pattern_from_graph(&graph, n, n)?) } else { None };
    Ok(Preset { name, k0: plant.zero_gain(), graph, plant, pattern })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_hurwitz, spectral_abscissa};
    use crate::lqr::validate_plant;
    use approx::assert_relative_eq;

    #[test]
    fn path_graphs() {
        let g = path_graph(3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
        assert_eq!(path_graph(1).edge_count(), 0);
        assert_eq!(path_graph(20).edge_count(), 19);
    }

    #[test]
    fn lollipop_graphs() {
        let g = lollipop_graph(3, 2);
        assert_eq!((g.node_count(), g.edge_count()), (5, 5));
        let g = lollipop_graph(10, 10);
        assert_eq!((g.node_count(), g.edge_count()), (20, 55));
        assert!(g.has_edge(10, 11));
        assert!(!g.has_edge(9, 11));
        let g = lollipop_graph(2, 1);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
    }

    #[test]
    fn metropolis_hastings_examples() {
        let m = metropolis_hastings(&path_graph(3));
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0]) / 3.0;
        assert_relative_eq!(m, expected, epsilon = 1e-15);
        assert_eq!(metropolis_hastings(&Graph::empty(1)), DMatrix::from_element(1, 1, 1.0));
        let m = metropolis_hastings(&complete_graph(2));
        assert_relative_eq!(m, DMatrix::from_element(2, 2, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn metropolis_hastings_is_doubly_stochastic() {
        for g in [path_graph(20), lollipop_graph(10, 10), complete_graph(6)] {
            let m = metropolis_hastings(&g);
            assert_eq!(m, m.transpose());
            for i in 0..g.node_count() {
                assert_relative_eq!(m.row(i).sum(), 1.0, epsilon = 1e-14);
            }
            assert!(m.iter().all(|&v| v >= 0.0));
            let a = &m - DMatrix::<f64>::identity(g.node_count(), g.node_count()) * 2.0;
            assert!(is_hurwitz(&a, 0.99).unwrap());
        }
    }

    #[test]
    fn presets() {
        let p = preset("path20").unwrap();
        assert!(p.pattern.is_none());
        assert!(spectral_abscissa(&p.plant.a).unwrap() <= -1.0 + 1e-12);
        assert!(validate_plant(&p.plant).is_valid());

        let l = preset("lollipop10_10").unwrap();
        let pat = l.pattern.unwrap();
        assert!(validate_plant(&l.plant).is_valid());
        // node 1 (clique) and node 20 (path end) are not adjacent
        assert!(!pat.allows(0, 19));
        assert!(pat.allows(9, 10));
        assert!(pat.allows(4, 4));

        assert!(matches!(preset("bogus"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn graph_file_round_trip() {
        let g = lollipop_graph(4, 3);
        let parsed: Graph = g.to_string().parse().unwrap();
        assert_eq!(parsed, g);
        assert!("3 1\n1 1\n".parse::<Graph>().is_err());
        assert!("3 2\n1 2\n".parse::<Graph>().is_err());
        assert!("3 1\n1 4\n".parse::<Graph>().is_err());
    }
}
