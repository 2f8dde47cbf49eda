//! Complex networks built from time-series.
//!
//! Two constructions are provided: thresholded Pearson-correlation networks
//! over several series (one vertex per series) and natural visibility graphs
//! over a single series (one vertex per sample, in input order).

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::unionfind::UnionFind;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series must have at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("x coordinates must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("need at least 2 series, got {0}")]
    TooFewSeries(usize),
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("invalid edge ({0}, {1}): {2}")]
    BadEdge(usize, usize, &'static str),
    #[error("edge-list parse error: {0}")]
    Parse(String),
}

/// Undirected simple graph on vertices `0..vertex_count`.
///
/// Edges keep insertion order and are stored with the smaller endpoint first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn empty(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: Vec::new(),
        }
    }

    /// Builds a graph, rejecting self-loops, duplicates and out-of-range endpoints.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::BadEdge(a, b, "self-loop"));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(GraphError::BadEdge(a, b, "endpoint out of range"));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::BadEdge(a, b, "duplicate"));
            }
            out.push(e);
        }
        Ok(Self {
            vertex_count,
            edges: out,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edges sorted lexicographically; handy for comparisons.
    pub fn sorted_edges(&self) -> Vec<(usize, usize)> {
        let mut e = self.edges.clone();
        e.sort_unstable();
        e
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertex_count);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        uf.component_sizes().len()
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count > 0 && self.component_count() == 1
    }

    /// Writes `# vertices=<V>` followed by one `u,v` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# vertices={}", self.vertex_count)?;
        writeln!(w, "u,v")?;
        for (a, b) in &self.edges {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty input".into()))?
            .map_err(|e| GraphError::Parse(e.to_string()))?;
        let v: usize = first
            .trim()
            .strip_prefix("# vertices=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad header `{first}`")))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.map_err(|e| GraphError::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line == "u,v" {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| GraphError::Parse(format!("bad edge line `{line}`")))?;
            edges.push((a, b));
        }
        Graph::new(v, edges)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Centered copy of the series plus its sum of squares, or `None` when the
/// series is constant.
fn centered(x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = mean(x);
    let dx: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ss: f64 = dx.iter().map(|d| d * d).sum();
    let scale = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    // Rounding in the mean leaves a residue of order eps * scale per sample.
    let floor = (f64::EPSILON * scale).powi(2) * x.len() as f64 * 16.0;
    if x.iter().all(|v| *v == x[0]) || ss <= floor {
        None
    } else {
        Some((dx, ss))
    }
}

fn pearson_centered(dx: &[f64], sxx: f64, dy: &[f64], syy: f64) -> f64 {
    let sxy: f64 = dx.iter().zip(dy).map(|(a, b)| a * b).sum();
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Pearson correlation coefficient of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, GraphError> {
    if x.len() != y.len() {
        return Err(GraphError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(GraphError::TooShort { min: 2, got: x.len() });
    }
    let (dx, sxx) = centered(x).ok_or(GraphError::ZeroVariance)?;
    let (dy, syy) = centered(y).ok_or(GraphError::ZeroVariance)?;
    Ok(pearson_centered(&dx, sxx, &dy, syy))
}

/// Symmetric matrix of pairwise Pearson coefficients.
///
/// Constant series are flagged as degenerate; their off-diagonal entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    size: usize,
    values: Vec<f64>,
    degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }
}

fn check_series(series: &[Vec<f64>]) -> Result<usize, GraphError> {
    if series.len() < 2 {
        return Err(GraphError::TooFewSeries(series.len()));
    }
    let len = series[0].len();
    if let Some(s) = series.iter().find(|s| s.len() != len) {
        return Err(GraphError::LengthMismatch(len, s.len()));
    }
    if len < 2 {
        return Err(GraphError::TooShort { min: 2, got: len });
    }
    Ok(len)
}

pub fn correlation_matrix(series: &[Vec<f64>]) -> Result<CorrelationMatrix, GraphError> {
    check_series(series)?;
    let v = series.len();
    let centered: Vec<Option<(Vec<f64>, f64)>> = series.par_iter().map(|s| centered(s)).collect();
    let rows: Vec<Vec<f64>> = (0..v)
        .into_par_iter()
        .map(|i| {
            (0..v)
                .map(|j| {
                    if i == j {
                        return 1.0;
                    }
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    match (&centered[a], &centered[b]) {
                        (Some((dx, sxx)), Some((dy, syy))) => pearson_centered(dx, *sxx, dy, *syy),
                        _ => 0.0,
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix {
        size: v,
        values: rows.concat(),
        degenerate: centered.iter().map(Option::is_none).collect(),
    })
}

/// Thresholded correlation network: edge `(i, j)` iff `|PC(i, j)| >= threshold`
/// (or `PC(i, j) >= threshold` when `use_abs` is false).
///
/// Constant series are treated as uncorrelated and receive no edges.
pub fn correlation_network(series: &[Vec<f64>], threshold: f64, use_abs: bool) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(GraphError::BadThreshold(threshold));
    }
    let m = correlation_matrix(series)?;
    let v = m.size();
    for i in (0..v).filter(|&i| m.is_degenerate(i)) {
        log::warn!("series {i} has zero variance; it is left without edges");
    }
    let mut edges = Vec::new();
    for i in 0..v {
        if m.is_degenerate(i) {
            continue;
        }
        for j in (i + 1)..v {
            if m.is_degenerate(j) {
                continue;
            }
            let pc = m.get(i, j);
            let strength = if use_abs { pc.abs() } else { pc };
            if strength >= threshold {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph { vertex_count: v, edges })
}

fn default_x(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn check_visibility_input(y: &[f64], x: Option<&[f64]>) -> Result<Vec<f64>, GraphError> {
    if y.is_empty() {
        return Err(GraphError::TooShort { min: 1, got: 0 });
    }
    let x = match x {
        Some(x) => {
            if x.len() != y.len() {
                return Err(GraphError::LengthMismatch(y.len(), x.len()));
            }
            if let Some(i) = (1..x.len()).find(|&i| x[i] <= x[i - 1]) {
                return Err(GraphError::NotIncreasing(i));
            }
            x.to_vec()
        }
        None => default_x(y.len()),
    };
    Ok(x)
}

/// Natural visibility graph.
///
/// Samples `i < j` are adjacent iff every intermediate sample lies strictly
/// below the straight line joining them. For each `i` the sweep over `j`
/// keeps the intermediate point of steepest slope seen from `i`; `j` is
/// visible iff its slope beats that maximum. Slopes are compared by
/// cross-multiplication, so no division enters the test.
pub fn visibility_graph(y: &[f64], x: Option<&[f64]>) -> Result<Graph, GraphError> {
    let x = check_visibility_input(y, x)?;
    let n = y.len();
    let per_vertex: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let mut best: Option<usize> = None;
            for j in (i + 1)..n {
                // slope(i, j) > slope(i, k) with dx > 0 on both sides. A
                // visible j is also the new steepest point.
                let visible = match best {
                    None => true,
                    Some(k) => (y[j] - y[i]) * (x[k] - x[i]) > (y[k] - y[i]) * (x[j] - x[i]),
                };
                if visible {
                    out.push((i, j));
                    best = Some(j);
                }
            }
            out
        })
        .collect();
    Ok(Graph {
        vertex_count: n,
        edges: per_vertex.concat(),
    })
}

/// Literal triple-loop visibility test, kept as an oracle for
/// [`visibility_graph`].
pub fn visibility_graph_bruteforce(y: &[f64], x: Option<&[f64]>) -> Result<Graph, GraphError> {
    let x = check_visibility_input(y, x)?;
    let n = y.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let visible = ((i + 1)..j).all(|k| y[k] < y[j] + (y[i] - y[j]) * (x[j] - x[k]) / (x[j] - x[i]));
            if visible {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph { vertex_count: n, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_hand_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // cov sum = 4, sqrt(5) * sqrt(5) = 5.
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(GraphError::LengthMismatch(2, 1)));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(GraphError::TooShort { min: 2, got: 1 }));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(GraphError::ZeroVariance));
        assert_eq!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]), Err(GraphError::ZeroVariance));
    }

    #[test]
    fn correlation_network_example() {
        // PC(x1, x3) = PC(x2, x3) = 0.5 by hand; only (0, 1) clears 0.9.
        let s = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![1.0, 3.0, 2.0]];
        let g = correlation_network(&s, 0.9, true).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        let m = correlation_matrix(&s).unwrap();
        assert!((m.get(0, 2) - 0.5).abs() < 1e-12);
        assert!((m.get(1, 2) - 0.5).abs() < 1e-12);
        let g0 = correlation_network(&s, 0.0, true).unwrap();
        assert_eq!(g0.edge_count(), 3);
    }

    #[test]
    fn degenerate_series_has_no_edges() {
        let s = vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0], vec![2.0, 4.0, 7.0]];
        let g = correlation_network(&s, 0.0, true).unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
        let m = correlation_matrix(&s).unwrap();
        assert!(m.is_degenerate(1));
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn signed_threshold() {
        let s = vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
        assert_eq!(correlation_network(&s, 0.9, true).unwrap().edge_count(), 1);
        assert_eq!(correlation_network(&s, 0.9, false).unwrap().edge_count(), 0);
        assert!(correlation_network(&s, 1.5, true).is_err());
    }

    #[test]
    fn visibility_small_cases() {
        let g = visibility_graph(&[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(g.sorted_edges(), vec![(0, 1), (1, 2)]);
        let g = visibility_graph(&[3.0, 1.0, 3.0], None).unwrap();
        assert_eq!(g.sorted_edges(), vec![(0, 1), (0, 2), (1, 2)]);
        let g = visibility_graph(&[5.0], None).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 0));

        let b = visibility_graph_bruteforce(&[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(b.sorted_edges(), vec![(0, 1), (1, 2)]);
        let b = visibility_graph_bruteforce(&[3.0, 1.0, 3.0], None).unwrap();
        assert_eq!(b.sorted_edges(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn visibility_input_errors() {
        assert_eq!(
            visibility_graph(&[1.0, 2.0], Some(&[0.0, 0.0])),
            Err(GraphError::NotIncreasing(1))
        );
        assert_eq!(
            visibility_graph(&[1.0, 2.0], Some(&[0.0])),
            Err(GraphError::LengthMismatch(2, 1))
        );
        assert!(visibility_graph(&[], None).is_err());
    }

    #[test]
    fn convex_and_concave() {
        let convex: Vec<f64> = (0..30).map(|i| (i as f64).powi(2)).collect();
        let g = visibility_graph(&convex, None).unwrap();
        assert_eq!(g.edge_count(), 30 * 29 / 2);
        let concave: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
        let g = visibility_graph(&concave, None).unwrap();
        assert_eq!(g.sorted_edges(), (0..29).map(|i| (i, i + 1)).collect::<Vec<_>>());
        assert_eq!(
            visibility_graph_bruteforce(&concave, None).unwrap().sorted_edges(),
            g.sorted_edges()
        );
    }

    #[test]
    fn graph_validation_and_roundtrip() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        let g = Graph::new(4, [(2, 1), (0, 3)]).unwrap();
        assert_eq!(g.edges(), &[(1, 2), (0, 3)]);
        assert_eq!(g.component_count(), 2);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# vertices=4\nu,v\n"));
        assert_eq!(Graph::read_edge_list(&buf[..]).unwrap(), g);
    }
}
