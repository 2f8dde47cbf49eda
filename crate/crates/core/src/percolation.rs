//! Bond-percolation resilience analysis.
//!
//! For each removed-edge fraction `p` on a grid, `X` independent
//! realizations delete `round(p * E)` distinct edges uniformly at random and
//! record a cluster-size statistic `S_m(p)` of what remains. The percolation
//! strength is the normalized mean of `S_m`, the susceptibility its
//! normalized variance divided by the strength, and the percolation
//! threshold is the interior `p` at which the susceptibility peaks.
//!
//! Note on naming: `p` counts *removed* edges (`p = e / E`), the opposite of
//! the usual "occupied bond" convention. A higher threshold therefore means a
//! network that survives more damage.
//!
//! Each `(p index, realization)` pair draws from its own ChaCha stream keyed
//! by the configured seed, so curves do not depend on thread scheduling.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::Graph;
use crate::unionfind::UnionFind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PercolationError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("graph is disconnected ({0} components)")]
    Disconnected(usize),
    #[error("invalid percolation config: {0}")]
    InvalidConfig(String),
    #[error("susceptibility is zero everywhere; no threshold")]
    Structureless,
    #[error("curve has no interior grid points")]
    EmptyCurve,
}

/// How strength and susceptibility are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `PS = sum(S) / (V * E)`, `chi = (sum(S^2) / (V^2 * E) - PS^2) / PS`.
    Paper,
    /// `PS = sum(S) / (V * X)`, `chi = (sum(S^2) / (V^2 * X) - PS^2) / PS`.
    Standard,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Paper => "paper",
            Normalization::Standard => "standard",
        }
    }
}

/// Which cluster size a realization reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatistic {
    /// Size of the largest connected component.
    Largest,
    /// Size of the smallest component that still contains an edge (1 when
    /// every vertex is isolated).
    SmallestSurviving,
}

impl ClusterStatistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClusterStatistic::Largest => "largest",
            ClusterStatistic::SmallestSurviving => "smallest_surviving",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationConfig {
    pub realizations: usize,
    pub p_grid: Vec<f64>,
    pub seed: u64,
    pub normalization: Normalization,
    pub cluster_statistic: ClusterStatistic,
}

impl Default for PercolationConfig {
    fn default() -> Self {
        Self {
            realizations: 200,
            p_grid: evenly_spaced(41),
            seed: 0,
            normalization: Normalization::Standard,
            cluster_statistic: ClusterStatistic::Largest,
        }
    }
}

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn evenly_spaced(points: usize) -> Vec<f64> {
    assert!(points >= 2, "grid needs at least 2 points");
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).collect()
}

impl PercolationConfig {
    pub fn validate(&self) -> Result<(), PercolationError> {
        let bad = |m: String| Err(PercolationError::InvalidConfig(m));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("p_grid values must lie in [0, 1]".into());
        }
        if self.p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("p_grid must be strictly increasing".into());
        }
        if self.p_grid.first() != Some(&0.0) || self.p_grid.last() != Some(&1.0) {
            return bad("p_grid must contain 0 and 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationCurve {
    pub p: Vec<f64>,
    pub ps: Vec<f64>,
    pub chi: Vec<f64>,
    /// Interior argmax of `chi`; `None` when the susceptibility is zero
    /// everywhere.
    pub rho_c: Option<f64>,
    pub vertices: usize,
    pub edges: usize,
}

impl PercolationCurve {
    /// Writes `p,ps,chi` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["p", "ps", "chi"])?;
        for i in 0..self.p.len() {
            w.write_record([
                format!("{:.6}", self.p[i]),
                format!("{:.9}", self.ps[i]),
                format!("{:.9}", self.chi[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cluster_statistic(g: &Graph, kept: &[usize], stat: ClusterStatistic) -> usize {
    let mut uf = UnionFind::new(g.vertex_count());
    let edges = g.edges();
    for &e in kept {
        let (a, b) = edges[e];
        uf.union(a, b);
    }
    let sizes = uf.component_sizes();
    match stat {
        ClusterStatistic::Largest => sizes.into_iter().max().unwrap_or(0),
        ClusterStatistic::SmallestSurviving => sizes.into_iter().filter(|&s| s >= 2).min().unwrap_or(1),
    }
}

fn substream(seed: u64, p_index: usize, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((p_index as u64) << 32) | realization as u64);
    rng
}

/// Cluster statistic of one realization: remove `removed` edges chosen by a
/// seeded Fisher-Yates prefix and measure what is left.
fn realization(g: &Graph, removed: usize, stat: ClusterStatistic, rng: &mut ChaCha8Rng) -> usize {
    let mut order: Vec<usize> = (0..g.edge_count()).collect();
    let (_, kept) = order.partial_shuffle(rng, removed);
    cluster_statistic(g, kept, stat)
}

/// Raw cluster statistics `S_m(p)` for every grid point, `X` per point.
pub fn sample_clusters(g: &Graph, cfg: &PercolationConfig) -> Result<Vec<Vec<usize>>, PercolationError> {
    cfg.validate()?;
    if g.edge_count() == 0 {
        return Err(PercolationError::EmptyGraph);
    }
    let components = g.component_count();
    if components != 1 {
        return Err(PercolationError::Disconnected(components));
    }
    let e = g.edge_count();
    Ok(cfg
        .p_grid
        .par_iter()
        .enumerate()
        .map(|(pi, &p)| {
            let removed = ((p * e as f64).round() as usize).min(e);
            (0..cfg.realizations)
                .into_par_iter()
                .map(|m| realization(g, removed, cfg.cluster_statistic, &mut substream(cfg.seed, pi, m)))
                .collect()
        })
        .collect())
}

/// Strength and susceptibility from the raw statistics of one grid point.
///
/// The variance numerator is evaluated in exact integer arithmetic, so a
/// zero-variance sample gives exactly zero susceptibility.
pub fn strength_and_susceptibility(samples: &[usize], vertices: usize, edges: usize, norm: Normalization) -> (f64, f64) {
    let s1: i128 = samples.iter().map(|&s| s as i128).sum();
    let s2: i128 = samples.iter().map(|&s| (s as i128) * (s as i128)).sum();
    let denom = match norm {
        Normalization::Paper => edges as i128,
        Normalization::Standard => samples.len() as i128,
    };
    let v = vertices as f64;
    let ps = s1 as f64 / (v * denom as f64);
    if s1 == 0 {
        return (ps, 0.0);
    }
    // (s2 / (V^2 D) - (s1 / (V D))^2) / (s1 / (V D)) = (D s2 - s1^2) / (V D s1)
    let numerator = denom * s2 - s1 * s1;
    let chi = numerator as f64 / (v * denom as f64 * s1 as f64);
    (ps, chi)
}

/// Percolation strength and susceptibility over the configured grid.
pub fn percolation_curve(g: &Graph, cfg: &PercolationConfig) -> Result<PercolationCurve, PercolationError> {
    let samples = sample_clusters(g, cfg)?;
    let (ps, chi): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .map(|s| strength_and_susceptibility(s, g.vertex_count(), g.edge_count(), cfg.normalization))
        .unzip();
    let mut curve = PercolationCurve {
        p: cfg.p_grid.clone(),
        ps,
        chi,
        rho_c: None,
        vertices: g.vertex_count(),
        edges: g.edge_count(),
    };
    curve.rho_c = percolation_threshold(&curve).ok();
    Ok(curve)
}

/// The removed-edge fraction of maximal susceptibility.
///
/// The endpoints `p = 0` and `p = 1` are never candidates; ties go to the
/// smaller `p`.
pub fn percolation_threshold(curve: &PercolationCurve) -> Result<f64, PercolationError> {
    let interior: Vec<usize> = (0..curve.p.len())
        .filter(|&i| curve.p[i] != 0.0 && curve.p[i] != 1.0)
        .collect();
    if interior.is_empty() {
        return Err(PercolationError::EmptyCurve);
    }
    if interior.iter().all(|&i| curve.chi[i] == 0.0) {
        return Err(PercolationError::Structureless);
    }
    let mut best = interior[0];
    for &i in &interior[1..] {
        if curve.chi[i] > curve.chi[best] {
            best = i;
        }
    }
    Ok(curve.p[best])
}

/// One row of a resilience comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceRow {
    pub label: String,
    pub vertices: usize,
    pub edges: usize,
    pub rho_c: Result<f64, PercolationError>,
}

/// Percolation threshold for each labeled graph. A failing graph yields a
/// failed row instead of aborting the batch.
pub fn resilience_report(graphs: &[(String, Graph)], cfg: &PercolationConfig) -> Vec<ResilienceRow> {
    graphs
        .iter()
        .map(|(label, g)| ResilienceRow {
            label: label.clone(),
            vertices: g.vertex_count(),
            edges: g.edge_count(),
            rho_c: percolation_curve(g, cfg).and_then(|c| percolation_threshold(&c)),
        })
        .collect()
}

/// Writes `label,rho_c,V,E,X,normalization,cluster_statistic,seed` rows.
/// Failed rows carry `failed: <reason>` in the `rho_c` column.
pub fn write_report_csv<W: Write>(w: W, rows: &[ResilienceRow], cfg: &PercolationConfig) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["label", "rho_c", "V", "E", "X", "normalization", "cluster_statistic", "seed"])?;
    for r in rows {
        let rho = match &r.rho_c {
            Ok(v) => format!("{v:.6}"),
            Err(e) => format!("failed: {e}"),
        };
        w.write_record([
            r.label.clone(),
            rho,
            r.vertices.to_string(),
            r.edges.to_string(),
            cfg.realizations.to_string(),
            cfg.normalization.as_str().to_string(),
            cfg.cluster_statistic.as_str().to_string(),
            cfg.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
