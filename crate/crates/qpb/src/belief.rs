//! Belief as the stationary distribution of a random walk on a query-part
//! graph.
//!
//! The transition matrix is the row-normalization of the graph's weights;
//! the belief vector is the unique stationary distribution of that chain,
//! found by power iteration from the uniform vector. No damping or
//! teleportation term is used: intra-query self-loops make the chain
//! aperiodic, and strong connectivity is required up front, so the
//! stationary distribution exists and is unique.
//!
//! Determinism: vertices are processed in the lexicographic order of their
//! canonical ids and every per-row reduction runs in that fixed order, so
//! identical inputs produce bit-identical outputs on any platform.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{check_connectivity, merge, QueryPartGraph};
use crate::util::fmt_sig;

/// Stopping parameters for the power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    /// L1 threshold on the change between successive iterates.
    pub tolerance: f64,
    /// Iteration budget; exceeding it is an error, not a silent truncation.
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

impl PageRankConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A probability distribution over query parts, plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    probabilities: BTreeMap<String, f64>,
    /// Number of power-iteration steps performed.
    pub iteration_count: usize,
    /// L1 fixed-point gap `‖M·PR − PR‖₁` measured on the returned vector.
    pub residual: f64,
}

impl BeliefVector {
    /// Builds a belief vector directly from probabilities. Intended for
    /// tests and for reading dumps back; no normalization is enforced here.
    pub fn from_probabilities(probabilities: BTreeMap<String, f64>) -> Self {
        BeliefVector {
            probabilities,
            iteration_count: 0,
            residual: 0.0,
        }
    }

    pub fn probability(&self, part_id: &str) -> Option<f64> {
        self.probabilities.get(part_id).copied()
    }

    pub fn probabilities(&self) -> &BTreeMap<String, f64> {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.values().sum()
    }

    /// CSV dump `part_id,probability`, sorted by descending probability then
    /// id, probabilities with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &f64)> = self.probabilities.iter().collect();
        rows.sort_by(|(ia, pa), (ib, pb)| {
            pb.partial_cmp(pa)
                .expect("probabilities are finite")
                .then_with(|| ia.cmp(ib))
        });
        let mut out = String::from("part_id,probability\n");
        for (id, p) in rows {
            out.push_str(&format!("{id},{}\n", fmt_sig(*p, 12)));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses a belief dump produced by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut probabilities = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 && line == "part_id,probability" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (id, p) = line.rsplit_once(',').ok_or_else(|| {
                Error::InvalidParameter(format!("belief csv line {} is malformed", ln + 1))
            })?;
            let p: f64 = p.parse().map_err(|_| {
                Error::InvalidParameter(format!("belief csv line {}: bad probability", ln + 1))
            })?;
            if probabilities.insert(id.to_string(), p).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "belief csv: duplicate part id {id}"
                )));
            }
        }
        Ok(Self::from_probabilities(probabilities))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Computes the stationary distribution of the random walk on `graph`.
///
/// The graph must be strongly connected over its positive-weight edges and
/// every vertex needs at least one outgoing edge. Power iteration starts
/// from the uniform vector and stops when the L1 change between iterates
/// drops below the configured tolerance.
///
/// # Examples
///
/// ```
/// use qpb::{pagerank, PageRankConfig, QueryPartGraph};
///
/// let mut g = QueryPartGraph::new();
/// g.bump("u", "u", 1.0);
/// g.bump("u", "v", 1.0);
/// g.bump("v", "v", 1.0);
/// g.bump("v", "u", 1.0);
/// let belief = pagerank(&g, &PageRankConfig::default()).unwrap();
/// assert!((belief.probability("u").unwrap() - 0.5).abs() < 1e-9);
/// ```
pub fn pagerank(graph: &QueryPartGraph, config: &PageRankConfig) -> Result<BeliefVector> {
    config.validate()?;
    let ids: Vec<&String> = graph.vertices().iter().collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::InvalidParameter("graph has no vertices".into()));
    }
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut out_sum = vec![0.0f64; n];
    for ((src, _), w) in graph.edges() {
        out_sum[index[src.as_str()]] += w;
    }
    if let Some(i) = out_sum.iter().position(|&s| s == 0.0) {
        return Err(Error::DanglingVertex(ids[i].clone()));
    }

    let report = check_connectivity(graph);
    if !report.strongly_connected {
        return Err(Error::NotStronglyConnected {
            components: report.component_count,
            unreached_measures: report.unreached_measures.into_iter().collect(),
        });
    }

    // Incoming transition probabilities per destination; BTreeMap iteration
    // order makes every list ascending in source index.
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((src, dst), w) in graph.edges() {
        let s = index[src.as_str()];
        incoming[index[dst.as_str()]].push((s, w / out_sum[s]));
    }

    let multiply = |x: &[f64], next: &mut [f64]| {
        for (v, row) in incoming.iter().enumerate() {
            let mut acc = 0.0;
            for &(u, p) in row {
                acc += p * x[u];
            }
            next[v] = acc;
        }
    };

    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let mut iteration_count = 0;
    let mut converged = false;
    let mut delta = f64::INFINITY;
    while iteration_count < config.max_iterations {
        multiply(&x, &mut next);
        delta = x
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut x, &mut next);
        iteration_count += 1;
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: iteration_count,
            residual: delta,
        });
    }

    multiply(&x, &mut next);
    let residual: f64 = x
        .iter()
        .zip(next.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();

    let probabilities = ids
        .into_iter()
        .zip(x.into_iter())
        .map(|(id, p)| (id.clone(), p))
        .collect();
    Ok(BeliefVector {
        probabilities,
        iteration_count,
        residual,
    })
}

/// Belief of a user: the stationary distribution of the alpha-blend of the
/// topology graph and the user graph.
pub fn compute_belief(
    topology: &QueryPartGraph,
    user: &QueryPartGraph,
    alpha: f64,
    config: &PageRankConfig,
) -> Result<BeliefVector> {
    pagerank(&merge(topology, user, alpha)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, f64)]) -> QueryPartGraph {
        let mut g = QueryPartGraph::new();
        for (s, d, w) in edges {
            g.bump(*s, *d, *w);
        }
        g
    }

    #[test]
    fn single_vertex_self_loop() {
        let g = graph(&[("v", "v", 1.0)]);
        let b = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert_eq!(b.probability("v"), Some(1.0));
        assert!(b.residual < 1e-9);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let g = graph(&[("u", "v", 1.0), ("v", "u", 1.0), ("u", "u", 1.0), ("v", "v", 1.0)]);
        let b = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!((b.probability("u").unwrap() - 0.5).abs() < 1e-9);
        assert!((b.probability("v").unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn three_vertex_example_matches_balance_equations() {
        // a->b=2, a->c=1, b->a=1, c->a=1, self-loops 1 everywhere.
        // Solving pi = pi * M gives (0.4, 0.4, 0.2).
        let g = graph(&[
            ("a", "b", 2.0),
            ("a", "c", 1.0),
            ("b", "a", 1.0),
            ("c", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 1.0),
            ("c", "c", 1.0),
        ]);
        let b = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!((b.probability("a").unwrap() - 0.4).abs() < 1e-8);
        assert!((b.probability("b").unwrap() - 0.4).abs() < 1e-8);
        assert!((b.probability("c").unwrap() - 0.2).abs() < 1e-8);
        assert!((b.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scale_invariance() {
        let g = graph(&[
            ("a", "b", 2.0),
            ("b", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 3.0),
        ]);
        let mut scaled = QueryPartGraph::new();
        for ((s, d), w) in g.edges() {
            scaled.bump(s.clone(), d.clone(), w * 17.5);
        }
        let b1 = pagerank(&g, &PageRankConfig::default()).unwrap();
        let b2 = pagerank(&scaled, &PageRankConfig::default()).unwrap();
        assert_eq!(b1.probabilities(), b2.probabilities());
    }

    #[test]
    fn deterministic_bit_identical() {
        let g = graph(&[
            ("a", "b", 2.0),
            ("a", "c", 1.0),
            ("b", "a", 1.0),
            ("c", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 1.0),
            ("c", "c", 1.0),
        ]);
        let b1 = pagerank(&g, &PageRankConfig::default()).unwrap();
        let b2 = pagerank(&g, &PageRankConfig::default()).unwrap();
        for (k, p) in b1.probabilities() {
            assert_eq!(p.to_bits(), b2.probabilities()[k].to_bits());
        }
    }

    #[test]
    fn dangling_vertex_is_an_error() {
        let mut g = graph(&[("a", "b", 1.0), ("a", "a", 1.0)]);
        g.add_vertex("b");
        let err = pagerank(&g, &PageRankConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DanglingVertex(ref v) if v == "b"), "{err}");
    }

    #[test]
    fn disconnection_is_an_error() {
        let g = graph(&[("a", "a", 1.0), ("b", "b", 1.0)]);
        let err = pagerank(&g, &PageRankConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotStronglyConnected { components: 2, .. }), "{err}");
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = graph(&[
            ("a", "b", 2.0),
            ("b", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 1.0),
        ]);
        let config = PageRankConfig {
            tolerance: 1e-12,
            max_iterations: 1,
        };
        let err = pagerank(&g, &config).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 1, .. }), "{err}");
    }

    #[test]
    fn empty_user_graph_changes_nothing() {
        let g = graph(&[
            ("a", "b", 2.0),
            ("b", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 3.0),
        ]);
        let plain = pagerank(&g, &PageRankConfig::default()).unwrap();
        for alpha in [0.0, 0.5, 0.9] {
            let blended = compute_belief(&g, &QueryPartGraph::new(), alpha, &PageRankConfig::default()).unwrap();
            assert_eq!(plain.probabilities(), blended.probabilities());
        }
    }

    #[test]
    fn csv_round_trip_and_ordering() {
        let g = graph(&[
            ("a", "b", 2.0),
            ("a", "c", 1.0),
            ("b", "a", 1.0),
            ("c", "a", 1.0),
            ("a", "a", 1.0),
            ("b", "b", 1.0),
            ("c", "c", 1.0),
        ]);
        let b = pagerank(&g, &PageRankConfig::default()).unwrap();
        let csv = b.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "part_id,probability");
        // descending probability, ties broken by id: a (0.4), b (0.4), c (0.2)
        assert!(lines[1].starts_with("a,"));
        assert!(lines[2].starts_with("b,"));
        assert!(lines[3].starts_with("c,"));
        let back = BeliefVector::from_csv(&csv).unwrap();
        for (k, p) in b.probabilities() {
            assert!((back.probability(k).unwrap() - p).abs() < 1e-11 * p.max(1e-3));
        }
    }
}
