//! Weighted directed graphs of query parts.
//!
//! Three builders produce the graphs the belief model runs on:
//!
//! * [`build_schema_graph`] encodes the cube topology: weight-1 edges in both
//!   directions between a member and each of its children, between a member
//!   and its level, and between consecutive levels. Measures are vertices
//!   with no edges at this stage.
//! * [`build_log_graph`] adds usage evidence: +1 on every ordered pair of
//!   parts co-occurring in a query (including self-pairs, which yield the
//!   self-loops that make the walk aperiodic) and +1 from every part of a
//!   query to every part of the next query in the same session.
//! * [`merge`] blends two graphs with a weight `alpha` in [0, 1): the result
//!   carries `(1 - alpha) * v1 + alpha * v2` on every edge.
//!
//! Graphs are immutable values; builders return new graphs.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::part::is_measure_id;
use crate::query::{Log, Query};
use crate::schema::CubeSchema;
use crate::util::fmt_sig;

/// A weighted directed graph over canonical query-part ids. Stored weights
/// are strictly positive; zero-weight edges are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryPartGraph {
    vertices: BTreeSet<String>,
    edges: BTreeMap<(String, String), f64>,
}

impl QueryPartGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &BTreeSet<String> {
        &self.vertices
    }

    /// Edges with their weights, sorted by (src, dst).
    pub fn edges(&self) -> &BTreeMap<(String, String), f64> {
        &self.edges
    }

    pub fn contains_vertex(&self, id: &str) -> bool {
        self.vertices.contains(id)
    }

    /// Weight of an edge, 0 if absent.
    pub fn weight(&self, src: &str, dst: &str) -> f64 {
        self.edges
            .get(&(src.to_string(), dst.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn add_vertex(&mut self, id: impl Into<String>) {
        self.vertices.insert(id.into());
    }

    /// Adds `amount` to the weight of (src, dst), creating endpoints as
    /// vertices when needed. `amount` must be positive.
    pub fn bump(&mut self, src: impl Into<String>, dst: impl Into<String>, amount: f64) {
        debug_assert!(amount > 0.0);
        let src = src.into();
        let dst = dst.into();
        self.vertices.insert(src.clone());
        self.vertices.insert(dst.clone());
        *self.edges.entry((src, dst)).or_insert(0.0) += amount;
    }

    /// CSV dump `src_id,dst_id,weight`, sorted by (src, dst), weights with 9
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("src_id,dst_id,weight\n");
        for ((src, dst), w) in &self.edges {
            out.push_str(&format!("{src},{dst},{}\n", fmt_sig(*w, 9)));
        }
        out
    }
}

/// Builds the schema topology graph. Vertices are the whole query-part
/// universe, so measures appear isolated until a log mentions them.
pub fn build_schema_graph(schema: &CubeSchema) -> QueryPartGraph {
    let mut graph = QueryPartGraph::new();
    for part in schema.enumerate_query_parts() {
        graph.add_vertex(part.id());
    }
    for h in &schema.hierarchies {
        for li in 0..h.depth() {
            let level = &h.levels[li];
            let level_id = format!("L:{}/{}", h.name, level.name);
            for (member, children) in &level.members {
                let member_id = format!("V:{}/{}={member}", h.name, level.name);
                // member <-> its direct children
                if li + 1 < h.depth() {
                    let child_level = &h.levels[li + 1].name;
                    for c in children {
                        let child_id = format!("V:{}/{child_level}={c}", h.name);
                        graph.bump(member_id.clone(), child_id.clone(), 1.0);
                        graph.bump(child_id, member_id.clone(), 1.0);
                    }
                }
                // member <-> its level
                graph.bump(member_id.clone(), level_id.clone(), 1.0);
                graph.bump(level_id.clone(), member_id, 1.0);
            }
            // consecutive levels
            if li + 1 < h.depth() {
                let next_id = format!("L:{}/{}", h.name, h.levels[li + 1].name);
                graph.bump(level_id.clone(), next_id.clone(), 1.0);
                graph.bump(next_id, level_id, 1.0);
            }
        }
    }
    graph
}

/// Applies one query's usage to a graph: +1 on every ordered pair of its
/// parts (self-pairs included) and, when `previous` is given, +1 from every
/// part of `previous` to every part of `new_query`.
///
/// Folding this over a session's queries gives exactly the same weights as
/// [`build_log_graph`] on the single-session log.
pub fn add_query_increment(
    graph: &QueryPartGraph,
    previous: Option<&Query>,
    new_query: &Query,
) -> QueryPartGraph {
    let mut out = graph.clone();
    increment_in_place(&mut out, previous, new_query);
    out
}

fn increment_in_place(graph: &mut QueryPartGraph, previous: Option<&Query>, new_query: &Query) {
    let new_ids: Vec<String> = new_query.part_ids().into_iter().collect();
    for a in &new_ids {
        for b in &new_ids {
            graph.bump(a.clone(), b.clone(), 1.0);
        }
    }
    if let Some(prev) = previous {
        for a in prev.part_ids() {
            for b in &new_ids {
                graph.bump(a.clone(), b.clone(), 1.0);
            }
        }
    }
}

/// Builds a usage graph from a log on top of `base`.
///
/// Every query contributes its intra-query pairs (the last query of a session
/// included) and every consecutive query pair contributes its inter-query
/// pairs. A nonempty `base` is treated as the part universe: log parts
/// missing from it are an error. With an empty base the graph is usage-only
/// and vertices are created as they appear.
pub fn build_log_graph(log: &Log, base: &QueryPartGraph) -> Result<QueryPartGraph> {
    let mut graph = base.clone();
    let check_universe = !base.is_empty();
    for session in &log.sessions {
        for (qi, query) in session.queries.iter().enumerate() {
            if check_universe {
                for id in query.part_ids() {
                    if !base.contains_vertex(&id) {
                        return Err(Error::UnknownPart(id));
                    }
                }
            }
            let previous = if qi > 0 {
                Some(&session.queries[qi - 1])
            } else {
                None
            };
            increment_in_place(&mut graph, previous, query);
        }
    }
    Ok(graph)
}

/// Blends two graphs: vertices are unioned and each edge carries
/// `(1 - alpha) * v1 + alpha * v2`, absent weights counting as zero. Edges
/// whose blended weight is exactly zero are dropped.
pub fn merge(g1: &QueryPartGraph, g2: &QueryPartGraph, alpha: f64) -> Result<QueryPartGraph> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let mut out = QueryPartGraph::new();
    out.vertices = g1.vertices.union(&g2.vertices).cloned().collect();
    for ((src, dst), v1) in &g1.edges {
        let w = (1.0 - alpha) * v1 + alpha * g2.weight(src, dst);
        if w != 0.0 {
            out.edges.insert((src.clone(), dst.clone()), w);
        }
    }
    for ((src, dst), v2) in &g2.edges {
        if g1.edges.contains_key(&(src.clone(), dst.clone())) {
            continue;
        }
        let w = alpha * v2;
        if w != 0.0 {
            out.edges.insert((src.clone(), dst.clone()), w);
        }
    }
    Ok(out)
}

/// Connectivity diagnostics for a query-part graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub strongly_connected: bool,
    pub component_count: usize,
    /// Measure parts with no incident edge at all; the usual culprit when the
    /// graph is disconnected (a measure that never occurs in the log).
    pub unreached_measures: BTreeSet<String>,
}

/// Computes strong connectivity over the positive-weight edges (all stored
/// edges) and lists zero-degree measure vertices.
pub fn check_connectivity(graph: &QueryPartGraph) -> ConnectivityReport {
    let ids: Vec<&str> = graph.vertices.iter().map(|s| s.as_str()).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let n = ids.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    for (src, dst) in graph.edges.keys() {
        let s = index[src.as_str()];
        let d = index[dst.as_str()];
        succ[s].push(d);
        degree[s] += 1;
        degree[d] += 1;
    }
    let component_count = tarjan_scc_count(&succ);
    let unreached_measures = ids
        .iter()
        .enumerate()
        .filter(|(i, id)| is_measure_id(id) && degree[*i] == 0)
        .map(|(_, id)| id.to_string())
        .collect();
    ConnectivityReport {
        strongly_connected: component_count == 1,
        component_count,
        unreached_measures,
    }
}

/// Iterative Tarjan; returns the number of strongly connected components.
fn tarjan_scc_count(succ: &[Vec<usize>]) -> usize {
    let n = succ.len();
    if n == 0 {
        return 0;
    }
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components = 0usize;
    // (vertex, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    components += 1;
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        if w == v {
                            break;
                        }
                    }
                }
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests_support::toy_schema;
    use crate::query::Session;

    fn q(measures: &[&str], group_by: &[(&str, &str)], filters: &[(&str, &str, &str)]) -> Query {
        let mut query = Query::default();
        query.measures.extend(measures.iter().map(|s| s.to_string()));
        query
            .group_by
            .extend(group_by.iter().map(|(h, l)| (h.to_string(), l.to_string())));
        for (h, l, v) in filters {
            query
                .filters
                .insert(h.to_string(), (l.to_string(), v.to_string()));
        }
        query
    }

    #[test]
    fn schema_graph_matches_hand_enumeration() {
        // ALL/REGION with members all -> {AMERICA, EUROPE} plus one measure:
        // 4 member-tree + 6 member-level + 2 level-level = 12 directed edges,
        // all weight 1; the measure stays isolated.
        let schema = toy_schema();
        let g = build_schema_graph(&schema);
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.edge_count(), 12);
        assert!(g.edges().values().all(|w| *w == 1.0));
        let expect = [
            ("V:CUSTOMER/ALL=all", "V:CUSTOMER/REGION=AMERICA"),
            ("V:CUSTOMER/REGION=AMERICA", "V:CUSTOMER/ALL=all"),
            ("V:CUSTOMER/ALL=all", "V:CUSTOMER/REGION=EUROPE"),
            ("V:CUSTOMER/REGION=EUROPE", "V:CUSTOMER/ALL=all"),
            ("V:CUSTOMER/ALL=all", "L:CUSTOMER/ALL"),
            ("L:CUSTOMER/ALL", "V:CUSTOMER/ALL=all"),
            ("V:CUSTOMER/REGION=AMERICA", "L:CUSTOMER/REGION"),
            ("L:CUSTOMER/REGION", "V:CUSTOMER/REGION=AMERICA"),
            ("V:CUSTOMER/REGION=EUROPE", "L:CUSTOMER/REGION"),
            ("L:CUSTOMER/REGION", "V:CUSTOMER/REGION=EUROPE"),
            ("L:CUSTOMER/ALL", "L:CUSTOMER/REGION"),
            ("L:CUSTOMER/REGION", "L:CUSTOMER/ALL"),
        ];
        for (s, d) in expect {
            assert_eq!(g.weight(s, d), 1.0, "missing edge {s} -> {d}");
        }
        // degree of the measure vertex is 0
        assert!(g
            .edges()
            .keys()
            .all(|(s, d)| s != "M:REVENUE" && d != "M:REVENUE"));
    }

    #[test]
    fn schema_graph_is_symmetric() {
        let g = build_schema_graph(&toy_schema());
        for ((s, d), w) in g.edges() {
            assert_eq!(g.weight(d, s), *w);
        }
    }

    /// Two queries over abstract parts a/b/c, traced by hand.
    fn two_query_session() -> (Query, Query) {
        // parts(q1) = {M:a, M:b}, parts(q2) = {M:b, M:c} -- measures are the
        // simplest parts to stand in for the hand trace.
        let q1 = q(&["a", "b"], &[], &[]);
        let q2 = q(&["b", "c"], &[], &[]);
        (q1, q2)
    }

    #[test]
    fn log_graph_matches_hand_trace() {
        let (q1, q2) = two_query_session();
        let log = Log::new(vec![Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q1, q2],
        }]);
        let g = build_log_graph(&log, &QueryPartGraph::new()).unwrap();
        let w = |s: &str, d: &str| g.weight(&format!("M:{s}"), &format!("M:{d}"));
        assert_eq!(w("a", "a"), 1.0);
        assert_eq!(w("a", "b"), 2.0);
        assert_eq!(w("b", "a"), 1.0);
        assert_eq!(w("b", "b"), 3.0);
        assert_eq!(w("b", "c"), 2.0);
        assert_eq!(w("c", "b"), 1.0);
        assert_eq!(w("c", "c"), 1.0);
        assert_eq!(w("a", "c"), 1.0);
        assert_eq!(g.edge_count(), 8);
    }

    #[test]
    fn empty_log_returns_base_unchanged() {
        let base = build_schema_graph(&toy_schema());
        let g = build_log_graph(&Log::empty(), &base).unwrap();
        assert_eq!(g, base);
    }

    #[test]
    fn running_log_twice_doubles_contributions() {
        let (q1, q2) = two_query_session();
        let log = Log::new(vec![Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q1, q2],
        }]);
        let once = build_log_graph(&log, &QueryPartGraph::new()).unwrap();
        let twice = build_log_graph(&log, &once).unwrap();
        for (k, w) in once.edges() {
            assert_eq!(twice.edges()[k], 2.0 * w);
        }
    }

    #[test]
    fn unknown_part_rejected_against_universe() {
        let base = build_schema_graph(&toy_schema());
        let log = Log::new(vec![Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q(&["PROFIT"], &[], &[])],
        }]);
        let err = build_log_graph(&log, &base).unwrap_err();
        assert!(matches!(err, Error::UnknownPart(ref p) if p == "M:PROFIT"), "{err}");
    }

    #[test]
    fn increment_fold_equals_log_graph() {
        let (q1, q2) = two_query_session();
        let session = Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q1, q2],
        };
        let batch = build_log_graph(&Log::new(vec![session.clone()]), &QueryPartGraph::new()).unwrap();
        let mut folded = QueryPartGraph::new();
        let mut prev: Option<&Query> = None;
        for query in &session.queries {
            folded = add_query_increment(&folded, prev, query);
            prev = Some(query);
        }
        assert_eq!(folded, batch);
    }

    #[test]
    fn increment_intra_only_case() {
        let query = q(&["a", "b"], &[], &[]);
        let g = add_query_increment(&QueryPartGraph::new(), None, &query);
        assert_eq!(g.edge_count(), 4);
        for (s, d) in [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")] {
            assert_eq!(g.weight(&format!("M:{s}"), &format!("M:{d}")), 1.0);
        }
    }

    #[test]
    fn merge_blends_weights() {
        let mut g1 = QueryPartGraph::new();
        g1.bump("x", "y", 2.0);
        let mut g2 = QueryPartGraph::new();
        g2.bump("x", "y", 4.0);
        g2.bump("y", "z", 5.0);
        let m = merge(&g1, &g2, 0.5).unwrap();
        assert_eq!(m.weight("x", "y"), 3.0);
        assert_eq!(m.weight("y", "z"), 2.5);

        // alpha = 0: weights identical to g1, vertices still unioned in
        let m0 = merge(&g1, &g2, 0.0).unwrap();
        assert_eq!(m0.weight("x", "y"), 2.0);
        assert_eq!(m0.edge_count(), 1);
        assert!(m0.contains_vertex("z"));

        // edge only in g2 with v = 5, alpha = 0.3 -> 1.5
        let m3 = merge(&QueryPartGraph::new(), &g2, 0.3).unwrap();
        assert!((m3.weight("y", "z") - 1.5).abs() < 1e-15);
    }

    #[test]
    fn merge_self_is_identity() {
        let (q1, q2) = two_query_session();
        let log = Log::new(vec![Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q1, q2],
        }]);
        let g = build_log_graph(&log, &QueryPartGraph::new()).unwrap();
        for alpha in [0.0, 0.3, 0.9] {
            let m = merge(&g, &g, alpha).unwrap();
            assert_eq!(m.vertices(), g.vertices());
            for (k, w) in g.edges() {
                assert!((m.edges()[k] - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_rejects_alpha_one() {
        let g = QueryPartGraph::new();
        assert!(matches!(merge(&g, &g, 1.0), Err(Error::AlphaOutOfRange(_))));
        assert!(matches!(merge(&g, &g, -0.1), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn connectivity_on_schema_graph_alone() {
        let schema = toy_schema();
        let report = check_connectivity(&build_schema_graph(&schema));
        assert!(!report.strongly_connected);
        assert_eq!(report.unreached_measures.len(), 1);
        assert!(report.unreached_measures.contains("M:REVENUE"));
    }

    #[test]
    fn connectivity_after_measure_usage() {
        let schema = toy_schema();
        let base = build_schema_graph(&schema);
        let log = Log::new(vec![Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q(&["REVENUE"], &[("CUSTOMER", "REGION")], &[])],
        }]);
        let g = build_log_graph(&log, &base).unwrap();
        let report = check_connectivity(&g);
        assert!(report.strongly_connected, "{report:?}");
        assert_eq!(report.component_count, 1);
        assert!(report.unreached_measures.is_empty());
    }

    #[test]
    fn single_vertex_self_loop_is_strongly_connected() {
        let mut g = QueryPartGraph::new();
        g.bump("v", "v", 1.0);
        let report = check_connectivity(&g);
        assert!(report.strongly_connected);
        assert_eq!(report.component_count, 1);
    }

    #[test]
    fn csv_dump_is_sorted() {
        let mut g = QueryPartGraph::new();
        g.bump("b", "a", 1.0);
        g.bump("a", "b", 2.0);
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "src_id,dst_id,weight");
        assert_eq!(lines[1], "a,b,2.00000000e0");
        assert_eq!(lines[2], "b,a,1.00000000e0");
    }
}
