//! Subjective interestingness of queries.
//!
//! The surprise of a query is the information content of its parts under the
//! current belief, `-Σ ln belief(p)` over the query's parts (part
//! probabilities are treated as independent under the stationary
//! distribution). Interestingness divides that surprise by the query's
//! complexity, measured as its number of query parts.
//!
//! [`evaluate_session`] scores a whole exploration incrementally: the session
//! graph grows query by query, is blended into the topology graph with the
//! `alpha` weight, and the belief is recomputed before scoring each query.

use std::path::Path;

use crate::belief::{pagerank, BeliefVector, PageRankConfig};
use crate::error::{Error, Result};
use crate::graph::{add_query_increment, build_log_graph, build_schema_graph, merge, QueryPartGraph};
use crate::query::{Log, Query, Session};
use crate::schema::CubeSchema;
use crate::util::fmt_sig;

/// Interestingness of one query of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SiScore {
    /// Session the query belongs to; empty when scored outside a session.
    pub session_id: String,
    /// 1-based position of the query in its session; 0 outside a session.
    pub query_index: usize,
    /// Information content of the query's parts, in nats.
    pub surprise: f64,
    /// Number of query parts.
    pub complexity: usize,
    /// `surprise / complexity`.
    pub si: f64,
}

/// Information content of a query under a belief: `-Σ ln belief(p)` over the
/// query's parts. Nonnegative since probabilities never exceed 1.
///
/// A part that is missing from the belief support (or carries probability
/// zero) is an error: the graph that produced the belief did not include it.
pub fn surprise(query: &Query, belief: &BeliefVector) -> Result<f64> {
    let mut total = 0.0;
    for part in query.parts() {
        let id = part.id();
        let p = belief
            .probability(&id)
            .ok_or_else(|| Error::MissingBelief(id.clone()))?;
        if p <= 0.0 {
            return Err(Error::MissingBelief(id));
        }
        total -= p.ln();
    }
    Ok(total)
}

/// Scores one query against a belief. The session context fields are left
/// empty; [`evaluate_session`] fills them.
pub fn si(query: &Query, belief: &BeliefVector) -> Result<SiScore> {
    let surprise = surprise(query, belief)?;
    let complexity = query.complexity();
    Ok(SiScore {
        session_id: String::new(),
        query_index: 0,
        surprise,
        complexity,
        si: surprise / complexity as f64,
    })
}

/// Scores every query of a session incrementally against the topology built
/// from the schema and the global log.
pub fn evaluate_session(
    session: &Session,
    global_log: &Log,
    schema: &CubeSchema,
    alpha: f64,
    config: &PageRankConfig,
) -> Result<Vec<SiScore>> {
    let topology = build_log_graph(global_log, &build_schema_graph(schema))?;
    evaluate_session_on_topology(session, None, &topology, alpha, config)
}

/// Like [`evaluate_session`], but the user's past sessions are folded into
/// the session graph before the evaluated session starts.
pub fn evaluate_session_with_history(
    session: &Session,
    history: &Log,
    global_log: &Log,
    schema: &CubeSchema,
    alpha: f64,
    config: &PageRankConfig,
) -> Result<Vec<SiScore>> {
    let topology = build_log_graph(global_log, &build_schema_graph(schema))?;
    evaluate_session_on_topology(session, Some(history), &topology, alpha, config)
}

/// Incremental evaluation against a prebuilt topology graph. The experiment
/// harness uses this to share one topology across many sessions.
pub fn evaluate_session_on_topology(
    session: &Session,
    history: Option<&Log>,
    topology: &QueryPartGraph,
    alpha: f64,
    config: &PageRankConfig,
) -> Result<Vec<SiScore>> {
    let mut session_graph = match history {
        Some(log) => build_log_graph(log, &QueryPartGraph::new())?,
        None => QueryPartGraph::new(),
    };
    let mut scores = Vec::with_capacity(session.len());
    let mut previous: Option<&Query> = None;
    for (qi, query) in session.queries.iter().enumerate() {
        session_graph = add_query_increment(&session_graph, previous, query);
        let belief = pagerank(&merge(topology, &session_graph, alpha)?, config)?;
        let mut score = si(query, &belief)?;
        score.session_id = session.id.clone();
        score.query_index = qi + 1;
        scores.push(score);
        previous = Some(query);
    }
    Ok(scores)
}

/// CSV dump `session_id,query_index,surprise,complexity,si`, one row per
/// query, 9 significant digits.
pub fn scores_to_csv(scores: &[SiScore]) -> String {
    let mut out = String::from("session_id,query_index,surprise,complexity,si\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.session_id,
            s.query_index,
            fmt_sig(s.surprise, 9),
            s.complexity,
            fmt_sig(s.si, 9)
        ));
    }
    out
}

pub fn write_scores_csv(scores: &[SiScore], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scores_to_csv(scores))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::compute_belief;
    use crate::schema::tests_support::toy_schema;
    use std::collections::BTreeMap;

    fn belief_of(pairs: &[(&str, f64)]) -> BeliefVector {
        BeliefVector::from_probabilities(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    fn two_part_query() -> Query {
        let mut q = Query::default();
        q.measures.insert("REVENUE".into());
        q.group_by.insert(("CUSTOMER".into(), "REGION".into()));
        q
    }

    #[test]
    fn certain_parts_give_zero_surprise() {
        let q = two_part_query();
        let b = belief_of(&[("M:REVENUE", 1.0), ("L:CUSTOMER/REGION", 1.0)]);
        assert_eq!(surprise(&q, &b).unwrap(), 0.0);
        assert_eq!(si(&q, &b).unwrap().si, 0.0);
    }

    #[test]
    fn quarter_probabilities_match_analytic_value() {
        let q = two_part_query();
        let b = belief_of(&[("M:REVENUE", 0.25), ("L:CUSTOMER/REGION", 0.25)]);
        let s = surprise(&q, &b).unwrap();
        assert!((s - 2.0 * 4.0f64.ln()).abs() < 1e-12);
        let score = si(&q, &b).unwrap();
        assert_eq!(score.complexity, 2);
        assert!((score.si - 4.0f64.ln()).abs() < 1e-12);
        assert_eq!(score.si, score.surprise / score.complexity as f64);
    }

    #[test]
    fn missing_or_zero_probability_is_an_error() {
        let q = two_part_query();
        let missing = belief_of(&[("M:REVENUE", 1.0)]);
        assert!(matches!(
            surprise(&q, &missing),
            Err(Error::MissingBelief(ref p)) if p == "L:CUSTOMER/REGION"
        ));
        let zero = belief_of(&[("M:REVENUE", 1.0), ("L:CUSTOMER/REGION", 0.0)]);
        assert!(surprise(&q, &zero).is_err());
    }

    #[test]
    fn rarer_parts_are_more_surprising() {
        let q = two_part_query();
        let b1 = belief_of(&[("M:REVENUE", 0.5), ("L:CUSTOMER/REGION", 0.25)]);
        let b2 = belief_of(&[("M:REVENUE", 0.5), ("L:CUSTOMER/REGION", 0.1)]);
        assert!(surprise(&q, &b2).unwrap() > surprise(&q, &b1).unwrap());
    }

    fn toy_session() -> (CubeSchema, Log, Session) {
        let schema = toy_schema();
        let mut q1 = two_part_query();
        q1.filters
            .insert("CUSTOMER".into(), ("REGION".into(), "EUROPE".into()));
        let mut q2 = two_part_query();
        q2.filters
            .insert("CUSTOMER".into(), ("REGION".into(), "AMERICA".into()));
        let q3 = two_part_query();
        let session = Session {
            id: "s1".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![q1, q2, q3],
        };
        let log = Log::new(vec![session.clone()]);
        (schema, log, session)
    }

    #[test]
    fn session_evaluation_yields_one_score_per_query() {
        let (schema, log, session) = toy_session();
        let scores =
            evaluate_session(&session, &log, &schema, 0.5, &PageRankConfig::default()).unwrap();
        assert_eq!(scores.len(), 3);
        for (i, s) in scores.iter().enumerate() {
            assert_eq!(s.query_index, i + 1);
            assert_eq!(s.session_id, "s1");
            assert!(s.si.is_finite() && s.si >= 0.0);
        }
    }

    #[test]
    fn incremental_equals_batch() {
        let (schema, log, session) = toy_session();
        let config = PageRankConfig::default();
        let topology =
            build_log_graph(&log, &build_schema_graph(&schema)).unwrap();
        let scores =
            evaluate_session(&session, &log, &schema, 0.7, &config).unwrap();
        for i in 1..=session.len() {
            let prefix = Session {
                id: "prefix".into(),
                user: "u".into(),
                template_label: None,
                queries: session.queries[..i].to_vec(),
            };
            let prefix_graph =
                build_log_graph(&Log::new(vec![prefix]), &QueryPartGraph::new()).unwrap();
            let batch = compute_belief(&topology, &prefix_graph, 0.7, &config).unwrap();
            let step = si(&session.queries[i - 1], &batch).unwrap();
            assert!(
                (step.si - scores[i - 1].si).abs() < 1e-9,
                "step {i}: {} vs {}",
                step.si,
                scores[i - 1].si
            );
        }
    }

    #[test]
    fn alpha_zero_scores_against_topology_only() {
        let (schema, log, session) = toy_session();
        let config = PageRankConfig::default();
        let topology = build_log_graph(&log, &build_schema_graph(&schema)).unwrap();
        let base = pagerank(&topology, &config).unwrap();
        let scores = evaluate_session(&session, &log, &schema, 0.0, &config).unwrap();
        for (qi, score) in scores.iter().enumerate() {
            let direct = si(&session.queries[qi], &base).unwrap();
            assert!((score.si - direct.si).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_shape() {
        let (schema, log, session) = toy_session();
        let scores =
            evaluate_session(&session, &log, &schema, 0.5, &PageRankConfig::default()).unwrap();
        let csv = scores_to_csv(&scores);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "session_id,query_index,surprise,complexity,si");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("s1,1,"));
    }
}
