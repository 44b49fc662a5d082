//! Session-based nearest-neighbor recommender.
//!
//! This is a deliberately simple surrogate for a full OLAP recommender: it
//! finds the training session whose cumulative part set best matches the
//! seed prefix (Jaccard similarity) and replays that session's continuation.
//! It exists so the recommender-impact experiment has a deterministic,
//! documented recommendation source; it makes no claim of recommendation
//! quality.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::query::{Log, Query, Session};

/// Returns up to `k` queries continuing the training session that aligns
/// best with `seed_prefix`.
///
/// The alignment point of a session is the prefix length maximizing the
/// Jaccard similarity between the session's cumulative part set and the seed
/// prefix's cumulative part set. Ties break deterministically: smaller
/// session id first, then the deepest alignment point.
pub fn recommend(training: &Log, seed_prefix: &Session, k: usize) -> Result<Vec<Query>> {
    if training.sessions.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let prefix_parts = seed_prefix.part_ids();

    let mut sessions: Vec<&Session> = training.sessions.iter().collect();
    sessions.sort_by(|a, b| a.id.cmp(&b.id));

    // Jaccard values are ratios of small integers; compare them exactly by
    // cross-multiplication to keep tie handling deterministic.
    let mut best: Option<(usize, usize, &Session, usize)> = None; // (inter, union, session, j)
    for session in sessions {
        let mut cumulative: BTreeSet<String> = BTreeSet::new();
        for (qi, query) in session.queries.iter().enumerate() {
            cumulative.extend(query.part_ids());
            let inter = cumulative.intersection(&prefix_parts).count();
            let union = cumulative.union(&prefix_parts).count();
            let better = match &best {
                None => true,
                Some((bi, bu, bs, bj)) => {
                    let lhs = (inter as u128) * (*bu as u128);
                    let rhs = (*bi as u128) * (union as u128);
                    lhs > rhs
                        || (lhs == rhs
                            && std::ptr::eq(*bs, session)
                            && qi + 1 > *bj)
                }
            };
            if better {
                best = Some((inter, union, session, qi + 1));
            }
        }
    }
    let (_, _, session, j) = best.expect("training log is nonempty");
    Ok(session.queries.iter().skip(j).take(k).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query_of(measures: &[&str]) -> Query {
        let mut q = Query::default();
        q.measures.extend(measures.iter().map(|m| m.to_string()));
        q
    }

    fn session_of(id: &str, queries: Vec<Query>) -> Session {
        Session {
            id: id.into(),
            user: "u".into(),
            template_label: None,
            queries,
        }
    }

    #[test]
    fn exact_prefix_match_returns_continuation() {
        let training = Log::new(vec![session_of(
            "t1",
            vec![
                query_of(&["a"]),
                query_of(&["b"]),
                query_of(&["c"]),
                query_of(&["d"]),
            ],
        )]);
        let prefix = session_of("seed", vec![query_of(&["a"]), query_of(&["b"])]);
        let rec = recommend(&training, &prefix, 2).unwrap();
        assert_eq!(rec, vec![query_of(&["c"]), query_of(&["d"])]);
    }

    #[test]
    fn k_larger_than_continuation_truncates() {
        let training = Log::new(vec![session_of(
            "t1",
            vec![query_of(&["a"]), query_of(&["b"]), query_of(&["c"])],
        )]);
        let prefix = session_of("seed", vec![query_of(&["a"]), query_of(&["b"])]);
        let rec = recommend(&training, &prefix, 10).unwrap();
        assert_eq!(rec, vec![query_of(&["c"])]);
    }

    #[test]
    fn overlapping_session_beats_disjoint_one() {
        let training = Log::new(vec![
            session_of("a-disjoint", vec![query_of(&["x"]), query_of(&["y"])]),
            session_of("b-overlap", vec![query_of(&["a"]), query_of(&["z"])]),
        ]);
        let prefix = session_of("seed", vec![query_of(&["a"])]);
        let rec = recommend(&training, &prefix, 1).unwrap();
        // oracle: jaccard({x},{a}) = 0 and jaccard({a},{a}) = 1, so the
        // overlapping session is selected and its continuation returned
        assert_eq!(rec, vec![query_of(&["z"])]);
    }

    #[test]
    fn ties_break_by_session_id() {
        let training = Log::new(vec![
            session_of("s2", vec![query_of(&["a"]), query_of(&["m"])]),
            session_of("s1", vec![query_of(&["a"]), query_of(&["n"])]),
        ]);
        let prefix = session_of("seed", vec![query_of(&["a"])]);
        let rec = recommend(&training, &prefix, 1).unwrap();
        assert_eq!(rec, vec![query_of(&["n"])]);
    }

    #[test]
    fn empty_training_is_an_error() {
        let prefix = session_of("seed", vec![query_of(&["a"])]);
        assert!(matches!(
            recommend(&Log::empty(), &prefix, 1),
            Err(Error::EmptyTraining)
        ));
    }
}
