//! Descriptive series: sorted belief distributions and cumulative part
//! counts, in a common bundle format the experiments aggregate into.

use crate::belief::BeliefVector;
use crate::query::Session;
use crate::util::fmt_sig;
use std::collections::BTreeSet;

/// A labeled series with a mean and a standard deviation per x position.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBundle {
    pub label: String,
    /// Strictly increasing (query index or rank, 1-based).
    pub x: Vec<usize>,
    pub y: Vec<f64>,
    pub y_sd: Vec<f64>,
}

impl SeriesBundle {
    pub fn new(label: impl Into<String>) -> Self {
        SeriesBundle {
            label: label.into(),
            x: Vec::new(),
            y: Vec::new(),
            y_sd: Vec::new(),
        }
    }

    pub fn push(&mut self, x: usize, y: f64, y_sd: f64) {
        debug_assert!(self.x.last().is_none_or(|last| *last < x));
        self.x.push(x);
        self.y.push(y);
        self.y_sd.push(y_sd);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV dump `x,mean,sd`, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,mean,sd\n");
        for i in 0..self.x.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.x[i],
                fmt_sig(self.y[i], 9),
                fmt_sig(self.y_sd[i], 9)
            ));
        }
        out
    }
}

/// Probabilities of a belief vector sorted in decreasing order; x is the
/// rank. This is the shape plot of a belief distribution.
pub fn sorted_distribution(belief: &BeliefVector) -> SeriesBundle {
    let mut probabilities: Vec<f64> = belief.probabilities().values().copied().collect();
    probabilities.sort_by(|a, b| b.partial_cmp(a).expect("probabilities are finite"));
    let mut series = SeriesBundle::new("belief");
    for (rank, p) in probabilities.into_iter().enumerate() {
        series.push(rank + 1, p, 0.0);
    }
    series
}

/// Width of the initial plateau of a descending series: the maximal prefix
/// whose values stay within `tolerance` (relative) of the first value.
pub fn plateau_width(series: &SeriesBundle, tolerance: f64) -> usize {
    let Some(&first) = series.y.first() else { return 0 };
    series
        .y
        .iter()
        .take_while(|&&v| (first - v).abs() <= tolerance * first)
        .count()
}

/// Cumulative number of distinct query parts seen up to each query of a
/// session; monotone non-decreasing.
pub fn cumulative_unique_parts(session: &Session) -> SeriesBundle {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut series = SeriesBundle::new(session.id.clone());
    for (qi, q) in session.queries.iter().enumerate() {
        seen.extend(q.part_ids());
        series.push(qi + 1, seen.len() as f64, 0.0);
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Query;
    use std::collections::BTreeMap;

    #[test]
    fn sorted_distribution_uniform() {
        let b = BeliefVector::from_probabilities(BTreeMap::from([
            ("a".to_string(), 0.25),
            ("b".to_string(), 0.25),
            ("c".to_string(), 0.25),
            ("d".to_string(), 0.25),
        ]));
        let s = sorted_distribution(&b);
        assert_eq!(s.x, vec![1, 2, 3, 4]);
        assert_eq!(s.y, vec![0.25; 4]);
        assert_eq!(plateau_width(&s, 0.05), 4);
    }

    #[test]
    fn sorted_distribution_is_non_increasing_and_normalized() {
        let b = BeliefVector::from_probabilities(BTreeMap::from([
            ("a".to_string(), 0.5),
            ("b".to_string(), 0.1),
            ("c".to_string(), 0.4),
        ]));
        let s = sorted_distribution(&b);
        assert!(s.y.windows(2).all(|w| w[0] >= w[1]));
        assert!((s.y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(plateau_width(&s, 0.05), 1);
    }

    fn query_with_measures(ms: &[&str]) -> Query {
        let mut q = Query::default();
        q.measures.extend(ms.iter().map(|m| m.to_string()));
        q
    }

    #[test]
    fn cumulative_counts_match_hand_trace() {
        // parts {a,b}, {b,c}, {c} -> 2, 3, 3
        let session = Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![
                query_with_measures(&["a", "b"]),
                query_with_measures(&["b", "c"]),
                query_with_measures(&["c"]),
            ],
        };
        let s = cumulative_unique_parts(&session);
        assert_eq!(s.y, vec![2.0, 3.0, 3.0]);
    }

    #[test]
    fn single_query_session() {
        let session = Session {
            id: "s".into(),
            user: "u".into(),
            template_label: None,
            queries: vec![query_with_measures(&["a", "b", "c"])],
        };
        assert_eq!(cumulative_unique_parts(&session).y, vec![3.0]);
    }

    #[test]
    fn csv_shape() {
        let mut s = SeriesBundle::new("t");
        s.push(1, 2.0, 0.5);
        let csv = s.to_csv();
        assert_eq!(csv, "x,mean,sd\n1,2.00000000e0,5.00000000e-1\n");
    }
}
