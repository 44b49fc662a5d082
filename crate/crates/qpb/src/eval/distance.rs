//! Discrete Hellinger distance between belief vectors.

use crate::belief::BeliefVector;
use crate::error::{Error, Result};

/// How far a belief vector's mass may deviate from 1 before it is rejected.
const NORMALIZATION_SLACK: f64 = 1e-6;

/// Discrete Hellinger distance
/// `H(P, Q) = (1/√2) · √(Σ (√pᵢ − √qᵢ)²)`,
/// symmetric and bounded in [0, 1].
///
/// Supports are aligned over the union of part ids; a part absent from one
/// distribution counts as probability zero. Inputs must sum to 1 within
/// 1e-6.
///
/// # Examples
///
/// ```
/// use std::collections::BTreeMap;
/// use qpb::{hellinger, BeliefVector};
///
/// let p = BeliefVector::from_probabilities(BTreeMap::from([
///     ("a".to_string(), 0.5),
///     ("b".to_string(), 0.5),
/// ]));
/// assert!(hellinger(&p, &p).unwrap() < 1e-12);
/// ```
pub fn hellinger(p: &BeliefVector, q: &BeliefVector) -> Result<f64> {
    for side in [p, q] {
        let sum = side.sum();
        if (sum - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::NotNormalized(sum));
        }
    }
    let mut total = 0.0f64;
    for (id, &pi) in p.probabilities() {
        let qi = q.probability(id).unwrap_or(0.0);
        let d = pi.sqrt() - qi.sqrt();
        total += d * d;
    }
    for (id, &qi) in q.probabilities() {
        if p.probability(id).is_none() {
            total += qi;
        }
    }
    Ok((total.sqrt() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn belief(pairs: &[(&str, f64)]) -> BeliefVector {
        BeliefVector::from_probabilities(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    #[test]
    fn identity_is_zero() {
        let p = belief(&[("a", 0.3), ("b", 0.7)]);
        assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_are_maximal() {
        let p = belief(&[("a", 1.0)]);
        let q = belief(&[("b", 1.0)]);
        assert_eq!(hellinger(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn worked_example() {
        let p = belief(&[("a", 0.5), ("b", 0.5)]);
        let q = belief(&[("a", 1.0), ("b", 0.0)]);
        let d = hellinger(&p, &q).unwrap();
        assert!((d - 0.5411961001461969).abs() < 1e-9, "{d}");
    }

    #[test]
    fn rejects_unnormalized_input() {
        let p = belief(&[("a", 0.5), ("b", 0.6)]);
        let q = belief(&[("a", 1.0)]);
        assert!(matches!(hellinger(&p, &q), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn aligns_union_of_supports() {
        // same distribution, one side lists an explicit zero
        let p = belief(&[("a", 0.5), ("b", 0.5), ("c", 0.0)]);
        let q = belief(&[("a", 0.5), ("b", 0.5)]);
        assert!(hellinger(&p, &q).unwrap() < 1e-12);
    }
}
