//! Query parts: the atoms a multidimensional query is made of.
//!
//! A query part is either a group-by level, a measure, or the member of a
//! selection predicate `level = member`. Every part has a canonical string
//! identifier that is stable across runs and platforms:
//!
//! * level: `L:<hierarchy>/<level>`
//! * measure: `M:<measure>`
//! * member: `V:<hierarchy>/<level>=<member>`
//!
//! Graphs, belief vectors and CSV dumps are all keyed by these identifiers.

use std::fmt;

/// One atomic constituent of a multidimensional query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryPart {
    /// A group-by level of a hierarchy.
    Level { hierarchy: String, level: String },
    /// A measure returned by the query.
    Measure { name: String },
    /// The member value of a selection predicate `level = member`. Members
    /// are scoped by hierarchy and level, so equal member values in different
    /// hierarchies are distinct parts.
    Member {
        hierarchy: String,
        level: String,
        value: String,
    },
}

impl QueryPart {
    pub fn level(hierarchy: impl Into<String>, level: impl Into<String>) -> Self {
        QueryPart::Level {
            hierarchy: hierarchy.into(),
            level: level.into(),
        }
    }

    pub fn measure(name: impl Into<String>) -> Self {
        QueryPart::Measure { name: name.into() }
    }

    pub fn member(
        hierarchy: impl Into<String>,
        level: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        QueryPart::Member {
            hierarchy: hierarchy.into(),
            level: level.into(),
            value: value.into(),
        }
    }

    /// Canonical identifier, unique over all parts of a schema.
    pub fn id(&self) -> String {
        match self {
            QueryPart::Level { hierarchy, level } => format!("L:{hierarchy}/{level}"),
            QueryPart::Measure { name } => format!("M:{name}"),
            QueryPart::Member {
                hierarchy,
                level,
                value,
            } => format!("V:{hierarchy}/{level}={value}"),
        }
    }

    /// True for measure parts; used by connectivity reporting.
    pub fn is_measure(&self) -> bool {
        matches!(self, QueryPart::Measure { .. })
    }
}

impl fmt::Display for QueryPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Returns true when a canonical part id denotes a measure.
pub fn is_measure_id(id: &str) -> bool {
    id.starts_with("M:")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ids() {
        assert_eq!(QueryPart::level("CUSTOMER", "REGION").id(), "L:CUSTOMER/REGION");
        assert_eq!(QueryPart::measure("REVENUE").id(), "M:REVENUE");
        assert_eq!(
            QueryPart::member("CUSTOMER", "REGION", "EUROPE").id(),
            "V:CUSTOMER/REGION=EUROPE"
        );
    }

    #[test]
    fn ids_distinguish_scope() {
        // Same member value in two hierarchies must stay distinct.
        let a = QueryPart::member("CUSTOMER", "CITY", "PARIS");
        let b = QueryPart::member("SUPPLIER", "CITY", "PARIS");
        assert_ne!(a.id(), b.id());
    }
}
