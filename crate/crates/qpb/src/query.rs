//! Queries, sessions and logs.
//!
//! A query is confounded with its set of query parts: a set of measures, a
//! group-by set of hierarchy levels and at most one member filter per
//! hierarchy. A session is a nonempty ordered list of queries; a log is a
//! collection of sessions with unique ids.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::part::QueryPart;
use crate::schema::CubeSchema;

/// A multidimensional query as a set of query parts.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Query {
    /// Measures returned by the query (at least one).
    pub measures: BTreeSet<String>,
    /// Group-by set: (hierarchy, level) pairs (at least one). The ALL level
    /// may appear explicitly as the coarsest granularity.
    pub group_by: BTreeSet<(String, String)>,
    /// Selection predicates: hierarchy -> (level, member). At most one per
    /// hierarchy by construction.
    pub filters: BTreeMap<String, (String, String)>,
}

impl Query {
    /// The query's part set.
    pub fn parts(&self) -> BTreeSet<QueryPart> {
        let mut parts = BTreeSet::new();
        for m in &self.measures {
            parts.insert(QueryPart::measure(m));
        }
        for (h, l) in &self.group_by {
            parts.insert(QueryPart::level(h, l));
        }
        for (h, (l, v)) in &self.filters {
            parts.insert(QueryPart::member(h, l, v));
        }
        parts
    }

    /// Canonical part identifiers of this query.
    pub fn part_ids(&self) -> BTreeSet<String> {
        self.parts().iter().map(|p| p.id()).collect()
    }

    /// Number of query parts; the complexity used by the interestingness
    /// measure. Kinds never collide, so this is a plain sum.
    pub fn complexity(&self) -> usize {
        self.measures.len() + self.group_by.len() + self.filters.len()
    }

    /// Checks the query invariants against a schema.
    pub fn validate(&self, schema: &CubeSchema) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::Log("query has no measure".into()));
        }
        if self.group_by.is_empty() {
            return Err(Error::Log("query has no group-by level".into()));
        }
        for m in &self.measures {
            if !schema.has_measure(m) {
                return Err(Error::Log(format!("unknown measure {m}")));
            }
        }
        for (h, l) in &self.group_by {
            let hierarchy = schema
                .hierarchy(h)
                .ok_or_else(|| Error::Log(format!("unknown hierarchy {h}")))?;
            if hierarchy.level_index(l).is_none() {
                return Err(Error::Log(format!("unknown level {l} in hierarchy {h}")));
            }
        }
        for (h, (l, v)) in &self.filters {
            let hierarchy = schema
                .hierarchy(h)
                .ok_or_else(|| Error::Log(format!("unknown hierarchy {h}")))?;
            if hierarchy.level_index(l).is_none() {
                return Err(Error::Log(format!("unknown level {l} in hierarchy {h}")));
            }
            if !hierarchy.has_member(l, v) {
                return Err(Error::Log(format!(
                    "unknown member {} (part V:{h}/{l}={v})",
                    v
                )));
            }
        }
        Ok(())
    }
}

/// An exploration: an ordered, nonempty sequence of queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub user: String,
    pub template_label: Option<String>,
    pub queries: Vec<Query>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Union of part ids over all queries.
    pub fn part_ids(&self) -> BTreeSet<String> {
        let mut ids = BTreeSet::new();
        for q in &self.queries {
            ids.extend(q.part_ids());
        }
        ids
    }
}

/// A collection of sessions with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Log {
    pub sessions: Vec<Session>,
}

impl Log {
    pub fn new(sessions: Vec<Session>) -> Self {
        Log { sessions }
    }

    pub fn empty() -> Self {
        Log::default()
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.iter().find(|s| s.id == id)
    }

    pub fn query_count(&self) -> usize {
        self.sessions.iter().map(|s| s.len()).sum()
    }

    /// Concatenates logs; duplicate session ids are rejected.
    pub fn concat(logs: impl IntoIterator<Item = Log>) -> Result<Log> {
        let mut sessions = Vec::new();
        let mut seen = BTreeSet::new();
        for log in logs {
            for s in log.sessions {
                if !seen.insert(s.id.clone()) {
                    return Err(Error::Log(format!("duplicate session id {}", s.id)));
                }
                sessions.push(s);
            }
        }
        Ok(Log { sessions })
    }

    /// Parses and validates a log document against a schema.
    pub fn from_json_str(text: &str, schema: &CubeSchema) -> Result<Self> {
        let doc: LogDoc = serde_json::from_str(text)?;
        doc.into_log(schema)
    }

    pub fn from_path(path: impl AsRef<Path>, schema: &CubeSchema) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, schema)
    }

    /// Serializes to the canonical JSON document form. Deterministic: sets and
    /// maps are written in sorted order.
    pub fn to_json_string(&self) -> String {
        let doc = LogDoc::from_log(self);
        serde_json::to_string_pretty(&doc).expect("log serialization cannot fail")
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

// --- JSON document form -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LogDoc {
    sessions: Vec<SessionDoc>,
}

#[derive(Serialize, Deserialize)]
struct SessionDoc {
    id: String,
    user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<String>,
    queries: Vec<QueryDoc>,
}

#[derive(Serialize, Deserialize)]
struct QueryDoc {
    measures: Vec<String>,
    #[serde(rename = "groupBy")]
    group_by: Vec<GroupByDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    filters: Vec<FilterDoc>,
}

#[derive(Serialize, Deserialize)]
struct GroupByDoc {
    hierarchy: String,
    level: String,
}

#[derive(Serialize, Deserialize)]
struct FilterDoc {
    hierarchy: String,
    level: String,
    member: String,
}

impl LogDoc {
    fn into_log(self, schema: &CubeSchema) -> Result<Log> {
        let mut sessions = Vec::new();
        let mut ids = BTreeSet::new();
        for sd in self.sessions {
            if !ids.insert(sd.id.clone()) {
                return Err(Error::Log(format!("duplicate session id {}", sd.id)));
            }
            if sd.queries.is_empty() {
                return Err(Error::Log(format!("session {} has no queries", sd.id)));
            }
            let mut queries = Vec::new();
            for (qi, qd) in sd.queries.into_iter().enumerate() {
                let query = qd.into_query(&sd.id, qi)?;
                query.validate(schema).map_err(|e| {
                    Error::Log(format!("session {}, query {}: {e}", sd.id, qi + 1))
                })?;
                queries.push(query);
            }
            sessions.push(Session {
                id: sd.id,
                user: sd.user,
                template_label: sd.template,
                queries,
            });
        }
        Ok(Log { sessions })
    }

    fn from_log(log: &Log) -> Self {
        LogDoc {
            sessions: log
                .sessions
                .iter()
                .map(|s| SessionDoc {
                    id: s.id.clone(),
                    user: s.user.clone(),
                    template: s.template_label.clone(),
                    queries: s
                        .queries
                        .iter()
                        .map(|q| QueryDoc {
                            measures: q.measures.iter().cloned().collect(),
                            group_by: q
                                .group_by
                                .iter()
                                .map(|(h, l)| GroupByDoc {
                                    hierarchy: h.clone(),
                                    level: l.clone(),
                                })
                                .collect(),
                            filters: q
                                .filters
                                .iter()
                                .map(|(h, (l, v))| FilterDoc {
                                    hierarchy: h.clone(),
                                    level: l.clone(),
                                    member: v.clone(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl QueryDoc {
    fn into_query(self, session_id: &str, query_idx: usize) -> Result<Query> {
        let mut query = Query::default();
        query.measures.extend(self.measures);
        for g in self.group_by {
            query.group_by.insert((g.hierarchy, g.level));
        }
        for f in self.filters {
            let entry = (f.level, f.member);
            if let Some(existing) = query.filters.get(&f.hierarchy) {
                if *existing != entry {
                    return Err(Error::Log(format!(
                        "session {session_id}, query {}: two filters on hierarchy {}",
                        query_idx + 1,
                        f.hierarchy
                    )));
                }
            } else {
                query.filters.insert(f.hierarchy, entry);
            }
        }
        Ok(query)
    }
}
