//! Multidimensional schema: hierarchies, levels, member trees and measures.
//!
//! The schema defines the universe of query parts. Each hierarchy is an
//! ordered list of levels, topmost first; the top level is an ALL level whose
//! only member is named `all`. Every member of a non-top level has exactly one
//! parent, and the children of the members at level `i` partition the member
//! set of level `i + 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::part::QueryPart;

/// One level of a hierarchy with its members and their children at the next
/// level (empty vectors at the bottom level).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub name: String,
    /// member value -> children at the next level, sorted by member value.
    pub members: BTreeMap<String, Vec<String>>,
}

/// A hierarchy: levels in roll-up order (ALL first) and the member tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    pub name: String,
    pub levels: Vec<Level>,
    /// For each level index >= 1: member -> parent member at the level above.
    parents: Vec<BTreeMap<String, String>>,
}

impl Hierarchy {
    /// Index of a level name, if present.
    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.name == level)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Member values of a level, in sorted order.
    pub fn members_at(&self, level_idx: usize) -> impl Iterator<Item = &str> {
        self.levels[level_idx].members.keys().map(|s| s.as_str())
    }

    /// Children of `member` at `level_idx` (living at `level_idx + 1`).
    pub fn children(&self, level_idx: usize, member: &str) -> &[String] {
        self.levels[level_idx]
            .members
            .get(member)
            .map(|c| c.as_slice())
            .unwrap_or(&[])
    }

    /// Parent of a member at `level_idx` (>= 1).
    pub fn parent(&self, level_idx: usize, member: &str) -> Option<&str> {
        if level_idx == 0 {
            return None;
        }
        self.parents[level_idx - 1].get(member).map(|s| s.as_str())
    }

    pub fn has_member(&self, level: &str, member: &str) -> bool {
        self.level_index(level)
            .is_some_and(|li| self.levels[li].members.contains_key(member))
    }
}

/// The cube schema: named hierarchies plus a set of measures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeSchema {
    pub name: String,
    pub hierarchies: Vec<Hierarchy>,
    pub measures: Vec<String>,
}

impl CubeSchema {
    /// Builds a schema from raw parts and validates every invariant.
    pub fn new(name: String, hierarchies: Vec<Hierarchy>, measures: Vec<String>) -> Result<Self> {
        let schema = CubeSchema {
            name,
            hierarchies,
            measures,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.hierarchies.is_empty() {
            return Err(Error::Schema("schema has no hierarchies".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::Schema("schema has no measures".into()));
        }
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for h in &self.hierarchies {
            if !names.insert(&h.name) {
                return Err(Error::Schema(format!("duplicate hierarchy name {}", h.name)));
            }
        }
        for m in &self.measures {
            if !names.insert(m) {
                return Err(Error::Schema(format!(
                    "measure name {m} duplicates another measure or hierarchy"
                )));
            }
        }
        for h in &self.hierarchies {
            validate_hierarchy(h)?;
        }
        Ok(())
    }

    pub fn hierarchy(&self, name: &str) -> Option<&Hierarchy> {
        self.hierarchies.iter().find(|h| h.name == name)
    }

    pub fn has_measure(&self, name: &str) -> bool {
        self.measures.iter().any(|m| m == name)
    }

    /// Enumerates the full query-part universe: one level part per
    /// (hierarchy, level), one measure part per measure, and one member part
    /// per member (including the ALL member).
    pub fn enumerate_query_parts(&self) -> BTreeSet<QueryPart> {
        let mut parts = BTreeSet::new();
        for h in &self.hierarchies {
            for (li, level) in h.levels.iter().enumerate() {
                parts.insert(QueryPart::level(&h.name, &level.name));
                for member in h.members_at(li) {
                    parts.insert(QueryPart::member(&h.name, &level.name, member));
                }
            }
        }
        for m in &self.measures {
            parts.insert(QueryPart::measure(m));
        }
        parts
    }

    /// Loads a schema document from a JSON string.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(text)?;
        doc.into_schema()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Serializes the schema back to its JSON document form. The output is
    /// deterministic: maps are written in sorted key order.
    pub fn to_json_string(&self) -> String {
        let doc = SchemaDoc::from_schema(self);
        serde_json::to_string_pretty(&doc).expect("schema serialization cannot fail")
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

fn validate_hierarchy(h: &Hierarchy) -> Result<()> {
    let ctx = &h.name;
    if h.levels.len() < 2 {
        return Err(Error::Schema(format!(
            "hierarchy {ctx} must have at least 2 levels (ALL plus one)"
        )));
    }
    let mut level_names = BTreeSet::new();
    for l in &h.levels {
        if !level_names.insert(&l.name) {
            return Err(Error::Schema(format!(
                "duplicate level name {} in hierarchy {ctx}",
                l.name
            )));
        }
    }
    let top = &h.levels[0];
    if top.members.len() != 1 || !top.members.contains_key("all") {
        return Err(Error::Schema(format!(
            "top level {} of hierarchy {ctx} must have exactly one member named \"all\"",
            top.name
        )));
    }
    for li in 0..h.levels.len() {
        let level = &h.levels[li];
        if level.members.is_empty() {
            return Err(Error::Schema(format!(
                "level {} of hierarchy {ctx} has no members",
                level.name
            )));
        }
        let next_members: Option<&BTreeMap<String, Vec<String>>> =
            h.levels.get(li + 1).map(|l| &l.members);
        let mut claimed: BTreeMap<&str, &str> = BTreeMap::new();
        for (member, children) in &level.members {
            match next_members {
                Some(next) => {
                    if children.is_empty() {
                        return Err(Error::Schema(format!(
                            "member {member} at level {} of hierarchy {ctx} has no children",
                            level.name
                        )));
                    }
                    for c in children {
                        if !next.contains_key(c) {
                            return Err(Error::Schema(format!(
                                "child {c} of member {member} at level {} of hierarchy {ctx} \
                                 does not exist at the next level",
                                level.name
                            )));
                        }
                        if let Some(prev) = claimed.insert(c, member) {
                            return Err(Error::Schema(format!(
                                "member {c} at level {} of hierarchy {ctx} has two parents \
                                 ({prev} and {member})",
                                h.levels[li + 1].name
                            )));
                        }
                    }
                }
                None => {
                    if !children.is_empty() {
                        return Err(Error::Schema(format!(
                            "member {member} at bottom level {} of hierarchy {ctx} lists children",
                            level.name
                        )));
                    }
                }
            }
        }
        if let Some(next) = next_members {
            for m in next.keys() {
                if !claimed.contains_key(m.as_str()) {
                    return Err(Error::Schema(format!(
                        "orphan member {m} at level {} of hierarchy {ctx} (no parent)",
                        h.levels[li + 1].name
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Builds the parent maps from the children lists.
fn build_parents(levels: &[Level]) -> Vec<BTreeMap<String, String>> {
    let mut parents = Vec::with_capacity(levels.len().saturating_sub(1));
    for li in 0..levels.len().saturating_sub(1) {
        let mut map = BTreeMap::new();
        for (member, children) in &levels[li].members {
            for c in children {
                map.insert(c.clone(), member.clone());
            }
        }
        parents.push(map);
    }
    parents
}

// --- JSON document form -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    name: String,
    measures: Vec<String>,
    hierarchies: Vec<HierarchyDoc>,
}

#[derive(Serialize, Deserialize)]
struct HierarchyDoc {
    name: String,
    levels: Vec<String>,
    /// level -> member -> children at the next level.
    members: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl SchemaDoc {
    fn into_schema(self) -> Result<CubeSchema> {
        let mut measures = Vec::new();
        for m in self.measures {
            if measures.contains(&m) {
                return Err(Error::Schema(format!("duplicate measure name {m}")));
            }
            measures.push(m);
        }
        let mut hierarchies = Vec::new();
        for hd in self.hierarchies {
            let mut levels = Vec::new();
            for level_name in &hd.levels {
                let members = hd.members.get(level_name).cloned().ok_or_else(|| {
                    Error::Schema(format!(
                        "hierarchy {} lists level {level_name} but gives it no members",
                        hd.name
                    ))
                })?;
                levels.push(Level {
                    name: level_name.clone(),
                    members,
                });
            }
            for level_name in hd.members.keys() {
                if !hd.levels.contains(level_name) {
                    return Err(Error::Schema(format!(
                        "hierarchy {} has members for unknown level {level_name}",
                        hd.name
                    )));
                }
            }
            let parents = build_parents(&levels);
            hierarchies.push(Hierarchy {
                name: hd.name,
                levels,
                parents,
            });
        }
        CubeSchema::new(self.name, hierarchies, measures)
    }

    fn from_schema(schema: &CubeSchema) -> Self {
        SchemaDoc {
            name: schema.name.clone(),
            measures: schema.measures.clone(),
            hierarchies: schema
                .hierarchies
                .iter()
                .map(|h| HierarchyDoc {
                    name: h.name.clone(),
                    levels: h.levels.iter().map(|l| l.name.clone()).collect(),
                    members: h
                        .levels
                        .iter()
                        .map(|l| (l.name.clone(), l.members.clone()))
                        .collect(),
                })
                .collect(),
        }
    }
}

// --- Synthetic schema generation --------------------------------------------

/// Parameters for synthetic schema generation. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSpec {
    /// Number of hierarchies.
    pub hierarchies: usize,
    /// Range of hierarchy depths, counting the ALL level.
    pub depth: (usize, usize),
    /// Range of per-level branching factors (children per member).
    pub branching: (usize, usize),
    /// Number of measures.
    pub measures: usize,
}

impl SchemaSpec {
    /// Desk-scale analogue of a star-schema benchmark cube: 4 hierarchies of
    /// depth 3-4 (ALL included), branching 2-5, 4 measures.
    pub fn ssb_like() -> Self {
        SchemaSpec {
            hierarchies: 4,
            depth: (3, 4),
            branching: (2, 5),
            measures: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hierarchies < 1 || self.measures < 1 {
            return Err(Error::InvalidParameter(
                "schema spec needs at least one hierarchy and one measure".into(),
            ));
        }
        if self.depth.0 < 2 || self.depth.0 > self.depth.1 {
            return Err(Error::InvalidParameter(format!(
                "depth range {:?} is empty or below 2",
                self.depth
            )));
        }
        if self.branching.0 < 1 || self.branching.0 > self.branching.1 {
            return Err(Error::InvalidParameter(format!(
                "branching range {:?} is empty or below 1",
                self.branching
            )));
        }
        Ok(())
    }
}

/// Generates a schema deterministically from a spec and a seed.
///
/// Depth and per-level branching are drawn per hierarchy; every member of a
/// level gets the same number of children, so member counts per level equal
/// the product of the branching factors along the path from ALL.
pub fn generate_schema(spec: &SchemaSpec, seed: u64) -> Result<CubeSchema> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hierarchies = Vec::with_capacity(spec.hierarchies);
    for hi in 0..spec.hierarchies {
        let name = format!("dim{hi}");
        let depth = rng.gen_range(spec.depth.0..=spec.depth.1);
        let mut levels = vec![Level {
            name: "ALL".to_string(),
            members: BTreeMap::from([("all".to_string(), Vec::new())]),
        }];
        for li in 1..depth {
            let branching = rng.gen_range(spec.branching.0..=spec.branching.1);
            let mut next_members: BTreeMap<String, Vec<String>> = BTreeMap::new();
            let mut counter = 0usize;
            let parent_level = levels.last_mut().expect("at least the ALL level");
            for children in parent_level.members.values_mut() {
                for _ in 0..branching {
                    let value = format!("v{counter:04}");
                    counter += 1;
                    children.push(value.clone());
                    next_members.insert(value, Vec::new());
                }
            }
            levels.push(Level {
                name: format!("{name}_l{li}"),
                members: next_members,
            });
        }
        let parents = build_parents(&levels);
        hierarchies.push(Hierarchy {
            name,
            levels,
            parents,
        });
    }
    let measures = (0..spec.measures).map(|m| format!("m{m}")).collect();
    CubeSchema::new(format!("synthetic-{seed}"), hierarchies, measures)
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::CubeSchema;

    /// One CUSTOMER hierarchy (ALL -> REGION with AMERICA/EUROPE) and one
    /// REVENUE measure; the worked example used across the crate's tests.
    pub(crate) fn toy_schema() -> CubeSchema {
        CubeSchema::from_json_str(
            r#"{
                "name": "toy",
                "measures": ["REVENUE"],
                "hierarchies": [{
                    "name": "CUSTOMER",
                    "levels": ["ALL", "REGION"],
                    "members": {
                        "ALL": {"all": ["AMERICA", "EUROPE"]},
                        "REGION": {"AMERICA": [], "EUROPE": []}
                    }
                }]
            }"#,
        )
        .unwrap()
    }
}
