//! Synthetic exploration generator.
//!
//! Four session templates mimic prototypical exploration behaviors:
//!
//! * `slice_all` keeps one seed query's group-by and measures and only moves
//!   the member filter across siblings at a fixed hierarchy level;
//! * `slice_and_drill` alternates sibling moves with drill-downs, never
//!   revisiting a query;
//! * `goal_oriented` walks from a seed query to a pre-drawn goal query, one
//!   atomic mutation at a time, strictly decreasing the part-set distance;
//! * `explorative` wanders freely for the first half of the session, then
//!   steers toward a "surprising" query assembled from parts unused so far.
//!
//! All randomness flows through a seeded ChaCha8 generator (`rand_chacha`),
//! so sessions are a pure function of (schema, params, id) and reproduce
//! bit-identically across platforms. The template mechanics are a
//! reconstruction from prose descriptions of the original generator; only
//! the relative behavior of the templates is meant to be faithful.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::query::{Log, Query, Session};
use crate::schema::{CubeSchema, Hierarchy};

/// The four exploration templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Explorative,
    GoalOriented,
    SliceAll,
    SliceAndDrill,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::Explorative,
        Template::GoalOriented,
        Template::SliceAll,
        Template::SliceAndDrill,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Template::Explorative => "explorative",
            Template::GoalOriented => "goal_oriented",
            Template::SliceAll => "slice_all",
            Template::SliceAndDrill => "slice_and_drill",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.label() == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown template {label}")))
    }
}

impl std::fmt::Display for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Parameters of one template instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateParams {
    pub template: Template,
    /// Inclusive target range for the session length.
    pub session_length: (usize, usize),
    pub seed: u64,
    /// Explorative only: number of mutation hops used to assemble the
    /// surprising query out of unused parts.
    pub surprise_hops: usize,
    /// Goal-oriented only: number of mutations between seed and goal.
    /// Defaults to the drawn session length minus one.
    pub goal_distance: Option<usize>,
}

impl TemplateParams {
    pub fn new(template: Template, seed: u64) -> Self {
        TemplateParams {
            template,
            session_length: (4, 12),
            seed,
            surprise_hops: 2,
            goal_distance: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.session_length;
        if lo < 2 || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "session length range ({lo}, {hi}) is empty or below 2"
            )));
        }
        Ok(())
    }
}

/// Generates one session. Deterministic for a fixed (schema, params, id).
pub fn generate_session(schema: &CubeSchema, params: &TemplateParams, id: &str) -> Result<Session> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let length = rng.gen_range(params.session_length.0..=params.session_length.1);
    let (queries, label_note) = match params.template {
        Template::SliceAll => slice_all(schema, &mut rng, length)?,
        Template::SliceAndDrill => slice_and_drill(schema, &mut rng, length)?,
        Template::GoalOriented => goal_oriented(schema, &mut rng, length, params.goal_distance)?,
        Template::Explorative => explorative(schema, &mut rng, length, params.surprise_hops)?,
    };
    debug_assert!(!queries.is_empty());
    for q in &queries {
        q.validate(schema)?;
    }
    let label = match label_note {
        Some(note) => format!("{}+{note}", params.template.label()),
        None => params.template.label().to_string(),
    };
    Ok(Session {
        id: id.to_string(),
        user: params.template.label().to_string(),
        template_label: Some(label),
        queries,
    })
}

/// Generates a log from a template mix. Session seeds are derived as
/// `seed ⊕ index` with a running index over the whole log; ids are
/// `"{template}-{index}"`.
pub fn generate_log(
    schema: &CubeSchema,
    mix: &[(TemplateParams, usize)],
    seed: u64,
) -> Result<Log> {
    let mut sessions = Vec::new();
    let mut index = 0u64;
    for (params, count) in mix {
        for _ in 0..*count {
            let mut p = params.clone();
            p.seed = seed ^ index;
            let id = format!("{}-{index}", p.template.label());
            sessions.push(generate_session(schema, &p, &id)?);
            index += 1;
        }
    }
    Ok(Log::new(sessions))
}

// --- Seed queries -------------------------------------------------------------

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Draws a random valid query: 1-2 group-by levels on distinct hierarchies,
/// 1-2 measures, and an optional member filter.
fn seed_query(schema: &CubeSchema, rng: &mut ChaCha8Rng) -> Query {
    let mut q = Query::default();
    let h_count = schema.hierarchies.len();
    let gb_count = rng.gen_range(1..=h_count.min(2));
    let mut order: Vec<usize> = (0..h_count).collect();
    order.shuffle(rng);
    for &hi in order.iter().take(gb_count) {
        let h = &schema.hierarchies[hi];
        let li = rng.gen_range(0..h.depth());
        q.group_by.insert((h.name.clone(), h.levels[li].name.clone()));
    }
    let m_count = rng.gen_range(1..=schema.measures.len().min(2));
    let mut measures: Vec<&String> = schema.measures.iter().collect();
    measures.shuffle(rng);
    for m in measures.into_iter().take(m_count) {
        q.measures.insert(m.clone());
    }
    if rng.gen_bool(0.5) {
        let h = &schema.hierarchies[rng.gen_range(0..h_count)];
        let li = shallow_level(h, rng);
        let members: Vec<&str> = h.members_at(li).collect();
        let v = *pick(rng, &members);
        q.filters
            .insert(h.name.clone(), (h.levels[li].name.clone(), v.to_string()));
    }
    q
}

// --- Atomic mutations ---------------------------------------------------------

// Size caps for queries produced by the random mutation walk; they keep
// walked queries comparable to the seeded template queries.
const MAX_WALK_FILTERS: usize = 1;
const MAX_WALK_MEASURES: usize = 2;

/// The closed move vocabulary all templates draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Mutation {
    /// Replace the group-by level of a hierarchy by an adjacent one.
    LevelShift { hierarchy: String, to_index: usize },
    /// Replace the member of an existing filter, same level.
    FilterSwap { hierarchy: String, member: String },
    FilterAdd {
        hierarchy: String,
        level_index: usize,
        member: String,
    },
    FilterRemove { hierarchy: String },
    MeasureAdd { measure: String },
    MeasureRemove { measure: String },
}

impl Mutation {
    fn apply(&self, q: &Query, schema: &CubeSchema) -> Query {
        let mut out = q.clone();
        match self {
            Mutation::LevelShift { hierarchy, to_index } => {
                let h = schema.hierarchy(hierarchy).expect("validated hierarchy");
                let current = out
                    .group_by
                    .iter()
                    .find(|(gh, _)| gh == hierarchy)
                    .cloned()
                    .expect("level shift targets an existing group-by entry");
                out.group_by.remove(&current);
                out.group_by
                    .insert((hierarchy.clone(), h.levels[*to_index].name.clone()));
            }
            Mutation::FilterSwap { hierarchy, member } => {
                let (level, _) = out.filters[hierarchy].clone();
                out.filters.insert(hierarchy.clone(), (level, member.clone()));
            }
            Mutation::FilterAdd {
                hierarchy,
                level_index,
                member,
            } => {
                let h = schema.hierarchy(hierarchy).expect("validated hierarchy");
                out.filters.insert(
                    hierarchy.clone(),
                    (h.levels[*level_index].name.clone(), member.clone()),
                );
            }
            Mutation::FilterRemove { hierarchy } => {
                out.filters.remove(hierarchy);
            }
            Mutation::MeasureAdd { measure } => {
                out.measures.insert(measure.clone());
            }
            Mutation::MeasureRemove { measure } => {
                out.measures.remove(measure);
            }
        }
        out
    }
}

/// Draws one random valid mutation: the kind first (uniform over kinds that
/// admit at least one instantiation), then a uniform instantiation.
fn random_mutation(q: &Query, schema: &CubeSchema, rng: &mut ChaCha8Rng) -> Option<Mutation> {
    let mut kinds: Vec<u8> = (0..6).collect();
    kinds.shuffle(rng);
    for kind in kinds {
        if let Some(m) = instantiate_kind(kind, q, schema, rng) {
            return Some(m);
        }
    }
    None
}

fn instantiate_kind(
    kind: u8,
    q: &Query,
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
) -> Option<Mutation> {
    match kind {
        0 => {
            // level shift
            let entries: Vec<(String, String)> = q.group_by.iter().cloned().collect();
            let (h_name, level) = pick(rng, &entries).clone();
            let h = schema.hierarchy(&h_name)?;
            let li = h.level_index(&level)?;
            let mut dirs = Vec::new();
            for target in [li.checked_sub(1), Some(li + 1)].into_iter().flatten() {
                if target < h.depth()
                    && !q.group_by.contains(&(h_name.clone(), h.levels[target].name.clone()))
                {
                    dirs.push(target);
                }
            }
            if dirs.is_empty() {
                return None;
            }
            Some(Mutation::LevelShift {
                hierarchy: h_name,
                to_index: *pick(rng, &dirs),
            })
        }
        1 => {
            // filter swap
            let entries: Vec<(&String, &(String, String))> = q.filters.iter().collect();
            if entries.is_empty() {
                return None;
            }
            let (h_name, (level, current)) = {
                let (h, lv) = *pick(rng, &entries);
                (h.clone(), lv.clone())
            };
            let h = schema.hierarchy(&h_name)?;
            let li = h.level_index(&level)?;
            let others: Vec<&str> = h.members_at(li).filter(|m| *m != current).collect();
            if others.is_empty() {
                return None;
            }
            Some(Mutation::FilterSwap {
                hierarchy: h_name,
                member: pick(rng, &others).to_string(),
            })
        }
        2 => {
            // filter add; walked queries carry at most one filter so the
            // random walk cannot drift into ever-larger queries
            if q.filters.len() >= MAX_WALK_FILTERS {
                return None;
            }
            let unfiltered: Vec<&Hierarchy> = schema
                .hierarchies
                .iter()
                .filter(|h| !q.filters.contains_key(&h.name))
                .collect();
            if unfiltered.is_empty() {
                return None;
            }
            let h = *pick(rng, &unfiltered);
            let li = shallow_level(h, rng);
            let members: Vec<&str> = h.members_at(li).collect();
            Some(Mutation::FilterAdd {
                hierarchy: h.name.clone(),
                level_index: li,
                member: pick(rng, &members).to_string(),
            })
        }
        3 => {
            // filter remove
            let hs: Vec<&String> = q.filters.keys().collect();
            if hs.is_empty() {
                return None;
            }
            Some(Mutation::FilterRemove {
                hierarchy: (*pick(rng, &hs)).clone(),
            })
        }
        4 => {
            // measure add, capped like filters
            if q.measures.len() >= MAX_WALK_MEASURES {
                return None;
            }
            let unused: Vec<&String> = schema
                .measures
                .iter()
                .filter(|m| !q.measures.contains(*m))
                .collect();
            if unused.is_empty() {
                return None;
            }
            Some(Mutation::MeasureAdd {
                measure: (*pick(rng, &unused)).clone(),
            })
        }
        5 => {
            // measure remove
            if q.measures.len() < 2 {
                return None;
            }
            let ms: Vec<&String> = q.measures.iter().collect();
            Some(Mutation::MeasureRemove {
                measure: (*pick(rng, &ms)).clone(),
            })
        }
        _ => None,
    }
}

/// Picks a filter level below ALL, biased toward the coarse end: freely
/// wandering walks filter on popular coarse members far more often than on
/// fine-grained ones.
fn shallow_level(h: &Hierarchy, rng: &mut ChaCha8Rng) -> usize {
    let choices: Vec<usize> = (1..h.depth()).collect();
    let weights: Vec<usize> = choices.iter().map(|li| 1 << (h.depth() - li)).collect();
    let total: usize = weights.iter().sum();
    let mut roll = rng.gen_range(0..total);
    for (li, w) in choices.iter().zip(&weights) {
        if roll < *w {
            return *li;
        }
        roll -= w;
    }
    *choices.last().expect("depth >= 2")
}

/// Symmetric-difference cardinality between two queries' part sets.
pub fn part_distance(a: &Query, b: &Query) -> usize {
    let pa = a.part_ids();
    let pb = b.part_ids();
    pa.symmetric_difference(&pb).count()
}

/// Candidate mutations that could bring `cur` closer to `goal`.
fn descent_candidates(cur: &Query, goal: &Query, schema: &CubeSchema) -> Vec<Mutation> {
    let mut cands = Vec::new();
    for m in goal.measures.difference(&cur.measures) {
        cands.push(Mutation::MeasureAdd { measure: m.clone() });
    }
    if cur.measures.len() >= 2 {
        for m in cur.measures.difference(&goal.measures) {
            cands.push(Mutation::MeasureRemove { measure: m.clone() });
        }
    }
    for (h, (level, member)) in &cur.filters {
        match goal.filters.get(h) {
            None => cands.push(Mutation::FilterRemove { hierarchy: h.clone() }),
            Some((gl, gv)) if gl == level && gv != member => {
                cands.push(Mutation::FilterSwap {
                    hierarchy: h.clone(),
                    member: gv.clone(),
                });
            }
            Some((gl, _)) if gl != level => {
                cands.push(Mutation::FilterRemove { hierarchy: h.clone() })
            }
            _ => {}
        }
    }
    for (h, (gl, gv)) in &goal.filters {
        if !cur.filters.contains_key(h) {
            if let Some(hier) = schema.hierarchy(h) {
                if let Some(li) = hier.level_index(gl) {
                    cands.push(Mutation::FilterAdd {
                        hierarchy: h.clone(),
                        level_index: li,
                        member: gv.clone(),
                    });
                }
            }
        }
    }
    for (h_name, level) in &cur.group_by {
        if goal.group_by.contains(&(h_name.clone(), level.clone())) {
            continue;
        }
        let Some(h) = schema.hierarchy(h_name) else { continue };
        let Some((_, goal_level)) = goal.group_by.iter().find(|(gh, _)| gh == h_name) else {
            continue;
        };
        let (Some(li), Some(gi)) = (h.level_index(level), h.level_index(goal_level)) else {
            continue;
        };
        // one-step moves only help when the goal level is adjacent
        if li.abs_diff(gi) == 1 {
            cands.push(Mutation::LevelShift {
                hierarchy: h_name.clone(),
                to_index: gi,
            });
        }
    }
    cands
}

/// One strictly-distance-decreasing step toward `goal`; `None` when already
/// there. Ties between equally good moves break by seeded randomness.
fn descent_step(
    cur: &Query,
    goal: &Query,
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
) -> Option<Query> {
    let base = part_distance(cur, goal);
    if base == 0 {
        return None;
    }
    let mut best: Vec<Query> = Vec::new();
    let mut best_dist = base;
    for m in descent_candidates(cur, goal, schema) {
        let next = m.apply(cur, schema);
        let d = part_distance(&next, goal);
        if d < best_dist {
            best_dist = d;
            best = vec![next];
        } else if d == best_dist && d < base {
            best.push(next);
        }
    }
    if best.is_empty() {
        None
    } else {
        Some(pick(rng, &best).clone())
    }
}

// --- Templates ----------------------------------------------------------------

type TemplateOutput = (Vec<Query>, Option<String>);

/// All queries share the seed's group-by and measures; only the member
/// filter changes, iterating over the members of one fixed (hierarchy,
/// level), direct siblings of one parent first. Only when the whole level
/// is exhausted does the template re-seed at another level, noting it in
/// the session label.
fn slice_all(schema: &CubeSchema, rng: &mut ChaCha8Rng, length: usize) -> Result<TemplateOutput> {
    // Slice locations are (hierarchy, level) pairs; prefer the deepest
    // levels wide enough to cover the whole session.
    let mut wide: Vec<(usize, usize)> = Vec::new();
    let mut any: Vec<(usize, usize)> = Vec::new();
    let mut deepest = 0usize;
    for (hi, h) in schema.hierarchies.iter().enumerate() {
        for li in 1..h.depth() {
            let entry = (hi, li);
            if h.levels[li].members.len() >= length {
                deepest = deepest.max(li);
                wide.push(entry);
            }
            any.push(entry);
        }
    }
    wide.retain(|(_, li)| *li == deepest);
    // The member pool of a location: children of one random parent first,
    // then the rest of the level, both in shuffled order. pop() consumes
    // from the back, so the rest goes in front.
    let pool_of = |hi: usize, li: usize, rng: &mut ChaCha8Rng| {
        let h = &schema.hierarchies[hi];
        let parents: Vec<&str> = h.members_at(li - 1).collect();
        let parent = *pick(rng, &parents);
        let mut first: Vec<String> = h.children(li - 1, parent).to_vec();
        first.shuffle(rng);
        let mut rest: Vec<String> = h
            .members_at(li)
            .filter(|m| !first.iter().any(|f| f == m))
            .map(|m| m.to_string())
            .collect();
        rest.shuffle(rng);
        rest.extend(first);
        (h.name.clone(), h.levels[li].name.clone(), rest)
    };

    let (hi, li) = if wide.is_empty() {
        *pick(rng, &any)
    } else {
        *pick(rng, &wide)
    };
    let (mut h_name, mut level, mut members) = pool_of(hi, li, rng);

    // The whole session shares the seed's group-by and measures; only the
    // member filter moves. Grouping by the sliced level itself keeps the
    // session anchored to the slice location.
    let mut base = seed_query(schema, rng);
    base.filters.clear();
    base.group_by.retain(|(gh, _)| *gh != h_name);
    base.group_by.insert((h_name.clone(), level.clone()));

    let mut queries = Vec::with_capacity(length);
    let mut used: BTreeSet<(String, String, String)> = BTreeSet::new();
    let mut reseeds = 0usize;
    let mut guard = 0usize;
    while queries.len() < length {
        guard += 1;
        if guard > 100 * length {
            break;
        }
        match members.pop() {
            Some(v) => {
                let key = (h_name.clone(), level.clone(), v.clone());
                if !used.insert(key) {
                    continue;
                }
                let mut q = base.clone();
                q.filters.insert(h_name.clone(), (level.clone(), v));
                queries.push(q);
            }
            None => {
                // level exhausted: re-seed at another level
                reseeds += 1;
                let (hi, li) = *pick(rng, &any);
                let (nh, nl, nm) = pool_of(hi, li, rng);
                h_name = nh;
                level = nl;
                members = nm;
            }
        }
    }
    if queries.is_empty() {
        return Err(Error::InvalidParameter(
            "slice_all could not draw a single filter member".into(),
        ));
    }
    let note = (reseeds > 0).then(|| format!("reseed{reseeds}"));
    Ok((queries, note))
}

/// Alternates sibling moves with drill-downs along one hierarchy, never
/// revisiting a query. Every move introduces at least one unseen part, so
/// the cumulative unique-part count strictly increases.
fn slice_and_drill(
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
    length: usize,
) -> Result<TemplateOutput> {
    let deep: Vec<&Hierarchy> = schema.hierarchies.iter().filter(|h| h.depth() >= 3).collect();
    let Some(&h) = deep.get(rng.gen_range(0..deep.len().max(1)).min(deep.len().saturating_sub(1)))
    else {
        return Err(Error::InvalidParameter(
            "slice_and_drill needs a hierarchy of depth >= 3".into(),
        ));
    };

    let mut measures = BTreeSet::new();
    let m_count = rng.gen_range(1..=schema.measures.len().min(2));
    let mut pool: Vec<&String> = schema.measures.iter().collect();
    pool.shuffle(rng);
    for m in pool.into_iter().take(m_count) {
        measures.insert(m.clone());
    }

    let query_at = |level_idx: usize, member: &str| {
        let mut q = Query::default();
        q.measures = measures.clone();
        q.group_by
            .insert((h.name.clone(), h.levels[level_idx].name.clone()));
        q.filters.insert(
            h.name.clone(),
            (h.levels[level_idx].name.clone(), member.to_string()),
        );
        q
    };

    let mut level_idx = 1usize;
    let first: Vec<&str> = h.members_at(1).collect();
    let mut member = pick(rng, &first).to_string();
    let mut used: BTreeSet<(usize, String)> = BTreeSet::new();
    used.insert((level_idx, member.clone()));
    let mut queries = vec![query_at(level_idx, &member)];

    for t in 1..length {
        let sibling_pool = |level_idx: usize, member: &str, used: &BTreeSet<(usize, String)>| {
            // unused siblings under the same parent first, then anywhere at the level
            let same_parent: Vec<String> = h
                .parent(level_idx, member)
                .map(|p| {
                    h.children(level_idx - 1, p)
                        .iter()
                        .filter(|m| !used.contains(&(level_idx, (*m).clone())))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default();
            if !same_parent.is_empty() {
                return same_parent;
            }
            h.members_at(level_idx)
                .filter(|m| !used.contains(&(level_idx, m.to_string())))
                .map(|m| m.to_string())
                .collect()
        };
        let drill_pool = |level_idx: usize, member: &str, used: &BTreeSet<(usize, String)>| {
            if level_idx + 1 >= h.depth() {
                return Vec::new();
            }
            h.children(level_idx, member)
                .iter()
                .filter(|m| !used.contains(&(level_idx + 1, (*m).clone())))
                .cloned()
                .collect::<Vec<String>>()
        };

        let want_drill = t % 2 == 1;
        let drilled;
        let pool = if want_drill {
            let p = drill_pool(level_idx, &member, &used);
            if p.is_empty() {
                drilled = false;
                sibling_pool(level_idx, &member, &used)
            } else {
                drilled = true;
                p
            }
        } else {
            let p = sibling_pool(level_idx, &member, &used);
            if p.is_empty() {
                let p2 = drill_pool(level_idx, &member, &used);
                drilled = !p2.is_empty();
                p2
            } else {
                drilled = false;
                p
            }
        };
        if pool.is_empty() {
            break; // nowhere left to move; shorter session
        }
        if drilled {
            level_idx += 1;
        }
        member = pick(rng, &pool).clone();
        used.insert((level_idx, member.clone()));
        queries.push(query_at(level_idx, &member));
    }
    Ok((queries, None))
}

/// Draws a goal by mutating the seed, then walks to it one strictly
/// improving mutation at a time; the final query is the goal.
fn goal_oriented(
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
    length: usize,
    goal_distance: Option<usize>,
) -> Result<TemplateOutput> {
    let seed = seed_query(schema, rng);
    let moves = goal_distance.unwrap_or_else(|| (length - 1).max(1));
    let goal = draw_goal(&seed, schema, rng, moves);

    let mut queries = vec![seed.clone()];
    let mut cur = seed;
    let mut guard = 0;
    while cur != goal {
        guard += 1;
        if guard > 10 * moves + 100 {
            return Err(Error::InvalidParameter(
                "goal_oriented walk failed to reach its goal".into(),
            ));
        }
        cur = descent_step(&cur, &goal, schema, rng).ok_or_else(|| {
            Error::InvalidParameter("goal_oriented walk has no strictly improving move".into())
        })?;
        queries.push(cur.clone());
    }
    Ok((queries, None))
}

/// Mutates the seed `moves` times to obtain the goal. Net group-by level
/// shifts are capped at one step per hierarchy so the walk back can always
/// strictly improve (a two-step level gap admits no strictly improving
/// single move).
fn draw_goal(seed: &Query, schema: &CubeSchema, rng: &mut ChaCha8Rng, moves: usize) -> Query {
    let mut goal = seed.clone();
    let mut net_shift: BTreeMap<String, i64> = BTreeMap::new();
    let mut applied = 0;
    let mut attempts = 0;
    while applied < moves && attempts < 20 * moves + 50 {
        attempts += 1;
        let Some(m) = random_mutation(&goal, schema, rng) else { break };
        if let Mutation::LevelShift { hierarchy, to_index } = &m {
            let h = schema.hierarchy(hierarchy).expect("validated hierarchy");
            let cur_level = goal
                .group_by
                .iter()
                .find(|(gh, _)| gh == hierarchy)
                .and_then(|(_, l)| h.level_index(l))
                .expect("level shift targets an existing group-by entry");
            let dir = *to_index as i64 - cur_level as i64;
            let net = net_shift.get(hierarchy).copied().unwrap_or(0);
            if (net + dir).abs() > 1 {
                continue;
            }
            net_shift.insert(hierarchy.clone(), net + dir);
        }
        goal = m.apply(&goal, schema);
        applied += 1;
    }
    // a goal equal to the seed would make a one-query session; nudge it
    let mut guard = 0;
    while part_distance(&goal, seed) == 0 && guard < 50 {
        guard += 1;
        if let Some(m) = random_mutation(&goal, schema, rng) {
            if !matches!(m, Mutation::LevelShift { .. }) {
                goal = m.apply(&goal, schema);
            }
        }
    }
    goal
}

/// First half: a tree of random mutations grown from the seed (every query
/// mutates a random earlier query, so excursions stay short and anchored).
/// Then a surprising query is assembled by `surprise_hops` mutations forced
/// to introduce parts unused so far, and the second half is biased toward
/// it.
fn explorative(
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
    length: usize,
    surprise_hops: usize,
) -> Result<TemplateOutput> {
    let mut seed = seed_query(schema, rng);
    seed.filters.clear();
    let mut queries = vec![seed];
    let half = length.div_ceil(2);
    while queries.len() < half {
        let base = pick(rng, &queries).clone();
        let next = match random_mutation(&base, schema, rng) {
            Some(m) => m.apply(&base, schema),
            None => base,
        };
        queries.push(next);
    }
    let mut cur = queries.last().expect("seed query is present").clone();

    let mut used: BTreeSet<String> = BTreeSet::new();
    for q in &queries {
        used.extend(q.part_ids());
    }
    let mut target = draw_surprising(&cur, schema, rng, &used, surprise_hops);

    while queries.len() < length {
        let steered = rng.gen_bool(0.75);
        let next = if steered {
            descent_step(&cur, &target, schema, rng)
        } else {
            None
        };
        cur = match next {
            Some(q) => q,
            None => {
                if part_distance(&cur, &target) == 0 {
                    // the surprise is reached; move on to the next one
                    target = draw_surprising(&cur, schema, rng, &used, surprise_hops);
                }
                match random_mutation(&cur, schema, rng) {
                    Some(m) => m.apply(&cur, schema),
                    None => cur.clone(),
                }
            }
        };
        used.extend(cur.part_ids());
        queries.push(cur.clone());
    }
    Ok((queries, None))
}

/// Builds the surprising query: a few hops away from `from`, each hop chosen
/// so that the parts it introduces were unused in the first half.
fn draw_surprising(
    from: &Query,
    schema: &CubeSchema,
    rng: &mut ChaCha8Rng,
    used: &BTreeSet<String>,
    hops: usize,
) -> Query {
    let mut target = from.clone();
    for _ in 0..hops {
        let mut accepted = None;
        for _ in 0..20 {
            let Some(m) = random_mutation(&target, schema, rng) else { break };
            let next = m.apply(&target, schema);
            let introduced: Vec<String> = next
                .part_ids()
                .difference(&target.part_ids())
                .cloned()
                .collect();
            if !introduced.is_empty() && introduced.iter().all(|p| !used.contains(p)) {
                accepted = Some(next);
                break;
            }
        }
        if let Some(next) = accepted {
            target = next;
        }
    }
    target
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{generate_schema, SchemaSpec};

    fn test_schema() -> CubeSchema {
        generate_schema(&SchemaSpec::ssb_like(), 1).unwrap()
    }

    #[test]
    fn sessions_are_deterministic() {
        let schema = test_schema();
        for template in Template::ALL {
            let params = TemplateParams::new(template, 9);
            let a = generate_session(&schema, &params, "x").unwrap();
            let b = generate_session(&schema, &params, "x").unwrap();
            assert_eq!(a, b, "{template}");
        }
    }

    #[test]
    fn slice_all_contract() {
        // branching 5 guarantees a sibling pool that covers the session
        let schema = generate_schema(
            &SchemaSpec {
                hierarchies: 2,
                depth: (3, 3),
                branching: (5, 5),
                measures: 2,
            },
            11,
        )
        .unwrap();
        let mut params = TemplateParams::new(Template::SliceAll, 3);
        params.session_length = (5, 5);
        let s = generate_session(&schema, &params, "sa").unwrap();
        assert_eq!(s.len(), 5);
        let first = &s.queries[0];
        let mut members = BTreeSet::new();
        let mut parents = BTreeSet::new();
        for q in &s.queries {
            assert_eq!(q.group_by, first.group_by);
            assert_eq!(q.measures, first.measures);
            assert_eq!(q.filters.len(), 1);
            let (h, (l, v)) = q.filters.iter().next().unwrap();
            assert!(members.insert(v.clone()), "filter members must be distinct");
            let hier = schema.hierarchy(h).unwrap();
            let li = hier.level_index(l).unwrap();
            parents.insert(hier.parent(li, v).unwrap().to_string());
        }
        assert_eq!(parents.len(), 1, "all filter members are siblings");
        assert_eq!(s.template_label.as_deref(), Some("slice_all"));
    }

    #[test]
    fn slice_all_reseeds_when_pool_is_small() {
        // branching 2 cannot cover 8 queries from one parent
        let schema = generate_schema(
            &SchemaSpec {
                hierarchies: 1,
                depth: (3, 3),
                branching: (2, 2),
                measures: 1,
            },
            5,
        )
        .unwrap();
        let mut params = TemplateParams::new(Template::SliceAll, 1);
        params.session_length = (6, 6);
        let s = generate_session(&schema, &params, "sa").unwrap();
        assert!(s.len() >= 2);
        assert!(
            s.template_label.as_deref().unwrap().starts_with("slice_all+reseed"),
            "label records the re-seed: {:?}",
            s.template_label
        );
    }

    #[test]
    fn slice_and_drill_strictly_grows_unique_parts() {
        let schema = test_schema();
        for seed in 0..20 {
            let params = TemplateParams::new(Template::SliceAndDrill, seed);
            let s = generate_session(&schema, &params, "sd").unwrap();
            let mut seen: BTreeSet<String> = BTreeSet::new();
            let mut last = 0;
            let mut distinct = BTreeSet::new();
            for q in &s.queries {
                seen.extend(q.part_ids());
                assert!(seen.len() > last, "every query adds a new part (seed {seed})");
                last = seen.len();
                assert!(distinct.insert(q.clone()), "queries never repeat (seed {seed})");
            }
        }
    }

    #[test]
    fn slice_and_drill_needs_depth_three() {
        let shallow = generate_schema(
            &SchemaSpec {
                hierarchies: 2,
                depth: (2, 2),
                branching: (3, 3),
                measures: 2,
            },
            2,
        )
        .unwrap();
        let params = TemplateParams::new(Template::SliceAndDrill, 1);
        assert!(generate_session(&shallow, &params, "sd").is_err());
    }

    #[test]
    fn goal_oriented_reaches_goal_with_strict_descent() {
        let schema = test_schema();
        for seed in 0..20 {
            let params = TemplateParams::new(Template::GoalOriented, seed);
            let s = generate_session(&schema, &params, "go").unwrap();
            assert!(s.len() >= 2, "seed {seed} gave a one-query session");
            let goal = s.queries.last().unwrap();
            let mut prev = part_distance(&s.queries[0], goal);
            for q in &s.queries[1..] {
                let d = part_distance(q, goal);
                assert!(d < prev, "distance strictly decreases (seed {seed})");
                prev = d;
            }
            assert_eq!(prev, 0);
        }
    }

    #[test]
    fn explorative_session_has_requested_length() {
        let schema = test_schema();
        let mut params = TemplateParams::new(Template::Explorative, 4);
        params.session_length = (8, 8);
        let s = generate_session(&schema, &params, "ex").unwrap();
        assert_eq!(s.len(), 8);
    }

    #[test]
    fn generate_log_labels_and_counts() {
        let schema = test_schema();
        let mix = vec![(TemplateParams::new(Template::SliceAll, 0), 50)];
        let log = generate_log(&schema, &mix, 7).unwrap();
        assert_eq!(log.sessions.len(), 50);
        for (i, s) in log.sessions.iter().enumerate() {
            assert_eq!(s.id, format!("slice_all-{i}"));
            assert!(s.template_label.as_deref().unwrap().starts_with("slice_all"));
        }
        let recounted: usize = log.sessions.iter().map(|s| s.len()).sum();
        assert_eq!(recounted, log.query_count());
    }

    #[test]
    fn mixed_log_is_deterministic() {
        let schema = test_schema();
        let mix: Vec<(TemplateParams, usize)> = Template::ALL
            .into_iter()
            .map(|t| (TemplateParams::new(t, 0), 3))
            .collect();
        let a = generate_log(&schema, &mix, 42).unwrap();
        let b = generate_log(&schema, &mix, 42).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn generated_queries_validate() {
        let schema = test_schema();
        for template in Template::ALL {
            let mix = vec![(TemplateParams::new(template, 5), 10)];
            let log = generate_log(&schema, &mix, 5).unwrap();
            for s in &log.sessions {
                for q in &s.queries {
                    q.validate(&schema).unwrap();
                }
            }
        }
    }
}
