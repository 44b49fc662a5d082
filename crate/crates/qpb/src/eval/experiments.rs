//! Canned experiments: the alpha sweep, the per-template interestingness
//! profiles, and the recommender-impact protocol.
//!
//! Every experiment is a pure function of (schema, parameters, seed): child
//! seeds are derived per (run, template, purpose), runs execute in a worker
//! pool, and results are reduced in run order, so the output is byte-stable
//! regardless of the number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{compute_belief, pagerank, BeliefVector, PageRankConfig};
use crate::error::{Error, Result};
use crate::eval::distance::hellinger;
use crate::eval::series::{cumulative_unique_parts, SeriesBundle};
use crate::graph::{build_log_graph, build_schema_graph, QueryPartGraph};
use crate::interest::evaluate_session_on_topology;
use crate::query::{Log, Session};
use crate::schema::CubeSchema;
use crate::util::{derive_seed, fmt_sig};
use crate::workload::{generate_log, Template, TemplateParams};

// Seed stream tags; one per independent random purpose.
const TAG_SWEEP_TOPOLOGY: u64 = 1;
const TAG_SWEEP_USER: u64 = 2;
const TAG_PROFILE_LOG: u64 = 3;
const TAG_IMPACT_TOPOLOGY: u64 = 10;
const TAG_IMPACT_USER: u64 = 11;
const TAG_IMPACT_FRESH: u64 = 12;
const TAG_IMPACT_DRAW: u64 = 13;

fn template_tag(t: Template) -> u64 {
    Template::ALL.iter().position(|x| *x == t).expect("member of ALL") as u64
}

/// A rows x cols table of mean/sd distances aggregated over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub run_count: usize,
}

impl DistanceTable {
    pub fn mean_at(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.cols.iter().position(|x| x == col)?;
        Some(self.mean[r][c])
    }

    /// CSV dump in long form: `row,col,mean,sd`, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,mean,sd\n");
        for (r, row) in self.rows.iter().enumerate() {
            for (c, col) in self.cols.iter().enumerate() {
                out.push_str(&format!(
                    "{row},{col},{},{}\n",
                    fmt_sig(self.mean[r][c], 9),
                    fmt_sig(self.sd[r][c], 9)
                ));
            }
        }
        out
    }
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// A template mix splitting `total` sessions as evenly as possible over the
/// four templates, in [`Template::ALL`] order.
pub fn even_mix(total: usize) -> Vec<(TemplateParams, usize)> {
    let base = total / Template::ALL.len();
    let extra = total % Template::ALL.len();
    Template::ALL
        .into_iter()
        .enumerate()
        .map(|(i, t)| (TemplateParams::new(t, 0), base + usize::from(i < extra)))
        .collect()
}

// --- Alpha sweep --------------------------------------------------------------

/// Parameters of the alpha-sweep experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweepParams {
    /// Sessions in the shared topology log, split evenly over the templates.
    pub topology_sessions: usize,
    /// Sessions in each per-template user log.
    pub user_sessions: usize,
    /// Templates to sweep (table rows).
    pub user_templates: Vec<Template>,
    /// Blend weights to sweep (table columns).
    pub alphas: Vec<f64>,
    pub runs: usize,
}

impl Default for AlphaSweepParams {
    fn default() -> Self {
        AlphaSweepParams {
            topology_sessions: 43,
            user_sessions: 7,
            user_templates: Template::ALL.to_vec(),
            alphas: (1..=9).map(|i| i as f64 / 10.0).collect(),
            runs: 20,
        }
    }
}

/// For every run: generate a mixed topology log and one user log per
/// template, then measure the Hellinger distance between the topology belief
/// and the alpha-blended belief for each alpha. Cells aggregate mean/sd over
/// runs; rows are templates, columns are alphas.
pub fn alpha_sweep(
    schema: &CubeSchema,
    params: &AlphaSweepParams,
    seed: u64,
    config: &PageRankConfig,
) -> Result<DistanceTable> {
    if params.runs < 1 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    for &alpha in &params.alphas {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
    }
    log::info!(
        "alpha sweep: {} runs, {} templates, {} alphas",
        params.runs,
        params.user_templates.len(),
        params.alphas.len()
    );
    let schema_graph = build_schema_graph(schema);
    let per_run: Vec<Vec<Vec<f64>>> = (0..params.runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<Vec<f64>>> {
            let run = run as u64;
            let topology_log = generate_log(
                schema,
                &even_mix(params.topology_sessions),
                derive_seed(seed, &[TAG_SWEEP_TOPOLOGY, run]),
            )?;
            let topology = build_log_graph(&topology_log, &schema_graph)?;
            let topology_belief = pagerank(&topology, config)?;
            params
                .user_templates
                .iter()
                .map(|&template| {
                    let user_log = generate_log(
                        schema,
                        &[(TemplateParams::new(template, 0), params.user_sessions)],
                        derive_seed(seed, &[TAG_SWEEP_USER, run, template_tag(template)]),
                    )?;
                    let user = build_log_graph(&user_log, &QueryPartGraph::new())?;
                    params
                        .alphas
                        .iter()
                        .map(|&alpha| {
                            let blended = compute_belief(&topology, &user, alpha, config)?;
                            hellinger(&topology_belief, &blended)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<String> = params.user_templates.iter().map(|t| t.label().to_string()).collect();
    let cols: Vec<String> = params.alphas.iter().map(|a| format!("{a}")).collect();
    let mut mean = vec![vec![0.0; cols.len()]; rows.len()];
    let mut sd = vec![vec![0.0; cols.len()]; rows.len()];
    for r in 0..rows.len() {
        for c in 0..cols.len() {
            let values: Vec<f64> = per_run.iter().map(|m| m[r][c]).collect();
            let (m, s) = mean_sd(&values);
            mean[r][c] = m;
            sd[r][c] = s;
        }
    }
    Ok(DistanceTable {
        rows,
        cols,
        mean,
        sd,
        run_count: params.runs,
    })
}

// --- Interestingness profiles ---------------------------------------------------

/// Aggregated behavior of one template over many sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSeries {
    pub template: Template,
    /// Mean/sd of SI by query position over the template's sessions.
    pub si: SeriesBundle,
    /// Mean/sd of the cumulative unique-part count by query position.
    pub cumulative_parts: SeriesBundle,
    /// Mean of the per-position mean SI values.
    pub mean_si: f64,
    /// Mean over sessions of the final cumulative unique-part count.
    pub mean_final_unique_parts: f64,
}

/// Generates `sessions_per_template` sessions per template, evaluates each
/// incrementally with the other same-template sessions folded in as the
/// user's past log, and aggregates SI and cumulative-part series per
/// template and query position. The topology is built from all generated
/// sessions.
pub fn si_profiles(
    schema: &CubeSchema,
    sessions_per_template: usize,
    alpha: f64,
    seed: u64,
    config: &PageRankConfig,
) -> Result<Vec<ProfileSeries>> {
    if sessions_per_template < 2 {
        return Err(Error::InvalidParameter(
            "sessions_per_template must be >= 2".into(),
        ));
    }
    let mut logs: BTreeMap<Template, Log> = BTreeMap::new();
    for template in Template::ALL {
        let log = generate_log(
            schema,
            &[(TemplateParams::new(template, 0), sessions_per_template)],
            derive_seed(seed, &[TAG_PROFILE_LOG, template_tag(template)]),
        )?;
        logs.insert(template, log);
    }
    let global = Log::concat(logs.values().cloned())?;
    let topology = build_log_graph(&global, &build_schema_graph(schema))?;
    log::info!(
        "si profiles: {} sessions over {} vertices / {} edges",
        global.sessions.len(),
        topology.vertex_count(),
        topology.edge_count()
    );

    let tasks: Vec<(Template, usize)> = Template::ALL
        .into_iter()
        .flat_map(|t| (0..sessions_per_template).map(move |i| (t, i)))
        .collect();
    let evaluated: Vec<(Template, Vec<f64>, Vec<f64>)> = tasks
        .par_iter()
        .map(|&(template, i)| -> Result<(Template, Vec<f64>, Vec<f64>)> {
            let log = &logs[&template];
            let session = &log.sessions[i];
            let history = Log::new(
                log.sessions
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, s)| s.clone())
                    .collect(),
            );
            let scores =
                evaluate_session_on_topology(session, Some(&history), &topology, alpha, config)?;
            let cumulative = cumulative_unique_parts(session);
            Ok((
                template,
                scores.iter().map(|s| s.si).collect(),
                cumulative.y,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for template in Template::ALL {
        let sessions: Vec<&(Template, Vec<f64>, Vec<f64>)> =
            evaluated.iter().filter(|(t, _, _)| *t == template).collect();
        let max_len = sessions.iter().map(|(_, si, _)| si.len()).max().unwrap_or(0);
        let mut si_series = SeriesBundle::new(format!("si-{}", template.label()));
        let mut parts_series = SeriesBundle::new(format!("parts-{}", template.label()));
        let mut position_means = Vec::new();
        for pos in 0..max_len {
            let si_values: Vec<f64> = sessions
                .iter()
                .filter_map(|(_, si, _)| si.get(pos).copied())
                .collect();
            let (m, s) = mean_sd(&si_values);
            si_series.push(pos + 1, m, s);
            position_means.push(m);
            let part_values: Vec<f64> = sessions
                .iter()
                .filter_map(|(_, _, parts)| parts.get(pos).copied())
                .collect();
            let (pm, ps) = mean_sd(&part_values);
            parts_series.push(pos + 1, pm, ps);
        }
        let (mean_si, _) = mean_sd(&position_means);
        let finals: Vec<f64> = sessions
            .iter()
            .filter_map(|(_, _, parts)| parts.last().copied())
            .collect();
        let (mean_final_unique_parts, _) = mean_sd(&finals);
        out.push(ProfileSeries {
            template,
            si: si_series,
            cumulative_parts: parts_series,
            mean_si,
            mean_final_unique_parts,
        });
    }
    Ok(out)
}

// --- Recommender impact ----------------------------------------------------------

/// Whether the recommender's training log and seed session come from the
/// reference log itself or from a freshly generated one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Identical,
    Independent,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Identical => "identical",
            Scenario::Independent => "independent",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "identical" => Ok(Scenario::Identical),
            "independent" => Ok(Scenario::Independent),
            other => Err(Error::InvalidParameter(format!("unknown scenario {other}"))),
        }
    }
}

/// Parameters of the recommender-impact experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoImpactParams {
    pub runs: usize,
    /// Queries requested from the recommender.
    pub k: usize,
    pub alpha: f64,
    pub topology_sessions: usize,
    /// Sessions of the reference template defining the reference user.
    pub user_sessions: usize,
    /// Sessions used to train the recommender.
    pub training_sessions: usize,
}

impl Default for RecoImpactParams {
    fn default() -> Self {
        RecoImpactParams {
            runs: 10,
            k: 5,
            alpha: 0.8,
            topology_sessions: 43,
            user_sessions: 7,
            training_sessions: 10,
        }
    }
}

/// The reference belief of one (template, run) pair, kept so callers can
/// check that the reference side is unaffected by the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBelief {
    pub template: Template,
    pub run: usize,
    pub belief: BeliefVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoImpact {
    pub scenario: Scenario,
    /// Rows: test (recommendation) template. Columns: reference template.
    pub table: DistanceTable,
    pub reference_beliefs: Vec<ReferenceBelief>,
}

/// The recommender-impact protocol.
///
/// Per run, the reference side builds a topology graph from an evenly mixed
/// log and one reference belief per template from an additional single
/// template user log. The test side trains the recommender on sessions of
/// the test template, seeds it with a truncated session (first half), and
/// treats the recommended queries as one user log over the same topology.
/// The table aggregates Hellinger distances between reference and test
/// beliefs over runs.
pub fn reco_impact(
    schema: &CubeSchema,
    scenario: Scenario,
    params: &RecoImpactParams,
    seed: u64,
    config: &PageRankConfig,
) -> Result<RecoImpact> {
    if params.runs < 1 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    log::info!(
        "recommender impact: scenario {}, {} runs",
        scenario.label(),
        params.runs
    );
    let schema_graph = build_schema_graph(schema);

    struct RunOutcome {
        distances: Vec<Vec<f64>>, // [test][reference]
        references: Vec<(Template, BeliefVector)>,
    }

    let runs: Vec<RunOutcome> = (0..params.runs)
        .into_par_iter()
        .map(|run| -> Result<RunOutcome> {
            let run_tag = run as u64;
            let topology_log = generate_log(
                schema,
                &even_mix(params.topology_sessions),
                derive_seed(seed, &[TAG_IMPACT_TOPOLOGY, run_tag]),
            )?;
            let topology = build_log_graph(&topology_log, &schema_graph)?;

            let mut references = Vec::new();
            let mut reference_logs = Vec::new();
            for reference in Template::ALL {
                let user_log = generate_log(
                    schema,
                    &[(TemplateParams::new(reference, 1), params.user_sessions)],
                    derive_seed(seed, &[TAG_IMPACT_USER, run_tag, template_tag(reference)]),
                )?;
                let user_graph = build_log_graph(&user_log, &QueryPartGraph::new())?;
                let belief = compute_belief(&topology, &user_graph, params.alpha, config)?;
                references.push((reference, belief));
                reference_logs.push(user_log);
            }

            let test_belief = |training: Vec<Session>,
                               seed_session: Session|
             -> Result<BeliefVector> {
                let prefix_len = (seed_session.len() / 2).max(1);
                let prefix = Session {
                    id: seed_session.id.clone(),
                    user: seed_session.user.clone(),
                    template_label: seed_session.template_label.clone(),
                    queries: seed_session.queries[..prefix_len].to_vec(),
                };
                let recommended =
                    recommend_queries(&Log::new(training), &prefix, params.k)?;
                let reco_log = if recommended.is_empty() {
                    Log::empty()
                } else {
                    Log::new(vec![Session {
                        id: "recommended".into(),
                        user: "recommended".into(),
                        template_label: None,
                        queries: recommended,
                    }])
                };
                let reco_graph = build_log_graph(&reco_log, &QueryPartGraph::new())?;
                compute_belief(&topology, &reco_graph, params.alpha, config)
            };

            let mut distances = vec![vec![0.0; Template::ALL.len()]; Template::ALL.len()];
            for (ti, test) in Template::ALL.into_iter().enumerate() {
                match scenario {
                    Scenario::Independent => {
                        // one fresh log per test template; the same test
                        // belief is compared to all four references
                        let fresh = generate_log(
                            schema,
                            &[(
                                TemplateParams::new(test, 2),
                                params.training_sessions + 1,
                            )],
                            derive_seed(seed, &[TAG_IMPACT_FRESH, run_tag, template_tag(test)]),
                        )?;
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                            seed,
                            &[TAG_IMPACT_DRAW, run_tag, template_tag(test)],
                        ));
                        let mut sessions = fresh.sessions.clone();
                        sessions.shuffle(&mut rng);
                        let seed_session = sessions.pop().expect("log is nonempty");
                        let belief = test_belief(sessions, seed_session)?;
                        for (ri, (_, reference)) in references.iter().enumerate() {
                            distances[ti][ri] = hellinger(reference, &belief)?;
                        }
                    }
                    Scenario::Identical => {
                        // training and seed drawn from the reference log
                        // (topology part plus the reference user's sessions)
                        for (ri, (reference, reference_belief)) in references.iter().enumerate() {
                            let mut pool: Vec<Session> = topology_log
                                .sessions
                                .iter()
                                .filter(|s| s.user == test.label())
                                .cloned()
                                .collect();
                            if *reference == test {
                                pool.extend(reference_logs[ri].sessions.iter().cloned());
                            }
                            if pool.len() < 2 {
                                return Err(Error::InvalidParameter(format!(
                                    "identical scenario needs at least 2 sessions of template {test}"
                                )));
                            }
                            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                                seed,
                                &[
                                    TAG_IMPACT_DRAW,
                                    run_tag,
                                    template_tag(test),
                                    template_tag(*reference),
                                ],
                            ));
                            pool.shuffle(&mut rng);
                            let take = params.training_sessions.min(pool.len() - 1);
                            let training: Vec<Session> = pool[..take].to_vec();
                            let seed_session = pool[take].clone();
                            let belief = test_belief(training, seed_session)?;
                            distances[ti][ri] = hellinger(reference_belief, &belief)?;
                        }
                    }
                }
            }
            Ok(RunOutcome {
                distances,
                references,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<String> = Template::ALL.iter().map(|t| t.label().to_string()).collect();
    let mut mean = vec![vec![0.0; labels.len()]; labels.len()];
    let mut sd = vec![vec![0.0; labels.len()]; labels.len()];
    for r in 0..labels.len() {
        for c in 0..labels.len() {
            let values: Vec<f64> = runs.iter().map(|o| o.distances[r][c]).collect();
            let (m, s) = mean_sd(&values);
            mean[r][c] = m;
            sd[r][c] = s;
        }
    }
    let reference_beliefs = runs
        .iter()
        .enumerate()
        .flat_map(|(run, o)| {
            o.references
                .iter()
                .map(move |(t, b)| ReferenceBelief {
                    template: *t,
                    run,
                    belief: b.clone(),
                })
        })
        .collect();
    Ok(RecoImpact {
        scenario,
        table: DistanceTable {
            rows: labels.clone(),
            cols: labels,
            mean,
            sd,
            run_count: params.runs,
        },
        reference_beliefs,
    })
}

// recommend() lives in the sibling module; re-imported under a local name so
// the protocol body reads top to bottom.
use crate::eval::recommend::recommend as recommend_queries;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{generate_schema, SchemaSpec};

    fn small_schema() -> CubeSchema {
        generate_schema(
            &SchemaSpec {
                hierarchies: 2,
                depth: (3, 3),
                branching: (2, 3),
                measures: 2,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn even_mix_splits_43() {
        let mix = even_mix(43);
        let counts: Vec<usize> = mix.iter().map(|(_, c)| *c).collect();
        assert_eq!(counts, vec![11, 11, 11, 10]);
        assert_eq!(counts.iter().sum::<usize>(), 43);
    }

    #[test]
    fn alpha_zero_gives_zero_distance() {
        let schema = small_schema();
        let params = AlphaSweepParams {
            topology_sessions: 8,
            user_sessions: 2,
            user_templates: vec![Template::SliceAll],
            alphas: vec![0.0, 0.5],
            runs: 2,
        };
        let table = alpha_sweep(&schema, &params, 5, &PageRankConfig::default()).unwrap();
        assert!(table.mean_at("slice_all", "0").unwrap() < 1e-9);
        assert!(table.mean_at("slice_all", "0.5").unwrap() > 0.0);
    }

    #[test]
    fn alpha_sweep_is_deterministic() {
        let schema = small_schema();
        let params = AlphaSweepParams {
            topology_sessions: 8,
            user_sessions: 2,
            user_templates: vec![Template::Explorative],
            alphas: vec![0.3],
            runs: 2,
        };
        let a = alpha_sweep(&schema, &params, 5, &PageRankConfig::default()).unwrap();
        let b = alpha_sweep(&schema, &params, 5, &PageRankConfig::default()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn si_profiles_shapes() {
        let schema = small_schema();
        let profiles = si_profiles(&schema, 3, 0.9, 11, &PageRankConfig::default()).unwrap();
        assert_eq!(profiles.len(), 4);
        for p in &profiles {
            assert!(!p.si.is_empty());
            assert_eq!(p.si.len(), p.cumulative_parts.len());
            assert!(p.mean_si.is_finite() && p.mean_si >= 0.0);
            assert!(p.mean_final_unique_parts > 0.0);
        }
    }

    #[test]
    fn reco_reference_beliefs_do_not_depend_on_scenario() {
        let schema = small_schema();
        let params = RecoImpactParams {
            runs: 2,
            topology_sessions: 12,
            user_sessions: 2,
            training_sessions: 2,
            ..RecoImpactParams::default()
        };
        let config = PageRankConfig::default();
        let identical = reco_impact(&schema, Scenario::Identical, &params, 9, &config).unwrap();
        let independent = reco_impact(&schema, Scenario::Independent, &params, 9, &config).unwrap();
        assert_eq!(identical.reference_beliefs.len(), independent.reference_beliefs.len());
        for (a, b) in identical
            .reference_beliefs
            .iter()
            .zip(independent.reference_beliefs.iter())
        {
            assert_eq!(a.template, b.template);
            assert_eq!(a.run, b.run);
            for (k, p) in a.belief.probabilities() {
                assert_eq!(p.to_bits(), b.belief.probabilities()[k].to_bits());
            }
        }
        for row in &identical.table.mean {
            for v in row {
                assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
