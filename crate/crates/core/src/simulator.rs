//! Seeded Monte-Carlo token game and best-of-N plan selection.

use std::collections::BTreeMap;
use std::time::Instant;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gef::Binding;
use crate::hlpn::{Hlpn, HlpnState};

pub const DEFAULT_SAMPLE_BUDGET: usize = 256;
pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    ReachedFinal,
    StepLimit,
    Deadlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Robot transitions fired, summed over the team.
    #[default]
    TotalMoves,
    /// Synchronized system steps.
    SyncSteps,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "total-moves" => Ok(Metric::TotalMoves),
            "sync-steps" => Ok(Metric::SyncSteps),
            _ => Err(format!("unknown metric `{s}` (expected total-moves or sync-steps)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::TotalMoves => "total-moves",
            Metric::SyncSteps => "sync-steps",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    pub spec_t: String,
    /// Robot id to fired robot transition id, in team order.
    pub moves: IndexMap<String, String>,
    /// Post-step region occupancy, zero entries omitted.
    pub occupancy: IndexMap<String, u64>,
    pub spec_place: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMetric {
    pub total_moves: u64,
    pub sync_steps: u64,
}

impl TraceMetric {
    pub fn value(&self, metric: Metric) -> u64 {
        match metric {
            Metric::TotalMoves => self.total_moves,
            Metric::SyncSteps => self.sync_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outcome: Outcome,
    pub steps: Vec<TraceStep>,
    pub metric: TraceMetric,
    /// Fired transitions per robot, in team order.
    pub robot_moves: IndexMap<String, u64>,
}

impl Trace {
    pub fn from_json(text: &str) -> serde_json::Result<Trace> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("traces serialize")
    }

    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::ReachedFinal
    }
}

/// Incrementally records fired bindings in their serialized form.
pub(crate) struct TraceRecorder<'a> {
    model: &'a Hlpn,
    steps: Vec<TraceStep>,
    robot_moves: Vec<u64>,
}

impl<'a> TraceRecorder<'a> {
    pub(crate) fn new(model: &'a Hlpn) -> Self {
        TraceRecorder {
            model,
            steps: Vec::new(),
            robot_moves: vec![0; model.team_size()],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.steps.len()
    }

    pub(crate) fn record(&mut self, before: &HlpnState, binding: &Binding, after: &HlpnState) {
        let mut moves = binding.moves.clone();
        moves.sort_by_key(|m| m.robot);
        let moves = moves
            .iter()
            .map(|m| {
                self.robot_moves[m.robot] += 1;
                let r = &before.robots[m.robot];
                (
                    r.robot_id().to_string(),
                    r.net().transitions[m.transition].id.clone(),
                )
            })
            .collect();
        self.steps.push(TraceStep {
            spec_t: before.spec.net().transitions[binding.spec_transition].id.clone(),
            moves,
            occupancy: after.occupancy.to_map(),
            spec_place: after.spec.marked_place().to_string(),
        });
    }

    pub(crate) fn finish(self, outcome: Outcome, run: Option<u64>, seed: Option<u64>) -> Trace {
        let total_moves = self.robot_moves.iter().sum();
        Trace {
            run,
            seed,
            outcome,
            metric: TraceMetric {
                total_moves,
                sync_steps: self.steps.len() as u64,
            },
            robot_moves: self
                .model
                .robots()
                .iter()
                .zip(&self.robot_moves)
                .map(|(r, &n)| (r.robot_id().to_string(), n))
                .collect(),
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub max_steps: usize,
    /// Guard evaluations spent on rejection sampling before falling back
    /// to exhaustive enumeration.
    pub sample_budget: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_steps: DEFAULT_MAX_STEPS,
            sample_budget: DEFAULT_SAMPLE_BUDGET,
        }
    }
}

/// Per-run seed: SplitMix64 finalizer over `master + (run + 1) * golden`.
pub fn derive_seed(master_seed: u64, run: u64) -> u64 {
    let mut z = master_seed.wrapping_add(run.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick_binding<R: Rng>(model: &Hlpn, state: &HlpnState, rng: &mut R, budget: usize) -> Option<Binding> {
    if let Some(b) = model.sample_bindings(state, rng, budget).next() {
        return Some(b);
    }
    let all = model.enabled_bindings(state);
    if all.is_empty() {
        None
    } else {
        let i = rng.random_range(0..all.len());
        Some(all[i].clone())
    }
}

/// One randomized token game from the initial state.
///
/// # Panics
/// If the initial placement violates a capacity; validate with
/// [`Hlpn::initial_state`] first.
pub fn run_once(model: &Hlpn, seed: u64, config: &SimConfig) -> Trace {
    run_seeded(model, seed, config, None)
}

fn run_seeded(model: &Hlpn, seed: u64, config: &SimConfig, run: Option<u64>) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = model.initial_state().expect("initial placement within capacity");
    let mut rec = TraceRecorder::new(model);
    let outcome = loop {
        if state.is_final() {
            break Outcome::ReachedFinal;
        }
        if rec.len() >= config.max_steps {
            break Outcome::StepLimit;
        }
        let Some(binding) = pick_binding(model, &state, &mut rng, config.sample_budget) else {
            break Outcome::Deadlock;
        };
        let next = model
            .fire_binding(&state, &binding)
            .expect("picked bindings are licensed");
        rec.record(&state, &binding, &next);
        state = next;
    };
    rec.finish(outcome, run, Some(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPlan {
    pub run: u64,
    pub seed: u64,
    pub total_moves: u64,
    pub sync_steps: u64,
    pub plan: String,
}

/// Seed-determined batch statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub runs: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub metric: Metric,
    /// Metric value of successful runs to number of runs.
    pub histogram: BTreeMap<u64, u64>,
    pub best: Option<BestPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub traces: Vec<Trace>,
    pub best: Option<usize>,
    pub stats: BatchStats,
    pub timing: Timing,
}

impl BatchResult {
    pub fn best_trace(&self) -> Option<&Trace> {
        self.best.map(|i| &self.traces[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchConfig {
    pub master_seed: u64,
    pub runs: u64,
    pub sim: SimConfig,
    pub metric: Metric,
    pub parallel: bool,
}

/// Ranking key: metric, then the other measure, then run index.
fn rank(t: &Trace, metric: Metric) -> (u64, u64, u64) {
    let m = &t.metric;
    let (a, b) = match metric {
        Metric::TotalMoves => (m.total_moves, m.sync_steps),
        Metric::SyncSteps => (m.sync_steps, m.total_moves),
    };
    (a, b, t.run.unwrap_or(u64::MAX))
}

pub fn run_batch(model: &Hlpn, config: &BatchConfig) -> BatchResult {
    let one = |run: u64| {
        let start = Instant::now();
        let t = run_seeded(model, derive_seed(config.master_seed, run), &config.sim, Some(run));
        (t, start.elapsed().as_secs_f64() * 1e3)
    };
    let results: Vec<(Trace, f64)> = if config.parallel {
        (0..config.runs).into_par_iter().map(one).collect()
    } else {
        (0..config.runs).map(one).collect()
    };
    let (traces, times): (Vec<Trace>, Vec<f64>) = results.into_iter().unzip();

    let best = traces
        .iter()
        .enumerate()
        .filter(|(_, t)| t.succeeded())
        .min_by_key(|(_, t)| rank(t, config.metric))
        .map(|(i, _)| i);
    let mut histogram = BTreeMap::new();
    for t in traces.iter().filter(|t| t.succeeded()) {
        *histogram.entry(t.metric.value(config.metric)).or_insert(0) += 1;
    }
    let successes = histogram.values().sum::<u64>();
    let runs = traces.len() as u64;
    let stats = BatchStats {
        runs,
        successes,
        success_rate: if runs == 0 { 0.0 } else { successes as f64 / runs as f64 },
        metric: config.metric,
        histogram,
        best: best.map(|i| {
            let t = &traces[i];
            BestPlan {
                run: t.run.unwrap_or_default(),
                seed: t.seed.unwrap_or_default(),
                total_moves: t.metric.total_moves,
                sync_steps: t.metric.sync_steps,
                plan: plan_notation(model, t),
            }
        }),
    };
    let n = times.len().max(1) as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    BatchResult {
        traces,
        best,
        stats,
        timing: Timing {
            mean_ms: mean,
            stddev_ms: var.sqrt(),
        },
    }
}

/// Tuple rendering of a plan, one tuple per synchronized step listing the
/// label of every robot's cell after the step:
/// `⟨r1,r2,r3⟩ = ⟨b1,b3,b2⟩`.
pub fn plan_notation(model: &Hlpn, trace: &Trace) -> String {
    let env = model.env();
    let ids: Vec<&str> = model.robots().iter().map(|r| r.robot_id()).collect();
    let mut cells: Vec<usize> = model.robots().iter().map(|r| r.cell()).collect();
    let mut tuples = Vec::new();
    for step in &trace.steps {
        for (robot, t) in &step.moves {
            if let Some(i) = ids.iter().position(|id| id == robot) {
                if let Some(ti) = model.robots()[i].net().transition_index(t) {
                    cells[i] = model.robots()[i].net().target_cell(ti);
                }
            }
        }
        let labels: Vec<String> = cells
            .iter()
            .map(|&c| {
                env.label_of(c)
                    .literals()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join("∧")
            })
            .collect();
        tuples.push(format!("⟨{}⟩", labels.join(",")));
    }
    let head = format!("⟨{}⟩", ids.join(","));
    if tuples.is_empty() {
        format!("{head} = ⟨⟩")
    } else {
        format!("{head} = {}", tuples.join(", "))
    }
}
