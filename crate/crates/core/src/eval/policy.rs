use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{io_err, par_map_seeds, EvalError, Result, SimulatedLearner};
use crate::ceirt::{predict_correct, KnowledgeState};
use crate::corpus::{ConceptEntry, ItemBank, ItemDraft, Scenario};
use crate::guidance::suitability_score;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Highest suitability against the learner's current state.
    Suitability,
    UniformRandom,
    /// Lowest difficulty first.
    FixedEasiest,
}

impl Policy {
    pub const ALL: [Policy; 3] = [
        Policy::Suitability,
        Policy::UniformRandom,
        Policy::FixedEasiest,
    ];
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Suitability => "suitability",
            Policy::UniformRandom => "uniform_random",
            Policy::FixedEasiest => "fixed_easiest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub discrimination: f64,
    pub holdout_fraction: f64,
    /// Spread of the learner's starting `theta*`.
    pub initial_theta_std: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            rounds: 20,
            seeds: (0..25).collect(),
            discrimination: 1.0,
            holdout_fraction: 0.2,
            initial_theta_std: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: Policy,
    pub seed: u64,
    pub final_theta: Vec<f64>,
    /// Quiz accuracy before round 1 and after every round.
    pub accuracy: Vec<f64>,
    /// Mean `theta*` before round 1 and after every round.
    pub mean_theta: Vec<f64>,
    pub studied: Vec<String>,
}

impl PolicyRun {
    pub fn final_mean_theta(&self) -> f64 {
        *self.mean_theta.last().expect("trace has round 0")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub runs: Vec<PolicyRun>,
}

impl PolicyComparison {
    pub fn run(&self, policy: Policy, seed: u64) -> Option<&PolicyRun> {
        self.runs
            .iter()
            .find(|r| r.policy == policy && r.seed == seed)
    }

    /// Seeds on which `a` ends with a strictly higher mean `theta*` than `b`,
    /// and the number of seeds both ran on.
    pub fn wins(&self, a: Policy, b: Policy) -> (usize, usize) {
        let mut wins = 0;
        let mut total = 0;
        for ra in self.runs.iter().filter(|r| r.policy == a) {
            if let Some(rb) = self.run(b, ra.seed) {
                total += 1;
                if ra.final_mean_theta() > rb.final_mean_theta() {
                    wins += 1;
                }
            }
        }
        (wins, total)
    }
}

/// Splits item indices into (study, held-out). Items are grouped by their
/// first concept and each group gives up `round(fraction * n)` items after a
/// seeded shuffle.
pub fn holdout_split(
    bank: &ItemBank,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(EvalError::Argument(format!(
            "holdout fraction {fraction} outside [0, 1)"
        )));
    }
    let mut study = Vec::new();
    let mut held = Vec::new();
    for c in bank.concept_set.iter() {
        let mut group: Vec<usize> = (0..bank.items.len())
            .filter(|&i| bank.items[i].concept_ids.first() == Some(&c.id))
            .collect();
        group.shuffle(&mut rng::stream(seed, &format!("holdout:{}", c.id)));
        let n_held = (fraction * group.len() as f64).round() as usize;
        held.extend_from_slice(&group[..n_held]);
        study.extend_from_slice(&group[n_held..]);
    }
    if held.is_empty() {
        return Err(EvalError::Argument("held-out quiz set is empty".into()));
    }
    study.sort_unstable();
    held.sort_unstable();
    Ok((study, held))
}

fn pick(
    policy: Policy,
    bank: &ItemBank,
    remaining: &[usize],
    theta: &[f64],
    r: &mut impl Rng,
) -> usize {
    let tagged = |i: usize| bank.tagged_indices(&bank.items[i]);
    match policy {
        Policy::UniformRandom => r.random_range(0..remaining.len()),
        Policy::Suitability => {
            let score = |i: usize| {
                tagged(i)
                    .into_iter()
                    .map(|j| suitability_score(theta[j], bank.items[i].params.b[j]).unwrap_or(0.0))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            argbest(remaining, score, |a, b| a > b)
        }
        Policy::FixedEasiest => {
            let easiest = |i: usize| {
                tagged(i)
                    .into_iter()
                    .map(|j| bank.items[i].params.b[j])
                    .fold(f64::INFINITY, f64::min)
            };
            argbest(remaining, easiest, |a, b| a < b)
        }
    }
}

/// Position in `items` of the first strictly best value.
fn argbest(
    items: &[usize],
    value: impl Fn(usize) -> f64,
    better: impl Fn(f64, f64) -> bool,
) -> usize {
    let mut best = 0;
    let mut best_v = value(items[0]);
    for (pos, &i) in items.iter().enumerate().skip(1) {
        let v = value(i);
        if better(v, best_v) {
            best = pos;
            best_v = v;
        }
    }
    best
}

fn quiz_accuracy(bank: &ItemBank, held: &[usize], theta: &[f64]) -> Result<f64> {
    let state = KnowledgeState::new(theta.to_vec())?;
    let mut total = 0.0;
    for &i in held {
        total += predict_correct(&state, &bank.items[i].params)?;
    }
    Ok(total / held.len() as f64)
}

fn simulate(bank: &ItemBank, policy: Policy, seed: u64, cfg: &PolicyConfig) -> Result<PolicyRun> {
    let k = bank.k();
    let (study, held) = holdout_split(bank, cfg.holdout_fraction, seed)?;
    if study.len() < cfg.rounds {
        return Err(EvalError::Argument(format!(
            "{} rounds but only {} study items",
            cfg.rounds,
            study.len()
        )));
    }
    let normal = Normal::new(0.0, cfg.initial_theta_std)
        .map_err(|e| EvalError::Argument(format!("initial_theta_std: {e}")))?;
    let mut init = rng::stream(seed, "learner");
    let theta0: Vec<f64> = (0..k).map(|_| normal.sample(&mut init)).collect();
    let mut learner = SimulatedLearner::new(theta0, cfg.discrimination)?;

    let mut answers = rng::stream(seed, "answers");
    let draws: Vec<f64> = (0..cfg.rounds * k)
        .map(|_| answers.random::<f64>())
        .collect();
    let mut choice = rng::stream(seed, "uniform-policy");

    let mut remaining = study;
    let mut accuracy = vec![quiz_accuracy(bank, &held, &learner.true_theta)?];
    let mut mean_theta = vec![learner.mean_theta()];
    let mut studied = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let pos = pick(policy, bank, &remaining, &learner.true_theta, &mut choice);
        let item = &bank.items[remaining.remove(pos)];
        for j in bank.tagged_indices(item) {
            learner.study(j, item.params.b[j], draws[round * k + j]);
        }
        studied.push(item.item_id.clone());
        accuracy.push(quiz_accuracy(bank, &held, &learner.true_theta)?);
        mean_theta.push(learner.mean_theta());
    }
    Ok(PolicyRun {
        policy,
        seed,
        final_theta: learner.true_theta,
        accuracy,
        mean_theta,
        studied,
    })
}

/// Runs every policy on every seed. Within a seed all policies share the
/// learner's starting state, the held-out set and the answer draws.
pub fn run_policy_comparison(
    bank: &ItemBank,
    policies: &[Policy],
    cfg: &PolicyConfig,
) -> Result<PolicyComparison> {
    if cfg.rounds == 0 {
        return Err(EvalError::Argument("rounds must be >= 1".into()));
    }
    if policies.is_empty() || cfg.seeds.is_empty() {
        return Err(EvalError::Argument(
            "need at least one policy and one seed".into(),
        ));
    }
    let per_seed = par_map_seeds(&cfg.seeds, |seed| {
        policies
            .iter()
            .map(|&p| simulate(bank, p, seed, cfg))
            .collect::<Result<Vec<_>>>()
    });
    let mut runs = Vec::with_capacity(cfg.seeds.len() * policies.len());
    for r in per_seed {
        runs.extend(r?);
    }
    Ok(PolicyComparison { runs })
}

/// `policy,seed,round,accuracy,mean_theta`.
pub fn write_policy_csv(cmp: &PolicyComparison, path: &Path) -> Result<()> {
    let mut out = String::from("policy,seed,round,accuracy,mean_theta\n");
    for r in &cmp.runs {
        for (round, (acc, m)) in r.accuracy.iter().zip(&r.mean_theta).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.policy, r.seed, round, acc, m
            ));
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Study bank used by `simulate` when no bank is given: 5 concepts, 40 items
/// each, difficulties from the learner's starting level up to 5.
pub fn default_study_bank(seed: u64) -> Result<ItemBank> {
    synthetic_bank(5, 40, 0.0, 5.0, seed)
}

/// Bank of single-concept items with `a = 1` and `b` uniform in `[lo, hi)`.
pub fn synthetic_bank(
    k: usize,
    per_concept: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<ItemBank> {
    if k == 0 || per_concept < 2 || !(hi > lo) {
        return Err(EvalError::Argument(
            "need k >= 1, per_concept >= 2 and hi > lo".into(),
        ));
    }
    let lexicon: Vec<ConceptEntry> = (0..k)
        .map(|j| ConceptEntry {
            id: format!("c{j}"),
            name: format!("concept {j}"),
            sentences: vec![format!("Reference sentence for concept {j}.")],
        })
        .collect();
    let mut r = rng::stream(seed, "synthetic-bank");
    let mut drafts = Vec::with_capacity(k * per_concept);
    for j in 0..k {
        for m in 0..per_concept {
            let mut a = vec![0.0; k];
            let mut b = vec![0.0; k];
            a[j] = 1.0;
            b[j] = r.random_range(lo..hi);
            let filler = " with detail".repeat(m % 5);
            drafts.push(ItemDraft {
                item_id: format!("c{j}-{m:03}"),
                question: format!("Question {m} on concept {j}{filler}?"),
                options: (0..4).map(|o| format!("option {o}")).collect(),
                answer_index: (m % 4) as i64,
                concept_ids: vec![format!("c{j}")],
                a: Some(a),
                b: Some(b),
                scenario: Scenario::Unlabeled,
                source_sentence: format!("Passage {m} on concept {j}."),
                verified: false,
                experiment_related: None,
            });
        }
    }
    Ok(ItemBank::new(lexicon, drafts, Vec::new())?)
}
