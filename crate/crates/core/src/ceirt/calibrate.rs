use serde::{Deserialize, Serialize};

use super::loss::bce;
use super::{sigmoid, Adam, CeirtError, ItemParameters, KnowledgeState, OptimizerConfig, Result};
use crate::rng;

/// An item as seen by calibration: its id and the concept indices it is
/// tagged with. Only tagged entries of `a` and `b` are trainable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub id: String,
    pub concepts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub user: usize,
    pub item: usize,
    pub correct: bool,
}

/// Sparse user x item response table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub k: usize,
    pub users: Vec<String>,
    pub items: Vec<ItemSpec>,
    pub observations: Vec<Observation>,
}

impl ResponseMatrix {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CeirtError::Argument("K must be >= 1".into()));
        }
        if self.observations.is_empty() {
            return Err(CeirtError::Argument("no observations".into()));
        }
        let mut user_seen = vec![false; self.users.len()];
        let mut item_seen = vec![false; self.items.len()];
        for o in &self.observations {
            if o.user >= self.users.len() || o.item >= self.items.len() {
                return Err(CeirtError::Argument(format!(
                    "observation ({}, {}) out of range",
                    o.user, o.item
                )));
            }
            user_seen[o.user] = true;
            item_seen[o.item] = true;
        }
        if let Some(u) = user_seen.iter().position(|s| !s) {
            return Err(CeirtError::Argument(format!(
                "user `{}` has no responses",
                self.users[u]
            )));
        }
        if let Some(i) = item_seen.iter().position(|s| !s) {
            return Err(CeirtError::Argument(format!(
                "item `{}` has no responses",
                self.items[i].id
            )));
        }
        for item in &self.items {
            if item.concepts.is_empty() {
                return Err(CeirtError::Argument(format!(
                    "item `{}` has no concepts",
                    item.id
                )));
            }
            if let Some(&j) = item.concepts.iter().find(|&&j| j >= self.k) {
                return Err(CeirtError::Dimension {
                    expected: self.k,
                    found: j + 1,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Loss before each epoch's step.
    pub loss_history: Vec<f64>,
    /// Items whose responses are all correct or all incorrect.
    pub degenerate_items: Vec<String>,
    /// Items whose discrimination ended at zero on every concept.
    #[serde(default)]
    pub flat_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub theta: Vec<KnowledgeState>,
    pub params: Vec<ItemParameters>,
    pub report: CalibrationReport,
}

struct Workspace<'a> {
    data: &'a ResponseMatrix,
    theta: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    mask: Vec<bool>,
}

impl Workspace<'_> {
    fn loss_and_grads(&self, gt: &mut [f64], ga: &mut [f64], gb: &mut [f64]) -> f64 {
        let k = self.data.k;
        gt.fill(0.0);
        ga.fill(0.0);
        gb.fill(0.0);
        let n = self.data.observations.len() as f64;
        let mut loss = 0.0;
        for o in &self.data.observations {
            let th = &self.theta[o.user * k..(o.user + 1) * k];
            let mut z = 0.0;
            for j in 0..k {
                z += self.a[o.item * k + j] * th[j] - self.b[o.item * k + j];
            }
            let p = sigmoid(z);
            let y = if o.correct { 1.0 } else { 0.0 };
            loss += bce(p, y);
            let resid = (p - y) / n;
            for j in 0..k {
                let ij = o.item * k + j;
                gt[o.user * k + j] += resid * self.a[ij];
                if self.mask[ij] {
                    ga[ij] += resid * th[j];
                    gb[ij] -= resid;
                }
            }
        }
        loss / n
    }

    fn loss(&self) -> f64 {
        let k = self.data.k;
        let n = self.data.observations.len() as f64;
        let mut loss = 0.0;
        for o in &self.data.observations {
            let th = &self.theta[o.user * k..(o.user + 1) * k];
            let mut z = 0.0;
            for j in 0..k {
                z += self.a[o.item * k + j] * th[j] - self.b[o.item * k + j];
            }
            loss += bce(sigmoid(z), if o.correct { 1.0 } else { 0.0 });
        }
        loss / n
    }
}

/// Jointly fits user abilities and item parameters by full-batch Adam on
/// the mean BCE over all observations.
///
/// Initial values come from label-keyed random streams (`user:<id>`,
/// `item:<id>`), so reordering users or items does not change any entity's
/// starting point. Discrimination is projected onto `a >= 0` after every step.
pub fn calibrate_item_bank(
    data: &ResponseMatrix,
    cfg: &OptimizerConfig,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    data.validate()?;
    let k = data.k;

    let mut theta = Vec::with_capacity(data.users.len() * k);
    for user in &data.users {
        let mut r = rng::stream(cfg.seed, &format!("user:{user}"));
        theta.extend(KnowledgeState::initial(k, &mut r).into_inner());
    }
    let mut a = Vec::with_capacity(data.items.len() * k);
    let mut b = Vec::with_capacity(data.items.len() * k);
    let mut mask = Vec::with_capacity(data.items.len() * k);
    for item in &data.items {
        let mut r = rng::stream(cfg.seed, &format!("item:{}", item.id));
        let p = ItemParameters::initial(k, &item.concepts, 0.0, &mut r);
        a.extend(p.a);
        b.extend(p.b);
        mask.extend((0..k).map(|j| item.concepts.contains(&j)));
    }

    let mut ws = Workspace {
        data,
        theta,
        a,
        b,
        mask,
    };
    let mut gt = vec![0.0; ws.theta.len()];
    let mut ga = vec![0.0; ws.a.len()];
    let mut gb = vec![0.0; ws.b.len()];
    let mut adam_t = Adam::new(ws.theta.len(), cfg);
    let mut adam_a = Adam::new(ws.a.len(), cfg);
    let mut adam_b = Adam::new(ws.b.len(), cfg);
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let loss = ws.loss_and_grads(&mut gt, &mut ga, &mut gb);
        if !loss.is_finite() {
            return Err(CeirtError::Numeric { round: 0, epoch });
        }
        loss_history.push(loss);
        adam_t.step(&mut ws.theta, &gt);
        adam_a.step(&mut ws.a, &ga);
        adam_b.step(&mut ws.b, &gb);
        for v in ws.a.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if ws
            .theta
            .iter()
            .chain(&ws.a)
            .chain(&ws.b)
            .any(|v| !v.is_finite())
        {
            return Err(CeirtError::Numeric { round: 0, epoch });
        }
    }
    let final_loss = ws.loss();

    let mut degenerate_items = Vec::new();
    for (i, item) in data.items.iter().enumerate() {
        let mut outcomes = data
            .observations
            .iter()
            .filter(|o| o.item == i)
            .map(|o| o.correct);
        let first = outcomes.next();
        if let Some(first) = first {
            if outcomes.all(|c| c == first) {
                degenerate_items.push(item.id.clone());
            }
        }
    }

    let theta = ws
        .theta
        .chunks(k)
        .map(|c| KnowledgeState(c.to_vec()))
        .collect();
    let params: Vec<ItemParameters> =
        ws.a.chunks(k)
            .zip(ws.b.chunks(k))
            .map(|(a, b)| ItemParameters {
                a: a.to_vec(),
                b: b.to_vec(),
            })
            .collect();
    let flat_items = data
        .items
        .iter()
        .zip(&params)
        .filter(|(_, p)| !p.is_assessable())
        .map(|(item, _)| item.id.clone())
        .collect();
    Ok(CalibrationResult {
        theta,
        params,
        report: CalibrationReport {
            initial_loss: loss_history[0],
            final_loss,
            loss_history,
            degenerate_items,
            flat_items,
        },
    })
}
