use super::{
    clamp_prob, logit, sigmoid, Adam, CeirtError, KnowledgeState, OptimizerConfig, ResponseRecord,
    Result,
};

/// Mean BCE over a record list and its gradients.
///
/// All gradients are of the *mean* loss: `d_theta` sums `(p - y) * a` over
/// records and divides by `n`; `d_a[i]` and `d_b[i]` are record `i`'s
/// `(p - y) * theta` and `-(p - y)` divided by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub loss: f64,
    pub d_theta: Vec<f64>,
    pub d_a: Vec<Vec<f64>>,
    pub d_b: Vec<Vec<f64>>,
}

pub(crate) fn bce(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn loss_and_gradients(
    theta: &KnowledgeState,
    records: &[ResponseRecord],
) -> Result<LossGradients> {
    if records.is_empty() {
        return Err(CeirtError::Argument(
            "loss needs at least one record".into(),
        ));
    }
    let k = theta.len();
    for r in records {
        r.params.check_dim(k)?;
    }
    let n = records.len() as f64;
    let th = theta.values();
    let mut loss = 0.0;
    let mut d_theta = vec![0.0; k];
    let mut d_a = Vec::with_capacity(records.len());
    let mut d_b = Vec::with_capacity(records.len());
    for r in records {
        let p = sigmoid(logit(th, &r.params));
        let y = r.outcome();
        loss += bce(p, y);
        let resid = (p - y) / n;
        for j in 0..k {
            d_theta[j] += resid * r.params.a[j];
        }
        d_a.push(th.iter().map(|t| resid * t).collect());
        d_b.push(vec![-resid; k]);
    }
    Ok(LossGradients {
        loss: loss / n,
        d_theta,
        d_a,
        d_b,
    })
}

/// Runs `cfg.epochs` Adam steps on `theta` against the whole history.
///
/// Item parameters stay fixed. The optimizer state is fresh on every call,
/// so the result depends only on the arguments.
pub fn update_knowledge_state(
    theta: &KnowledgeState,
    history: &[ResponseRecord],
    cfg: &OptimizerConfig,
) -> Result<KnowledgeState> {
    cfg.validate()?;
    if history.is_empty() {
        return Err(CeirtError::Argument("history must not be empty".into()));
    }
    let round = history.iter().map(|r| r.round).max().unwrap_or(0);
    let mut params = theta.values().to_vec();
    let mut adam = Adam::new(params.len(), cfg);
    for epoch in 0..cfg.epochs {
        let current = KnowledgeState(params.clone());
        let grads = loss_and_gradients(&current, history)?;
        if !grads.loss.is_finite() || grads.d_theta.iter().any(|g| !g.is_finite()) {
            return Err(CeirtError::Numeric { round, epoch });
        }
        adam.step(&mut params, &grads.d_theta);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(CeirtError::Numeric { round, epoch });
        }
    }
    Ok(KnowledgeState(params))
}

#[cfg(test)]
mod tests {
    use super::super::ItemParameters;
    use super::*;

    fn record(a: Vec<f64>, b: Vec<f64>, correct: bool) -> ResponseRecord {
        ResponseRecord {
            item_id: "i".into(),
            params: ItemParameters::new(a, b).unwrap(),
            correct,
            round: 0,
            simulated: false,
        }
    }

    #[test]
    fn loss_at_one_half_is_ln2() {
        let theta = KnowledgeState::new(vec![0.0]).unwrap();
        let g = loss_and_gradients(&theta, &[record(vec![1.0], vec![0.0], true)]).unwrap();
        assert!((g.loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn theta_gradient_matches_residual() {
        let theta = KnowledgeState::new(vec![2.0, 0.0]).unwrap();
        let r = record(vec![1.0, 1.0], vec![0.5, 0.5], true);
        let g = loss_and_gradients(&theta, &[r]).unwrap();
        assert!((g.d_theta[0] + 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((g.d_b[0][0] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((g.d_a[0][0] + 2.0 * 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn empty_records_rejected() {
        let theta = KnowledgeState::zeros(1);
        assert!(matches!(
            loss_and_gradients(&theta, &[]),
            Err(CeirtError::Argument(_))
        ));
        assert!(update_knowledge_state(&theta, &[], &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn correct_evidence_raises_incorrect_lowers() {
        let theta = KnowledgeState::new(vec![0.3, -0.2]).unwrap();
        let up: Vec<_> = (0..20)
            .map(|_| record(vec![1.0, 0.0], vec![0.0, 0.0], true))
            .collect();
        let down: Vec<_> = (0..20)
            .map(|_| record(vec![1.0, 0.0], vec![0.0, 0.0], false))
            .collect();
        let cfg = OptimizerConfig::knowledge_update();
        let raised = update_knowledge_state(&theta, &up, &cfg).unwrap();
        let lowered = update_knowledge_state(&theta, &down, &cfg).unwrap();
        assert!(raised.values()[0] > 0.3);
        assert!(lowered.values()[0] < 0.3);
        // untouched concept keeps its value exactly
        assert_eq!(raised.values()[1], -0.2);
        assert_eq!(lowered.values()[1], -0.2);
    }

    #[test]
    fn diverging_update_reports_round() {
        let theta = KnowledgeState::new(vec![0.0]).unwrap();
        let mut r = record(vec![1.0], vec![0.0], true);
        r.round = 4;
        let cfg = OptimizerConfig {
            learning_rate: f64::MAX,
            ..OptimizerConfig::knowledge_update()
        };
        match update_knowledge_state(&theta, &[r], &cfg) {
            Err(CeirtError::Numeric { round, .. }) => assert_eq!(round, 4),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
