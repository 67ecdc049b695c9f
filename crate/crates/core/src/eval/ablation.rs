use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{io_err, par_map_seeds, EvalError, Result, SimulatedLearner};
use crate::ceirt::sigmoid;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    /// Offsets `b - theta*` to sweep.
    pub gap_grid: Vec<f64>,
    pub rounds: usize,
    pub seeds: Vec<u64>,
}

impl AblationConfig {
    /// `start..=stop` in steps of `step`, plus `seeds` seeds `0..n`.
    pub fn grid(start: f64, stop: f64, step: f64, rounds: usize, seeds: usize) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(EvalError::Argument(format!(
                "bad grid {start}:{stop}:{step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok(Self {
            gap_grid: (0..=n).map(|i| start + i as f64 * step).collect(),
            rounds,
            seeds: (0..seeds as u64).collect(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(EvalError::Argument("rounds must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(EvalError::Argument("at least one seed is required".into()));
        }
        if self.gap_grid.iter().any(|g| !g.is_finite()) {
            return Err(EvalError::Argument("gap grid must be finite".into()));
        }
        let lo = self.gap_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .gap_grid
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(lo < 1.0 && hi > 1.0) {
            return Err(EvalError::Argument(format!(
                "gap grid [{lo}, {hi}] must reach both sides of 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub gap: f64,
    /// Cumulative gain over all rounds, averaged over concepts then seeds.
    pub mean_gain: f64,
    pub std_err: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub rounds: usize,
    pub points: Vec<AblationPoint>,
    pub peak_gap: f64,
}

/// Expected one-round gain at gap `g`: `g * sigmoid(-a_sim * g)` for `g > 0`.
pub fn expected_gain(gap: f64, a_sim: f64) -> f64 {
    if gap <= 0.0 {
        0.0
    } else {
        gap * sigmoid(-a_sim * gap)
    }
}

/// Sweeps the gap grid. Every round the learner studies one item per concept
/// at `b = theta*_j + gap`.
///
/// The uniform draw for (seed, round, concept) is shared by all gaps, so
/// differences between grid points are not swamped by sampling noise.
pub fn run_ablation(learner: &SimulatedLearner, cfg: &AblationConfig) -> Result<AblationResult> {
    cfg.validate()?;
    let k = learner.true_theta.len();
    let per_seed: Vec<Vec<f64>> = par_map_seeds(&cfg.seeds, |seed| {
        let mut r = rng::stream(seed, "ablation");
        let draws: Vec<f64> = (0..cfg.rounds * k).map(|_| r.random::<f64>()).collect();
        cfg.gap_grid
            .iter()
            .map(|&gap| {
                let mut l = learner.clone();
                let mut total = 0.0;
                for round in 0..cfg.rounds {
                    for j in 0..k {
                        let b = l.true_theta[j] + gap;
                        total += l.study(j, b, draws[round * k + j]);
                    }
                }
                total / k as f64
            })
            .collect()
    });

    let n = cfg.seeds.len() as f64;
    let points: Vec<AblationPoint> = cfg
        .gap_grid
        .iter()
        .enumerate()
        .map(|(i, &gap)| {
            let mean = per_seed.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = if per_seed.len() > 1 {
                per_seed.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            AblationPoint {
                gap,
                mean_gain: mean,
                std_err: (var / n).sqrt(),
                seeds: cfg.seeds.len(),
            }
        })
        .collect();
    let peak_gap = points
        .iter()
        .fold(None::<&AblationPoint>, |best, p| match best {
            Some(b) if b.mean_gain >= p.mean_gain => Some(b),
            _ => Some(p),
        })
        .map(|p| p.gap)
        .expect("grid is nonempty");
    Ok(AblationResult {
        rounds: cfg.rounds,
        points,
        peak_gap,
    })
}

/// `gap,mean_gain,std_err,seeds`, one row per grid point.
pub fn write_ablation_csv(result: &AblationResult, path: &Path) -> Result<()> {
    let mut out = String::from("gap,mean_gain,std_err,seeds\n");
    for p in &result.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.gap, p.mean_gain, p.std_err, p.seeds
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn learner() -> SimulatedLearner {
        SimulatedLearner::new(vec![0.0; 5], 1.0).unwrap()
    }

    #[test]
    fn grid_shape() {
        let cfg = AblationConfig::grid(0.0, 3.0, 0.25, 20, 20).unwrap();
        assert_eq!(cfg.gap_grid.len(), 13);
        assert_eq!(cfg.gap_grid[12], 3.0);
        assert!(AblationConfig::grid(0.0, 3.0, 0.0, 1, 1).is_err());
    }

    #[test]
    fn argument_errors() {
        let mut cfg = AblationConfig::grid(0.0, 3.0, 0.5, 0, 2).unwrap();
        assert!(run_ablation(&learner(), &cfg).is_err());
        cfg.rounds = 1;
        cfg.gap_grid = vec![1.5, 2.0];
        assert!(run_ablation(&learner(), &cfg).is_err());
    }

    #[test]
    fn non_positive_gaps_gain_nothing() {
        let cfg = AblationConfig {
            gap_grid: vec![-1.0, 0.0, 2.0],
            rounds: 5,
            seeds: vec![1, 2],
        };
        let r = run_ablation(&learner(), &cfg).unwrap();
        assert_eq!(r.points[0].mean_gain, 0.0);
        assert_eq!(r.points[1].mean_gain, 0.0);
    }

    #[test]
    fn empirical_gain_matches_expectation() {
        let cfg = AblationConfig {
            gap_grid: vec![0.5, 1.25, 2.5],
            rounds: 1,
            seeds: (0..4000).collect(),
        };
        let r = run_ablation(&learner(), &cfg).unwrap();
        for p in &r.points {
            let want = expected_gain(p.gap, 1.0);
            assert!(
                (p.mean_gain - want).abs() < 3.0 * p.std_err,
                "{p:?} vs {want}"
            );
        }
    }

    #[test]
    fn large_gap_is_nearly_flat() {
        let cfg = AblationConfig {
            gap_grid: vec![0.5, 5.0],
            rounds: 20,
            seeds: (0..20).collect(),
        };
        let r = run_ablation(&learner(), &cfg).unwrap();
        assert!(r.points[1].mean_gain / 20.0 < 0.1);
    }
}
