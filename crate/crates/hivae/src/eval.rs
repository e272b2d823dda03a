//! Evaluation experiments: Brier curves over observation fractions,
//! false-goal probability curves, preference-drift deltas, the Wilcoxon
//! signed-rank test, and CSV/JSON report emission.

use crate::baselines::GoalInferenceModel;
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::sim::{truncate, Dataset, Episode, FalseGoalMeta};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Observation fractions used by the main experiment.
pub const EVAL_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 0.95];

/// Number of checkpoints leading up to the false-goal pass point.
pub const FALSE_GOAL_INTERVALS: usize = 10;

/// Brier score of a posterior against a one-hot outcome: `Σ (p_i − y_i)²`.
/// Ranges over [0, 2]; 0 iff the posterior is one-hot at the true goal.
pub fn brier(posterior: &[f64], true_goal: usize) -> Result<f64> {
    if true_goal >= posterior.len() {
        return Err(Error::InvalidInput(format!(
            "true goal index {true_goal} out of range for {} goals",
            posterior.len()
        )));
    }
    Ok(posterior
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let y = if i == true_goal { 1.0 } else { 0.0 };
            (p - y) * (p - y)
        })
        .sum())
}

/// Per-fraction Brier results with per-episode values retained for
/// significance testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierCurve {
    pub model: String,
    pub fractions: Vec<f64>,
    pub means: Vec<f64>,
    /// `per_episode[f][e]`: Brier of episode `e` at fraction `f`; episodes
    /// ordered by (agent_id, episode_id).
    pub per_episode: Vec<Vec<f64>>,
}

/// Sorts episodes deterministically for aggregation.
fn sorted_episodes<'a>(episodes: &[&'a Episode]) -> Vec<&'a Episode> {
    let mut out = episodes.to_vec();
    out.sort_by_key(|e| (e.agent_id, e.episode_id));
    out
}

/// Experiment 1: truncate each episode at every fraction, infer, score.
pub fn evaluate_brier_curve(
    model: &dyn GoalInferenceModel,
    g: &SpatialGraph,
    episodes: &[&Episode],
    fractions: &[f64],
) -> Result<BrierCurve> {
    if episodes.is_empty() {
        return Err(Error::Data("no episodes to evaluate".into()));
    }
    let episodes = sorted_episodes(episodes);
    let mut means = Vec::with_capacity(fractions.len());
    let mut per_episode = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut values = Vec::with_capacity(episodes.len());
        for e in &episodes {
            let prefix = truncate(e, fraction);
            let posterior = model.infer_goal(g, &prefix.path, Some(e.agent_id))?;
            let k = g
                .goal_index(e.goal)
                .ok_or_else(|| Error::Data(format!("episode goal {} not in goal set", e.goal)))?;
            values.push(brier(&posterior, k)?);
        }
        means.push(values.iter().sum::<f64>() / values.len() as f64);
        per_episode.push(values);
    }
    Ok(BrierCurve {
        model: model.name().to_string(),
        fractions: fractions.to_vec(),
        means,
        per_episode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseGoalCurve {
    pub model: String,
    /// Mean posterior mass on the false goal at each checkpoint.
    pub means: Vec<f64>,
    /// True when some episode's pass point precedes the interval count and
    /// checkpoints had to be deduplicated.
    pub deduplicated: bool,
}

/// Experiment 2: posterior mass on the false goal at evenly spaced prefix
/// checkpoints from the start up to (and including) the pass point.
pub fn false_goal_curve(
    model: &dyn GoalInferenceModel,
    g: &SpatialGraph,
    episodes: &[(Episode, FalseGoalMeta)],
    intervals: usize,
) -> Result<FalseGoalCurve> {
    if episodes.is_empty() {
        return Err(Error::Data("no false-goal episodes to evaluate".into()));
    }
    if intervals == 0 {
        return Err(Error::InvalidInput("intervals must be >= 1".into()));
    }
    let mut sums = vec![0.0; intervals];
    let mut deduplicated = false;
    for (episode, meta) in episodes {
        let k = g.goal_index(meta.false_goal).ok_or_else(|| {
            Error::Data(format!("false goal {} not in goal set", meta.false_goal))
        })?;
        // prefix length covering the pass point
        let pass_len = meta.pass_index + 1;
        if pass_len < intervals {
            deduplicated = true;
        }
        // evaluate each distinct prefix once; duplicates reuse the value
        let mut cached: Vec<Option<f64>> = vec![None; episode.path.len() + 1];
        for j in 1..=intervals {
            let len = ((j * pass_len + intervals - 1) / intervals).max(1);
            let mass = match cached[len] {
                Some(v) => v,
                None => {
                    let posterior = model.infer_goal(g, &episode.path[..len], Some(episode.agent_id))?;
                    let v = posterior[k];
                    cached[len] = Some(v);
                    v
                }
            };
            sums[j - 1] += mass;
        }
    }
    let n = episodes.len() as f64;
    Ok(FalseGoalCurve {
        model: model.name().to_string(),
        means: sums.into_iter().map(|s| s / n).collect(),
        deduplicated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDeltas {
    pub model: String,
    pub fractions: Vec<f64>,
    /// `meanBrier(drifted) − meanBrier(original)` per fraction; closer to
    /// zero means performance carried over to the drifted population.
    pub deltas: Vec<f64>,
}

/// Experiment 3: Brier delta between a drifted-preference dataset and the
/// original, per fraction. Both datasets must come from the same graph.
pub fn drift_evaluation(
    model: &dyn GoalInferenceModel,
    g: &SpatialGraph,
    original: &Dataset,
    drifted: &Dataset,
    fractions: &[f64],
) -> Result<DriftDeltas> {
    let hash = g.content_hash();
    if original.graph_hash != hash || drifted.graph_hash != hash {
        return Err(Error::Data(
            "drift evaluation requires both datasets to come from the supplied graph".into(),
        ));
    }
    let orig_eps: Vec<&Episode> = original.test().collect();
    let drift_eps: Vec<&Episode> = drifted.test().collect();
    let base = evaluate_brier_curve(model, g, &orig_eps, fractions)?;
    let moved = evaluate_brier_curve(model, g, &drift_eps, fractions)?;
    Ok(DriftDeltas {
        model: model.name().to_string(),
        fractions: fractions.to_vec(),
        deltas: moved
            .means
            .iter()
            .zip(&base.means)
            .map(|(d, o)| d - o)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W⁺, W⁻)` over nonzero differences.
    pub w: f64,
    /// Normal approximation with tie correction (no continuity correction).
    pub z_approx: f64,
    /// Two-sided p-value: exact sign-assignment enumeration for
    /// `n_effective <= 20`, otherwise from the normal approximation.
    pub p_two_sided: f64,
    pub n_effective: usize,
    pub exact: bool,
}

/// Paired Wilcoxon signed-rank test. Zero differences are dropped; tied
/// absolute differences receive mid-ranks.
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<WilcoxonResult> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "wilcoxon needs at least 5 pairs, got {}",
            xs.len()
        )));
    }
    let diffs: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let n = diffs.len();
    // mid-ranks of |d|
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_groups: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let mid = (i + 1 + j + 1) as f64 / 2.0;
        for &ix in &order[i..=j] {
            ranks[ix] = mid;
        }
        tie_groups.push(j - i + 1);
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let mu = total / 2.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / 48.0;
    let sigma2 = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_term;
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    let z_approx = (w - mu) / sigma2.sqrt();

    let (p_two_sided, exact) = if n <= 20 {
        (exact_two_sided_p(&ranks, w), true)
    } else {
        let z = z_approx.abs();
        (2.0 * normal_sf(z), false)
    };
    Ok(WilcoxonResult { w, z_approx, p_two_sided: p_two_sided.min(1.0), n_effective: n, exact })
}

/// Exact two-sided p: the null distribution of `W⁺` over all `2^n` sign
/// assignments, computed by convolution over doubled (integer) ranks.
fn exact_two_sided_p(ranks: &[f64], w_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max_sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let threshold = 2.0 * w_obs + 1e-9;
    let below: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64) <= threshold)
        .map(|(_, c)| c)
        .sum();
    (2.0 * below / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Standard normal survival function via the complementary error function
/// (Abramowitz–Stegun 7.1.26 rational approximation, |error| < 1.5e-7).
fn normal_sf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erfc = poly * (-x * x).exp();
    let erfc = if x >= 0.0 { erfc } else { 2.0 - erfc };
    0.5 * erfc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub graph_hash: String,
    pub master_seed: u64,
    pub num_goals: usize,
    pub test_episodes: usize,
}

/// Aggregated experiment outputs; serialized as the versioned JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report_version: u32,
    pub metadata: ReportMetadata,
    pub brier_curves: Vec<BrierCurve>,
    pub false_goal_curves: Vec<FalseGoalCurve>,
    pub drift_deltas: Vec<DriftDeltas>,
    pub wilcoxon: Option<WilcoxonResult>,
}

impl EvalReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        EvalReport {
            report_version: 1,
            metadata,
            brier_curves: Vec::new(),
            false_goal_curves: Vec::new(),
            drift_deltas: Vec::new(),
            wilcoxon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.brier_curves {
            if c.means.iter().any(|&m| !(0.0..=2.0).contains(&m)) {
                return Err(Error::Data(format!("brier means out of [0,2] for {}", c.model)));
            }
        }
        for c in &self.false_goal_curves {
            if c.means.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
                return Err(Error::Data(format!(
                    "false-goal probabilities out of [0,1] for {}",
                    c.model
                )));
            }
        }
        Ok(())
    }
}

fn fraction_header(fractions: &[f64]) -> String {
    let cols: Vec<String> = fractions
        .iter()
        .map(|f| format!("f{}", (f * 100.0).round() as u32))
        .collect();
    format!("model,{}", cols.join(","))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `report.json`, `brier.csv`, `false_goal.csv`, and `drift.csv` into
/// `out_dir`; output is a pure function of the report.
pub fn emit_report(report: &EvalReport, out_dir: impl AsRef<Path>) -> Result<()> {
    report.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let json = serde_json::to_string_pretty(report)?;
    write_file(&out_dir.join("report.json"), &json)?;

    if !report.brier_curves.is_empty() {
        let mut csv = format!("{}\n", fraction_header(&report.brier_curves[0].fractions));
        for c in &report.brier_curves {
            let row: Vec<String> = c.means.iter().map(|m| format!("{m}")).collect();
            csv.push_str(&format!("{},{}\n", c.model, row.join(",")));
        }
        write_file(&out_dir.join("brier.csv"), &csv)?;
    }
    if !report.false_goal_curves.is_empty() {
        let n = report.false_goal_curves[0].means.len();
        let cols: Vec<String> = (1..=n).map(|i| format!("i{i}")).collect();
        let mut csv = format!("model,{}\n", cols.join(","));
        for c in &report.false_goal_curves {
            let row: Vec<String> = c.means.iter().map(|m| format!("{m}")).collect();
            csv.push_str(&format!("{},{}\n", c.model, row.join(",")));
        }
        write_file(&out_dir.join("false_goal.csv"), &csv)?;
    }
    if !report.drift_deltas.is_empty() {
        let mut csv = format!("{}\n", fraction_header(&report.drift_deltas[0].fractions));
        for c in &report.drift_deltas {
            let row: Vec<String> = c.deltas.iter().map(|m| format!("{m}")).collect();
            csv.push_str(&format!("{},{}\n", c.model, row.join(",")));
        }
        write_file(&out_dir.join("drift.csv"), &csv)?;
    }
    Ok(())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}
