//! Fusion of several reconstructed trajectories into one.
//!
//! All leads are embedded with shared parameters so their states line up
//! step by step. At every step `p` each lead is rated from the geometry of
//! its recent motion (step length `D`, its change `D_r`, turning cosine `α`
//! and its change `α_r`) by the two fuzzy systems; the ratings become lead
//! weights through a softmax. A single affine map `X(p+1) ≈ a·e + b·X(p)` is
//! then fitted across the leads' transitions with those weights, and the
//! fused state is advanced with it: `X_F(p+1) = a·e + b·X_F(p)`.
//!
//! Feature scaling is two-pass: step lengths are divided by a scale computed
//! from the whole record before fusion starts.

use serde::{Deserialize, Serialize};

use crate::embedding::Trajectory;
use crate::fis::{build_fis_alpha, build_fis_d, FuzzySystem};
use crate::lwlpa::{weighted_affine_fit, AffineFit};
use crate::{Error, Result};

/// How raw step lengths are brought into the `[0, 1]` fuzzy universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the largest step length over all leads and steps.
    #[default]
    GlobalMax,
    /// Divide each lead by `sqrt(m)` times its own component range, the
    /// largest step that lead could take.
    AmplitudeRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Softmax sharpness.
    pub gamma: f64,
    /// Leading steps fused with uniform weights.
    pub bootstrap_steps: usize,
    pub normalization: Normalization,
    pub fis_d: FuzzySystem,
    pub fis_alpha: FuzzySystem,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            bootstrap_steps: 3,
            normalization: Normalization::GlobalMax,
            fis_d: build_fis_d(),
            fis_alpha: build_fis_alpha(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.bootstrap_steps < 3 {
            return Err(Error::InvalidParameter(format!(
                "bootstrap_steps must be >= 3, got {}",
                self.bootstrap_steps
            )));
        }
        Ok(())
    }
}

/// Normalised motion features of one lead at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFeatures {
    pub d: f64,
    pub d_r: f64,
    pub alpha: f64,
    pub alpha_r: f64,
}

/// Raw (unscaled) motion features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStepFeatures {
    pub d: f64,
    pub d_r: f64,
    pub alpha: f64,
    pub alpha_r: f64,
}

/// Multiplier applied to raw `D` and `D_r` of one lead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepNormalizer {
    pub distance_scale: f64,
}

impl StepNormalizer {
    fn from_max(max: f64) -> Self {
        Self {
            distance_scale: if max > 0.0 { 1.0 / max } else { 0.0 },
        }
    }

    pub fn normalize(&self, raw: RawStepFeatures) -> StepFeatures {
        StepFeatures {
            d: (raw.d * self.distance_scale).clamp(0.0, 1.0),
            d_r: (raw.d_r * self.distance_scale).clamp(0.0, 1.0),
            alpha: raw.alpha.clamp(-1.0, 1.0),
            alpha_r: (raw.alpha_r / 2.0).clamp(0.0, 1.0),
        }
    }
}

/// Per-lead weights of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub per_lead: Vec<f64>,
}

impl FusionWeights {
    pub fn uniform(leads: usize) -> Self {
        Self {
            per_lead: vec![1.0 / leads as f64; leads],
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Cosine between consecutive step vectors; a zero-length step counts as
/// no turn (cosine 1).
fn turn_cosine(before: &[f64], at: &[f64], after: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for ((x0, x1), x2) in before.iter().zip(at).zip(after) {
        let v_prev = x1 - x0;
        let v = x2 - x1;
        dot += v * v_prev;
        n1 += v_prev * v_prev;
        n2 += v * v;
    }
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    (dot / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0)
}

/// Unscaled features at step `p` (needs `3 <= p < len`).
pub fn raw_step_features(traj: &Trajectory, p: usize) -> Result<RawStepFeatures> {
    if p < 3 || p >= traj.len() {
        return Err(Error::IndexOutOfRange {
            index: p,
            min: 3,
            max: traj.len(),
        });
    }
    let x = |i: usize| traj.state(i);
    let d = distance(x(p), x(p - 1));
    let d_prev = distance(x(p - 1), x(p - 2));
    let alpha = turn_cosine(x(p - 2), x(p - 1), x(p));
    let alpha_prev = turn_cosine(x(p - 3), x(p - 2), x(p - 1));
    Ok(RawStepFeatures {
        d,
        d_r: (d - d_prev).abs(),
        alpha,
        alpha_r: (alpha - alpha_prev).abs(),
    })
}

/// Scaled features at step `p`: `D` and `D_r` multiplied by the
/// normaliser's scale, `α_r` halved, everything clamped to its universe.
pub fn step_features(traj: &Trajectory, p: usize, normalizer: &StepNormalizer) -> Result<StepFeatures> {
    Ok(normalizer.normalize(raw_step_features(traj, p)?))
}

fn max_step(traj: &Trajectory) -> f64 {
    traj.states()
        .windows(2)
        .map(|w| distance(&w[0], &w[1]))
        .fold(0.0, f64::max)
}

/// First pass over the record: one normaliser per lead.
pub fn normalizers(trajs: &[Trajectory], normalization: Normalization) -> Vec<StepNormalizer> {
    match normalization {
        Normalization::GlobalMax => {
            let global = trajs.iter().map(max_step).fold(0.0, f64::max);
            vec![StepNormalizer::from_max(global); trajs.len()]
        }
        Normalization::AmplitudeRange => trajs
            .iter()
            .map(|t| {
                let (lo, hi) = t
                    .states()
                    .iter()
                    .flatten()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let range = if hi > lo { hi - lo } else { 0.0 };
                StepNormalizer::from_max((t.dim() as f64).sqrt() * range)
            })
            .collect(),
    }
}

/// Softmax `exp(γ(s_l − s_min)) / Σ exp(γ(s_k − s_min))`.
pub fn softmax_weights(scores: &[f64], gamma: f64) -> Result<FusionWeights> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("lead scores must be finite".into()));
    }
    // Shifting by the max instead of the min gives the same ratios and
    // cannot overflow.
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = scores.iter().map(|s| (gamma * (s - max)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(FusionWeights {
        per_lead: raw.into_iter().map(|w| w / total).collect(),
    })
}

/// Combined fuzzy rating `ω_d + ω_α` of one lead's step.
pub fn lead_score(features: &StepFeatures, config: &FusionConfig) -> Result<f64> {
    let w_d = config.fis_d.evaluate(features.d, features.d_r)?;
    let w_alpha = config.fis_alpha.evaluate(features.alpha, features.alpha_r)?;
    Ok(w_d + w_alpha)
}

/// Lead weights for one step from each lead's features.
pub fn trajectory_weights(features: &[StepFeatures], config: &FusionConfig) -> Result<FusionWeights> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scores = features
        .iter()
        .map(|f| lead_score(f, config))
        .collect::<Result<Vec<_>>>()?;
    softmax_weights(&scores, config.gamma)
}

/// Centroid of the leads' first states.
pub fn initial_state(trajs: &[Trajectory]) -> Result<Vec<f64>> {
    let first = trajs.first().ok_or(Error::EmptyInput)?;
    let m = first.dim();
    let mut centroid = vec![0.0; m];
    for t in trajs {
        if t.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: t.dim(),
            });
        }
        if t.is_empty() {
            return Err(Error::TooFewStates {
                needed: 1,
                available: 0,
            });
        }
        for (c, v) in centroid.iter_mut().zip(t.state(0)) {
            *c += v;
        }
    }
    let n = trajs.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    Ok(centroid)
}

/// Fused trajectory together with what drove each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub trajectory: Trajectory,
    /// Lead weights used for the transition out of step `p`.
    pub weights: Vec<FusionWeights>,
    pub fits: Vec<AffineFit>,
}

impl FusionReport {
    /// Mean weight of each lead over all steps.
    pub fn mean_weights(&self) -> Vec<f64> {
        let leads = self.weights.first().map_or(0, |w| w.per_lead.len());
        let mut mean = vec![0.0; leads];
        for w in &self.weights {
            for (m, v) in mean.iter_mut().zip(&w.per_lead) {
                *m += v;
            }
        }
        let n = self.weights.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn degenerate_steps(&self) -> usize {
        self.fits.iter().filter(|f| f.degenerate).count()
    }
}

/// Fuses the leads into a single trajectory.
pub fn fuse(trajs: &[Trajectory], config: &FusionConfig) -> Result<Trajectory> {
    Ok(fuse_detailed(trajs, config)?.trajectory)
}

pub fn fuse_detailed(trajs: &[Trajectory], config: &FusionConfig) -> Result<FusionReport> {
    config.validate()?;
    if trajs.len() < 2 {
        return Err(Error::TooFewTrajectories(trajs.len()));
    }
    let steps = trajs.iter().map(Trajectory::len).min().unwrap_or(0);
    if steps == 0 {
        return Err(Error::TooFewStates {
            needed: 1,
            available: 0,
        });
    }
    let trajs: Vec<Trajectory> = trajs.iter().map(|t| t.truncated(steps)).collect();
    let mut current = initial_state(&trajs)?;
    let norms = normalizers(&trajs, config.normalization);

    let leads = trajs.len();
    let mut states = Vec::with_capacity(steps);
    let mut weights = Vec::with_capacity(steps.saturating_sub(1));
    let mut fits = Vec::with_capacity(steps.saturating_sub(1));
    let mut features = Vec::with_capacity(leads);
    for p in 0..steps - 1 {
        let w = if p < config.bootstrap_steps {
            FusionWeights::uniform(leads)
        } else {
            features.clear();
            for (t, norm) in trajs.iter().zip(&norms) {
                features.push(step_features(t, p, norm)?);
            }
            trajectory_weights(&features, config)?
        };
        let now: Vec<&[f64]> = trajs.iter().map(|t| t.state(p)).collect();
        let next: Vec<&[f64]> = trajs.iter().map(|t| t.state(p + 1)).collect();
        let fit = weighted_affine_fit(&now, &next, &w.per_lead)?;
        let advanced = fit.apply(&current);
        if advanced.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: p + 1 });
        }
        states.push(std::mem::replace(&mut current, advanced));
        weights.push(w);
        fits.push(fit);
    }
    states.push(current);

    let trajectory = Trajectory::new(
        states,
        trajs[0].params(),
        "fused",
        trajs[0].sample_rate_hz(),
    )?;
    Ok(FusionReport {
        trajectory,
        weights,
        fits,
    })
}

/// Mean step-length change divided by the RMS state norm. Zero for uniform
/// straight-line motion, invariant to rescaling the trajectory.
pub fn disorder_metric(traj: &Trajectory) -> Result<f64> {
    if traj.len() < 4 {
        return Err(Error::TooFewStates {
            needed: 4,
            available: traj.len(),
        });
    }
    let steps: Vec<f64> = traj.states().windows(2).map(|w| distance(&w[0], &w[1])).collect();
    let mean_change = steps.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (steps.len() - 1) as f64;
    let rms = (traj
        .states()
        .iter()
        .map(|s| s.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / traj.len() as f64)
        .sqrt();
    if rms == 0.0 {
        return Ok(0.0);
    }
    Ok(mean_change / rms)
}
