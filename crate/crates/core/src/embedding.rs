//! Delay-coordinate reconstruction of scalar series.
//!
//! A series `x(1), …, x(N)` with dimension `m` and delay `τ` is unrolled into
//! the states `X_t = (x(t), x(t+τ), …, x(t+(m−1)τ))` for `t = 1, …, N−(m−1)τ`.
//! Everything in this crate is 0-based: state `t` here is `X_{t+1}` in the
//! 1-based notation, and its component `j` is `samples[t + j·τ]`.
//!
//! Embedding parameters are estimated per lead with the average displacement
//! curve (delay) and the false-nearest-neighbour fraction (dimension); a set
//! of per-lead estimates is merged with [`select_joint_params`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    label: String,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: samples.len(),
                needed: 2,
            });
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub(crate) fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub(crate) fn std_dev(&self) -> f64 {
        std_dev(&self.samples)
    }
}

pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Embedding dimension `m` and delay `tau` (in samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub m: usize,
    pub tau: usize,
}

impl EmbeddingParams {
    pub fn new(m: usize, tau: usize) -> Result<Self> {
        if m == 0 || tau == 0 {
            return Err(Error::InvalidParameter(format!(
                "embedding needs m >= 1 and tau >= 1, got m={m}, tau={tau}"
            )));
        }
        Ok(Self { m, tau })
    }

    /// Number of samples spanned by one state.
    pub fn window(&self) -> usize {
        (self.m - 1) * self.tau + 1
    }

    /// Number of states a series of `len` samples yields, if any.
    pub fn state_count(&self, len: usize) -> Option<usize> {
        len.checked_sub((self.m - 1) * self.tau)
    }
}

/// Ordered sequence of `m`-dimensional states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    params: EmbeddingParams,
    source_label: String,
    sample_rate_hz: f64,
}

impl Trajectory {
    /// Builds a trajectory from explicit states. Every state must have
    /// exactly `params.m` finite components.
    pub fn new(
        states: Vec<Vec<f64>>,
        params: EmbeddingParams,
        source_label: impl Into<String>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        for (step, state) in states.iter().enumerate() {
            if state.len() != params.m {
                return Err(Error::DimensionMismatch {
                    expected: params.m,
                    found: state.len(),
                });
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { step });
            }
        }
        Ok(Self {
            states,
            params,
            source_label: source_label.into(),
            sample_rate_hz,
        })
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &[f64] {
        &self.states[index]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.params.m
    }

    pub fn params(&self) -> EmbeddingParams {
        self.params
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub(crate) fn truncated(&self, len: usize) -> Trajectory {
        Trajectory {
            states: self.states[..len.min(self.states.len())].to_vec(),
            params: self.params,
            source_label: self.source_label.clone(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Unrolls `series` into delay vectors.
pub fn delay_embed(series: &TimeSeries, params: EmbeddingParams) -> Result<Trajectory> {
    let samples = series.samples();
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let count = match params.state_count(samples.len()) {
        Some(count) if count >= 2 => count,
        _ => {
            return Err(Error::SeriesTooShort {
                len: samples.len(),
                needed: params.window() + 1,
            })
        }
    };
    let states = (0..count)
        .map(|t| (0..params.m).map(|j| samples[t + j * params.tau]).collect())
        .collect();
    Ok(Trajectory {
        states,
        params,
        source_label: series.label().to_string(),
        sample_rate_hz: series.sample_rate_hz(),
    })
}

/// Settings for the average-displacement delay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdConfig {
    pub max_tau: usize,
    pub slope_fraction: f64,
    /// Dimension of the probe embedding whose spread is tracked.
    pub probe_dim: usize,
}

impl Default for AdConfig {
    fn default() -> Self {
        Self {
            max_tau: 50,
            slope_fraction: 0.1,
            probe_dim: 3,
        }
    }
}

/// Mean distance between each probe state `(x(t), x(t+τ), …)` and the
/// zero-delay state `(x(t), x(t), …)`.
pub fn average_displacement(samples: &[f64], probe_dim: usize, tau: usize) -> f64 {
    let span = (probe_dim - 1) * tau;
    if samples.len() <= span {
        return f64::NAN;
    }
    let count = samples.len() - span;
    let total: f64 = (0..count)
        .map(|t| {
            (1..probe_dim)
                .map(|j| {
                    let d = samples[t + j * tau] - samples[t];
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / count as f64
}

/// Delay estimate with the default probe dimension.
pub fn estimate_delay_ad(series: &TimeSeries, max_tau: usize, slope_fraction: f64) -> Result<usize> {
    estimate_delay_ad_with(
        series,
        &AdConfig {
            max_tau,
            slope_fraction,
            ..AdConfig::default()
        },
    )
}

/// Returns the last delay before the displacement curve flattens: the
/// smallest `τ` with `S(τ+1) − S(τ) < slope_fraction · S(1)`, or `max_tau`
/// if the curve keeps climbing.
pub fn estimate_delay_ad_with(series: &TimeSeries, config: &AdConfig) -> Result<usize> {
    if config.max_tau < 2 {
        return Err(Error::InvalidParameter(format!(
            "max_tau must be >= 2, got {}",
            config.max_tau
        )));
    }
    if !(config.slope_fraction > 0.0 && config.slope_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "slope_fraction must lie in (0, 1), got {}",
            config.slope_fraction
        )));
    }
    if config.probe_dim < 2 {
        return Err(Error::InvalidParameter("AD probe dimension must be >= 2".into()));
    }
    let samples = series.samples();
    let span = (config.probe_dim - 1) * config.max_tau;
    if samples.len() < span + 2 {
        return Err(Error::SeriesTooShort {
            len: samples.len(),
            needed: span + 2,
        });
    }

    let first = average_displacement(samples, config.probe_dim, 1);
    if first <= 0.0 {
        return Err(Error::SeriesDegenerate(format!(
            "{}: displacement curve is identically zero",
            series.label()
        )));
    }
    let threshold = config.slope_fraction * first;
    let mut previous = first;
    for tau in 1..config.max_tau {
        let next = average_displacement(samples, config.probe_dim, tau + 1);
        if next - previous < threshold {
            return Ok(tau);
        }
        previous = next;
    }
    Ok(config.max_tau)
}

/// Settings for the false-nearest-neighbour dimension estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnnConfig {
    pub max_m: usize,
    /// Ratio test: a neighbour is false when the added coordinate separates
    /// it by more than `rtol` times the current distance.
    pub rtol: f64,
    /// Loneliness test: a neighbour is false when its distance in `m+1`
    /// dimensions exceeds `atol` series standard deviations.
    pub atol: f64,
    pub fnn_threshold: f64,
}

impl Default for FnnConfig {
    fn default() -> Self {
        Self {
            max_m: 10,
            rtol: 15.0,
            atol: 2.0,
            fnn_threshold: 0.01,
        }
    }
}

/// Result of the false-nearest-neighbour scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnEstimate {
    pub dimension: usize,
    /// Fraction of false neighbours for `m = 1, 2, …` up to `dimension`.
    pub fractions: Vec<f64>,
    /// False when the fraction never dropped below the threshold and
    /// `dimension` is just `max_m`.
    pub converged: bool,
}

// Distances below this multiple of the series std count as exact ties. Exactly
// periodic signals otherwise produce neighbours separated by rounding noise
// only, which makes the ratio test meaningless.
const FNN_NOISE_FLOOR: f64 = 1e-9;

/// Fraction of false nearest neighbours at embedding dimension `m`.
pub fn fnn_fraction(samples: &[f64], tau: usize, m: usize, rtol: f64, atol: f64) -> Result<f64> {
    let sd = std_dev(samples);
    if sd == 0.0 {
        return Err(Error::SeriesDegenerate("constant series has no neighbours".into()));
    }
    fnn_fraction_with_sd(samples, tau, m, rtol, atol, sd)
}

fn fnn_fraction_with_sd(
    samples: &[f64],
    tau: usize,
    m: usize,
    rtol: f64,
    atol: f64,
    sd: f64,
) -> Result<f64> {
    let count = samples.len().saturating_sub(m * tau);
    if count < 2 {
        return Err(Error::SeriesTooShort {
            len: samples.len(),
            needed: m * tau + 2,
        });
    }
    let floor = FNN_NOISE_FLOOR * sd;
    let mut false_count = 0usize;
    for i in 0..count {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..count {
            if j == i {
                continue;
            }
            let mut d2 = 0.0;
            for k in 0..m {
                let diff = samples[i + k * tau] - samples[j + k * tau];
                d2 += diff * diff;
                if d2 >= best {
                    break;
                }
            }
            if d2 < best {
                best = d2;
                best_j = j;
            }
        }
        let mut dist = best.sqrt();
        let mut extra = (samples[i + m * tau] - samples[best_j + m * tau]).abs();
        let extended = dist.hypot(extra);
        if dist < floor {
            dist = 0.0;
        }
        if extra < floor {
            extra = 0.0;
        }
        let ratio_false = if dist > 0.0 { extra / dist > rtol } else { extra > 0.0 };
        if ratio_false || extended / sd > atol {
            false_count += 1;
        }
    }
    Ok(false_count as f64 / count as f64)
}

/// Smallest `m` whose false-neighbour fraction falls below the threshold.
pub fn estimate_dimension_fnn(
    series: &TimeSeries,
    tau: usize,
    max_m: usize,
    rtol: f64,
    atol: f64,
    fnn_threshold: f64,
) -> Result<FnnEstimate> {
    estimate_dimension_fnn_with(
        series,
        tau,
        &FnnConfig {
            max_m,
            rtol,
            atol,
            fnn_threshold,
        },
    )
}

pub fn estimate_dimension_fnn_with(
    series: &TimeSeries,
    tau: usize,
    config: &FnnConfig,
) -> Result<FnnEstimate> {
    if tau == 0 {
        return Err(Error::InvalidParameter("tau must be >= 1".into()));
    }
    if config.max_m < 2 {
        return Err(Error::InvalidParameter(format!(
            "max_m must be >= 2, got {}",
            config.max_m
        )));
    }
    if !(config.rtol > 0.0 && config.atol > 0.0) {
        return Err(Error::InvalidParameter("rtol and atol must be positive".into()));
    }
    if !(config.fnn_threshold > 0.0 && config.fnn_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fnn_threshold must lie in (0, 1), got {}",
            config.fnn_threshold
        )));
    }
    let samples = series.samples();
    let sd = series.std_dev();
    if sd == 0.0 {
        return Err(Error::SeriesDegenerate(format!(
            "{}: constant series has no neighbours",
            series.label()
        )));
    }

    let mut fractions = Vec::with_capacity(config.max_m);
    for m in 1..=config.max_m {
        let fraction = fnn_fraction_with_sd(samples, tau, m, config.rtol, config.atol, sd)?;
        fractions.push(fraction);
        if fraction < config.fnn_threshold {
            return Ok(FnnEstimate {
                dimension: m,
                fractions,
                converged: true,
            });
        }
    }
    log::warn!(
        "{}: false-neighbour fraction never fell below {}; using max_m = {}",
        series.label(),
        config.fnn_threshold,
        config.max_m
    );
    Ok(FnnEstimate {
        dimension: config.max_m,
        fractions,
        converged: false,
    })
}

/// Estimates `(m, τ)` for one lead: delay first, then dimension at that delay.
pub fn estimate_params(series: &TimeSeries, ad: &AdConfig, fnn: &FnnConfig) -> Result<EmbeddingParams> {
    let tau = estimate_delay_ad_with(series, ad)?;
    let estimate = estimate_dimension_fnn_with(series, tau, fnn)?;
    EmbeddingParams::new(estimate.dimension, tau)
}

/// Joint parameters for a set of leads: the largest dimension and the
/// smallest delay.
pub fn select_joint_params(per_lead: &[EmbeddingParams]) -> Result<EmbeddingParams> {
    let m = per_lead.iter().map(|p| p.m).max().ok_or(Error::EmptyInput)?;
    let tau = per_lead.iter().map(|p| p.tau).min().ok_or(Error::EmptyInput)?;
    Ok(EmbeddingParams { m, tau })
}
