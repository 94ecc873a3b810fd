//! Local weighted linear prediction.
//!
//! The successor of a state is predicted from its nearest neighbours on the
//! reconstructed trajectory: neighbours are weighted by a softmin of their
//! distances, a single affine map `Y ≈ a·e + b·X` (with `e = (1, …, 1)`) is
//! fitted to the neighbour/successor pairs by weighted least squares, and the
//! prediction is the weighted mean of the fitted successors.
//!
//! [`weighted_affine_fit`] is shared with the fusion step in [`crate::nfda`].

use serde::{Deserialize, Serialize};

use crate::embedding::{delay_embed, EmbeddingParams, TimeSeries, Trajectory};
use crate::{Error, Result};

/// Nearest neighbours of a query state, sorted by distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Weighted least-squares solution of `Y_i ≈ a·e + b·X_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    /// Attained value of `Σ ω_i ‖Y_i − a·e − b·X_i‖²`.
    pub residual: f64,
    /// Set when the normal matrix was singular and the fit fell back to
    /// `b = 0`, `a` = weighted mean of all components of `Y`.
    pub degenerate: bool,
}

impl AffineFit {
    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        state.iter().map(|x| self.a + self.b * x).collect()
    }
}

/// Relative singularity threshold on the normal matrix determinant.
pub const DEGENERACY_EPS: f64 = 1e-12;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `n` library states nearest to `query` among those accepted by
/// `eligible`; ties go to the lower index.
pub fn nearest_states(
    library: &Trajectory,
    query: &[f64],
    n: usize,
    eligible: impl Fn(usize) -> bool,
) -> Result<NeighborSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("neighbour count must be >= 1".into()));
    }
    if query.len() != library.dim() {
        return Err(Error::DimensionMismatch {
            expected: library.dim(),
            found: query.len(),
        });
    }
    let mut candidates: Vec<(f64, usize)> = library
        .states()
        .iter()
        .enumerate()
        .filter(|&(j, _)| eligible(j))
        .map(|(j, s)| (euclidean(s, query), j))
        .collect();
    if candidates.len() < n {
        return Err(Error::NotEnoughStates {
            needed: n + 1,
            available: candidates.len(),
        });
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    candidates.truncate(n);
    Ok(NeighborSet {
        indices: candidates.iter().map(|c| c.1).collect(),
        distances: candidates.iter().map(|c| c.0).collect(),
    })
}

/// Neighbours of state `k` that have a successor on the trajectory.
pub fn find_neighbors(traj: &Trajectory, k: usize, n: usize) -> Result<NeighborSet> {
    find_neighbors_with_window(traj, k, n, 0)
}

/// Like [`find_neighbors`], also skipping states within `theiler` steps of `k`.
pub fn find_neighbors_with_window(
    traj: &Trajectory,
    k: usize,
    n: usize,
    theiler: usize,
) -> Result<NeighborSet> {
    if k >= traj.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            min: 0,
            max: traj.len(),
        });
    }
    let last = traj.len() - 1;
    nearest_states(traj, traj.state(k), n, |j| j < last && j.abs_diff(k) > theiler)
}

/// Softmin weights `exp(−λ(d_i − d_min))`, normalised to sum to one.
pub fn neighbor_weights(distances: &[f64], lambda: f64) -> Vec<f64> {
    let d_min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = distances.iter().map(|d| (-lambda * (d - d_min)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Minimises `Σ ω_i ‖Y_i − a·e − b·X_i‖²` over `(a, b)`.
pub fn weighted_affine_fit<X, Y>(current: &[X], next: &[Y], weights: &[f64]) -> Result<AffineFit>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    if current.is_empty() || current.len() != next.len() || current.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "affine fit needs equal non-empty lists, got {} states, {} successors, {} weights",
            current.len(),
            next.len(),
            weights.len()
        )));
    }
    let m = current[0].as_ref().len();
    for (x, y) in current.iter().zip(next) {
        for len in [x.as_ref().len(), y.as_ref().len()] {
            if len != m {
                return Err(Error::DimensionMismatch { expected: m, found: len });
            }
        }
    }
    if m == 0 {
        return Err(Error::InvalidParameter("states have no components".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::InvalidParameter("weights are all zero".into()));
    }

    let pairs = || current.iter().zip(next).zip(weights);
    let mass = total_weight * m as f64;
    let mut x_sum = 0.0;
    let mut y_sum = 0.0;
    let mut x_sq = 0.0;
    for ((x, y), &w) in pairs() {
        x_sum += w * x.as_ref().iter().sum::<f64>();
        y_sum += w * y.as_ref().iter().sum::<f64>();
        x_sq += w * x.as_ref().iter().map(|v| v * v).sum::<f64>();
    }
    let x_mean = x_sum / mass;
    let y_mean = y_sum / mass;

    // Centered normal equations; det of the 2x2 system is mass * sxx.
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), &w) in pairs() {
        for (xv, yv) in x.as_ref().iter().zip(y.as_ref()) {
            let dx = xv - x_mean;
            sxx += w * dx * dx;
            sxy += w * dx * (yv - y_mean);
        }
    }

    let degenerate = !(sxx > DEGENERACY_EPS * x_sq);
    let (a, b) = if degenerate {
        (y_mean, 0.0)
    } else {
        let b = sxy / sxx;
        (y_mean - b * x_mean, b)
    };
    let residual = pairs()
        .map(|((x, y), &w)| {
            w * x
                .as_ref()
                .iter()
                .zip(y.as_ref())
                .map(|(xv, yv)| {
                    let r = yv - a - b * xv;
                    r * r
                })
                .sum::<f64>()
        })
        .sum();
    Ok(AffineFit {
        a,
        b,
        residual,
        degenerate,
    })
}

/// Prediction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LwlpaConfig {
    /// Neighbour count; `None` means `2(m+1)`.
    pub neighbors: Option<usize>,
    pub lambda: f64,
    /// Temporal exclusion radius around the query (0 = only the query).
    pub theiler_window: usize,
}

impl Default for LwlpaConfig {
    fn default() -> Self {
        Self {
            neighbors: None,
            lambda: 1.0,
            theiler_window: 0,
        }
    }
}

impl LwlpaConfig {
    pub fn neighbor_count(&self, m: usize) -> usize {
        self.neighbors.unwrap_or(2 * (m + 1))
    }
}

fn predict_from_neighbors(traj: &Trajectory, neighbors: &NeighborSet, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let weights = neighbor_weights(&neighbors.distances, lambda);
    let current: Vec<&[f64]> = neighbors.indices.iter().map(|&i| traj.state(i)).collect();
    let next: Vec<&[f64]> = neighbors.indices.iter().map(|&i| traj.state(i + 1)).collect();
    let fit = weighted_affine_fit(&current, &next, &weights)?;
    let mut prediction = vec![0.0; traj.dim()];
    for (x, w) in current.iter().zip(&weights) {
        for (p, v) in prediction.iter_mut().zip(fit.apply(x)) {
            *p += w * v;
        }
    }
    Ok(prediction)
}

/// Predicted successor of state `k` from `n` neighbours.
pub fn predict_next(traj: &Trajectory, k: usize, n: usize, lambda: f64) -> Result<Vec<f64>> {
    let neighbors = find_neighbors(traj, k, n)?;
    predict_from_neighbors(traj, &neighbors, lambda)
}

/// Predicted successor of an arbitrary `query` state, using only states of
/// `library` (and their successors) as neighbours.
pub fn predict_from_library(library: &Trajectory, query: &[f64], config: &LwlpaConfig) -> Result<Vec<f64>> {
    let n = config.neighbor_count(library.dim());
    let last = library.len().saturating_sub(1);
    let neighbors = nearest_states(library, query, n, |j| j < last)?;
    predict_from_neighbors(library, &neighbors, config.lambda)
}

/// First component of every state, as a scalar series.
pub fn extract_series(traj: &Trajectory) -> Result<TimeSeries> {
    TimeSeries::new(
        traj.states().iter().map(|s| s[0]).collect(),
        traj.sample_rate_hz(),
        traj.source_label(),
    )
}

/// One-step forecasts of the last `horizon` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// Sample index of each forecast.
    pub index: Vec<usize>,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    /// Previous-sample baseline.
    pub persistence: Vec<f64>,
}

impl Forecast {
    pub fn rmse(&self) -> f64 {
        rmse(&self.predicted, &self.actual)
    }

    pub fn persistence_rmse(&self) -> f64 {
        rmse(&self.persistence, &self.actual)
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()).max(1) as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

/// Forecasts each of the last `horizon` samples from the samples before it.
/// Neighbours come from the training prefix only; the predicted sample is
/// the last component of the predicted successor state.
pub fn one_step_forecast(
    series: &TimeSeries,
    params: EmbeddingParams,
    horizon: usize,
    config: &LwlpaConfig,
) -> Result<Forecast> {
    let samples = series.samples();
    if horizon == 0 || horizon >= samples.len() {
        return Err(Error::InvalidParameter(format!(
            "horizon must lie in 1..{}, got {horizon}",
            samples.len()
        )));
    }
    let train_len = samples.len() - horizon;
    let train = TimeSeries::new(samples[..train_len].to_vec(), series.sample_rate_hz(), series.label())?;
    let library = delay_embed(&train, params)?;
    let span = (params.m - 1) * params.tau;

    let mut forecast = Forecast {
        index: Vec::with_capacity(horizon),
        predicted: Vec::with_capacity(horizon),
        actual: Vec::with_capacity(horizon),
        persistence: Vec::with_capacity(horizon),
    };
    let mut query = vec![0.0; params.m];
    for target in train_len..samples.len() {
        // state whose successor ends at `target`
        let start = target - 1 - span;
        for (j, q) in query.iter_mut().enumerate() {
            *q = samples[start + j * params.tau];
        }
        let next = predict_from_library(&library, &query, config)?;
        forecast.index.push(target);
        forecast.predicted.push(next[params.m - 1]);
        forecast.actual.push(samples[target]);
        forecast.persistence.push(samples[target - 1]);
    }
    Ok(forecast)
}
