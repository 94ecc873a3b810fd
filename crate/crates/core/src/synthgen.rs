//! Synthetic VCG generation and SNR-calibrated noise corruption.
//!
//! The generator is the three-state limit-cycle ECG model: a point circles
//! the unit circle at the heart rate, and each output channel integrates a
//! sum of Gaussian-shaped events (P, Q, R, S, T) placed at fixed angles on
//! that circle, relaxing towards an optional sinusoidal baseline. Every VCG
//! channel shares the phase and scales the five wave amplitudes with its own
//! gains. Integration is fixed-step RK4 at the output sample rate.
//!
//! The wave parameters are external-reference defaults from the dynamical
//! ECG model literature, not measured values.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::TimeSeries;
use crate::recordio::read_record_with_meta;
use crate::vcgprep::{MultiLeadRecord, VCG_LEADS};
use crate::{Error, Result};

/// One Gaussian wave event of the cardiac cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub name: String,
    /// Angular position on the limit cycle (radians, R at 0).
    pub theta: f64,
    pub amplitude: f64,
    /// Angular width (radians).
    pub width: f64,
}

/// Per-channel gains applied to the five wave amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub name: String,
    pub wave_gains: [f64; 5],
    /// Overall output scale (model units to mV).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgModelParams {
    /// P, Q, R, S, T in that order.
    pub waves: [Wave; 5],
    pub heart_rate_bpm: f64,
    pub channels: [ChannelGains; 3],
    /// Amplitude of the sinusoidal baseline the channels relax to.
    pub baseline_amplitude: f64,
    pub baseline_freq_hz: f64,
}

impl Default for EcgModelParams {
    fn default() -> Self {
        let wave = |name: &str, theta: f64, amplitude: f64, width: f64| Wave {
            name: name.to_string(),
            theta,
            amplitude,
            width,
        };
        let channel = |name: &str, wave_gains: [f64; 5]| ChannelGains {
            name: name.to_string(),
            wave_gains,
            scale: 20.0,
        };
        Self {
            waves: [
                wave("P", -PI / 3.0, 1.2, 0.25),
                wave("Q", -PI / 12.0, -5.0, 0.1),
                wave("R", 0.0, 30.0, 0.1),
                wave("S", PI / 12.0, -7.5, 0.1),
                wave("T", PI / 2.0, 0.75, 0.4),
            ],
            heart_rate_bpm: 60.0,
            channels: [
                channel(VCG_LEADS[0], [1.0, 1.0, 1.0, 1.0, 1.0]),
                channel(VCG_LEADS[1], [0.8, 0.4, 0.6, 1.8, 1.2]),
                channel(VCG_LEADS[2], [-0.5, 1.5, -0.4, 0.6, -0.9]),
            ],
            baseline_amplitude: 0.0,
            baseline_freq_hz: 0.25,
        }
    }
}

impl EcgModelParams {
    pub fn with_heart_rate(mut self, bpm: f64) -> Self {
        self.heart_rate_bpm = bpm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heart_rate_bpm.is_finite() && self.heart_rate_bpm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "heart rate must be positive, got {}",
                self.heart_rate_bpm
            )));
        }
        for w in &self.waves {
            if !(w.width > 0.0 && w.width.is_finite()) {
                return Err(Error::InvalidParameter(format!("wave {} needs a positive width", w.name)));
            }
            if !(w.theta > -PI && w.theta <= PI) {
                return Err(Error::InvalidParameter(format!("wave {} angle must lie in (-pi, pi]", w.name)));
            }
        }
        if self.waves.windows(2).any(|p| p[0].theta >= p[1].theta) {
            return Err(Error::InvalidParameter("wave angles must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        60.0 / self.heart_rate_bpm
    }

    /// Reads parameters from JSON. Unknown keys (such as a `note`) are ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let params: Self = serde_json::from_str(&text)?;
        params.validate()?;
        Ok(params)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

const STATE: usize = 5;

fn derivative(params: &EcgModelParams, omega: f64, t: f64, s: &[f64; STATE]) -> [f64; STATE] {
    let (x, y) = (s[0], s[1]);
    let alpha = 1.0 - (x * x + y * y).sqrt();
    let theta = y.atan2(x);
    let baseline = params.baseline_amplitude * (2.0 * PI * params.baseline_freq_hz * t).sin();
    let mut events = [0.0; 5];
    for (e, w) in events.iter_mut().zip(&params.waves) {
        let dtheta = wrap_angle(theta - w.theta);
        *e = w.amplitude * dtheta * (-dtheta * dtheta / (2.0 * w.width * w.width)).exp();
    }
    let mut ds = [alpha * x - omega * y, alpha * y + omega * x, 0.0, 0.0, 0.0];
    for (c, channel) in params.channels.iter().enumerate() {
        let forcing: f64 = events.iter().zip(&channel.wave_gains).map(|(e, g)| e * g).sum();
        ds[2 + c] = -forcing - (s[2 + c] - baseline);
    }
    ds
}

fn rk4_step(params: &EcgModelParams, omega: f64, t: f64, h: f64, s: &[f64; STATE]) -> [f64; STATE] {
    let add = |a: &[f64; STATE], k: &[f64; STATE], f: f64| {
        let mut out = *a;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += f * k);
        out
    };
    let k1 = derivative(params, omega, t, s);
    let k2 = derivative(params, omega, t + h / 2.0, &add(s, &k1, h / 2.0));
    let k3 = derivative(params, omega, t + h / 2.0, &add(s, &k2, h / 2.0));
    let k4 = derivative(params, omega, t + h, &add(s, &k3, h));
    let mut out = *s;
    for i in 0..STATE {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

const WARM_UP_S: f64 = 12.0;

/// Integrates the model and returns channels `Vx, Vy, Vz` (mV).
pub fn synth_vcg(params: &EcgModelParams, sample_rate_hz: f64, duration_s: f64) -> Result<MultiLeadRecord> {
    params.validate()?;
    if !(duration_s >= 2.0) {
        return Err(Error::InvalidParameter(format!("duration must be >= 2 s, got {duration_s}")));
    }
    if !(sample_rate_hz >= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be >= 100 Hz, got {sample_rate_hz}"
        )));
    }
    let omega = 2.0 * PI * params.heart_rate_bpm / 60.0;
    let h = 1.0 / sample_rate_hz;
    let narrowest = params.waves.iter().map(|w| w.width).fold(f64::INFINITY, f64::min);
    // The phase must not skip over the narrowest wave between samples.
    if omega * h >= narrowest {
        return Err(Error::IntegrationUnstable {
            reason: format!(
                "phase advances {:.4} rad per sample, wider than the narrowest wave ({narrowest})",
                omega * h
            ),
            suggested_sample_rate_hz: (2.0 * omega / narrowest).ceil(),
        });
    }

    let n = (duration_s * sample_rate_hz).round() as usize;
    // Channels relax with a 1 s time constant; whole periods of warm-up
    // put them on the limit cycle before the first output sample.
    let periods = (WARM_UP_S / params.period_s()).ceil();
    let warm_up = (periods * params.period_s() * sample_rate_hz).round() as usize;
    let mut columns: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    let mut state = [-1.0, 0.0, 0.0, 0.0, 0.0];
    for i in 0..warm_up + n {
        if i >= warm_up {
            for (c, col) in columns.iter_mut().enumerate() {
                col.push(state[2 + c] * params.channels[c].scale);
            }
        }
        let t = (i as f64 - warm_up as f64) * h;
        state = rk4_step(params, omega, t, h, &state);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationUnstable {
                reason: format!("state diverged at sample {}", i + 1),
                suggested_sample_rate_hz: 2.0 * sample_rate_hz,
            });
        }
    }
    let names: Vec<&str> = params.channels.iter().map(|c| c.name.as_str()).collect();
    MultiLeadRecord::from_columns(&names, columns, sample_rate_hz)
}

/// Realistic ECG noise classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Baseline wander.
    BW,
    /// Electrode movement.
    EM,
    /// Muscle artifact.
    MA,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::BW, NoiseKind::EM, NoiseKind::MA];

    /// SNR ladder (dB) used to stress the fusion, cleanest first.
    pub fn snr_ladder(self) -> [f64; 4] {
        match self {
            NoiseKind::BW => [12.0, 6.0, 0.0, -6.0],
            NoiseKind::EM => [6.0, 0.0, -6.0, -12.0],
            NoiseKind::MA => [12.0, 6.0, 0.0, -6.0],
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::BW => "BW",
            NoiseKind::EM => "EM",
            NoiseKind::MA => "MA",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BW" => Ok(NoiseKind::BW),
            "EM" => Ok(NoiseKind::EM),
            "MA" => Ok(NoiseKind::MA),
            other => Err(Error::InvalidParameter(format!("unknown noise kind {other}"))),
        }
    }
}

/// A noise source and where to cut the corrupting segment from it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub source: TimeSeries,
    pub target_snr_db: f64,
    /// First sample of the segment within `source`.
    pub offset: usize,
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// `10·log10(P_signal / P_noise)` with `P` the mean square.
pub fn measure_snr(signal: &TimeSeries, noise: &TimeSeries) -> Result<f64> {
    if signal.len() != noise.len() {
        return Err(Error::InvalidParameter(format!(
            "signal has {} samples, noise {}",
            signal.len(),
            noise.len()
        )));
    }
    let p_noise = noise.mean_square();
    if p_noise == 0.0 {
        return Err(Error::ZeroNoisePower);
    }
    let p_signal = signal.mean_square();
    if p_signal == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    Ok(10.0 * (p_signal / p_noise).log10())
}

/// Noise segment scaled so that it sits `target_db` below the signal.
pub fn scaled_noise(signal: &TimeSeries, noise: &[f64], target_db: f64) -> Result<Vec<f64>> {
    if noise.len() < signal.len() {
        return Err(Error::SegmentTooShort {
            needed: signal.len(),
            offset: 0,
            available: noise.len(),
        });
    }
    let segment = &noise[..signal.len()];
    let p_noise = mean_square(segment);
    if p_noise == 0.0 {
        return Err(Error::ZeroNoisePower);
    }
    let p_signal = signal.mean_square();
    if p_signal == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    let c = (p_signal / (p_noise * 10f64.powf(target_db / 10.0))).sqrt();
    Ok(segment.iter().map(|v| c * v).collect())
}

/// `signal + c·noise`, with `c` chosen so the added noise has the target SNR.
/// Uses the first `signal.len()` samples of `noise`.
pub fn add_noise_at_snr(signal: &TimeSeries, noise: &TimeSeries, target_db: f64) -> Result<TimeSeries> {
    let scaled = scaled_noise(signal, noise.samples(), target_db)?;
    let noisy = signal.samples().iter().zip(&scaled).map(|(s, n)| s + n).collect();
    TimeSeries::new(noisy, signal.sample_rate_hz(), signal.label())
}

/// Corrupts `signal` with the segment of `spec.source` starting at `spec.offset`.
pub fn apply_noise(signal: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    let source = spec.source.samples();
    if spec.offset + signal.len() > source.len() {
        return Err(Error::SegmentTooShort {
            needed: signal.len(),
            offset: spec.offset,
            available: source.len(),
        });
    }
    let scaled = scaled_noise(signal, &source[spec.offset..], spec.target_snr_db)?;
    let noisy = signal.samples().iter().zip(&scaled).map(|(s, n)| s + n).collect();
    TimeSeries::new(noisy, signal.sample_rate_hz(), signal.label())
}

/// Reads a noise record. Single-lead files are taken as is; otherwise the
/// lead named after `kind` is used. A `kind=` header tag that disagrees with
/// `kind` only produces a warning.
pub fn load_noise_record(path: &Path, kind: NoiseKind) -> Result<TimeSeries> {
    let (record, meta) = read_record_with_meta(path)?;
    if let Some(tag) = meta.get("kind") {
        if !tag.eq_ignore_ascii_case(&kind.to_string()) {
            log::warn!("{}: file is tagged kind={tag}, using it as {kind}", path.display());
        }
    }
    let kind_name = kind.to_string();
    let lead = if record.lead_count() == 1 {
        record.leads()[0].clone()
    } else {
        record
            .leads()
            .iter()
            .find(|l| l.label().eq_ignore_ascii_case(&kind_name))
            .cloned()
            .ok_or_else(|| Error::MissingLead(kind_name.clone()))?
    };
    Ok(lead.with_label(kind_name))
}

fn lowpass(values: &mut [f64], sample_rate_hz: f64, cutoff_hz: f64) {
    let k = 1.0 - (-2.0 * PI * cutoff_hz / sample_rate_hz).exp();
    let mut acc = 0.0;
    for v in values.iter_mut() {
        acc += k * (*v - acc);
        *v = acc;
    }
}

/// Synthetic stand-in for a recorded noise channel, deterministic in `seed`.
///
/// * BW: a few sub-hertz sinusoids plus a slowly drifting random walk.
/// * EM: sparse bursts of 1–15 Hz noise with decaying baseline jumps.
/// * MA: broadband 20 Hz+ noise under a slow amplitude envelope.
pub fn generate_noise(kind: NoiseKind, sample_rate_hz: f64, duration_s: f64, seed: u64) -> Result<TimeSeries> {
    if !(sample_rate_hz > 0.0 && duration_s > 0.0) {
        return Err(Error::InvalidParameter("noise needs a positive rate and duration".into()));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dt = 1.0 / sample_rate_hz;
    let mut out = vec![0.0; n];
    match kind {
        NoiseKind::BW => {
            let tones: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| {
                    let f = rng.random_range(0.05..0.5);
                    (f, 0.05 / f, rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let mut walk: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            lowpass(&mut walk, sample_rate_hz, 0.3);
            lowpass(&mut walk, sample_rate_hz, 0.3);
            for (i, o) in out.iter_mut().enumerate() {
                let t = i as f64 * dt;
                *o = tones.iter().map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum::<f64>() + 2.0 * walk[i];
            }
        }
        NoiseKind::EM => {
            let mut band: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            lowpass(&mut band, sample_rate_hz, 15.0);
            let mut slow = band.clone();
            lowpass(&mut slow, sample_rate_hz, 1.0);
            let band: Vec<f64> = band.iter().zip(&slow).map(|(b, s)| b - s).collect();
            let mut envelope = vec![0.0; n];
            let mut jump = 0.0;
            let mut i = 0;
            while i < n {
                // burst onsets roughly every 1.5 s
                if rng.random_bool((dt / 1.5).min(1.0)) {
                    let len = (rng.random_range(0.15..0.6) * sample_rate_hz) as usize;
                    let gain = rng.random_range(0.5..1.5);
                    for k in 0..len.min(n - i) {
                        let phase = PI * k as f64 / len as f64;
                        envelope[i + k] = gain * phase.sin();
                    }
                    jump += normal.sample(&mut rng) * 0.5;
                    i += len.max(1);
                } else {
                    i += 1;
                }
            }
            let decay = (-dt / 0.4).exp();
            let mut offsets = vec![0.0; n];
            let mut level = 0.0;
            let mut last_env = 0.0;
            for k in 0..n {
                if envelope[k] > 0.0 && last_env == 0.0 {
                    level += jump * rng.random_range(-1.0..1.0);
                }
                last_env = envelope[k];
                level *= decay;
                offsets[k] = level;
            }
            for k in 0..n {
                out[k] = 3.0 * envelope[k] * band[k] + offsets[k] + 0.05 * band[k];
            }
        }
        NoiseKind::MA => {
            let mut white: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let mut low = white.clone();
            lowpass(&mut low, sample_rate_hz, 20.0);
            white.iter_mut().zip(&low).for_each(|(w, l)| *w -= l);
            let mut env: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            lowpass(&mut env, sample_rate_hz, 0.5);
            lowpass(&mut env, sample_rate_hz, 0.5);
            let env_sd = crate::embedding::std_dev(&env).max(1e-12);
            for k in 0..n {
                out[k] = white[k] * (1.0 + 0.5 * (env[k] / env_sd).tanh());
            }
        }
    }
    TimeSeries::new(out, sample_rate_hz, kind.to_string())
}
