//! Record-level pipeline: screening, parameter estimation, embedding and
//! fusion of every lead of a record.

use serde::{Deserialize, Serialize};

use crate::embedding::{
    delay_embed, estimate_delay_ad_with, estimate_dimension_fnn_with, select_joint_params, AdConfig,
    EmbeddingParams, FnnConfig, Trajectory,
};
use crate::nfda::{disorder_metric, fuse_detailed, FusionConfig, FusionReport};
use crate::vcgprep::{detect_constant_leads, inverse_dower, select_eight_leads, DowerMatrix, MultiLeadRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub ad: AdConfig,
    pub fnn: FnnConfig,
}

/// Embedding estimate of one lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadEstimate {
    pub lead: String,
    pub params: EmbeddingParams,
    pub fnn_fractions: Vec<f64>,
    pub fnn_converged: bool,
}

/// Per-lead `(m, τ)` and their joint `(max m, min τ)`.
pub fn estimate_record_params(
    record: &MultiLeadRecord,
    config: &EstimationConfig,
) -> Result<(EmbeddingParams, Vec<LeadEstimate>)> {
    let estimates = record
        .leads()
        .iter()
        .map(|lead| {
            let tau = estimate_delay_ad_with(lead, &config.ad)?;
            let fnn = estimate_dimension_fnn_with(lead, tau, &config.fnn)?;
            Ok(LeadEstimate {
                lead: lead.label().to_string(),
                params: EmbeddingParams::new(fnn.dimension, tau)?,
                fnn_fractions: fnn.fractions,
                fnn_converged: fnn.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_lead: Vec<EmbeddingParams> = estimates.iter().map(|e| e.params).collect();
    Ok((select_joint_params(&per_lead)?, estimates))
}

pub fn embed_record(record: &MultiLeadRecord, params: EmbeddingParams) -> Result<Vec<Trajectory>> {
    record.leads().iter().map(|lead| delay_embed(lead, params)).collect()
}

/// Fails with [`Error::UnacceptableRecord`] when any lead is flat.
pub fn screen_constant_leads(record: &MultiLeadRecord, epsilon: f64) -> Result<()> {
    let flagged = detect_constant_leads(record, epsilon);
    if flagged.is_empty() {
        Ok(())
    } else {
        Err(Error::UnacceptableRecord(flagged))
    }
}

/// Constant-lead screening, eight-lead selection and inverse Dower.
pub fn twelve_lead_to_vcg(record12: &MultiLeadRecord, epsilon: f64, matrix: &DowerMatrix) -> Result<MultiLeadRecord> {
    screen_constant_leads(record12, epsilon)?;
    let eight = select_eight_leads(record12)?;
    inverse_dower(&eight, matrix)
}

/// Summary numbers of one fusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMetrics {
    pub m: usize,
    pub tau: usize,
    pub states: usize,
    pub fused_disorder: f64,
    pub lead_disorder: Vec<(String, f64)>,
    pub mean_weights: Vec<(String, f64)>,
    pub degenerate_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub params: EmbeddingParams,
    /// Present when the parameters were estimated rather than given.
    pub estimates: Option<Vec<LeadEstimate>>,
    pub leads: Vec<Trajectory>,
    pub report: FusionReport,
    pub metrics: FusionMetrics,
}

/// Embeds every lead with shared parameters (estimated when `params` is
/// `None`) and fuses them.
pub fn fuse_record(
    record: &MultiLeadRecord,
    params: Option<EmbeddingParams>,
    estimation: &EstimationConfig,
    config: &FusionConfig,
) -> Result<FusionOutcome> {
    let (params, estimates) = match params {
        Some(p) => (p, None),
        None => {
            let (p, e) = estimate_record_params(record, estimation)?;
            (p, Some(e))
        }
    };
    let leads = embed_record(record, params)?;
    let report = fuse_detailed(&leads, config)?;
    let names = record.names();
    let lead_disorder = names
        .iter()
        .zip(&leads)
        .map(|(n, t)| Ok((n.to_string(), disorder_metric(t)?)))
        .collect::<Result<Vec<_>>>()?;
    let mean_weights = names
        .iter()
        .map(|n| n.to_string())
        .zip(report.mean_weights())
        .collect();
    let metrics = FusionMetrics {
        m: params.m,
        tau: params.tau,
        states: report.trajectory.len(),
        fused_disorder: disorder_metric(&report.trajectory)?,
        lead_disorder,
        mean_weights,
        degenerate_steps: report.degenerate_steps(),
    };
    Ok(FusionOutcome {
        params,
        estimates,
        leads,
        report,
        metrics,
    })
}
