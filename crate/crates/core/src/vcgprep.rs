//! 12-lead preprocessing: constant-lead screening, reduction to the eight
//! independent leads, and the inverse Dower transform to a 3-lead VCG.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::TimeSeries;
use crate::{Error, Result};

/// Named, length-aligned set of leads sharing one sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLeadRecord {
    leads: Vec<TimeSeries>,
}

impl MultiLeadRecord {
    pub fn new(leads: Vec<TimeSeries>) -> Result<Self> {
        let first = leads
            .first()
            .ok_or_else(|| Error::InvalidRecord("record has no leads".into()))?;
        let (len, fs) = (first.len(), first.sample_rate_hz());
        let mut names = HashSet::new();
        for lead in &leads {
            if !names.insert(lead.label()) {
                return Err(Error::InvalidRecord(format!("duplicate lead name {}", lead.label())));
            }
            if lead.len() != len {
                return Err(Error::InvalidRecord(format!(
                    "lead {} has {} samples, expected {len}",
                    lead.label(),
                    lead.len()
                )));
            }
            if lead.sample_rate_hz() != fs {
                return Err(Error::InvalidRecord(format!(
                    "lead {} sampled at {} Hz, expected {fs}",
                    lead.label(),
                    lead.sample_rate_hz()
                )));
            }
        }
        Ok(Self { leads })
    }

    /// Builds a record from column data.
    pub fn from_columns(names: &[&str], columns: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidRecord(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let leads = names
            .iter()
            .zip(columns)
            .map(|(name, samples)| TimeSeries::new(samples, sample_rate_hz, *name))
            .collect::<Result<Vec<_>>>()?;
        Self::new(leads)
    }

    pub fn leads(&self) -> &[TimeSeries] {
        &self.leads
    }

    pub fn into_leads(self) -> Vec<TimeSeries> {
        self.leads
    }

    pub fn lead(&self, name: &str) -> Option<&TimeSeries> {
        self.leads.iter().find(|l| l.label() == name)
    }

    pub fn lead_mut(&mut self, name: &str) -> Option<&mut TimeSeries> {
        self.leads.iter_mut().find(|l| l.label() == name)
    }

    /// Replaces the lead with the same label.
    pub fn replace_lead(&mut self, lead: TimeSeries) -> Result<()> {
        if lead.len() != self.len() || lead.sample_rate_hz() != self.sample_rate_hz() {
            return Err(Error::InvalidRecord(format!(
                "replacement lead {} does not match the record's length or sample rate",
                lead.label()
            )));
        }
        let slot = self
            .lead_mut(lead.label())
            .ok_or_else(|| Error::MissingLead(lead.label().to_string()))?;
        *slot = lead;
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.leads.iter().map(TimeSeries::label).collect()
    }

    pub fn lead_count(&self) -> usize {
        self.leads.len()
    }

    /// Samples per lead.
    pub fn len(&self) -> usize {
        self.leads[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.leads[0].is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.leads[0].sample_rate_hz()
    }

    /// Sub-record covering samples `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InvalidRecord(format!(
                "slice {start}..{} exceeds record length {}",
                start + len,
                self.len()
            )));
        }
        let leads = self
            .leads
            .iter()
            .map(|l| TimeSeries::new(l.samples()[start..start + len].to_vec(), l.sample_rate_hz(), l.label()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(leads)
    }
}

/// Leads whose range `max − min` does not exceed `epsilon`. A non-empty
/// result marks the record as unusable for fusion.
pub fn detect_constant_leads(record: &MultiLeadRecord, epsilon: f64) -> Vec<String> {
    record
        .leads()
        .iter()
        .filter(|lead| {
            let (lo, hi) = lead
                .samples()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo <= epsilon
        })
        .map(|lead| lead.label().to_string())
        .collect()
}

pub const DEFAULT_CONSTANT_EPSILON: f64 = 1e-6;

/// The independent leads, in inverse-Dower column order.
pub const EIGHT_LEADS: [&str; 8] = ["V1", "V2", "V3", "V4", "V5", "V6", "I", "II"];

pub const VCG_LEADS: [&str; 3] = ["Vx", "Vy", "Vz"];

/// Keeps V1–V6, I and II (in that order) and drops the derived limb leads.
/// Lead names match case-insensitively.
pub fn select_eight_leads(record12: &MultiLeadRecord) -> Result<MultiLeadRecord> {
    let leads = EIGHT_LEADS
        .iter()
        .map(|&name| {
            record12
                .leads()
                .iter()
                .find(|l| l.label().eq_ignore_ascii_case(name))
                .map(|l| l.clone().with_label(name))
                .ok_or_else(|| Error::MissingLead(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    MultiLeadRecord::new(leads)
}

/// 3×8 map from the eight leads to `(Vx, Vy, Vz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DowerMatrix {
    pub rows: [[f64; 8]; 3],
    pub lead_order: Vec<String>,
}

impl Default for DowerMatrix {
    /// Published inverse Dower coefficients, columns `V1…V6, I, II`.
    fn default() -> Self {
        Self {
            rows: [
                [-0.172, -0.074, 0.122, 0.231, 0.239, 0.194, 0.156, -0.010],
                [0.057, -0.019, -0.106, -0.022, 0.041, 0.048, -0.227, 0.887],
                [-0.229, -0.310, -0.246, -0.063, 0.055, 0.108, 0.022, 0.102],
            ],
            lead_order: EIGHT_LEADS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl DowerMatrix {
    pub fn validate(&self) -> Result<()> {
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Dower matrix has non-finite entries".into()));
        }
        let unique: HashSet<&str> = self.lead_order.iter().map(String::as_str).collect();
        if self.lead_order.len() != 8 || unique.len() != 8 {
            return Err(Error::InvalidParameter(format!(
                "Dower lead order needs 8 unique names, got {:?}",
                self.lead_order
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let matrix: Self = serde_json::from_str(&text)?;
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.rows[0][j], self.rows[1][j], self.rows[2][j]]
    }
}

/// `VCG(t) = D_inv · ECG(t)` for every sample.
pub fn inverse_dower(record8: &MultiLeadRecord, matrix: &DowerMatrix) -> Result<MultiLeadRecord> {
    matrix.validate()?;
    let names = record8.names();
    if names.len() != 8 || names.iter().zip(&matrix.lead_order).any(|(a, b)| a != b) {
        return Err(Error::LeadOrderMismatch {
            expected: matrix.lead_order.clone(),
            found: names.iter().map(|s| s.to_string()).collect(),
        });
    }
    let len = record8.len();
    let mut out = vec![vec![0.0; len]; 3];
    for (row, channel) in matrix.rows.iter().zip(out.iter_mut()) {
        for (coef, lead) in row.iter().zip(record8.leads()) {
            for (o, v) in channel.iter_mut().zip(lead.samples()) {
                *o += coef * v;
            }
        }
    }
    MultiLeadRecord::from_columns(&VCG_LEADS, out, record8.sample_rate_hz())
}

pub const TWELVE_LEADS: [&str; 12] = ["I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"];

/// Minimum-norm 12-lead record whose inverse Dower transform is `vcg`.
/// The eight independent leads come from the pseudo-inverse `Dᵀ(DDᵀ)⁻¹`,
/// the other four from Einthoven and Goldberger relations.
pub fn forward_twelve_lead(vcg: &MultiLeadRecord, matrix: &DowerMatrix) -> Result<MultiLeadRecord> {
    matrix.validate()?;
    let names = vcg.names();
    if names != VCG_LEADS {
        return Err(Error::LeadOrderMismatch {
            expected: VCG_LEADS.iter().map(|s| s.to_string()).collect(),
            found: names.iter().map(|s| s.to_string()).collect(),
        });
    }
    let d = &matrix.rows;
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = (0..8).map(|k| d[i][k] * d[j][k]).sum();
        }
    }
    let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if det.abs() < 1e-12 {
        return Err(Error::InvalidParameter("Dower matrix is rank deficient".into()));
    }
    let mut g_inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            g_inv[i][j] = (g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0]) / det;
        }
    }
    // pinv[k][i] = Σ_j d[j][k] g_inv[j][i]
    let mut pinv = [[0.0; 3]; 8];
    for (k, row) in pinv.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|j| d[j][k] * g_inv[j][i]).sum();
        }
    }
    let len = vcg.len();
    let v: Vec<&[f64]> = vcg.leads().iter().map(TimeSeries::samples).collect();
    let eight: Vec<Vec<f64>> = pinv
        .iter()
        .map(|row| (0..len).map(|t| row[0] * v[0][t] + row[1] * v[1][t] + row[2] * v[2][t]).collect())
        .collect();
    let by_name = |name: &str| {
        let j = matrix.lead_order.iter().position(|n| n == name).expect("validated order");
        &eight[j]
    };
    let (lead_i, lead_ii) = (by_name("I"), by_name("II"));
    let limb = |f: fn(f64, f64) -> f64| -> Vec<f64> { lead_i.iter().zip(lead_ii).map(|(a, b)| f(*a, *b)).collect() };
    let columns: Vec<Vec<f64>> = TWELVE_LEADS
        .iter()
        .map(|&name| match name {
            "III" => limb(|i, ii| ii - i),
            "aVR" => limb(|i, ii| -(i + ii) / 2.0),
            "aVL" => limb(|i, ii| i - ii / 2.0),
            "aVF" => limb(|i, ii| ii - i / 2.0),
            _ => by_name(name).clone(),
        })
        .collect();
    MultiLeadRecord::from_columns(&TWELVE_LEADS, columns, vcg.sample_rate_hz())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(names: &[&str], len: usize, f: impl Fn(usize, usize) -> f64) -> MultiLeadRecord {
        let columns = (0..names.len()).map(|j| (0..len).map(|t| f(j, t)).collect()).collect();
        MultiLeadRecord::from_columns(names, columns, 500.0).unwrap()
    }

    const TWELVE: [&str; 12] = TWELVE_LEADS;

    #[test]
    fn constant_screening() {
        let r = record(&["a", "b", "c"], 100, |j, t| match j {
            0 => 0.0,
            1 => (t as f64 * 0.1).sin(),
            _ => if t == 50 { 1.0 } else { 0.0 },
        });
        assert_eq!(detect_constant_leads(&r, 1e-6), vec!["a".to_string()]);
        assert_eq!(detect_constant_leads(&r, 1.0), vec!["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn eight_lead_selection() {
        let r = record(&TWELVE, 10, |j, t| (j * 100 + t) as f64);
        let eight = select_eight_leads(&r).unwrap();
        assert_eq!(eight.names(), EIGHT_LEADS.to_vec());
        assert_eq!(eight.lead("V1").unwrap().samples()[0], 600.0);
        assert_eq!(select_eight_leads(&eight).unwrap(), eight);

        let missing: Vec<&str> = TWELVE.iter().copied().filter(|n| *n != "V3").collect();
        let r = record(&missing, 10, |_, t| t as f64);
        assert!(matches!(select_eight_leads(&r), Err(Error::MissingLead(l)) if l == "V3"));
    }

    #[test]
    fn dower_zero_and_impulse() {
        let zeros = record(&EIGHT_LEADS, 5, |_, _| 0.0);
        let vcg = inverse_dower(&zeros, &DowerMatrix::default()).unwrap();
        assert_eq!(vcg.names(), VCG_LEADS.to_vec());
        assert!(vcg.leads().iter().all(|l| l.samples().iter().all(|v| *v == 0.0)));

        let impulse = record(&EIGHT_LEADS, 5, |j, t| if j == 0 && t == 2 { 1.0 } else { 0.0 });
        let vcg = inverse_dower(&impulse, &DowerMatrix::default()).unwrap();
        let got: Vec<f64> = vcg.leads().iter().map(|l| l.samples()[2]).collect();
        assert_eq!(got, vec![-0.172, 0.057, -0.229]);
    }

    #[test]
    fn dower_requires_matching_order() {
        let r = record(&TWELVE[..8], 5, |_, _| 1.0);
        assert!(matches!(
            inverse_dower(&r, &DowerMatrix::default()),
            Err(Error::LeadOrderMismatch { .. })
        ));
    }

    #[test]
    fn record_invariants() {
        let a = TimeSeries::new(vec![1.0; 4], 500.0, "a").unwrap();
        let short = TimeSeries::new(vec![1.0; 3], 500.0, "b").unwrap();
        let other_fs = TimeSeries::new(vec![1.0; 4], 250.0, "b").unwrap();
        assert!(MultiLeadRecord::new(vec![a.clone(), short]).is_err());
        assert!(MultiLeadRecord::new(vec![a.clone(), other_fs]).is_err());
        assert!(MultiLeadRecord::new(vec![a.clone(), a]).is_err());
        assert!(MultiLeadRecord::new(vec![]).is_err());
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        let vcg = record(&VCG_LEADS, 50, |j, t| ((j + 1) as f64 * t as f64 * 0.07).sin());
        let twelve = forward_twelve_lead(&vcg, &DowerMatrix::default()).unwrap();
        assert_eq!(twelve.names(), TWELVE_LEADS.to_vec());
        let i = twelve.lead("I").unwrap().samples();
        let ii = twelve.lead("II").unwrap().samples();
        let iii = twelve.lead("III").unwrap().samples();
        assert!((0..50).all(|t| (iii[t] - (ii[t] - i[t])).abs() < 1e-15));
        let back = inverse_dower(&select_eight_leads(&twelve).unwrap(), &DowerMatrix::default()).unwrap();
        for (a, b) in back.leads().iter().zip(vcg.leads()) {
            for (x, y) in a.samples().iter().zip(b.samples()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
