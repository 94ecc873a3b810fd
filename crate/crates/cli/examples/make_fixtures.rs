//! Regenerates the files under `data/`.
//!
//! ```text
//! cargo run -p ecgfuse --example make_fixtures -- data
//! ```

use std::path::PathBuf;

use ecgfuse_core::recordio::write_record_tagged;
use ecgfuse_core::synthgen::{generate_noise, synth_vcg, EcgModelParams, NoiseKind};
use ecgfuse_core::vcgprep::{forward_twelve_lead, DowerMatrix};
use ecgfuse_core::{MultiLeadRecord, TimeSeries};

const FS: f64 = 500.0;

fn rounded(record: &MultiLeadRecord) -> MultiLeadRecord {
    let leads = record
        .leads()
        .iter()
        .map(|l| {
            let v = l.samples().iter().map(|x| (x * 1e6).round() / 1e6).collect();
            TimeSeries::new(v, FS, l.label()).unwrap()
        })
        .collect();
    MultiLeadRecord::new(leads).unwrap()
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir).unwrap();

    let mut defaults = serde_json::to_value(EcgModelParams::default()).unwrap();
    defaults["note"] = "external-reference defaults from the dynamical ECG model literature, not measured values; version 1".into();
    std::fs::write(dir.join("ecg_model_defaults.json"), serde_json::to_string_pretty(&defaults).unwrap() + "\n").unwrap();

    let vcg = synth_vcg(&EcgModelParams::default().with_heart_rate(72.0), FS, 10.0).unwrap();
    let twelve = forward_twelve_lead(&vcg, &DowerMatrix::default()).unwrap();
    write_record_tagged(&rounded(&twelve), &dir.join("ecg12_sample.csv"), &[("source", "synthetic")]).unwrap();

    for (kind, seed) in [(NoiseKind::BW, 11), (NoiseKind::EM, 12), (NoiseKind::MA, 13)] {
        let noise = generate_noise(kind, FS, 20.0, seed).unwrap();
        let record = rounded(&MultiLeadRecord::new(vec![noise]).unwrap());
        let tag = kind.to_string();
        let name = format!("noise_{}.csv", tag.to_lowercase());
        write_record_tagged(&record, &dir.join(name), &[("kind", &tag)]).unwrap();
    }
}
