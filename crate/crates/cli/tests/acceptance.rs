//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! ```text
//! cargo test -p ecgfuse --test acceptance
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ecgfuse_core::embedding::{average_displacement, estimate_delay_ad, estimate_dimension_fnn};
use ecgfuse_core::fis::{build_fis_alpha, build_fis_d, FuzzySystem};
use ecgfuse_core::lwlpa::{one_step_forecast, weighted_affine_fit, LwlpaConfig};
use ecgfuse_core::nfda::softmax_weights;
use ecgfuse_core::pipeline::{estimate_record_params, fuse_record, EstimationConfig};
use ecgfuse_core::synthgen::{apply_noise, load_noise_record, measure_snr, synth_vcg, EcgModelParams, NoiseKind, NoiseSpec};
use ecgfuse_core::vcgprep::{inverse_dower, DowerMatrix, EIGHT_LEADS};
use ecgfuse_core::{fuse, EmbeddingParams, FusionConfig, MultiLeadRecord, TimeSeries, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn trajectory(states: Vec<Vec<f64>>) -> Trajectory {
    let m = states[0].len();
    Trajectory::new(states, EmbeddingParams::new(m, 1).unwrap(), "t", 1.0).unwrap()
}

// Rule tables as printed: rows are the second input, columns the first.
const TABLE_D: [[&str; 3]; 3] = [["S", "SR", "M"], ["SR", "M", "BR"], ["M", "BR", "B"]];
const TABLE_ALPHA: [[&str; 5]; 3] = [
    ["VB", "B", "BR", "MR", "M"],
    ["B", "BR", "MR", "M", "SR"],
    ["BR", "MR", "M", "SR", "S"],
];

fn check_table<const C: usize>(fis: &FuzzySystem, cols: &[&str], rows: &[&str], table: &[[&str; C]]) -> Result<usize, String> {
    let peak = |var: &ecgfuse_core::fis::FuzzyVariable, label: &str| {
        var.sets.iter().find(|s| s.label == label).map(|s| s.peak).unwrap()
    };
    let centers = fis.output_centers();
    let mut cells = 0;
    for (r, row) in rows.iter().enumerate() {
        for (c, col) in cols.iter().enumerate() {
            let want = table[r][c];
            let got = fis.consequent(col, row);
            ensure(got == Some(want), || format!("{}: ({col}, {row}) -> {got:?}, table says {want}", fis.name()))?;
            let x = peak(fis.input1(), col);
            let y = peak(fis.input2(), row);
            let center = centers.iter().find(|(l, _)| *l == want).unwrap().1;
            let v = fis.evaluate(x, y).map_err(|e| e.to_string())?;
            ensure((v - center).abs() <= 1e-12, || format!("{}: corner ({x}, {y}) gave {v}, want {center}", fis.name()))?;
            cells += 1;
        }
    }
    ensure(fis.rule_count() == cells, || format!("{} has {} rules", fis.name(), fis.rule_count()))?;
    Ok(cells)
}

fn c1_rule_tables() -> Outcome {
    let t = Instant::now();
    let d = check_table(&build_fis_d(), &["S", "M", "B"], &["S", "M", "B"], &TABLE_D)?;
    let a = check_table(&build_fis_alpha(), &["NB", "NM", "Z", "PM", "PB"], &["S", "M", "B"], &TABLE_ALPHA)?;
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{d} + {a} cells, corners exact, {elapsed:.1?}"))
}

fn c2_monotone_grids() -> Outcome {
    let unit: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let signed: Vec<f64> = (0..=100).map(|i| -1.0 + i as f64 / 50.0).collect();
    let mut worst: f64 = 0.0;
    for (fis, xs, sign) in [(build_fis_d(), &unit, 1.0), (build_fis_alpha(), &signed, -1.0)] {
        let z: Vec<Vec<f64>> = xs.iter().map(|&x| unit.iter().map(|&y| fis.evaluate(x, y).unwrap()).collect()).collect();
        for i in 0..=100 {
            for j in 0..100 {
                // violation = step against the expected direction
                worst = worst.max(-sign * (z[i][j + 1] - z[i][j]));
                worst = worst.max(-sign * (z[j + 1][i] - z[j][i]));
            }
        }
    }
    ensure(worst <= 1e-9, || format!("largest violation {worst:e}"))?;
    Ok(format!("2 x 101x101 grids, largest violation {worst:.1e}"))
}

fn objective(xs: &[Vec<f64>], ys: &[Vec<f64>], w: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(w)
        .map(|((x, y), w)| w * x.iter().zip(y).map(|(x, y)| (y - a - b * x).powi(2)).sum::<f64>())
        .sum()
}

/// Coarse-to-fine grid search; the box grows while the best point is on its
/// edge.
fn grid_min(xs: &[Vec<f64>], ys: &[Vec<f64>], w: &[f64]) -> f64 {
    let (mut ca, mut cb, mut half) = (0.0, 0.0, 10.0);
    let mut best = f64::INFINITY;
    for _ in 0..200 {
        let step = half / 20.0;
        let (mut bi, mut bj) = (0i32, 0i32);
        for i in -20..=20 {
            for j in -20..=20 {
                let v = objective(xs, ys, w, ca + i as f64 * step, cb + j as f64 * step);
                if v < best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        ca += bi as f64 * step;
        cb += bj as f64 * step;
        half = if bi.abs() == 20 || bj.abs() == 20 { half * 2.0 } else { half / 2.0 };
        if half < 1e-9 {
            break;
        }
    }
    best
}

fn c3_fit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap: f64 = 0.0;
    let mut worst_signed = f64::NEG_INFINITY;
    for k in 0..1000 {
        let n = rng.random_range(2..7);
        let m = rng.random_range(1..5);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let fit = weighted_affine_fit(&xs, &ys, &w).map_err(|e| e.to_string())?;
        let grid = grid_min(&xs, &ys, &w);
        let gap = fit.residual - grid;
        ensure(gap.abs() <= 1e-3, || format!("instance {k}: fit {} vs grid {grid}", fit.residual))?;
        worst_gap = worst_gap.max(gap.abs());
        worst_signed = worst_signed.max(gap);
    }
    let mut worst_rec: f64 = 0.0;
    for _ in 0..200 {
        let (a0, b0) = (rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0));
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-4.0..4.0)).collect()).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| a0 + b0 * v).collect()).collect();
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
        let fit = weighted_affine_fit(&xs, &ys, &w).map_err(|e| e.to_string())?;
        worst_rec = worst_rec.max((fit.a - a0).abs()).max((fit.b - b0).abs());
    }
    ensure(worst_rec <= 1e-9, || format!("exact recovery off by {worst_rec:e}"))?;
    Ok(format!(
        "1000 instances, max |gap| {worst_gap:.1e} (fit - grid at most {worst_signed:.1e}); recovery error {worst_rec:.1e}"
    ))
}

fn c4_softmax() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for k in 0..10_000 {
        let len = rng.random_range(2..9);
        let scores: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..4.0)).collect();
        let gamma = rng.random_range(0.01..10.0);
        let w = softmax_weights(&scores, gamma).map_err(|e| e.to_string())?.per_lead;
        let sum: f64 = w.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-12, || format!("case {k}: sum {sum}"))?;
        ensure(w.iter().all(|v| *v > 0.0), || format!("case {k}: non-positive weight"))?;
        let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
        ensure(argmax(&w) == argmax(&scores), || format!("case {k}: argmax moved"))?;
        let mut perm: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let wp = softmax_weights(&permuted, gamma).map_err(|e| e.to_string())?.per_lead;
        for (j, &i) in perm.iter().enumerate() {
            ensure((wp[j] - w[i]).abs() <= 1e-15, || format!("case {k}: not permutation-equivariant"))?;
        }
    }
    Ok("10000 fuzz cases".into())
}

fn c5_affine_fusion() -> Outcome {
    let (a0, b0) = (0.03, 0.985);
    let orbit = |x0: Vec<f64>| {
        let mut out = vec![x0];
        for _ in 1..101 {
            let next = out.last().unwrap().iter().map(|v| a0 + b0 * v).collect();
            out.push(next);
        }
        trajectory(out)
    };
    let leads = vec![orbit(vec![1.0, -2.0, 0.5]), orbit(vec![3.0, 0.5, -1.5]), orbit(vec![-1.0, 4.0, 2.0])];
    let fused = fuse(&leads, &FusionConfig::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in 0..100 {
        for (next, now) in fused.state(p + 1).iter().zip(fused.state(p)) {
            worst = worst.max((next - (a0 + b0 * now)).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("recursion error {worst:e}"))?;
    Ok(format!("100 steps, max recursion error {worst:.1e}"))
}

fn clean_vcg() -> MultiLeadRecord {
    synth_vcg(&EcgModelParams::default(), 500.0, 10.0).unwrap()
}

fn corrupted(rec: &MultiLeadRecord, source: &TimeSeries, kind: NoiseKind, db: f64) -> MultiLeadRecord {
    let mut out = rec.clone();
    let vx = rec.lead("Vx").unwrap();
    let spec = NoiseSpec { kind, source: source.clone(), target_snr_db: db, offset: 0 };
    out.replace_lead(apply_noise(vx, &spec).unwrap()).unwrap();
    out
}

fn noise_source(kind: NoiseKind) -> Result<TimeSeries, String> {
    load_noise_record(&data(&format!("noise_{}.csv", kind.to_string().to_lowercase())), kind).map_err(|e| e.to_string())
}

fn c6_snr_ladder() -> Outcome {
    let rec = clean_vcg();
    let vx = rec.lead("Vx").unwrap();
    let mut worst: f64 = 0.0;
    for kind in NoiseKind::ALL {
        let source = noise_source(kind)?;
        for db in kind.snr_ladder() {
            let noisy = corrupted(&rec, &source, kind, db);
            let added: Vec<f64> = noisy.lead("Vx").unwrap().samples().iter().zip(vx.samples()).map(|(a, b)| a - b).collect();
            let got = measure_snr(vx, &TimeSeries::new(added, 500.0, "n").unwrap()).map_err(|e| e.to_string())?;
            ensure((got - db).abs() <= 0.01, || format!("{kind} {db} dB measured {got}"))?;
            worst = worst.max((got - db).abs());
        }
    }
    Ok(format!("12 levels, max error {worst:.1e} dB"))
}

fn c7_snr_monotonicity() -> Outcome {
    let t = Instant::now();
    let rec = clean_vcg();
    let estimation = EstimationConfig::default();
    let (params, _) = estimate_record_params(&rec, &estimation).map_err(|e| e.to_string())?;
    let config = FusionConfig::default();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for kind in NoiseKind::ALL {
        let source = noise_source(kind)?;
        let mut metrics = Vec::new();
        for db in kind.snr_ladder() {
            let out = fuse_record(&corrupted(&rec, &source, kind, db), Some(params), &estimation, &config)
                .map_err(|e| e.to_string())?;
            metrics.push(out.metrics.fused_disorder);
        }
        let monotone = metrics.windows(2).all(|w| w[1] >= w[0]);
        let shown: Vec<String> = metrics.iter().map(|m| format!("{m:.4}")).collect();
        lines.push(format!("{kind} {}", shown.join(" ")));
        if !monotone {
            failures.push(kind.to_string());
        }
    }
    let elapsed = t.elapsed();
    let detail = format!("m={} tau={}; {}; {elapsed:.1?}", params.m, params.tau, lines.join("; "));
    ensure(elapsed < Duration::from_secs(30), || format!("too slow: {detail}"))?;
    ensure(failures.is_empty(), || format!("not monotone for {}: {detail}", failures.join(", ")))?;
    Ok(detail)
}

fn c8_dower() -> Outcome {
    let d = DowerMatrix::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..100).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let rec = MultiLeadRecord::from_columns(&EIGHT_LEADS, cols.clone(), 500.0).unwrap();
        let vcg = inverse_dower(&rec, &d).map_err(|e| e.to_string())?;
        for r in 0..3 {
            for t in 0..100 {
                let mut want = 0.0;
                for (j, col) in cols.iter().enumerate() {
                    want += d.rows[r][j] * col[t];
                }
                worst = worst.max((vcg.leads()[r].samples()[t] - want).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("oracle error {worst:e}"))?;
    for j in 0..8 {
        let cols = (0..8).map(|k| vec![if k == j { 1.0 } else { 0.0 }, 0.0]).collect();
        let rec = MultiLeadRecord::from_columns(&EIGHT_LEADS, cols, 500.0).unwrap();
        let vcg = inverse_dower(&rec, &d).map_err(|e| e.to_string())?;
        let got: Vec<f64> = vcg.leads().iter().map(|l| l.samples()[0]).collect();
        ensure(got == d.column(j), || format!("impulse {} gave {got:?}", EIGHT_LEADS[j]))?;
    }
    Ok(format!("50 random records, max error {worst:.1e}; 8 impulse columns verbatim"))
}

fn c9_lwlpa() -> Outcome {
    let mut x = 0.3;
    let samples: Vec<f64> = (0..1000)
        .map(|_| {
            x = 3.9 * x * (1.0 - x);
            x
        })
        .collect();
    let series = TimeSeries::new(samples, 1.0, "logistic").unwrap();
    let config = LwlpaConfig { neighbors: Some(4), ..LwlpaConfig::default() };
    let f = one_step_forecast(&series, EmbeddingParams::new(1, 1).unwrap(), 200, &config).map_err(|e| e.to_string())?;
    let (ours, naive) = (f.rmse(), f.persistence_rmse());
    ensure(ours < naive, || format!("rmse {ours} vs persistence {naive}"))?;
    Ok(format!("rmse {ours:.2e} vs persistence {naive:.3}"))
}

fn lorenz_x(len: usize) -> TimeSeries {
    let f = |s: [f64; 3]| [10.0 * (s[1] - s[0]), s[0] * (28.0 - s[2]) - s[1], s[0] * s[1] - (8.0 / 3.0) * s[2]];
    let dt = 0.01;
    let mut s = [1.0, 1.0, 1.0];
    let mut out = Vec::with_capacity(len);
    for i in 0..1000 + len {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1], s[2] + 0.5 * dt * k1[2]]);
        let k3 = f([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1], s[2] + 0.5 * dt * k2[2]]);
        let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2]]);
        for j in 0..3 {
            s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if i >= 1000 {
            out.push(s[0]);
        }
    }
    TimeSeries::new(out, 100.0, "lorenz_x").unwrap()
}

fn c10_estimators() -> Outcome {
    // Frozen from a separate numpy brute-force run.
    const SINE_FNN: [f64; 2] = [0.2799188640973631, 0.0];
    const LORENZ_FNN: [f64; 3] = [0.9734673366834171, 0.1713131313131313, 0.0028426395939086294];
    const SINE_S28: f64 = 1.7121776453311748;
    const LORENZ_S25: f64 = 11.612770001029306;

    let sine: Vec<f64> = (0..2000).map(|i| (2.0 * std::f64::consts::PI * (i as f64 / 100.0)).sin()).collect();
    let sine = TimeSeries::new(sine, 100.0, "sine").unwrap();
    let tau = estimate_delay_ad(&sine, 50, 0.1).map_err(|e| e.to_string())?;
    ensure((20..=30).contains(&tau), || format!("sine tau {tau} outside 25 +/- 20%"))?;
    ensure(tau == 28, || format!("sine tau {tau}, oracle 28"))?;
    let est = estimate_dimension_fnn(&sine, tau, 10, 15.0, 2.0, 0.01).map_err(|e| e.to_string())?;
    ensure(est.dimension == 2, || format!("sine m {}", est.dimension))?;
    ensure(est.fractions.len() == 2 && est.fractions.iter().zip(SINE_FNN).all(|(a, b)| (a - b).abs() < 1e-12), || {
        format!("sine fractions {:?}", est.fractions)
    })?;
    ensure((average_displacement(sine.samples(), 3, 28) - SINE_S28).abs() < 1e-12, || "sine S(28)".into())?;

    let lorenz = lorenz_x(5000);
    let lt = estimate_delay_ad(&lorenz, 50, 0.1).map_err(|e| e.to_string())?;
    ensure(lt == 25, || format!("lorenz tau {lt}, oracle 25"))?;
    let le = estimate_dimension_fnn(&lorenz, lt, 10, 15.0, 2.0, 0.01).map_err(|e| e.to_string())?;
    ensure(le.dimension == 3, || format!("lorenz m {}, oracle 3", le.dimension))?;
    ensure(le.fractions.iter().zip(LORENZ_FNN).all(|(a, b)| (a - b).abs() < 1e-12), || {
        format!("lorenz fractions {:?}", le.fractions)
    })?;
    ensure((average_displacement(lorenz.samples(), 3, 25) - LORENZ_S25).abs() < 1e-9, || "lorenz S(25)".into())?;
    Ok(format!("sine m=2 tau={tau}; lorenz m=3 tau={lt}; fractions match oracle"))
}

fn c11_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("fused.csv");
    let metrics = dir.path().join("metrics.json");
    let status = Command::new(env!("CARGO_BIN_EXE_ecgfuse"))
        .args(["fuse", "--input"])
        .arg(data("ecg12_sample.csv"))
        .arg("--out")
        .arg(&out)
        .arg("--metrics")
        .arg(&metrics)
        .env_remove("ECGFUSE_FIS_CONFIG")
        .env("RUST_LOG", "error")
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.code() == Some(0), || format!("exit status {status}"))?;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let fused = report["fused_disorder"].as_f64().unwrap_or(f64::NAN);
    ensure(fused.is_finite(), || format!("fused_disorder {fused}"))?;
    let leads = report["lead_disorder"].as_array().map_or(0, Vec::len);
    ensure(leads == 3, || format!("{leads} lead metrics"))?;
    let traj = ecgfuse_core::recordio::read_trajectory(&out).map_err(|e| e.to_string())?;
    ensure(traj.states().iter().flatten().all(|v| v.is_finite()), || "non-finite fused state".into())?;
    Ok(format!("exit 0, {} fused states, disorder {fused:.4}", traj.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("fuzzy rule tables", c1_rule_tables),
        ("FIS monotonicity grids", c2_monotone_grids),
        ("weighted-fit oracle", c3_fit_oracle),
        ("softmax weight contract", c4_softmax),
        ("affine consistency of fusion", c5_affine_fusion),
        ("SNR round trip", c6_snr_ladder),
        ("disorder rises as SNR falls", c7_snr_monotonicity),
        ("inverse Dower oracle", c8_dower),
        ("LWLPA beats persistence", c9_lwlpa),
        ("embedding estimators", c10_estimators),
        ("end-to-end CLI pipeline", c11_pipeline),
    ];
    let mut failed = 0;
    let mut err = std::io::stderr();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let _ = writeln!(err, "criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    let _ = writeln!(err, "{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
