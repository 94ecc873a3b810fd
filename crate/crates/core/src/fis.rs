//! Two-input, one-output fuzzy inference with triangular membership
//! functions, min (or product) conjunction and center-average
//! defuzzification over the consequent set peaks.
//!
//! Two systems drive the lead weighting: one rating a trajectory step by its
//! length `D` and length change `D_r`, one by its turning cosine `α` and
//! cosine change `α_r`. Both default to uniform partitions; any system can be
//! replaced through a JSON file (see [`FisConfigFile`]).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Triangle `(left, peak, right)`. A set with `left == peak` or
/// `peak == right` is a shoulder that stays at 1 beyond its peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularSet {
    pub label: String,
    pub left: f64,
    pub peak: f64,
    pub right: f64,
}

impl TriangularSet {
    pub fn new(label: impl Into<String>, left: f64, peak: f64, right: f64) -> Result<Self> {
        let label = label.into();
        if ![left, peak, right].iter().all(|v| v.is_finite()) || !(left <= peak && peak <= right) || left >= right {
            return Err(Error::InvalidFuzzySystem(format!(
                "set {label}: need left <= peak <= right and left < right, got ({left}, {peak}, {right})"
            )));
        }
        Ok(Self {
            label,
            left,
            peak,
            right,
        })
    }

    pub fn membership(&self, x: f64) -> f64 {
        membership(self, x)
    }
}

/// Piecewise-linear hat value of `x` in `set`.
pub fn membership(set: &TriangularSet, x: f64) -> f64 {
    if x == set.peak {
        1.0
    } else if x < set.peak {
        if set.left == set.peak {
            1.0
        } else if x <= set.left {
            0.0
        } else {
            (x - set.left) / (set.peak - set.left)
        }
    } else if set.right == set.peak {
        1.0
    } else if x >= set.right {
        0.0
    } else {
        (set.right - x) / (set.right - set.peak)
    }
}

/// A linguistic variable: a closed universe partitioned into fuzzy sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    pub universe: [f64; 2],
    pub sets: Vec<TriangularSet>,
}

impl FuzzyVariable {
    /// Uniform partition: peaks equally spaced over the universe, each peak
    /// sitting on its neighbours' zeros, shoulders at both edges.
    pub fn uniform(name: impl Into<String>, universe: [f64; 2], labels: &[&str]) -> Self {
        let [lo, hi] = universe;
        let n = labels.len();
        assert!(n >= 2 && lo < hi, "uniform partition needs >= 2 sets over a proper interval");
        let step = (hi - lo) / (n - 1) as f64;
        let peak = |i: usize| if i == n - 1 { hi } else { lo + step * i as f64 };
        let sets = labels
            .iter()
            .enumerate()
            .map(|(i, label)| TriangularSet {
                label: label.to_string(),
                left: if i == 0 { lo } else { peak(i - 1) },
                peak: peak(i),
                right: if i == n - 1 { hi } else { peak(i + 1) },
            })
            .collect();
        Self {
            name: name.into(),
            universe,
            sets,
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.universe[0], self.universe[1])
    }

    pub fn memberships(&self, x: f64) -> Vec<f64> {
        let x = self.clamp(x);
        self.sets.iter().map(|s| membership(s, x)).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.sets.iter().position(|s| s.label == label)
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidFuzzySystem(format!(
                "{}: universe [{lo}, {hi}] is not a proper interval",
                self.name
            )));
        }
        if self.sets.is_empty() {
            return Err(Error::InvalidFuzzySystem(format!("{}: no fuzzy sets", self.name)));
        }
        let mut seen = HashSet::new();
        for set in &self.sets {
            TriangularSet::new(set.label.clone(), set.left, set.peak, set.right)?;
            if !seen.insert(set.label.as_str()) {
                return Err(Error::InvalidFuzzySystem(format!(
                    "{}: duplicate set label {}",
                    self.name, set.label
                )));
            }
        }
        // Total membership is linear between consecutive breakpoints, so it
        // is positive everywhere iff it is positive at every breakpoint.
        let mut points = vec![lo, hi];
        for set in &self.sets {
            points.extend([set.left, set.peak, set.right].into_iter().filter(|p| (lo..=hi).contains(p)));
        }
        for p in points {
            let total: f64 = self.sets.iter().map(|s| membership(s, p)).sum();
            if total <= 0.0 {
                return Err(Error::InvalidFuzzySystem(format!(
                    "{}: no set covers {p}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Rule conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AndOperator {
    #[default]
    Min,
    Product,
}

impl AndOperator {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            AndOperator::Min => a.min(b),
            AndOperator::Product => a * b,
        }
    }
}

/// One rule `IF in1 IS a AND in2 IS b THEN out IS c`, by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule(pub String, pub String, pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FisSpec {
    name: String,
    inputs: [FuzzyVariable; 2],
    output: FuzzyVariable,
    rules: Vec<Rule>,
    #[serde(default)]
    and: AndOperator,
}

/// Immutable two-input fuzzy system with a total rule table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FisSpec", into = "FisSpec")]
pub struct FuzzySystem {
    name: String,
    input1: FuzzyVariable,
    input2: FuzzyVariable,
    output: FuzzyVariable,
    // consequents[i][j]: output set index for input1 set i, input2 set j
    consequents: Vec<Vec<usize>>,
    and: AndOperator,
}

impl TryFrom<FisSpec> for FuzzySystem {
    type Error = Error;

    fn try_from(spec: FisSpec) -> Result<Self> {
        let [input1, input2] = spec.inputs;
        FuzzySystem::new(spec.name, input1, input2, spec.output, &spec.rules, spec.and)
    }
}

impl From<FuzzySystem> for FisSpec {
    fn from(system: FuzzySystem) -> Self {
        let rules = system.rules();
        FisSpec {
            name: system.name,
            inputs: [system.input1, system.input2],
            output: system.output,
            rules,
            and: system.and,
        }
    }
}

impl FuzzySystem {
    pub fn new(
        name: impl Into<String>,
        input1: FuzzyVariable,
        input2: FuzzyVariable,
        output: FuzzyVariable,
        rules: &[Rule],
        and: AndOperator,
    ) -> Result<Self> {
        let name = name.into();
        input1.validate()?;
        input2.validate()?;
        output.validate()?;
        let [out_lo, out_hi] = output.universe;
        for set in &output.sets {
            if !(out_lo..=out_hi).contains(&set.peak) {
                return Err(Error::InvalidFuzzySystem(format!(
                    "{name}: output center {} = {} lies outside [{out_lo}, {out_hi}]",
                    set.label, set.peak
                )));
            }
        }

        let lookup = |var: &FuzzyVariable, label: &str| {
            var.index_of(label).ok_or_else(|| {
                Error::InvalidFuzzySystem(format!("{name}: unknown label {label} for {}", var.name))
            })
        };
        let mut consequents = vec![vec![None; input2.sets.len()]; input1.sets.len()];
        for Rule(a, b, c) in rules {
            let (i, j, k) = (lookup(&input1, a)?, lookup(&input2, b)?, lookup(&output, c)?);
            if consequents[i][j].replace(k).is_some() {
                return Err(Error::InvalidFuzzySystem(format!(
                    "{name}: more than one rule for ({a}, {b})"
                )));
            }
        }
        let consequents = consequents
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, k)| {
                        k.ok_or_else(|| {
                            Error::InvalidFuzzySystem(format!(
                                "{name}: no rule for ({}, {})",
                                input1.sets[i].label, input2.sets[j].label
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            name,
            input1,
            input2,
            output,
            consequents,
            and,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input1(&self) -> &FuzzyVariable {
        &self.input1
    }

    pub fn input2(&self) -> &FuzzyVariable {
        &self.input2
    }

    pub fn output(&self) -> &FuzzyVariable {
        &self.output
    }

    pub fn and_operator(&self) -> AndOperator {
        self.and
    }

    pub fn with_and_operator(mut self, and: AndOperator) -> Self {
        self.and = and;
        self
    }

    pub fn rule_count(&self) -> usize {
        self.input1.sets.len() * self.input2.sets.len()
    }

    /// Consequent label for an antecedent pair.
    pub fn consequent(&self, in1_label: &str, in2_label: &str) -> Option<&str> {
        let i = self.input1.index_of(in1_label)?;
        let j = self.input2.index_of(in2_label)?;
        Some(&self.output.sets[self.consequents[i][j]].label)
    }

    /// Singleton value of each output label (the set peak).
    pub fn output_centers(&self) -> Vec<(&str, f64)> {
        self.output.sets.iter().map(|s| (s.label.as_str(), s.peak)).collect()
    }

    pub fn rules(&self) -> Vec<Rule> {
        let mut rules = Vec::with_capacity(self.rule_count());
        for (i, row) in self.consequents.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                rules.push(Rule(
                    self.input1.sets[i].label.clone(),
                    self.input2.sets[j].label.clone(),
                    self.output.sets[k].label.clone(),
                ));
            }
        }
        rules
    }

    /// Crisp output: activation-weighted mean of the fired rules' centers.
    pub fn evaluate(&self, in1: f64, in2: f64) -> Result<f64> {
        let mu1 = self.input1.memberships(in1);
        let mu2 = self.input2.memberships(in2);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &a) in mu1.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in mu2.iter().enumerate() {
                let beta = self.and.apply(a, b);
                if beta > 0.0 {
                    num += beta * self.output.sets[self.consequents[i][j]].peak;
                    den += beta;
                }
            }
        }
        if den <= 0.0 {
            return Err(Error::ZeroActivation { in1, in2 });
        }
        let [lo, hi] = self.output.universe;
        Ok((num / den).clamp(lo, hi))
    }
}

fn rules_from_table(rows: &[&str], cols: &[&str], table: &[&[&str]]) -> Vec<Rule> {
    let mut rules = Vec::new();
    for (row, cells) in rows.iter().zip(table) {
        for (col, out) in cols.iter().zip(cells.iter()) {
            rules.push(Rule(col.to_string(), row.to_string(), out.to_string()));
        }
    }
    rules
}

/// Step-length system: inputs `D` and `D_r` over `[0, 1]`, output `O_d`.
/// Larger and more erratic steps rate higher.
pub fn build_fis_d() -> FuzzySystem {
    let d = FuzzyVariable::uniform("D", [0.0, 1.0], &["S", "M", "B"]);
    let dr = FuzzyVariable::uniform("D_r", [0.0, 1.0], &["S", "M", "B"]);
    let out = FuzzyVariable::uniform("O_d", [0.0, 1.0], &["S", "SR", "M", "BR", "B"]);
    // columns: D; rows: D_r
    let rules = rules_from_table(
        &["S", "M", "B"],
        &["S", "M", "B"],
        &[&["S", "SR", "M"], &["SR", "M", "BR"], &["M", "BR", "B"]],
    );
    FuzzySystem::new("FIS_d", d, dr, out, &rules, AndOperator::Min).expect("built-in FIS_d is valid")
}

/// Turning system: input `α` over `[-1, 1]`, `α_r` over `[0, 1]`, output
/// `O_α`. Sharp, erratic turns (low cosine, high change) rate higher.
pub fn build_fis_alpha() -> FuzzySystem {
    let alpha = FuzzyVariable::uniform("alpha", [-1.0, 1.0], &["NB", "NM", "Z", "PM", "PB"]);
    let alpha_r = FuzzyVariable::uniform("alpha_r", [0.0, 1.0], &["S", "M", "B"]);
    let out = FuzzyVariable::uniform("O_alpha", [0.0, 1.0], &["S", "SR", "M", "MR", "BR", "B", "VB"]);
    // columns: alpha; rows: alpha_r
    let rules = rules_from_table(
        &["S", "M", "B"],
        &["NB", "NM", "Z", "PM", "PB"],
        &[
            &["VB", "B", "BR", "MR", "M"],
            &["B", "BR", "MR", "M", "SR"],
            &["BR", "MR", "M", "SR", "S"],
        ],
    );
    FuzzySystem::new("FIS_alpha", alpha, alpha_r, out, &rules, AndOperator::Min)
        .expect("built-in FIS_alpha is valid")
}

/// Override file. Either system may be omitted to keep the built-in one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FisConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fis_d: Option<FuzzySystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fis_alpha: Option<FuzzySystem>,
}

impl FisConfigFile {
    pub fn defaults() -> Self {
        Self {
            fis_d: Some(build_fis_d()),
            fis_alpha: Some(build_fis_alpha()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    /// `(fis_d, fis_alpha)`, falling back to the built-in systems.
    pub fn into_systems(self) -> (FuzzySystem, FuzzySystem) {
        (
            self.fis_d.unwrap_or_else(build_fis_d),
            self.fis_alpha.unwrap_or_else(build_fis_alpha),
        )
    }
}
