//! Replicated screening and structure-identification experiments.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{gen_example, replication_seed, GeneratedData, Scenario, ScenarioError};
use crate::screening::{self, default_model_size, rank_indices, Method, ScreeningConfig};
use crate::solver::{run_pipeline, ComponentClass, PenaltyConfig, PipelineConfig};

/// Probability levels (percent) of the reported model-size quantiles.
pub const QUANTILE_LEVELS: [u32; 5] = [5, 25, 50, 75, 95];

const STRUCTURE_COLUMNS: [&str; 6] = ["NV", "NVT", "NN", "NNT", "NL", "NLT"];

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),

    #[error("need at least 10 replications, got {0}")]
    TooFewReps(usize),

    #[error("no methods requested")]
    NoMethods,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed benchmark table, line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Size of the smallest top-ranked prefix containing every index in
/// `true_active` (decreasing score, ties to the smaller index).
pub fn min_model_size(scores: &[f64], true_active: &[usize]) -> usize {
    let order = rank_indices(scores);
    let mut rank = vec![0; scores.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r + 1;
    }
    true_active.iter().map(|&j| rank[j]).max().unwrap_or(0)
}

pub fn coverage_at(scores: &[f64], true_active: &[usize], nu: usize) -> bool {
    min_model_size(scores, true_active) <= nu
}

/// Nearest-rank quantiles: the `ceil(q n)`-th order statistic for each
/// level `q` given in percent.
pub fn quantiles(values: &[usize], levels: &[u32]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    levels
        .iter()
        .map(|&pct| {
            let rank = (pct as usize * n).div_ceil(100).clamp(1, n);
            sorted[rank - 1]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub nv: usize,
    pub nvt: usize,
    pub nn: usize,
    pub nnt: usize,
    pub nl: usize,
    pub nlt: usize,
}

impl StructureMetrics {
    pub fn as_array(&self) -> [usize; 6] {
        [self.nv, self.nvt, self.nn, self.nnt, self.nl, self.nlt]
    }
}

/// Counts of selected / nonlinear / linear components against the truth.
/// `active[j]` is the original covariate index of fitted block `j`.
pub fn structure_metrics(
    active: &[usize],
    classification: &[ComponentClass],
    truth: &GeneratedData,
) -> StructureMetrics {
    let mut m = StructureMetrics::default();
    for (&j, class) in active.iter().zip(classification) {
        match class {
            ComponentClass::Zero => continue,
            ComponentClass::Nonlinear => {
                m.nn += 1;
                m.nnt += truth.true_nonlinear.contains(&j) as usize;
            }
            ComponentClass::Linear { .. } => {
                m.nl += 1;
                m.nlt += truth.true_linear.contains(&j) as usize;
            }
        }
        m.nv += 1;
        m.nvt += truth.true_active.contains(&j) as usize;
    }
    m
}

/// Which fitted model a structure record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    /// Two penalties, zero/linear/nonlinear.
    Plam,
    /// Single penalty, zero/nonlinear only.
    Sam,
}

impl FitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FitKind::Plam => "plam",
            FitKind::Sam => "sam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep_id: usize,
    pub method: Method,
    pub min_model_size: usize,
    pub covered_at_nu: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub rep_id: usize,
    pub kind: FitKind,
    pub metrics: StructureMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub rep_id: usize,
    pub what: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    pub screening: ScreeningConfig,
    pub penalty: PenaltyConfig,
    /// Coverage threshold for S; `None` means `floor(n / ln n)`.
    pub nu: Option<usize>,
    /// Structure fits to run after NCRS screening each replication.
    pub fits: Vec<FitKind>,
}

impl BenchmarkConfig {
    /// All five screening methods; structure fits (PLAM and SAM) for the
    /// copula design only.
    pub fn for_scenario(scenario: &Scenario, reps: usize, seed: u64) -> Self {
        let structure = scenario.example == crate::datagen::Example::Ex4;
        Self {
            methods: Method::ALL.to_vec(),
            reps,
            seed,
            screening: ScreeningConfig::default(),
            penalty: PenaltyConfig::default(),
            nu: None,
            fits: if structure {
                vec![FitKind::Plam, FitKind::Sam]
            } else {
                Vec::new()
            },
        }
    }
}

/// One row of a benchmark table. Screening rows carry the model-size
/// quantiles and S; fit rows carry structure means and sample standard
/// deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub scenario: String,
    pub method: String,
    pub quantiles: Option<[usize; 5]>,
    pub s: Option<f64>,
    pub structure_mean: Option<[f64; 6]>,
    pub structure_sd: Option<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub scenario: String,
    pub reps: usize,
    pub nu: usize,
    pub rows: Vec<TableRow>,
    pub records: Vec<ReplicationRecord>,
    pub fit_records: Vec<FitRecord>,
    pub failures: Vec<Failure>,
}

struct RepOutcome {
    records: Vec<ReplicationRecord>,
    fits: Vec<FitRecord>,
    failures: Vec<Failure>,
}

fn run_replication(scenario: &Scenario, cfg: &BenchmarkConfig, nu: usize, rep: usize) -> RepOutcome {
    let mut out = RepOutcome {
        records: Vec::new(),
        fits: Vec::new(),
        failures: Vec::new(),
    };
    let sc = scenario.clone().with_seed(replication_seed(cfg.seed, rep as u64));
    let data = match gen_example(&sc) {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(Failure {
                rep_id: rep,
                what: "datagen".into(),
                message: e.to_string(),
            });
            return out;
        }
    };
    for &method in &cfg.methods {
        match screening::score(method, &data.x, &data.y, &cfg.screening) {
            Ok(s) => {
                let m = min_model_size(&s.scores, &data.true_active);
                out.records.push(ReplicationRecord {
                    rep_id: rep,
                    method,
                    min_model_size: m,
                    covered_at_nu: m <= nu,
                });
            }
            Err(e) => out.failures.push(Failure {
                rep_id: rep,
                what: method.as_str().into(),
                message: e.to_string(),
            }),
        }
    }
    for &kind in &cfg.fits {
        let penalty = match kind {
            FitKind::Plam => cfg.penalty.clone(),
            FitKind::Sam => PenaltyConfig {
                identify_linear: false,
                ..cfg.penalty.clone()
            },
        };
        let pipeline = PipelineConfig {
            method: Method::Ncrs,
            screening: cfg.screening,
            penalty,
        };
        match run_pipeline(&data.x, &data.y, &pipeline) {
            Ok(fit) => out.fits.push(FitRecord {
                rep_id: rep,
                kind,
                metrics: structure_metrics(&fit.active.indices, &fit.fit.classification, &data),
            }),
            Err(e) => out.failures.push(Failure {
                rep_id: rep,
                what: kind.as_str().into(),
                message: e.to_string(),
            }),
        }
    }
    out
}

pub fn run_benchmark(scenario: &Scenario, cfg: &BenchmarkConfig) -> Result<BenchmarkTable, HarnessError> {
    if cfg.reps < 10 {
        return Err(HarnessError::TooFewReps(cfg.reps));
    }
    if cfg.methods.is_empty() && cfg.fits.is_empty() {
        return Err(HarnessError::NoMethods);
    }
    scenario.validate()?;
    let nu = cfg.nu.unwrap_or_else(|| default_model_size(scenario.n));
    let outcomes: Vec<RepOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_replication(scenario, cfg, nu, rep))
        .collect();
    let mut records = Vec::new();
    let mut fit_records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        records.extend(o.records);
        fit_records.extend(o.fits);
        failures.extend(o.failures);
    }
    for f in &failures {
        log::warn!("replication {} ({}) failed: {}", f.rep_id, f.what, f.message);
    }
    Ok(aggregate(scenario.label(), cfg, nu, records, fit_records, failures))
}

/// Builds table rows from per-replication records; the result does not
/// depend on record order.
pub fn aggregate(
    scenario: String,
    cfg: &BenchmarkConfig,
    nu: usize,
    mut records: Vec<ReplicationRecord>,
    mut fit_records: Vec<FitRecord>,
    failures: Vec<Failure>,
) -> BenchmarkTable {
    records.sort_by_key(|r| (r.rep_id, cfg.methods.iter().position(|m| *m == r.method)));
    fit_records.sort_by_key(|r| (r.rep_id, r.kind.as_str()));
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let mine: Vec<&ReplicationRecord> = records.iter().filter(|r| r.method == method).collect();
        if mine.is_empty() {
            continue;
        }
        let sizes: Vec<usize> = mine.iter().map(|r| r.min_model_size).collect();
        let q = quantiles(&sizes, &QUANTILE_LEVELS);
        let covered = mine.iter().filter(|r| r.covered_at_nu).count();
        rows.push(TableRow {
            scenario: scenario.clone(),
            method: method.as_str().into(),
            quantiles: Some([q[0], q[1], q[2], q[3], q[4]]),
            s: Some(covered as f64 / mine.len() as f64),
            structure_mean: None,
            structure_sd: None,
        });
    }
    for &kind in &cfg.fits {
        let mine: Vec<[usize; 6]> = fit_records
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.metrics.as_array())
            .collect();
        if mine.is_empty() {
            continue;
        }
        let (mean, sd) = mean_sd(&mine);
        rows.push(TableRow {
            scenario: scenario.clone(),
            method: kind.as_str().into(),
            quantiles: None,
            s: None,
            structure_mean: Some(mean),
            structure_sd: Some(sd),
        });
    }
    BenchmarkTable {
        scenario,
        reps: cfg.reps,
        nu,
        rows,
        records,
        fit_records,
        failures,
    }
}

fn mean_sd(values: &[[usize; 6]]) -> ([f64; 6], [f64; 6]) {
    let n = values.len() as f64;
    let mut mean = [0.0; 6];
    let mut sd = [0.0; 6];
    for c in 0..6 {
        mean[c] = values.iter().map(|v| v[c] as f64).sum::<f64>() / n;
        if values.len() > 1 {
            let ss: f64 = values.iter().map(|v| (v[c] as f64 - mean[c]).powi(2)).sum();
            sd[c] = (ss / (n - 1.0)).sqrt();
        }
    }
    (mean, sd)
}

fn csv_header(with_structure: bool) -> Vec<String> {
    let mut h: Vec<String> = ["scenario", "method"].iter().map(|s| s.to_string()).collect();
    h.extend(QUANTILE_LEVELS.iter().map(|q| format!("q{q:02}")));
    h.push("S".into());
    if with_structure {
        for c in STRUCTURE_COLUMNS {
            h.push(c.into());
            h.push(format!("{c}_sd"));
        }
    }
    h
}

/// Writes rows as CSV. Structure columns appear when any row has them.
pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<(), HarnessError> {
    let with_structure = rows.iter().any(|r| r.structure_mean.is_some());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(with_structure))?;
    for r in rows {
        let mut rec = vec![r.scenario.clone(), r.method.clone()];
        match r.quantiles {
            Some(q) => rec.extend(q.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rec.push(r.s.map(|s| format!("{s:.2}")).unwrap_or_default());
        if with_structure {
            for c in 0..6 {
                match (r.structure_mean, r.structure_sd) {
                    (Some(m), Some(s)) => {
                        rec.push(format!("{:.2}", m[c]));
                        rec.push(format!("{:.2}", s[c]));
                    }
                    _ => rec.extend([String::new(), String::new()]),
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a CSV written by [`write_table_csv`].
pub fn read_table_csv<R: Read>(input: R) -> Result<Vec<TableRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let with_structure = header.len() == csv_header(true).len();
    if header != csv_header(with_structure) {
        return Err(HarnessError::Malformed {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |field: &str| HarnessError::Malformed {
            line,
            message: format!("bad value `{field}`"),
        };
        let opt_f64 = |s: &str| -> Result<Option<f64>, HarnessError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        let quantiles = if rec[2].is_empty() {
            None
        } else {
            let mut q = [0usize; 5];
            for (k, slot) in q.iter_mut().enumerate() {
                *slot = rec[2 + k].parse().map_err(|_| bad(&rec[2 + k]))?;
            }
            Some(q)
        };
        let s = opt_f64(&rec[7])?;
        let (mut structure_mean, mut structure_sd) = (None, None);
        if with_structure && !rec[8].is_empty() {
            let mut m = [0.0; 6];
            let mut sd = [0.0; 6];
            for c in 0..6 {
                m[c] = opt_f64(&rec[8 + 2 * c])?.ok_or_else(|| bad(""))?;
                sd[c] = opt_f64(&rec[9 + 2 * c])?.ok_or_else(|| bad(""))?;
            }
            structure_mean = Some(m);
            structure_sd = Some(sd);
        }
        rows.push(TableRow {
            scenario: rec[0].to_string(),
            method: rec[1].to_string(),
            quantiles,
            s,
            structure_mean,
            structure_sd,
        });
    }
    Ok(rows)
}

fn display_name(method: &str) -> String {
    method
        .parse::<Method>()
        .map(|m| m.label().to_string())
        .unwrap_or_else(|_| method.to_uppercase())
}

/// Aligned text rendering, grouped by scenario.
pub fn render_text(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let mut scenarios: Vec<&str> = Vec::new();
    for r in rows {
        if !scenarios.contains(&r.scenario.as_str()) {
            scenarios.push(&r.scenario);
        }
    }
    for sc in scenarios {
        let mine: Vec<&TableRow> = rows.iter().filter(|r| r.scenario == sc).collect();
        let _ = writeln!(out, "{sc}");
        let screening: Vec<&&TableRow> = mine.iter().filter(|r| r.quantiles.is_some()).collect();
        if !screening.is_empty() {
            let _ = write!(out, "  {:<8}", "method");
            for q in QUANTILE_LEVELS {
                let _ = write!(out, "{:>6}", format!("{q}%"));
            }
            let _ = writeln!(out, "{:>7}", "S");
            for r in screening {
                let _ = write!(out, "  {:<8}", display_name(&r.method));
                for v in r.quantiles.unwrap() {
                    let _ = write!(out, "{v:>6}");
                }
                let _ = writeln!(out, "{:>7.2}", r.s.unwrap_or(f64::NAN));
            }
        }
        let fits: Vec<&&TableRow> = mine.iter().filter(|r| r.structure_mean.is_some()).collect();
        if !fits.is_empty() {
            let _ = write!(out, "  {:<8}", "fit");
            for c in STRUCTURE_COLUMNS {
                let _ = write!(out, "{c:>13}");
            }
            let _ = writeln!(out);
            for r in fits {
                let _ = write!(out, "  {:<8}", display_name(&r.method));
                let (m, s) = (r.structure_mean.unwrap(), r.structure_sd.unwrap());
                for c in 0..6 {
                    let _ = write!(out, "{:>13}", format!("{:.2}({:.2})", m[c], s[c]));
                }
                let _ = writeln!(out);
            }
            let _ = writeln!(out, "  (parenthesized: sample standard deviation across replications)");
        }
    }
    out
}

impl BenchmarkTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("replications: {}, coverage threshold nu = {}\n", self.reps, self.nu);
        s.push_str(&render_text(&self.rows));
        let _ = writeln!(s, "failed replications: {}", self.failures.len());
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        write_table_csv(&self.rows, out)
    }

    pub fn row(&self, method: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}
