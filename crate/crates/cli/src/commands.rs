use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use addscreen::datagen::{gen_example, Example, Scenario, ScenarioError};
use addscreen::harness::{self, BenchmarkConfig, FitKind};
use addscreen::io::{self, DataError, Dataset};
use addscreen::screening::{self, default_model_size, ModelSize, ScreeningConfig, SelectionRule};
use addscreen::solver::{loocv_pe, run_pipeline, PenaltyConfig, PipelineConfig};
use addscreen::splines::BasisSpec;
use anyhow::{Context, Result};

use crate::args::{BasisArgs, BenchArgs, Cli, Command, FitArgs, ReportArgs, ScenarioArgs, ScreenArgs, SimulateArgs};

/// Bad input supplied by the user; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Screen(a) => screen(a),
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a, cli.seed),
        Command::Bench(a) => bench(a, cli.seed),
        Command::Report(a) => report(a),
    }
}

fn load(path: &Path, y_col: &str) -> Result<Dataset> {
    io::read_csv(path, Some(y_col)).map_err(|e| match e {
        e @ (DataError::Open { .. }
        | DataError::MissingResponse(_)
        | DataError::NonNumeric { .. }
        | DataError::Ragged { .. }
        | DataError::TooFewRows(_)
        | DataError::NoCovariates
        | DataError::Csv(_)) => UsageError(e.to_string()).into(),
        other => anyhow::Error::new(other),
    })
}

fn basis(b: &BasisArgs) -> Result<BasisSpec> {
    if b.order < 2 || b.k < b.order {
        return Err(UsageError(format!(
            "--k {} must be at least the spline order {} (order >= 2)",
            b.k, b.order
        ))
        .into());
    }
    Ok(BasisSpec::new(b.k, b.order))
}

fn scenario(a: &ScenarioArgs, seed: u64) -> Result<Scenario> {
    let example = Example::from_number(a.example).expect("clap restricts the range");
    let sc = Scenario {
        example,
        n: a.n,
        p: a.p,
        signal_c: a.c,
        sigma: a.sigma,
        error_law: a.error,
        seed,
    };
    let sc = match example {
        Example::Ex1 if sc.signal_c.is_none() => {
            return Err(UsageError("example 1 needs --c".into()).into())
        }
        _ => sc,
    };
    sc.validate().map_err(|e: ScenarioError| UsageError(e.to_string()))?;
    Ok(sc)
}

/// Writes through a temporary file in the target directory so a failed
/// run leaves nothing behind.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn screen(a: &ScreenArgs) -> Result<()> {
    let data = load(&a.data.input, &a.data.y_col)?;
    let rule = match (a.top_d, a.threshold_c, a.threshold_alpha) {
        (_, Some(c), Some(alpha)) => SelectionRule::Threshold { c, alpha },
        (Some(d), _, _) => SelectionRule::TopD(ModelSize::Fixed(d)),
        _ => SelectionRule::default(),
    };
    let cfg = ScreeningConfig {
        rule,
        basis: basis(&a.basis)?,
        centered: !a.uncentered,
    };
    let scores = screening::score(a.method, &data.x, &data.y, &cfg)?;
    let active = screening::select_active(&scores, rule)
        .map_err(|e| UsageError(e.to_string()))?;
    log::info!(
        "{}: kept {} of {} covariates",
        a.method.label(),
        active.d_effective,
        data.p()
    );
    let ranking = scores.ranking();
    write_atomic(&a.output, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rank", "column", "name", "score", "selected"])?;
        for (r, &j) in ranking.iter().enumerate() {
            let selected = r < active.d_effective;
            out.write_record([
                (r + 1).to_string(),
                (j + 1).to_string(),
                data.names[j].clone(),
                scores.scores[j].to_string(),
                selected.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })
}

fn fit(a: &FitArgs) -> Result<()> {
    let data = load(&a.data.input, &a.data.y_col)?;
    let n = data.n();
    let d = a.top_d.unwrap_or(if n < 100 {
        2 * default_model_size(n)
    } else {
        default_model_size(n)
    });
    if d == 0 {
        return Err(UsageError("--top-d must be positive".into()).into());
    }
    let cfg = PipelineConfig {
        method: a.method,
        screening: ScreeningConfig {
            rule: SelectionRule::TopD(ModelSize::Fixed(d)),
            basis: basis(&a.basis)?,
            centered: true,
        },
        penalty: PenaltyConfig {
            identify_linear: !a.sam,
            ..PenaltyConfig::default()
        },
    };
    let model = run_pipeline(&data.x, &data.y, &cfg)?;
    let mut report = io::fit_report(&model, &data.names);
    if a.loocv {
        let cv = loocv_pe(&data.x, &data.y, &cfg)?;
        if cv.had_failures() {
            log::warn!("{} of {} LOOCV folds failed", cv.failed_folds.len(), cv.folds);
        }
        report.loocv_pe = Some(cv.pe);
    }
    write_atomic(&a.output, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let sc = scenario(&a.scenario, seed)?;
    let data = gen_example(&sc)?;
    let ds = Dataset::from_generated(&data);
    write_atomic(&a.output, |w| Ok(io::write_csv_to(&ds, w)?))
}

fn bench(a: &BenchArgs, seed: u64) -> Result<()> {
    let sc = scenario(&a.scenario, seed)?;
    if a.reps < 10 {
        return Err(UsageError(format!("--reps must be at least 10, got {}", a.reps)).into());
    }
    let mut cfg = BenchmarkConfig::for_scenario(&sc, a.reps, seed);
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    cfg.screening.basis = basis(&a.basis)?;
    cfg.nu = a.nu;
    if sc.example == Example::Ex4 {
        cfg.fits = if a.sam {
            vec![FitKind::Plam, FitKind::Sam]
        } else {
            vec![FitKind::Plam]
        };
    }
    let table = harness::run_benchmark(&sc, &cfg)?;
    for f in &table.failures {
        log::warn!("replication {}: {} failed: {}", f.rep_id, f.what, f.message);
    }
    write_atomic(&a.output, |w| Ok(table.write_csv(w)?))?;
    let text = table.to_text();
    if let Some(path) = &a.text {
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    print!("{text}");
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.input {
        let file = File::open(path)
            .map_err(|e| UsageError(format!("cannot open {}: {e}", path.display())))?;
        let part = harness::read_table_csv(file)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        rows.extend(part);
    }
    let text = harness::render_text(&rows);
    match &a.output {
        Some(path) => write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
