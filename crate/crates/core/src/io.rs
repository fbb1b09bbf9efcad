//! Dataset CSV files and the JSON fit report.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::GeneratedData;
use crate::solver::{ComponentClass, PipelineFit};

/// Points per fitted-curve dump.
pub const CURVE_POINTS: usize = 100;

#[derive(Error, Debug)]
pub enum DataError {
    #[error("cannot open {}: {source}", path.display())]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("no response column `{0}` in header")]
    MissingResponse(String),

    #[error("row {row} (line {line}), column \"{column}\": `{value}` is not a finite number")]
    NonNumeric {
        row: usize,
        line: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {got} fields, header has {expected}")]
    Ragged { row: usize, got: usize, expected: usize },

    #[error("need at least 10 observations, got {0}")]
    TooFewRows(usize),

    #[error("no covariate columns besides the response")]
    NoCovariates,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Response plus covariates, with the file's column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Covariate names in column order.
    pub names: Vec<String>,
    pub y_name: String,
    /// Position of the response among all columns of the file.
    pub y_position: usize,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Simulated data with columns `x1..xp` and the response first.
    pub fn from_generated(data: &GeneratedData) -> Self {
        Self {
            names: (1..=data.x.ncols()).map(|j| format!("x{j}")).collect(),
            y_name: "y".into(),
            y_position: 0,
            x: data.x.clone(),
            y: data.y.clone(),
        }
    }
}

/// Reads a header-first CSV; `y_col` names the response (default `y`),
/// every other column is a numeric covariate.
pub fn read_csv(path: &Path, y_col: Option<&str>) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(|source| DataError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file, y_col)
}

pub fn read_csv_from<R: Read>(input: R, y_col: Option<&str>) -> Result<Dataset, DataError> {
    let y_name = y_col.unwrap_or("y");
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let y_position = header
        .iter()
        .position(|h| h == y_name)
        .ok_or_else(|| DataError::MissingResponse(y_name.to_string()))?;
    if header.len() < 2 {
        return Err(DataError::NoCovariates);
    }
    let width = header.len();
    let mut values: Vec<f64> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut rows = 0;
    while rdr.read_record(&mut record)? {
        rows += 1;
        if record.len() != width {
            return Err(DataError::Ragged {
                row: rows,
                got: record.len(),
                expected: width,
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::NonNumeric {
                    row: rows,
                    line: rows + 1,
                    column: header[c].clone(),
                    value: field.to_string(),
                })?;
            values.push(v);
        }
    }
    if rows < 10 {
        return Err(DataError::TooFewRows(rows));
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let cols: Vec<usize> = (0..width).filter(|&c| c != y_position).collect();
    Ok(Dataset {
        names: cols.iter().map(|&c| header[c].clone()).collect(),
        y_name: y_name.to_string(),
        y_position,
        x: all.select_columns(&cols),
        y: all.column(y_position).iter().copied().collect(),
    })
}

/// Writes the dataset in its original column layout. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv_to<W: Write>(data: &Dataset, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let width = data.p() + 1;
    let mut header = Vec::with_capacity(width);
    let mut names = data.names.iter();
    for c in 0..width {
        if c == data.y_position {
            header.push(data.y_name.as_str());
        } else {
            header.push(names.next().expect("column count").as_str());
        }
    }
    w.write_record(&header)?;
    let mut buf = Vec::with_capacity(width);
    for i in 0..data.n() {
        buf.clear();
        let mut j = 0;
        for c in 0..width {
            if c == data.y_position {
                buf.push(data.y[i].to_string());
            } else {
                buf.push(data.x[(i, j)].to_string());
                j += 1;
            }
        }
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let file = File::create(path)?;
    write_csv_to(data, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub name: String,
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Curve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub intercept: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ebic: f64,
    pub components: Vec<ComponentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loocv_pe: Option<f64>,
}

/// Report for every screened covariate; nonzero components carry their
/// fitted curve on 100 equally spaced points of the basis domain.
pub fn fit_report(model: &PipelineFit, names: &[String]) -> FitReport {
    let fit = &model.fit;
    let components = model
        .active
        .indices
        .iter()
        .enumerate()
        .map(|(b, &j)| {
            let class = fit.classification[b];
            let slope = match class {
                ComponentClass::Linear { slope, .. } => Some(slope),
                _ => None,
            };
            let curve = class.is_nonzero().then(|| {
                let basis = &model.bases[b];
                let (lo, hi) = basis.domain();
                let x: Vec<f64> = (0..CURVE_POINTS)
                    .map(|i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64)
                    .collect();
                let y = x.iter().map(|&t| fit.component_value(basis, b, t)).collect();
                Curve { x, y }
            });
            ComponentReport {
                name: names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)),
                class: class.name().to_string(),
                slope,
                curve,
            }
        })
        .collect();
    FitReport {
        intercept: fit.intercept,
        lambda1: fit.lambda.0,
        lambda2: fit.lambda.1,
        ebic: fit.ebic,
        components,
        loocv_pe: None,
    }
}
