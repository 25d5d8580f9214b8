//! Gasifier dataset schema, CSV ingestion, max-scaling, seeded splitting and
//! column statistics.

mod synth;

pub use synth::{ground_truth, synth_dataset, GroundTruth, GROUND_TRUTH, MIN_SYNTH_ROWS};

use std::io::{Read, Write};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{seeded_rng, DenseMatrix};
use crate::training::SampleSet;

/// Fuel composition (wt%) and process conditions, in model input order.
pub const INPUT_NAMES: [&str; 9] = ["C", "H", "N", "S", "O", "MC", "Ash", "ER", "Tg"];
/// Gas LHV and product LHV (kJ/Nm³), gas yield (Nm³/kg).
pub const OUTPUT_NAMES: [&str; 3] = ["LHV", "LHVp", "GasYield"];

/// Reference column means of the experimental dataset, inputs then outputs.
pub const REFERENCE_MEANS: [f64; 12] = [
    43.815, 5.11, 0.685, 0.17, 36.53, 4.21, 9.55, 0.4, 581.0, 3153.0, 7273.0, 2.86,
];
/// Reference column standard deviations, same order as [`REFERENCE_MEANS`].
pub const REFERENCE_STDS: [f64; 12] = [
    0.1202, 0.6929, 0.5868, 0.1838, 6.2649, 5.9538, 10.6773, 0.2828, 154.1493, 835.80, 4556.60, 2.62,
];

pub const NORMALIZER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad header: {0}")]
    BadHeader(String),
    /// 1-based data row (header excluded) and 1-based column.
    #[error("bad cell at row {row}, column {col}: {value:?}")]
    BadCell { row: usize, col: usize, value: String },
    #[error("empty file")]
    EmptyFile,
    #[error("column {0} has no positive maximum")]
    NonPositiveMax(String),
    #[error("column {0} contains a negative value")]
    NegativeValue(String),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed normalizer document: {0}")]
    Json(#[from] serde_json::Error),
}

fn canonical_name(raw: &str) -> Option<&'static str> {
    let raw = raw.trim();
    INPUT_NAMES
        .iter()
        .chain(OUTPUT_NAMES.iter())
        .find(|n| n.eq_ignore_ascii_case(raw))
        .copied()
}

/// `n` samples of the nine inputs and one to three outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    output_names: Vec<String>,
    inputs: DenseMatrix<f64>,
    outputs: DenseMatrix<f64>,
}

impl Dataset {
    pub fn new(
        inputs: DenseMatrix<f64>,
        outputs: DenseMatrix<f64>,
        output_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if inputs.cols() != INPUT_NAMES.len() {
            return Err(DataError::Invalid(format!("{} input columns, expected 9", inputs.cols())));
        }
        if output_names.is_empty() || output_names.len() > OUTPUT_NAMES.len() {
            return Err(DataError::Invalid(format!("{} output columns", output_names.len())));
        }
        let mut canon = Vec::with_capacity(output_names.len());
        for name in &output_names {
            match canonical_name(name) {
                Some(c) if OUTPUT_NAMES.contains(&c) && !canon.contains(&c.to_string()) => canon.push(c.to_string()),
                _ => return Err(DataError::UnknownColumn(name.clone())),
            }
        }
        if outputs.cols() != canon.len() || outputs.rows() != inputs.rows() {
            return Err(DataError::Invalid(format!(
                "outputs are {}x{}, expected {}x{}",
                outputs.rows(),
                outputs.cols(),
                inputs.rows(),
                canon.len()
            )));
        }
        if inputs.rows() == 0 {
            return Err(DataError::TooFewSamples { needed: 1, got: 0 });
        }
        if !inputs.is_finite() || !outputs.is_finite() {
            return Err(DataError::Invalid("non-finite value".into()));
        }
        Ok(Self {
            output_names: canon,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_names(&self) -> [&'static str; 9] {
        INPUT_NAMES
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn inputs(&self) -> &DenseMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DenseMatrix<f64> {
        &self.outputs
    }

    /// All column names, inputs first.
    pub fn column_names(&self) -> Vec<String> {
        INPUT_NAMES
            .iter()
            .map(|s| s.to_string())
            .chain(self.output_names.iter().cloned())
            .collect()
    }

    /// Column `c` over all columns, inputs first.
    fn column(&self, c: usize) -> Vec<f64> {
        if c < INPUT_NAMES.len() {
            self.inputs.column(c)
        } else {
            self.outputs.column(c - INPUT_NAMES.len())
        }
    }

    /// Keeps only the named outputs, in the order given.
    pub fn select_outputs<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, DataError> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let pos = self
                .output_names
                .iter()
                .position(|o| o.eq_ignore_ascii_case(n.trim()))
                .ok_or_else(|| DataError::UnknownColumn(n.to_string()))?;
            idx.push(pos);
        }
        Self::new(
            self.inputs.clone(),
            self.outputs.select_columns(&idx),
            idx.iter().map(|&i| self.output_names[i].clone()).collect(),
        )
    }

    /// Training view over the given rows.
    pub fn sample_set(&self, rows: &[usize]) -> SampleSet<f64> {
        SampleSet {
            inputs: self.inputs.select_rows(rows),
            targets: self.outputs.select_rows(rows),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.column_names())?;
        for r in 0..self.len() {
            w.write_record(
                self.inputs
                    .row(r)
                    .iter()
                    .chain(self.outputs.row(r))
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

struct ParsedTable {
    /// Canonical column name for every file column.
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(source: R) -> Result<ParsedTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(DataError::EmptyFile),
    };
    let mut columns = Vec::with_capacity(header.len());
    for raw in header.iter() {
        let name = canonical_name(raw).ok_or_else(|| DataError::BadHeader(format!("unknown column {raw:?}")))?;
        if columns.contains(&name) {
            return Err(DataError::BadHeader(format!("duplicate column {name}")));
        }
        columns.push(name);
    }
    let missing: Vec<&str> = INPUT_NAMES.iter().copied().filter(|n| !columns.contains(n)).collect();
    if !missing.is_empty() {
        return Err(DataError::BadHeader(format!("missing column(s) {}", missing.join(", "))));
    }

    let mut rows = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        let row = k + 1;
        if rec.len() != columns.len() {
            return Err(DataError::BadCell {
                row,
                col: rec.len().min(columns.len()) + 1,
                value: format!("{} fields, expected {}", rec.len(), columns.len()),
            });
        }
        let mut values = Vec::with_capacity(columns.len());
        for (c, cell) in rec.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(DataError::BadCell {
                        row,
                        col: c + 1,
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(ParsedTable { columns, rows })
}

impl ParsedTable {
    fn gather(&self, names: &[&str]) -> DenseMatrix<f64> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.columns.iter().position(|c| c == n).expect("column present"))
            .collect();
        let mut m = DenseMatrix::zeros(self.rows.len(), idx.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (k, &c) in idx.iter().enumerate() {
                m[(r, k)] = row[c];
            }
        }
        m
    }
}

/// Reads a dataset with header `C,H,N,S,O,MC,Ash,ER,Tg` plus any of
/// `LHV,LHVp,GasYield` (names case-insensitive, any column order). Rows keep
/// file order; columns are returned in canonical order.
pub fn load_csv<R: Read>(source: R) -> Result<Dataset, DataError> {
    let table = read_table(source)?;
    let outputs: Vec<&str> = OUTPUT_NAMES
        .iter()
        .copied()
        .filter(|n| table.columns.contains(n))
        .collect();
    if outputs.is_empty() {
        return Err(DataError::BadHeader(format!(
            "no output column (expected one of {})",
            OUTPUT_NAMES.join(", ")
        )));
    }
    Dataset::new(
        table.gather(&INPUT_NAMES),
        table.gather(&outputs),
        outputs.iter().map(|s| s.to_string()).collect(),
    )
}

/// Reads only the nine input columns; output columns, if present, are ignored.
pub fn load_inputs_csv<R: Read>(source: R) -> Result<DenseMatrix<f64>, DataError> {
    Ok(read_table(source)?.gather(&INPUT_NAMES))
}

/// Per-column maxima used to scale every column into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub schema_version: u32,
    pub maxima: IndexMap<String, f64>,
}

impl Normalizer {
    pub fn fit(d: &Dataset) -> Result<Self, DataError> {
        let mut maxima = IndexMap::new();
        for (c, name) in d.column_names().into_iter().enumerate() {
            let col = d.column(c);
            if col.iter().any(|&v| v < 0.0) {
                return Err(DataError::NegativeValue(name));
            }
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Err(DataError::NonPositiveMax(name));
            }
            maxima.insert(name, max);
        }
        Ok(Self {
            schema_version: NORMALIZER_SCHEMA_VERSION,
            maxima,
        })
    }

    fn scales<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<f64>, DataError> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                match self.maxima.get(n) {
                    Some(&m) if m > 0.0 => Ok(m),
                    Some(_) => Err(DataError::NonPositiveMax(n.to_string())),
                    None => Err(DataError::UnknownColumn(n.to_string())),
                }
            })
            .collect()
    }

    fn rescale(m: &DenseMatrix<f64>, scales: &[f64], divide: bool) -> DenseMatrix<f64> {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (v, s) in out.row_mut(r).iter_mut().zip(scales) {
                *v = if divide { *v / s } else { *v * s };
            }
        }
        out
    }

    pub fn normalize(&self, d: &Dataset) -> Result<Dataset, DataError> {
        Ok(Dataset {
            output_names: d.output_names.clone(),
            inputs: self.normalize_inputs(&d.inputs)?,
            outputs: Self::rescale(&d.outputs, &self.scales(&d.output_names)?, true),
        })
    }

    pub fn denormalize(&self, d: &Dataset) -> Result<Dataset, DataError> {
        Ok(Dataset {
            output_names: d.output_names.clone(),
            inputs: Self::rescale(&d.inputs, &self.scales(&INPUT_NAMES)?, false),
            outputs: self.denormalize_outputs(&d.outputs, &d.output_names)?,
        })
    }

    pub fn normalize_inputs(&self, inputs: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>, DataError> {
        Ok(Self::rescale(inputs, &self.scales(&INPUT_NAMES)?, true))
    }

    pub fn denormalize_outputs<S: AsRef<str>>(
        &self,
        outputs: &DenseMatrix<f64>,
        names: &[S],
    ) -> Result<DenseMatrix<f64>, DataError> {
        Ok(Self::rescale(outputs, &self.scales(names)?, false))
    }

    /// `(row, column name, value)` for every input above its fitted maximum.
    pub fn exceedances(&self, inputs: &DenseMatrix<f64>) -> Result<Vec<(usize, &'static str, f64)>, DataError> {
        let scales = self.scales(&INPUT_NAMES)?;
        let mut out = Vec::new();
        for r in 0..inputs.rows() {
            for (c, (&v, &m)) in inputs.row(r).iter().zip(&scales).enumerate() {
                if v > m {
                    out.push((r, INPUT_NAMES[c], v));
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("normalizer serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let n: Self = serde_json::from_str(text)?;
        if n.schema_version != NORMALIZER_SCHEMA_VERSION {
            return Err(DataError::Invalid(format!(
                "unsupported normalizer schema version {}",
                n.schema_version
            )));
        }
        if let Some((name, _)) = n.maxima.iter().find(|(_, &m)| !(m > 0.0 && m.is_finite())) {
            return Err(DataError::NonPositiveMax(name.clone()));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

pub const MIN_SPLIT_SAMPLES: usize = 7;

/// Seeded shuffle of `0..n` cut into train/validation/test.
///
/// `|train| = round(f_train·n)`; the remainder `r` is divided between
/// validation and test in proportion to their fractions, rounding half up in
/// favour of validation (so equal fractions give validation the odd extra).
pub fn split(n: usize, fractions: SplitFractions, seed: u64) -> Result<SplitIndices, DataError> {
    let SplitFractions { train, validation, test } = fractions;
    if !(train > 0.0 && validation > 0.0 && test > 0.0) {
        return Err(DataError::Invalid("split fractions must be positive".into()));
    }
    if n < MIN_SPLIT_SAMPLES {
        return Err(DataError::TooFewSamples {
            needed: MIN_SPLIT_SAMPLES,
            got: n,
        });
    }
    let total = train + validation + test;
    let n_train = ((train / total) * n as f64).round() as usize;
    let rest = n - n_train.min(n);
    // The slack keeps an exact half from rounding down after 0.15/0.30 style
    // representation error.
    let n_val = (rest as f64 * validation / (validation + test) + 0.5 + 1e-9).floor() as usize;
    let n_test = rest - n_val.min(rest);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(DataError::TooFewSamples {
            needed: MIN_SPLIT_SAMPLES,
            got: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let test_part = order.split_off(n_train + n_val);
    let val_part = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        validation: val_part,
        test: test_part,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMoments {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    /// Sample standard deviations (divisor `n − 1`).
    pub stds: Vec<f64>,
}

pub fn column_moments(d: &Dataset) -> Result<ColumnMoments, DataError> {
    let n = d.len();
    if n < 2 {
        return Err(DataError::TooFewSamples { needed: 2, got: n });
    }
    let names = d.column_names();
    let mut means = Vec::with_capacity(names.len());
    let mut stds = Vec::with_capacity(names.len());
    for c in 0..names.len() {
        let (mean, std) = mean_std(&d.column(c));
        means.push(mean);
        stds.push(std);
    }
    Ok(ColumnMoments { names, means, stds })
}

/// Two-pass mean and sample standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
