//! Samples: synthetic generators, CSV ingestion, splits, feature scaling and
//! classification error.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::spaces::{HypothesisVector, PointEvaluator, Points, SpaceError};

/// Tolerance on the sum of split fractions.
pub const SPLIT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: file has no data rows")]
    Empty { path: PathBuf },
    #[error("{path}, line {line}: expected {expected} columns, found {found}")]
    Ragged {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}, line {line}, column {column}: cannot parse {cell:?} as a number")]
    NonNumeric {
        path: PathBuf,
        line: u64,
        column: usize,
        cell: String,
    },
    #[error("{path}: need at least one feature column and one target column")]
    TooFewColumns { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("split fractions must be nonnegative and sum to 1, got {0:?}")]
    InvalidFractions(Vec<f64>),
    #[error("label {value} at position {index} is not -1 or +1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("noise standard deviation must be finite and nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Generator { id: String, seed: u64 },
    File { path: PathBuf },
    Derived { from: Box<Provenance>, note: String },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Generator { id, seed } => write!(f, "{id} (seed {seed})"),
            Provenance::File { path } => write!(f, "{}", path.display()),
            Provenance::Derived { from, note } => write!(f, "{from} [{note}]"),
        }
    }
}

/// A labeled sample `z = {(x_i, y_i)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    points: Points,
    targets: Vec<f64>,
    provenance: Provenance,
}

impl Sample {
    pub fn new(points: Points, targets: Vec<f64>, provenance: Provenance) -> Result<Self, DataError> {
        if points.is_empty() {
            return Err(DataError::EmptySample);
        }
        if points.len() != targets.len() {
            return Err(SpaceError::LengthMismatch {
                points: points.len(),
                targets: targets.len(),
            }
            .into());
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(SpaceError::NonFinite(i).into());
        }
        Ok(Sample {
            points,
            targets,
            provenance,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn into_parts(self) -> (Points, Vec<f64>) {
        (self.points, self.targets)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize], note: &str) -> Sample {
        Sample {
            points: self.points.select(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            provenance: Provenance::Derived {
                from: Box::new(self.provenance.clone()),
                note: note.to_string(),
            },
        }
    }

    /// Same inputs with replacement targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Sample, DataError> {
        Sample::new(self.points.clone(), targets, self.provenance.clone())
    }
}

/// `f_ρ(x) = |x − 1/2| − 1/2`.
pub fn f_rho_abs(x: f64) -> f64 {
    (x - 0.5).abs() - 0.5
}

fn check_noise(noise_sd: f64) -> Result<(), DataError> {
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(DataError::InvalidNoise(noise_sd));
    }
    Ok(())
}

/// `x ~ U[0, 1]`, `y = f_ρ(x) + N(0, noise_sd²)`.
pub fn gen_synthetic_abs(m: usize, seed: u64, noise_sd: f64) -> Result<Sample, DataError> {
    if m == 0 {
        return Err(DataError::EmptySample);
    }
    check_noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for _ in 0..m {
        let x: f64 = rng.random();
        let e: f64 = StandardNormal.sample(&mut rng);
        xs.push(x);
        ys.push(f_rho_abs(x) + noise_sd * e);
    }
    Sample::new(
        Points::from_scalars(&xs)?,
        ys,
        Provenance::Generator {
            id: "synthetic-abs".into(),
            seed,
        },
    )
}

/// Input law for the linear generator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputLaw {
    /// Standard normal, rows with `‖x‖ > 1` projected onto the unit sphere.
    #[default]
    CappedNormal,
    /// Uniform on `[-1, 1]^d` scaled by `1/√d`.
    ScaledUniform,
}

/// Linear model `y = ⟨ω†, x⟩ + N(0, noise_sd²)` with `‖x‖ ≤ 1`.
///
/// Returns the sample together with `ω†` as a euclidean hypothesis.
pub fn gen_linear_attainable(
    m: usize,
    w_dagger: &[f64],
    noise_sd: f64,
    seed: u64,
    law: InputLaw,
) -> Result<(Sample, HypothesisVector), DataError> {
    if m == 0 {
        return Err(DataError::EmptySample);
    }
    check_noise(noise_sd)?;
    let d = w_dagger.len();
    if d == 0 {
        return Err(SpaceError::ZeroDimension.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(m * d);
    let mut ys = Vec::with_capacity(m);
    let mut x = vec![0.0; d];
    for _ in 0..m {
        match law {
            InputLaw::CappedNormal => {
                for v in x.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let norm = crate::numeric::dot(&x, &x).sqrt();
                if norm > 1.0 {
                    x.iter_mut().for_each(|v| *v /= norm);
                }
            }
            InputLaw::ScaledUniform => {
                let s = 1.0 / (d as f64).sqrt();
                for v in x.iter_mut() {
                    *v = rng.random_range(-1.0..=1.0) * s;
                }
            }
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        ys.push(crate::numeric::dot(w_dagger, &x) + noise_sd * e);
        data.extend_from_slice(&x);
    }
    let sample = Sample::new(
        Points::new(d, data)?,
        ys,
        Provenance::Generator {
            id: "linear-attainable".into(),
            seed,
        },
    )?;
    Ok((sample, HypothesisVector::euclidean(w_dagger.to_vec())?))
}

/// Reads `x1,…,xd,y` with a header row. The last column is the target.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Sample, DataError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let mut sample = parse_csv(&text, path)?;
    sample.provenance = Provenance::File {
        path: path.to_path_buf(),
    };
    Ok(sample)
}

/// Parses CSV text; `origin` is used in error messages only.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Sample, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(DataError::TooFewColumns {
            path: origin.to_path_buf(),
        });
    }
    let dim = width - 1;
    let mut data = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(DataError::Ragged {
                path: origin.to_path_buf(),
                line,
                expected: width,
                found: record.len(),
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::NonNumeric {
                    path: origin.to_path_buf(),
                    line,
                    column: column + 1,
                    cell: cell.to_string(),
                })?;
            if column < dim {
                data.push(value);
            } else {
                ys.push(value);
            }
        }
    }
    if ys.is_empty() {
        return Err(DataError::Empty {
            path: origin.to_path_buf(),
        });
    }
    Sample::new(
        Points::new(dim, data)?,
        ys,
        Provenance::File {
            path: origin.to_path_buf(),
        },
    )
}

/// Writes a sample in the `x1,…,xd,y` format read by [`load_csv`].
pub fn write_csv<W: Write>(sample: &Sample, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=sample.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (x, y) in sample.points().rows().zip(sample.targets()) {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(y.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Split sizes: floor each `fraction·n`, then hand out the remaining rows one
/// at a time in declared order, skipping zero fractions.
pub fn split_sizes(n: usize, fractions: &[f64]) -> Result<Vec<usize>, DataError> {
    let valid = !fractions.is_empty()
        && fractions.iter().all(|f| f.is_finite() && *f >= 0.0)
        && (fractions.iter().sum::<f64>() - 1.0).abs() <= SPLIT_SUM_TOLERANCE;
    if !valid {
        return Err(DataError::InvalidFractions(fractions.to_vec()));
    }
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * n as f64) + 1e-9).floor() as usize)
        .collect();
    let mut assigned: usize = sizes.iter().sum();
    while assigned > n {
        // only reachable through the rounding guard
        let k = sizes.iter().rposition(|&s| s > 0).expect("positive size");
        sizes[k] -= 1;
        assigned -= 1;
    }
    let receivers: Vec<usize> = (0..fractions.len()).filter(|&k| fractions[k] > 0.0).collect();
    let mut r = 0;
    while assigned < n {
        sizes[receivers[r % receivers.len()]] += 1;
        assigned += 1;
        r += 1;
    }
    Ok(sizes)
}

/// Seeded permutation partition into `fractions.len()` parts.
pub fn split(sample: &Sample, fractions: &[f64], seed: u64) -> Result<Vec<Sample>, DataError> {
    let sizes = split_sizes(sample.len(), fractions)?;
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for (k, &size) in sizes.iter().enumerate() {
        let idx = &order[start..start + size];
        parts.push(Sample {
            points: sample.points.select(idx),
            targets: idx.iter().map(|&i| sample.targets[i]).collect(),
            provenance: Provenance::Derived {
                from: Box::new(sample.provenance.clone()),
                note: format!("split {k} of {fractions:?}, seed {seed}"),
            },
        });
        start += size;
    }
    Ok(parts)
}

/// Train / validation / test split.
pub fn split3(sample: &Sample, fractions: [f64; 3], seed: u64) -> Result<(Sample, Sample, Sample), DataError> {
    let mut parts = split(sample, &fractions, seed)?.into_iter();
    let train = parts.next().expect("three parts");
    let validation = parts.next().expect("three parts");
    let test = parts.next().expect("three parts");
    Ok((train, validation, test))
}

/// Per-column affine map onto `[0, 1]`, fitted on one sample and reusable on
/// others. Constant columns map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(points: &Points) -> Self {
        let d = points.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for x in points.rows() {
            for j in 0..d {
                min[j] = min[j].min(x[j]);
                max[j] = max[j].max(x[j]);
            }
        }
        MinMaxScaler { min, max }
    }

    pub fn transform_points(&self, points: &Points) -> Result<Points, DataError> {
        if points.dim() != self.min.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.min.len(),
                found: points.dim(),
            }
            .into());
        }
        let d = points.dim();
        let mut data = points.as_slice().to_vec();
        for row in data.chunks_mut(d) {
            for j in 0..d {
                let span = self.max[j] - self.min[j];
                row[j] = if span > 0.0 { (row[j] - self.min[j]) / span } else { 0.0 };
            }
        }
        Ok(Points::new(d, data)?)
    }

    pub fn transform(&self, sample: &Sample) -> Result<Sample, DataError> {
        Ok(Sample {
            points: self.transform_points(sample.points())?,
            targets: sample.targets.clone(),
            provenance: Provenance::Derived {
                from: Box::new(sample.provenance.clone()),
                note: "min-max scaled".into(),
            },
        })
    }
}

/// Checks that every label is exactly `-1` or `+1`.
pub fn check_labels(labels: &[f64]) -> Result<(), DataError> {
    match labels.iter().position(|&y| y != 1.0 && y != -1.0) {
        Some(index) => Err(DataError::InvalidLabel {
            index,
            value: labels[index],
        }),
        None => Ok(()),
    }
}

/// Fraction of predictions whose sign (with `sign(0) = +1`) differs from the
/// label.
pub fn misclassification_of_values(values: &[f64], labels: &[f64]) -> Result<f64, DataError> {
    check_labels(labels)?;
    if values.len() != labels.len() {
        return Err(SpaceError::LengthMismatch {
            points: values.len(),
            targets: labels.len(),
        }
        .into());
    }
    if labels.is_empty() {
        return Err(SpaceError::Empty.into());
    }
    let wrong = values
        .iter()
        .zip(labels)
        .filter(|(v, y)| (if **v >= 0.0 { 1.0 } else { -1.0 }) != **y)
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}

pub fn misclassification(h: &HypothesisVector, sample: &Sample) -> Result<f64, DataError> {
    check_labels(sample.targets())?;
    let eval = PointEvaluator::new(h, sample.points(), Execution::default())?;
    misclassification_of_values(&eval.values(h)?, sample.targets())
}
