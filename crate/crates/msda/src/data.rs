//! Data containers, CSV ingestion and model-file serialization.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classify::FittedClassifier;
use crate::solver::CoefMatrix;
use crate::{Error, Result};

/// How to locate the label column of a CSV file.
#[derive(Clone, Debug)]
pub enum LabelColumn {
    /// Header name (requires a header row).
    Name(String),
    /// 0-based position among all columns.
    Index(usize),
}

/// An `n x p` feature matrix with class labels in `1..=K`.
///
/// Class indices follow first appearance order for string labels, or the
/// literal values for integer labels. Class 1 is the baseline class used
/// for the mean differences; [`LabeledDataset::with_baseline`] re-bases.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
    label_names: Vec<String>,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Builds a dataset and checks its invariants: every label in `1..=K`
    /// with every class populated, `n >= K + 1`, and finite features.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        label_names: Option<Vec<String>>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if n == 0 {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        let k = *labels.iter().max().unwrap();
        if labels.iter().any(|&y| y == 0) {
            return Err(Error::InvalidData("class indices start at 1".into()));
        }
        let mut counts = vec![0usize; k];
        for &y in &labels {
            counts[y - 1] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidData(format!(
                "class {} has zero rows",
                empty + 1
            )));
        }
        if n <= k {
            return Err(Error::InvalidData(format!(
                "n <= K: {n} rows cannot support {k} classes (pooled covariance needs n - K > 0)"
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData(
                "features contain non-finite values".into(),
            ));
        }
        let label_names =
            label_names.unwrap_or_else(|| (1..=k).map(|c| c.to_string()).collect());
        if label_names.len() != k {
            return Err(Error::InvalidInput(format!(
                "{} label names for {} classes",
                label_names.len(),
                k
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != features.ncols() {
                return Err(Error::InvalidInput(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    features.ncols()
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            k,
            label_names,
            feature_names,
        })
    }

    /// Reads a CSV file. Label values that all parse as integers are taken
    /// literally as class indices `1..=K`; otherwise labels are mapped to
    /// `1..=K` in order of first appearance.
    pub fn load_csv(path: &Path, label: &LabelColumn, has_header: bool) -> Result<Self> {
        if !path.exists() {
            return Err(Error::InvalidInput(format!(
                "no such file: {}",
                path.display()
            )));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_path(path)?;

        let header: Option<Vec<String>> = if has_header {
            Some(reader.headers()?.iter().map(str::to_owned).collect())
        } else {
            None
        };

        let mut raw_labels: Vec<String> = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut label_idx: Option<usize> = match label {
            LabelColumn::Index(i) => Some(*i),
            LabelColumn::Name(name) => match &header {
                Some(h) => Some(h.iter().position(|c| c == name).ok_or_else(|| {
                    Error::InvalidInput(format!("label column {name:?} not in header"))
                })?),
                None => {
                    return Err(Error::InvalidInput(
                        "label column by name requires a header row".into(),
                    ))
                }
            },
        };

        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let li = match label_idx {
                Some(i) if i < record.len() => i,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "label column index out of range on row {r}"
                    )))
                }
            };
            label_idx = Some(li);
            let mut row = Vec::with_capacity(record.len().saturating_sub(1));
            for (c, cell) in record.iter().enumerate() {
                if c == li {
                    raw_labels.push(cell.to_owned());
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::InvalidInput(format!(
                            "non-numeric feature cell {cell:?} at row {r}, column {c}"
                        ))
                    })?;
                    row.push(v);
                }
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::InvalidInput(format!(
                        "row {r} has {} feature cells, expected {}",
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidData("empty dataset".into()));
        }

        let (labels, label_names) = map_labels(&raw_labels)?;
        let p = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((labels.len(), p), flat)
            .expect("row lengths checked above");

        let feature_names = header.map(|h| {
            h.into_iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != label_idx)
                .map(|(_, c)| c)
                .collect()
        });

        Self::new(features, labels, Some(label_names), feature_names)
    }

    /// Re-bases so that the class currently named `label` becomes class 1
    /// (the reference class of the mean differences). The chosen class and
    /// the old class 1 swap indices; everything else is untouched.
    pub fn with_baseline(&self, label: &str) -> Result<Self> {
        let b = self
            .label_names
            .iter()
            .position(|name| name == label)
            .ok_or_else(|| Error::InvalidInput(format!("no class labelled {label:?}")))?
            + 1;
        if b == 1 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for y in &mut out.labels {
            if *y == 1 {
                *y = b;
            } else if *y == b {
                *y = 1;
            }
        }
        out.label_names.swap(0, b - 1);
        Ok(out)
    }

    /// Dataset restricted to the given rows (e.g. a cross-validation fold
    /// complement). Fails if the subset violates the dataset invariants.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::new(
            features,
            labels,
            Some(self.label_names.clone()),
            self.feature_names.clone(),
        )
    }

    /// Dataset restricted to the given feature columns, in the given order.
    pub fn restrict_columns(&self, keep: &[usize]) -> Self {
        let features = self.features.select(ndarray::Axis(1), keep);
        let feature_names = self
            .feature_names
            .as_ref()
            .map(|names| keep.iter().map(|&j| names[j].clone()).collect());
        Self {
            features,
            labels: self.labels.clone(),
            k: self.k,
            label_names: self.label_names.clone(),
            feature_names,
        }
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> ndarray::ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Class indices in `1..=K`, one per row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Original representation of each class, indexed by `class - 1`.
    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }
}

fn map_labels(raw: &[String]) -> Result<(Vec<usize>, Vec<String>)> {
    let as_ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse().ok()).collect();
    if let Some(ints) = as_ints {
        let max = *ints.iter().max().unwrap();
        let min = *ints.iter().min().unwrap();
        if min < 1 {
            return Err(Error::InvalidData(format!(
                "integer labels must lie in 1..=K, found {min}"
            )));
        }
        let labels = ints.into_iter().map(|v| v as usize).collect();
        let names = (1..=max).map(|c| c.to_string()).collect();
        return Ok((labels, names));
    }
    // first-appearance mapping for string labels
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(raw.len());
    for s in raw {
        let idx = match names.iter().position(|n| n == s) {
            Some(i) => i,
            None => {
                names.push(s.clone());
                names.len() - 1
            }
        };
        labels.push(idx + 1);
    }
    Ok((labels, names))
}

/// Schema version written into every model file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArtifactMetadata {
    /// Producing tool and version, e.g. `msda 0.1.0`.
    pub tool: String,
    pub seed: u64,
    pub label_names: Vec<String>,
    pub feature_names: Option<Vec<String>>,
}

/// A fitted model as persisted on disk: discriminant coefficients, the
/// projected LDA rule, the penalty they were fit at, and (when screening
/// was applied) the map from retained to original feature indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub coef: CoefMatrix,
    pub classifier: FittedClassifier,
    pub lambda: f64,
    pub screening_map: Option<Vec<usize>>,
    pub metadata: ArtifactMetadata,
}

impl ModelArtifact {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ModelFile(format!(
                "schema version {} (this build reads {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        self.coef
            .validate()
            .map_err(|e| Error::ModelFile(format!("coefficients: {e}")))?;
        let (p, m) = (self.coef.p(), self.coef.n_directions());
        if self.classifier.projection().dim() != (p, m) {
            return Err(Error::ModelFile(format!(
                "coef is {}x{} but classifier projection is {}x{}",
                p,
                m,
                self.classifier.projection().nrows(),
                self.classifier.projection().ncols()
            )));
        }
        if self.metadata.label_names.len() != m + 1 {
            return Err(Error::ModelFile(format!(
                "{} label names for {} discriminant directions",
                self.metadata.label_names.len(),
                m
            )));
        }
        if let Some(map) = &self.screening_map {
            if map.len() != p {
                return Err(Error::ModelFile(format!(
                    "screening map has {} entries for {} retained features",
                    map.len(),
                    p
                )));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::ModelFile("lambda must be finite and >= 0".into()));
        }
        self.classifier
            .validate()
            .map_err(|e| Error::ModelFile(format!("classifier: {e}")))
    }

    /// Writes the artifact as schema-versioned JSON. Floating point values
    /// are written as the shortest decimal text that parses back to the
    /// identical binary64 value, so a load of the written file reproduces
    /// the artifact exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::ModelFile(format!("write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFile(format!("parse {}: {e}", path.display())))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(Error::ModelFile(format!(
                    "schema version {v} (this build reads {SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::ModelFile("missing schema_version".into())),
        }
        let artifact: Self = serde_json::from_value(value)
            .map_err(|e| Error::ModelFile(format!("decode {}: {e}", path.display())))?;
        artifact.validate()?;
        Ok(artifact)
    }
}
