//! Dataset representation, CSV I/O, fold splitting, and the synthetic
//! Bayesian-network data generator.
//!
//! Datasets pair an `N x D` real feature matrix with an `N x L` binary
//! label matrix. On disk they are stored as headered CSV with the label
//! columns leftmost; label cells are the literal characters `0`/`1`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense row-major matrix of {0,1} entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "label matrix length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::input("label matrix entries must be 0 or 1"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::input("label rows have inconsistent lengths"));
            }
            data.extend_from_slice(row);
        }
        Self::new(n, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u8) {
        debug_assert!(value <= 1);
        self.data[i * self.cols + j] = value;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Number of ones in column `j`.
    pub fn column_sum(&self, j: usize) -> usize {
        (0..self.rows).map(|i| self.get(i, j) as usize).sum()
    }
}

/// A multi-label dataset: `N` instances of `D` real features and `L`
/// binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>, // row-major N x D
    labels: LabelMatrix,
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: LabelMatrix,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.rows();
        let d = feature_names.len();
        if n == 0 {
            return Err(Error::input("no instances"));
        }
        if d == 0 || labels.cols() == 0 {
            return Err(Error::input("dataset needs at least one feature and one label"));
        }
        if features.len() != n * d {
            return Err(Error::input(format!(
                "feature matrix length {} does not match {}x{}",
                features.len(),
                n,
                d
            )));
        }
        if label_names.len() != labels.cols() {
            return Err(Error::input("label name count does not match label columns"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature values must be finite"));
        }
        Ok(Self {
            n,
            d,
            features,
            labels,
            feature_names,
            label_names,
        })
    }

    pub fn from_rows(feature_rows: &[Vec<f64>], label_rows: &[Vec<u8>]) -> Result<Self> {
        if feature_rows.len() != label_rows.len() {
            return Err(Error::input("feature and label row counts differ"));
        }
        let d = feature_rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(feature_rows.len() * d);
        for row in feature_rows {
            if row.len() != d {
                return Err(Error::input("feature rows have inconsistent lengths"));
            }
            features.extend_from_slice(row);
        }
        let labels = LabelMatrix::from_rows(label_rows)?;
        let l = labels.cols();
        Dataset::new(features, labels, default_names("x", d), default_names("y", l))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.labels.cols()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(idx.len() * self.d);
        let mut labels = Vec::with_capacity(idx.len() * self.l());
        for &i in idx {
            if i >= self.n {
                return Err(Error::input(format!("row index {i} out of range")));
            }
            features.extend_from_slice(self.feature_row(i));
            labels.extend_from_slice(self.labels.row(i));
        }
        Dataset::new(
            features,
            LabelMatrix::new(idx.len(), self.l(), labels)?,
            self.feature_names.clone(),
            self.label_names.clone(),
        )
    }
}

pub(crate) fn default_names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Loads a dataset from the CSV dialect used by this crate: one header
/// line, the first `label_count` columns are labels, the rest features.
pub fn load_dataset(path: impl AsRef<Path>, label_count: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, label_count)
}

pub(crate) fn parse_csv(text: &str, label_count: usize) -> Result<Dataset> {
    if label_count < 1 {
        return Err(Error::config("label_count must be at least 1"));
    }
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let cols = names.len();
    if label_count >= cols {
        return Err(Error::config(format!(
            "label_count {label_count} must leave at least one feature column ({cols} columns present)"
        )));
    }
    let label_names: Vec<String> = names[..label_count].iter().map(|s| s.to_string()).collect();
    let feature_names: Vec<String> = names[label_count..].iter().map(|s| s.to_string()).collect();
    let d = cols - label_count;

    let mut labels = Vec::new();
    let mut features = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(Error::parse(
                line_no,
                format!("expected {} cells, found {}", cols, cells.len()),
            ));
        }
        for cell in &cells[..label_count] {
            match *cell {
                "0" => labels.push(0),
                "1" => labels.push(1),
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("label cell `{other}` is not 0 or 1"),
                    ))
                }
            }
        }
        for cell in &cells[label_count..] {
            let value: f64 = cell.parse().map_err(|_| {
                Error::parse(line_no, format!("feature cell `{cell}` is not a number"))
            })?;
            if !value.is_finite() {
                return Err(Error::parse(
                    line_no,
                    format!("feature cell `{cell}` is not finite"),
                ));
            }
            features.push(value);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::parse(2, "no instances"));
    }
    Dataset::new(
        features,
        LabelMatrix::new(n, label_count, labels)?,
        feature_names,
        label_names,
    )
}

/// Writes a dataset in the CSV dialect read by [`load_dataset`].
///
/// Labels round-trip bit-exactly; features round-trip through the
/// shortest decimal representation of an `f64`.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_csv_string(dataset))?;
    Ok(())
}

pub(crate) fn to_csv_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    let header: Vec<&str> = dataset
        .label_names
        .iter()
        .chain(dataset.feature_names.iter())
        .map(String::as_str)
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..dataset.n {
        for (j, bit) in dataset.labels.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push(if *bit == 1 { '1' } else { '0' });
        }
        for value in dataset.feature_row(i) {
            let _ = write!(out, ",{value}");
        }
        out.push('\n');
    }
    out
}

/// Assignment of `n` instances to `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// (train, test) index lists for one fold, both in ascending order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Seeded k-fold split; fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("fold count must be at least 2"));
    }
    if k > n {
        return Err(Error::config(format!(
            "fold count {k} exceeds instance count {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

/// Ground truth of the synthetic Bayesian-network generator: a one-parent
/// DAG over the labels plus the per-label weight vectors.
#[derive(Debug, Clone)]
pub struct GroundTruthGraph {
    pub parent: Vec<Option<usize>>,
    /// L x D binary matrix; each row has exactly `t` ones.
    pub weights: LabelMatrix,
    pub alpha: f64,
    pub sigma2: f64,
    pub delta: f64,
    pub t: usize,
}

impl GroundTruthGraph {
    pub fn l(&self) -> usize {
        self.parent.len()
    }

    /// Undirected edge set {min, max} of the parent relation.
    pub fn undirected_edges(&self) -> BTreeSet<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(child, p)| p.map(|p| (p.min(child), p.max(child))))
            .collect()
    }
}

/// Generates a synthetic dataset from a random one-parent label DAG.
///
/// Features are i.i.d. standard normal. Label `l` is set iff
/// `t^{-1/2} * w_l . x + eps_l >= delta` with
/// `eps_l ~ N(alpha * s(pa(l)), sigma2)`, where `s` maps the parent's
/// stored {0,1} value to {-1,+1} and is taken as 0 for root labels.
/// Labels are generated parent-first; the returned matrix stores {0,1}.
pub fn generate_bn_dataset(
    n: usize,
    d: usize,
    l: usize,
    t: usize,
    alpha: f64,
    sigma2: f64,
    delta: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruthGraph)> {
    if n < 1 {
        return Err(Error::config("instance count must be at least 1"));
    }
    if d < 1 || l < 1 {
        return Err(Error::config("d and l must be at least 1"));
    }
    if t < 1 || t > d {
        return Err(Error::config(format!("t must satisfy 1 <= t <= d, got t={t}, d={d}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::config("sigma2 must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Each non-first label independently gets no parent or one uniformly
    // chosen earlier label, with probability 1/2 each.
    let mut parent: Vec<Option<usize>> = vec![None; l];
    for (i, p) in parent.iter_mut().enumerate().skip(1) {
        if rng.random::<bool>() {
            *p = Some(rng.random_range(0..i));
        }
    }

    let mut weights = LabelMatrix::zeros(l, d);
    for li in 0..l {
        for j in rand::seq::index::sample(&mut rng, d, t) {
            weights.set(li, j, 1);
        }
    }

    let scale = 1.0 / (t as f64).sqrt();
    let sigma = sigma2.sqrt();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = LabelMatrix::zeros(n, l);
    for i in 0..n {
        let row_start = features.len();
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            features.push(z);
        }
        let x = &features[row_start..];
        for li in 0..l {
            let signal: f64 = (0..d)
                .filter(|&j| weights.get(li, j) == 1)
                .map(|j| x[j])
                .sum();
            let parent_term = match parent[li] {
                Some(p) => alpha * if labels.get(i, p) == 1 { 1.0 } else { -1.0 },
                None => 0.0,
            };
            let noise: f64 = rng.sample(StandardNormal);
            let eps = parent_term + sigma * noise;
            if scale * signal + eps >= delta {
                labels.set(i, li, 1);
            }
        }
    }

    let dataset = Dataset::new(features, labels, default_names("x", d), default_names("y", l))?;
    let truth = GroundTruthGraph {
        parent,
        weights,
        alpha,
        sigma2,
        delta,
        t,
    };
    Ok((dataset, truth))
}

/// Mean number of active labels per instance.
pub fn label_cardinality(dataset: &Dataset) -> f64 {
    let total: usize = dataset
        .labels()
        .iter_rows()
        .map(|row| row.iter().map(|&b| b as usize).sum::<usize>())
        .sum();
    total as f64 / dataset.n() as f64
}
