//! LIBSVM-format datasets, feature scaling, stratified folds and per-class
//! subsampling.

use std::io::BufRead;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sparse feature vector with 1-based, strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev = 0;
        for &(i, v) in &entries {
            if i <= prev {
                return Err(Error::InvalidConfig(format!(
                    "feature indices must be 1-based and strictly increasing, got {i} after {prev}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("feature value"));
            }
            prev = i;
        }
        Ok(SparseVector { entries })
    }

    /// Builds from a dense slice, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i + 1, *v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i - 1] = v;
        }
        out
    }

    /// `wᵀx`; `w[0]` weighs feature 1.
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i - 1] * v).sum()
    }

    /// `out += alpha * x`.
    pub fn add_scaled_to(&self, alpha: f64, out: &mut [f64]) {
        for &(i, v) in &self.entries {
            out[i - 1] += alpha * v;
        }
    }
}

/// Binary dataset split into its positive and negative classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dim: usize,
    pub positives: Vec<SparseVector>,
    pub negatives: Vec<SparseVector>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        positives: Vec<SparseVector>,
        negatives: Vec<SparseVector>,
    ) -> Result<Self> {
        if let Some(x) = positives
            .iter()
            .chain(&negatives)
            .find(|x| x.max_index() > dim)
        {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.max_index(),
            });
        }
        Ok(LabeledDataset {
            dim,
            positives,
            negatives,
        })
    }

    pub fn from_dense(positives: &[Vec<f64>], negatives: &[Vec<f64>]) -> Result<Self> {
        let dim = positives
            .iter()
            .chain(negatives)
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        Self::new(
            dim,
            positives
                .iter()
                .map(|x| SparseVector::from_dense(x))
                .collect(),
            negatives
                .iter()
                .map(|x| SparseVector::from_dense(x))
                .collect(),
        )
    }

    pub fn n_pos(&self) -> usize {
        self.positives.len()
    }

    pub fn n_neg(&self) -> usize {
        self.negatives.len()
    }

    pub fn len(&self) -> usize {
        self.n_pos() + self.n_neg()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scores `wᵀx` for every positive and every negative example.
    pub fn scores(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_weights(w)?;
        Ok((
            self.positives.iter().map(|x| x.dot(w)).collect(),
            self.negatives.iter().map(|x| x.dot(w)).collect(),
        ))
    }

    pub(crate) fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: w.len(),
            });
        }
        Ok(())
    }

    /// Dataset restricted to the given example indices of each class.
    pub fn subset(&self, pos: &[usize], neg: &[usize]) -> LabeledDataset {
        LabeledDataset {
            dim: self.dim,
            positives: pos.iter().map(|&i| self.positives[i].clone()).collect(),
            negatives: neg.iter().map(|&i| self.negatives[i].clone()).collect(),
        }
    }

    /// LIBSVM text: `+1`/`-1` labels, positives first.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (label, xs) in [("+1", &self.positives), ("-1", &self.negatives)] {
            for x in xs {
                out.push_str(label);
                for (i, v) in x.entries() {
                    out.push_str(&format!(" {i}:{v}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Parses LIBSVM text: one `<label> <index>:<value> ...` example per line,
/// `#` starts a comment. With two distinct labels, `1` is the positive one if
/// present, otherwise the larger label is.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LabeledDataset> {
    let mut rows: Vec<(f64, SparseVector)> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut dim = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            line: lineno,
            reason,
        };
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|l: &f64| l.is_finite())
            .ok_or_else(|| err(format!("invalid label `{label_tok}`")))?;
        if !labels.contains(&label) {
            if labels.len() == 2 {
                return Err(err(format!(
                    "third distinct label `{label_tok}`; only binary data is supported"
                )));
            }
            labels.push(label);
        }
        let mut entries = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("invalid feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!(
                    "feature indices not increasing ({idx} after {prev})"
                )));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("invalid feature value `{val}`")))?;
            prev = idx;
            entries.push((idx, val));
        }
        dim = dim.max(prev);
        rows.push((label, SparseVector { entries }));
    }

    let positive = if labels.contains(&1.0) {
        1.0
    } else if labels.len() == 2 {
        labels[0].max(labels[1])
    } else {
        f64::NAN
    };
    let (mut positives, mut negatives) = (Vec::new(), Vec::new());
    for (label, x) in rows {
        if label == positive {
            positives.push(x);
        } else {
            negatives.push(x);
        }
    }
    LabeledDataset::new(dim, positives, negatives)
}

pub fn read_libsvm_file(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_libsvm(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// Affine map of each feature's range onto `[-1, 1]`.
    MinMax,
    /// Zero mean, unit (population) variance per feature.
    Standardize,
}

/// Rescales every feature over the whole dataset. Constant features map to 0.
pub fn scale_features(data: &LabeledDataset, mode: ScalingMode) -> LabeledDataset {
    let d = data.dim;
    let n = data.len();
    if n == 0 {
        return data.clone();
    }
    let dense: Vec<Vec<f64>> = data
        .positives
        .iter()
        .chain(&data.negatives)
        .map(|x| x.to_dense(d))
        .collect();
    let transform: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let col = dense.iter().map(|r| r[j]);
            match mode {
                ScalingMode::MinMax => {
                    let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                    if hi > lo {
                        let a = 2.0 / (hi - lo);
                        (a, -1.0 - a * lo)
                    } else {
                        (0.0, 0.0)
                    }
                }
                ScalingMode::Standardize => {
                    let mean = col.clone().sum::<f64>() / n as f64;
                    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    let sd = var.sqrt();
                    if sd > 0.0 {
                        (1.0 / sd, -mean / sd)
                    } else {
                        (0.0, 0.0)
                    }
                }
            }
        })
        .collect();
    let (floor, ceil) = match mode {
        ScalingMode::MinMax => (-1.0, 1.0),
        ScalingMode::Standardize => (f64::MIN, f64::MAX),
    };
    let map = |row: &Vec<f64>| {
        let scaled: Vec<f64> = row
            .iter()
            .zip(&transform)
            .map(|(v, (a, b))| (a * v + b).clamp(floor, ceil))
            .collect();
        SparseVector::from_dense(&scaled)
    };
    let (pos, neg) = dense.split_at(data.n_pos());
    LabeledDataset {
        dim: d,
        positives: pos.iter().map(map).collect(),
        negatives: neg.iter().map(map).collect(),
    }
}

/// Stratified assignment of examples to `k` folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub pos_folds: Vec<usize>,
    pub neg_folds: Vec<usize>,
}

pub fn make_folds(data: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidConfig("fold count must be positive".into()));
    }
    for (class, size) in [("positive", data.n_pos()), ("negative", data.n_neg())] {
        if size < k {
            return Err(Error::ClassTooSmall {
                class,
                size,
                folds: k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = |n: usize| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut folds = vec![0; n];
        for (slot, &i) in order.iter().enumerate() {
            folds[i] = slot % k;
        }
        folds
    };
    let pos_folds = assign(data.n_pos());
    let neg_folds = assign(data.n_neg());
    Ok(FoldPlan {
        k,
        seed,
        pos_folds,
        neg_folds,
    })
}

impl FoldPlan {
    /// Examples whose fold is in `folds`.
    pub fn select(&self, data: &LabeledDataset, folds: &[usize]) -> LabeledDataset {
        let pick = |assign: &[usize]| -> Vec<usize> {
            (0..assign.len())
                .filter(|&i| folds.contains(&assign[i]))
                .collect()
        };
        data.subset(&pick(&self.pos_folds), &pick(&self.neg_folds))
    }

    /// `(train, test)` with `test_fold` held out.
    pub fn split(
        &self,
        data: &LabeledDataset,
        test_fold: usize,
    ) -> (LabeledDataset, LabeledDataset) {
        let train: Vec<usize> = (0..self.k).filter(|&f| f != test_fold).collect();
        (self.select(data, &train), self.select(data, &[test_fold]))
    }
}

pub fn split(
    data: &LabeledDataset,
    plan: &FoldPlan,
    test_fold: usize,
) -> (LabeledDataset, LabeledDataset) {
    plan.split(data, test_fold)
}

/// Per-class uniform sample without replacement; indices keep their
/// original order.
pub fn sample_class_indices<R: Rng + ?Sized>(
    data: &LabeledDataset,
    n_pos: usize,
    n_neg: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut draw = |class: &'static str, available: usize, requested: usize| {
        if requested == 0 {
            return Err(Error::EmptyClass(class));
        }
        if requested > available {
            return Err(Error::OversizedSample {
                class,
                requested,
                available,
            });
        }
        if requested == available {
            return Ok((0..available).collect());
        }
        let mut idx = index::sample(rng, available, requested).into_vec();
        idx.sort_unstable();
        Ok(idx)
    };
    let pos = draw("positive", data.n_pos(), n_pos)?;
    let neg = draw("negative", data.n_neg(), n_neg)?;
    Ok((pos, neg))
}

pub fn subsample_classes<R: Rng + ?Sized>(
    data: &LabeledDataset,
    n_pos: usize,
    n_neg: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let (pos, neg) = sample_class_indices(data, n_pos, n_neg, rng)?;
    Ok(data.subset(&pos, &neg))
}
