//! Cross-validated comparison of change representations.
//!
//! Each representation is scored with stratified k-fold cross-validation.
//! Inside a training fold, a stratified validation split picks the
//! hyperparameters of each classifier; the winner is then refitted on the
//! (upsampled) training fold and scored on the untouched test fold.

mod classifiers;
mod report;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::change::RankMode;
use crate::embed::EmbeddingModel;
use crate::error::EvalError;
use crate::features::{parse_record, represent_parsed, ChangeRecord, Representation};

pub use classifiers::{Classifier, ClassifierKind, Params, LOGISTIC_ITERATIONS};
pub use report::{random_baseline, Baseline, CellReport, EvalReport, FoldReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub upsample_to_balance: bool,
    pub seed: u64,
    pub grid: BTreeMap<ClassifierKind, Vec<Params>>,
    pub positive_rate_for_baseline: f64,
    /// Share of each training fold held out for hyperparameter selection.
    pub validation_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            upsample_to_balance: true,
            seed: 0,
            grid: ClassifierKind::ALL
                .into_iter()
                .map(|k| (k, k.default_grid()))
                .collect(),
            positive_rate_for_baseline: 0.2,
            validation_fraction: 0.2,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.grid.is_empty() {
            return bad("no classifiers configured".into());
        }
        for (kind, grid) in &self.grid {
            if grid.is_empty() {
                return bad(format!("empty grid for {kind}"));
            }
            for p in grid {
                if p.kind() != *kind {
                    return bad(format!("{p:?} listed under {kind}"));
                }
                p.validate().map_err(EvalError::InvalidConfig)?;
            }
        }
        if !(self.positive_rate_for_baseline > 0.0 && self.positive_rate_for_baseline <= 1.0) {
            return bad("positive_rate_for_baseline must be in (0, 1]".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0, 1)".into());
        }
        Ok(())
    }
}

/// Precision, recall and F1 as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No positives predicted and none present: all three scores are 0 by
    /// convention rather than by measurement.
    pub degenerate: bool,
}

pub fn scores(tp: u64, fp: u64, fn_: u64) -> Scores {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let (f1, degenerate) = f1(tp, fp, fn_);
    Scores {
        precision,
        recall,
        f1,
        degenerate,
    }
}

/// F1 and whether the input was the degenerate all-zero case.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> (f64, bool) {
    if tp == 0 {
        return (0.0, fp == 0 && fn_ == 0);
    }
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN).
    (2.0 * tp as f64 / (2 * tp + fp + fn_) as f64, false)
}

/// A train/test split of dataset indices, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(indices: &[usize], labels: &[bool]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &i in indices {
        out[usize::from(labels[i])].push(i);
    }
    out
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `0..labels.len()` into `k` stratified folds. Each class is
/// shuffled and dealt round-robin, the dealing continuing across classes, so
/// fold sizes and per-fold class counts each differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Split>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let classes = class_indices(&all, labels);
    let minority = classes[0].len().min(classes[1].len());
    if minority < k {
        return Err(EvalError::TooFewSamples(format!(
            "{k} folds need at least {k} samples of each class, the smaller class has {minority}"
        )));
    }
    let mut rng = seeded(seed, 1);
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0;
    // Positives first so that the smaller class is spread from fold 0.
    for mut members in classes.into_iter().rev() {
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| fold_of[i] == f);
            Split { train, test }
        })
        .collect())
}

/// Splits `indices` into (train, validation), holding out
/// `round(fraction * n)` samples of each class, but never all or none of a
/// class with at least two members.
pub fn stratified_holdout(
    indices: &[usize],
    labels: &[bool],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seeded(seed, 2);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for mut members in class_indices(indices, labels).into_iter().rev() {
        members.shuffle(&mut rng);
        let n = members.len();
        let held = if n < 2 {
            0
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        validation.extend_from_slice(&members[..held]);
        train.extend_from_slice(&members[held..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    (train, validation)
}

/// Adds minority-class indices, drawn with replacement, until both classes
/// are equally common. Inputs with a missing class are returned unchanged.
pub fn upsample(indices: &[usize], labels: &[bool], seed: u64) -> Vec<usize> {
    let [neg, pos] = class_indices(indices, labels);
    let mut out = indices.to_vec();
    if neg.is_empty() || pos.is_empty() {
        return out;
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut rng = seeded(seed, 3);
    out.extend((0..deficit).map(|_| minority[rng.gen_range(0..minority.len())]));
    out
}

fn confusion(model: &Classifier, x: &[Vec<f64>], y: &[bool], rows: &[usize]) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &i in rows {
        match (model.predict(&x[i]), y[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    (tp, fp, fn_)
}

fn gather(x: &[Vec<f64>], y: &[bool], rows: &[usize]) -> (Vec<Vec<f64>>, Vec<bool>) {
    (rows.iter().map(|&i| x[i].clone()).collect(), rows.iter().map(|&i| y[i]).collect())
}

/// Derives independent seeds for the numbered steps of one fold.
fn fold_seed(seed: u64, fold: usize, step: u64) -> u64 {
    let mut z = seed
        .wrapping_add((fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(step.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_fold(
    x: &[Vec<f64>],
    y: &[bool],
    fold: usize,
    split: &Split,
    kind: ClassifierKind,
    grid: &[Params],
    config: &EvalConfig,
) -> Result<FoldReport, EvalError> {
    let balance = |rows: &[usize], step| {
        if config.upsample_to_balance {
            upsample(rows, y, fold_seed(config.seed, fold, step))
        } else {
            rows.to_vec()
        }
    };

    let (inner, validation) =
        stratified_holdout(&split.train, y, config.validation_fraction, fold_seed(config.seed, fold, 1));
    let (ix, iy) = gather(x, y, &balance(&inner, 2));
    let mut best: Option<(f64, Params)> = None;
    for params in grid {
        let model = Classifier::fit(params, &ix, &iy)?;
        let (tp, fp, fn_) = confusion(&model, x, y, &validation);
        let score = f1(tp, fp, fn_).0;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, *params));
        }
    }
    let (validation_f1, params) = best.expect("grids are nonempty");

    let (tx, ty) = gather(x, y, &balance(&split.train, 3));
    let model = Classifier::fit(&params, &tx, &ty)?;
    let (tp, fp, fn_) = confusion(&model, x, y, &split.test);
    let s = scores(tp, fp, fn_);
    Ok(FoldReport {
        fold,
        classifier: kind,
        params,
        validation_f1: validation_f1 * 100.0,
        tp,
        fp,
        fn_,
        precision: s.precision * 100.0,
        recall: s.recall * 100.0,
        f1: s.f1 * 100.0,
        degenerate: s.degenerate,
    })
}

/// Cross-validates every configured classifier on one feature matrix.
///
/// Folds run in parallel when `parallel` is set; each fold is seeded on its
/// own, so results do not depend on scheduling.
pub fn evaluate_features(
    x: &[Vec<f64>],
    y: &[bool],
    mode: Representation,
    config: &EvalConfig,
    parallel: bool,
) -> Result<Vec<CellReport>, EvalError> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(EvalError::InvalidConfig(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let Some(first) = x.first() else {
        return Err(EvalError::EmptyTraining);
    };
    if let Some(row) = x.iter().find(|r| r.len() != first.len()) {
        return Err(EvalError::DimensionMismatch {
            expected: first.len(),
            found: row.len(),
        });
    }
    let splits = stratified_folds(y, config.folds, config.seed)?;
    let jobs: Vec<(ClassifierKind, usize)> = config
        .grid
        .keys()
        .flat_map(|&k| (0..splits.len()).map(move |f| (k, f)))
        .collect();
    let job = |&(kind, fold): &(ClassifierKind, usize)| {
        run_fold(x, y, fold, &splits[fold], kind, &config.grid[&kind], config)
    };
    let folds: Vec<FoldReport> = if parallel {
        jobs.par_iter().map(job).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(job).collect::<Result<_, _>>()?
    };

    Ok(config
        .grid
        .keys()
        .map(|&kind| {
            let mine: Vec<FoldReport> = folds.iter().filter(|f| f.classifier == kind).cloned().collect();
            CellReport::from_folds(mode, kind, mine)
        })
        .collect())
}

/// Featurizes `records` under each mode and cross-validates every
/// classifier on each. Embedding modes need `model`.
pub fn run_experiment(
    records: &[ChangeRecord],
    modes: &[Representation],
    config: &EvalConfig,
    model: Option<&EmbeddingModel>,
    rank_mode: RankMode,
    parallel: bool,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let parse = |r: &ChangeRecord| parse_record(r);
    let parsed = if parallel {
        records.par_iter().map(parse).collect::<Result<Vec<_>, _>>()?
    } else {
        records.iter().map(parse).collect::<Result<Vec<_>, _>>()?
    };
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();

    let mut cells = Vec::new();
    for &mode in modes {
        let featurize = |p| represent_parsed(p, mode, model, rank_mode).map(|v| v.values);
        let x: Vec<Vec<f64>> = if parallel {
            parsed.par_iter().map(featurize).collect::<Result<_, _>>()?
        } else {
            parsed.iter().map(featurize).collect::<Result<_, _>>()?
        };
        cells.extend(evaluate_features(&x, &labels, mode, config, parallel)?);
    }
    Ok(EvalReport::new(config, rank_mode, &labels, cells))
}
