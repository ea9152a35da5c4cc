use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClassifierKind, EvalConfig, Params};
use crate::change::RankMode;
use crate::features::Representation;

/// Scores are percentages throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub classifier: ClassifierKind,
    pub params: Params,
    pub validation_f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// One representation scored by one classifier: means over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub representation: Representation,
    pub classifier: ClassifierKind,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub folds: Vec<FoldReport>,
}

impl CellReport {
    pub fn from_folds(representation: Representation, classifier: ClassifierKind, folds: Vec<FoldReport>) -> Self {
        let mean = |f: fn(&FoldReport) -> f64| folds.iter().map(f).sum::<f64>() / folds.len().max(1) as f64;
        CellReport {
            representation,
            classifier,
            precision: mean(|f| f.precision),
            recall: mean(|f| f.recall),
            f1: mean(|f| f.f1),
            folds,
        }
    }
}

/// Expected scores of a guesser that answers "positive" with probability
/// `guess_probability` on data with positive rate `positive_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub positive_rate: f64,
    pub guess_probability: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn random_baseline(positive_rate: f64, guess_probability: f64) -> Baseline {
    let (r, p) = (positive_rate, guess_probability);
    let f1 = if r + p == 0.0 { 0.0 } else { 2.0 * r * p / (r + p) };
    Baseline {
        positive_rate: r,
        guess_probability: p,
        precision: r * 100.0,
        recall: p * 100.0,
        f1: f1 * 100.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAverage {
    pub representation: Representation,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub rank_mode: RankMode,
    pub records: usize,
    pub positives: usize,
    pub baseline: Baseline,
    pub cells: Vec<CellReport>,
    /// Mean F1 over classifiers, per representation.
    pub averages: Vec<ModeAverage>,
}

impl EvalReport {
    pub fn new(config: &EvalConfig, rank_mode: RankMode, labels: &[bool], cells: Vec<CellReport>) -> Self {
        let r = config.positive_rate_for_baseline;
        let mut modes: Vec<Representation> = Vec::new();
        for c in &cells {
            if !modes.contains(&c.representation) {
                modes.push(c.representation);
            }
        }
        let averages = modes
            .into_iter()
            .map(|m| {
                let f: Vec<f64> = cells.iter().filter(|c| c.representation == m).map(|c| c.f1).collect();
                ModeAverage {
                    representation: m,
                    f1: f.iter().sum::<f64>() / f.len() as f64,
                }
            })
            .collect();
        EvalReport {
            config: config.clone(),
            rank_mode,
            records: labels.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            baseline: random_baseline(r, r),
            cells,
            averages,
        }
    }

    pub fn cell(&self, mode: Representation, kind: ClassifierKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.representation == mode && c.classifier == kind)
    }

    pub fn average_f1(&self, mode: Representation) -> Option<f64> {
        self.averages.iter().find(|a| a.representation == mode).map(|a| a.f1)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Mean F1 table: one row per representation, one column per classifier
    /// plus the average, under a random-guesser row.
    pub fn to_markdown(&self) -> String {
        let kinds: Vec<ClassifierKind> = self.config.grid.keys().copied().collect();
        let mut out = String::new();
        let _ = write!(out, "| |");
        for k in &kinds {
            let _ = write!(out, " {} |", k.title());
        }
        out.push_str(" Average |\n|---|");
        for _ in &kinds {
            out.push_str("---:|");
        }
        out.push_str("---:|\n");
        let _ = write!(out, "| Random Guesser |");
        for _ in &kinds {
            out.push_str(" |");
        }
        let _ = writeln!(out, " {:.2} |", self.baseline.f1);
        for avg in &self.averages {
            let title = match avg.representation {
                Representation::Metrics => "Metrics",
                Representation::Simple => "Simple",
                Representation::ChangeTree => "Change Tree",
            };
            let _ = write!(out, "| {title} |");
            for &k in &kinds {
                match self.cell(avg.representation, k) {
                    Some(c) => {
                        let _ = write!(out, " {:.2} |", c.f1);
                    }
                    None => out.push_str(" |"),
                }
            }
            let _ = writeln!(out, " {:.2} |", avg.f1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_at_one_fifth() {
        let b = random_baseline(0.2, 0.2);
        assert!((b.f1 - 20.0).abs() < 1e-9);
        assert!((b.precision - 20.0).abs() < 1e-9);
        assert!((b.recall - 20.0).abs() < 1e-9);
        let b = random_baseline(0.2, 0.5);
        assert!((b.f1 - 200.0 * 0.1 / 0.7).abs() < 1e-9);
    }

    #[test]
    fn markdown_layout() {
        let fold = |f1| FoldReport {
            fold: 0,
            classifier: ClassifierKind::Knn,
            params: Params::Knn { k: 1 },
            validation_f1: 0.0,
            tp: 0,
            fp: 0,
            fn_: 0,
            precision: 0.0,
            recall: 0.0,
            f1,
            degenerate: false,
        };
        let mut cfg = EvalConfig::default();
        cfg.grid.retain(|k, _| *k == ClassifierKind::Knn);
        let cells = vec![
            CellReport::from_folds(Representation::Metrics, ClassifierKind::Knn, vec![fold(10.0), fold(20.0)]),
            CellReport::from_folds(Representation::ChangeTree, ClassifierKind::Knn, vec![fold(40.0)]),
        ];
        let report = EvalReport::new(&cfg, RankMode::None, &[true, false], cells);
        assert_eq!(report.average_f1(Representation::Metrics), Some(15.0));
        let md = report.to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| | KNN | Average |");
        assert_eq!(lines[2], "| Random Guesser | | 20.00 |");
        assert_eq!(lines[3], "| Metrics | 15.00 | 15.00 |");
        assert_eq!(lines[4], "| Change Tree | 40.00 | 40.00 |");
        assert!(report.to_json().contains("\"fn\": 0"));
    }
}
