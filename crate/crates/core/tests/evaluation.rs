use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cctree::change::RankMode;
use cctree::eval::{evaluate_features, random_baseline, EvalConfig, EvalReport};
use cctree::features::Representation;

/// Features and labels drawn independently, 20% positive.
fn noise(n: usize, width: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| (0..width).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut y: Vec<bool> = (0..n).map(|i| i % 5 == 0).collect();
    for i in (1..n).rev() {
        y.swap(i, rng.gen_range(0..=i));
    }
    (x, y)
}

#[test]
fn uninformative_features_score_like_guessing() {
    let (x, y) = noise(1000, 5, 11);
    let config = EvalConfig {
        seed: 3,
        ..EvalConfig::default()
    };
    let cells = evaluate_features(&x, &y, Representation::Metrics, &config, true).unwrap();
    let r = 0.2;
    for cell in &cells {
        // A guesser that calls positive with probability q on data with
        // positive rate r has expected F1 2rq/(r+q); q is the classifier's
        // observed positive-call rate.
        let called: u64 = cell.folds.iter().map(|f| f.tp + f.fp).sum();
        let q = called as f64 / y.len() as f64;
        let expected = 100.0 * 2.0 * r * q / (r + q);
        assert!(
            (cell.f1 - expected).abs() <= 5.0,
            "{}: F1 {:.2} vs expected {:.2} at q={q:.3}",
            cell.classifier,
            cell.f1,
            expected
        );
        assert!(cell.f1 < 40.0, "{} found signal in noise: {:.2}", cell.classifier, cell.f1);
    }

    let report = EvalReport::new(&config, RankMode::None, &y, cells);
    assert_eq!(report.baseline, random_baseline(0.2, 0.2));
    assert!((report.baseline.f1 - 20.0).abs() < 1e-9);
    assert!(report.to_markdown().contains("| Random Guesser | | | | 20.00 |"));
}

#[test]
fn report_is_bit_reproducible_and_thread_independent() {
    let (x, y) = noise(300, 4, 5);
    let config = EvalConfig {
        folds: 5,
        seed: 17,
        ..EvalConfig::default()
    };
    let run = |parallel| {
        let cells = evaluate_features(&x, &y, Representation::Metrics, &config, parallel).unwrap();
        EvalReport::new(&config, RankMode::None, &y, cells).to_json()
    };
    let serial = run(false);
    assert_eq!(serial, run(false));
    assert_eq!(serial, run(true));
}
