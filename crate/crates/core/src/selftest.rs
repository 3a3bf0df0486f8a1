//! Small deterministic checks of the numeric kernels, run by `cxr selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::roc_auc;
use crate::finding::Finding;
use crate::localize::{iobb, iou, BBox};
use crate::pooling::{avg_pool, cel, lse_pool, lse_pool_naive, max_pool, wcel, LabelScorePair};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn lse_bounds(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (lo, hi) = (avg_pool(&v).unwrap(), max_pool(&v).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for r in [0.1, 0.5, 1.0, 5.0, 8.0, 10.0, 12.0] {
            let s = lse_pool(&v, r).unwrap();
            let naive = lse_pool_naive(&v, r).unwrap();
            worst = worst.max(((s - naive) / naive.abs().max(1e-300)).abs());
            ok &= s >= lo - 1e-12 && s <= hi + 1e-12 && s >= prev - 1e-12;
            prev = s;
        }
    }
    ok &= worst < 1e-9;
    outcome("lse between mean and max, monotone in r, matches naive", ok, format!("max rel err {worst:.2e}"))
}

fn wcel_hand_value() -> CheckOutcome {
    let b = [LabelScorePair::new(vec![1, 0], vec![0.5f64, 0.5]).unwrap()];
    let got = wcel(&b).unwrap();
    let want = 4.0 * 2f64.ln();
    let twice = 2.0 * cel(&b).unwrap();
    let ok = (got - want).abs() < 1e-12 && (got - twice).abs() < 1e-12;
    outcome("wcel hand value and balanced identity", ok, format!("wcel {got:.15}"))
}

fn overlap_case() -> CheckOutcome {
    let gt = BBox::new("i", Finding::Atelectasis, 0.0f64, 0.0, 10.0, 10.0).unwrap();
    let det = BBox::new("i", Finding::Atelectasis, 5.0f64, 0.0, 10.0, 10.0).unwrap();
    let u = iou(&gt, &det);
    let b = iobb(&gt, &det).unwrap();
    let ok = u == 1.0 / 3.0 && b == 0.5 && iou(&det, &gt) == u;
    outcome("iou and iobb on half-shifted boxes", ok, format!("iou {u}, iobb {b}"))
}

fn auc_cases() -> CheckOutcome {
    let a = roc_auc(&[0.9f64, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
    let b = roc_auc(&[0.5f64; 4], &[1, 0, 1, 0]).unwrap();
    let c = roc_auc(&[0.1f64, 0.2, 0.8, 0.9], &[1, 1, 0, 0]).unwrap();
    let ok = a == 1.0 && b == 0.5 && c == 0.0;
    outcome("auc canonical cases", ok, format!("{a} / {b} / {c}"))
}

/// Runs every check with a fixed seed.
pub fn run_selftest() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    vec![lse_bounds(&mut rng), wcel_hand_value(), overlap_case(), auc_cases()]
}
