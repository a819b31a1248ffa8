//! Randomized property tests for the numeric building blocks.

use proptest::prelude::*;

use cdmad_lab::cdmad::{refine_logits, BiasLogits};
use cdmad_lab::data::{longtail_counts, mixup_with_lambda};
use cdmad_lab::eval::{bacc, ber, confusion, gm};
use cdmad_lab::nn::softmax;
use cdmad_lab::ssl::sharpen;
use cdmad_lab::Mat;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, len)
}

fn simplex_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|mut v| {
        let s: f64 = v.iter().sum();
        for x in &mut v {
            *x /= s;
        }
        v
    })
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(logits in finite_vec(12)) {
        let m = Mat::new(3, 4, logits.clone()).unwrap();
        let p = softmax(&m).unwrap();
        for r in 0..3 {
            let row = p.row(r);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v < 1.0 + 1e-12));
            // monotone map: argmax of probabilities matches argmax of logits
            let logit_row = m.row(r);
            let am = |s: &[f64]| s.iter().enumerate().fold(0, |b, (i, &v)| if v > s[b] { i } else { b });
            prop_assert_eq!(am(row), am(logit_row));
        }
    }

    #[test]
    fn softmax_is_shift_invariant(logits in finite_vec(5), shift in -50.0f64..50.0) {
        let a = Mat::new(1, 5, logits.clone()).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let b = Mat::new(1, 5, shifted).unwrap();
        let pa = softmax(&a).unwrap();
        let pb = softmax(&b).unwrap();
        for j in 0..5 {
            prop_assert!((pa.get(0, j) - pb.get(0, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_matches_probability_ratio(g in finite_vec(8), g_i in finite_vec(8)) {
        let logits = Mat::new(1, 8, g.clone()).unwrap();
        let bias = BiasLogits { g: g_i.clone(), probe: "prop".into() };
        let refined = softmax(&refine_logits(&logits, &bias).unwrap()).unwrap();
        let sg = softmax(&logits).unwrap();
        let sgi = softmax(&Mat::new(1, 8, g_i).unwrap()).unwrap();
        let mut ratio: Vec<f64> = (0..8).map(|j| sg.get(0, j) / sgi.get(0, j)).collect();
        let s: f64 = ratio.iter().sum();
        for v in &mut ratio {
            *v /= s;
        }
        for j in 0..8 {
            prop_assert!((refined.get(0, j) - ratio[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn sharpen_keeps_simplex_and_concentrates(q in simplex_vec(6), t in 0.05f64..1.0) {
        let m = Mat::new(1, 6, q.clone()).unwrap();
        let out = sharpen(&m, t).unwrap();
        let row = out.row(0);
        let sum: f64 = row.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        let max_in = q.iter().cloned().fold(f64::MIN, f64::max);
        let max_out = row.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(max_out >= max_in - 1e-12);
    }

    #[test]
    fn sharpen_at_unit_temperature_is_identity(q in simplex_vec(6)) {
        let m = Mat::new(1, 6, q.clone()).unwrap();
        let out = sharpen(&m, 1.0).unwrap();
        for j in 0..6 {
            prop_assert!((out.get(0, j) - q[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixup_outputs_are_convex_combinations(
        xa in finite_vec(6),
        xb in finite_vec(6),
        ta in simplex_vec(3),
        tb in simplex_vec(3),
        lambda in 0.0f64..=1.0,
    ) {
        let xa = Mat::new(2, 3, xa).unwrap();
        let xb = Mat::new(2, 3, xb).unwrap();
        let ta_m = Mat::new(2, 3, [ta.clone(), ta].concat()).unwrap();
        let tb_m = Mat::new(2, 3, [tb.clone(), tb].concat()).unwrap();
        let (x, t) = mixup_with_lambda(&xa, &ta_m, &xb, &tb_m, lambda).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                let lo = xa.get(r, c).min(xb.get(r, c));
                let hi = xa.get(r, c).max(xb.get(r, c));
                prop_assert!(x.get(r, c) >= lo - 1e-12 && x.get(r, c) <= hi + 1e-12);
            }
            let s: f64 = t.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(t.row(r).iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn longtail_counts_decay_from_head(
        head in 12usize..500,
        gamma in 1.0f64..200.0,
        classes in 2usize..12,
    ) {
        let counts = longtail_counts(head, gamma, classes, false).unwrap();
        prop_assert_eq!(counts.len(), classes);
        prop_assert_eq!(counts[0], head);
        for w in counts.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(counts.iter().all(|&c| c >= 1));
        let rev = longtail_counts(head, gamma, classes, true).unwrap();
        let mut expect = counts.clone();
        expect.reverse();
        prop_assert_eq!(rev, expect);
    }

    #[test]
    fn longtail_is_flat_without_imbalance(head in 12usize..200, classes in 2usize..12) {
        let counts = longtail_counts(head, 1.0, classes, false).unwrap();
        prop_assert!(counts.iter().all(|&c| c == head));
    }

    #[test]
    fn error_rates_complement_balanced_accuracy(
        seed_preds in prop::collection::vec(0usize..5, 40),
        seed_labels in prop::collection::vec(0usize..5, 40),
    ) {
        let mut preds = seed_preds;
        let mut labels = seed_labels;
        // guarantee support for every class
        for k in 0..5 {
            preds.push(k);
            labels.push(k);
        }
        let conf = confusion(&preds, &labels, 5).unwrap();
        let b = bacc(&conf).unwrap();
        let e = ber(&conf).unwrap();
        let g = gm(&conf).unwrap();
        prop_assert!((b + e - 1.0).abs() < 1e-12);
        prop_assert!(g <= b + 1e-12);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((0.0..=1.0).contains(&g));
    }
}
