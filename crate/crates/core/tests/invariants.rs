use proptest::prelude::*;

use lanecoop::config::Config;
use lanecoop::decision::EvalReport;
use lanecoop::ingest::Action;
use lanecoop::numeric::filters::{rolling_median, savgol_filter};
use lanecoop::planner::{bicycle_step, collides, BicycleState, Control, RefPath, SigmoidPath};
use lanecoop::sim::{idm_accel, IdmConfig};

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![Just(Action::Lk), Just(Action::Lc)]
}

proptest! {
    #[test]
    fn idm_accel_stays_within_bounds(gap in prop::option::of(-5.0..200.0f64), v in 0.0..40.0f64, vl in 0.0..40.0f64) {
        let cfg = IdmConfig::default();
        let a = idm_accel(gap, v, vl, &cfg);
        prop_assert!(a.is_finite());
        prop_assert!(a >= -cfg.b_max && a <= cfg.a_max);
    }

    #[test]
    fn idm_brakes_harder_for_smaller_gaps(g in 1.0..100.0f64, dg in 0.1..50.0f64, v in 0.0..30.0f64, vl in 0.0..30.0f64) {
        let cfg = IdmConfig::default();
        prop_assert!(idm_accel(Some(g), v, vl, &cfg) <= idm_accel(Some(g + dg), v, vl, &cfg) + 1e-12);
    }

    #[test]
    fn sigmoid_path_is_monotone_between_lanes(d_long in 20.0..120.0f64, d_lat in prop_oneof![Just(-3.6576f64), Just(3.6576)], y0 in -10.0..10.0f64) {
        let p = SigmoidPath::with_default_tau(0.0, y0, d_long, d_lat).unwrap();
        let ys: Vec<f64> = (0..=200).map(|i| p.y(d_long * i as f64 / 200.0)).collect();
        let (lo, hi) = (y0.min(y0 + d_lat), y0.max(y0 + d_lat));
        prop_assert!(ys.iter().all(|&y| y >= lo - 1e-9 && y <= hi + 1e-9));
        prop_assert!(ys.windows(2).all(|w| (w[1] - w[0]) * d_lat >= -1e-12));
        prop_assert!((ys[0] - y0).abs() < 0.1 * d_lat.abs());
        prop_assert!((ys[200] - (y0 + d_lat)).abs() < 0.1 * d_lat.abs());
    }

    #[test]
    fn bicycle_speed_never_negative(v in 0.0..30.0f64, a in -6.0..3.0f64, delta in -0.5..0.5f64) {
        let s = BicycleState { x: 0.0, y: 0.0, psi: 0.0, v };
        let n = bicycle_step(s, Control { accel: a, steer: delta }, 0.1, 2.7);
        prop_assert!(n.v >= 0.0);
        prop_assert!(n.x >= s.x - 1e-12);
    }

    #[test]
    fn collision_test_is_symmetric(ax in -20.0..20.0f64, ay in -5.0..5.0f64, bx in -20.0..20.0f64, by in -5.0..5.0f64) {
        prop_assert_eq!(collides([ax, ay], [bx, by]), collides([bx, by], [ax, ay]));
        prop_assert!(collides([ax, ay], [ax, ay]));
    }

    #[test]
    fn confusion_counts_partition_the_samples(pairs in prop::collection::vec((action(), action()), 1..200)) {
        let (labels, preds): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let r = EvalReport::from_pairs(&labels, &preds);
        let c = r.confusion;
        prop_assert_eq!(c.tp + c.tn + c.fp + c.fn_, labels.len());
        prop_assert_eq!(r.lk.support + r.lc.support, labels.len());
        for m in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn filters_preserve_length_and_constants(c in -50.0..50.0f64, n in 12usize..200) {
        let x = vec![c; n];
        for y in [rolling_median(&x, 5), savgol_filter(&x, 11, 3).unwrap()] {
            prop_assert_eq!(y.len(), n);
            prop_assert!(y.iter().all(|v| (v - c).abs() < 1e-9));
        }
    }

    #[test]
    fn config_hash_ignores_entry_order(a in 0u32..1000, b in 0u32..1000) {
        let one = Config::parse(&format!("epochs = {a}\nseed_offset = {b}\n")).unwrap();
        let two = Config::parse(&format!("seed_offset = {b}\nepochs = {a}\n")).unwrap();
        prop_assert_eq!(one.hash(), two.hash());
        prop_assert_eq!(one.hash().len(), 16);
    }
}
