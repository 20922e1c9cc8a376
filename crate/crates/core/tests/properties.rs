use ggsp_core::bounds::avoidance_bound_log2;
use ggsp_core::explorer::EventStats;
use ggsp_core::graph_model::{StandaloneTree, Topology, TreeSchedule};
use ggsp_core::oracle::{label_bits_for, FeistelPermutation, OracleKey};
use proptest::prelude::*;

proptest! {
    #[test]
    fn feistel_round_trips(bits in 1u32..=48, key: u128, x: u64) {
        let p = FeistelPermutation::new(bits, OracleKey(key)).unwrap();
        let x = x & ((1u64 << bits) - 1);
        let y = p.permute(x).unwrap();
        prop_assert!(y < 1u64 << bits);
        prop_assert_eq!(p.invert(y).unwrap(), x);
    }

    #[test]
    fn label_width_is_minimal(count in 1u64..1_000_000, exp in 0i32..20) {
        let ratio = 2f64.powi(-exp);
        let m = label_bits_for(count, ratio).unwrap();
        let need = count as f64 / ratio;
        prop_assert!(2f64.powi(m as i32) >= need);
        prop_assert!(m == 0 || 2f64.powi(m as i32 - 1) < need);
    }

    #[test]
    fn tree_ranks_round_trip(d1 in 3u64..6, d2 in 2u64..3, l1 in 1u64..3, extra in 1u64..3, pick: u64) {
        let s = TreeSchedule::new(vec![d1, d2], vec![l1, l1 + extra]).unwrap();
        let t = StandaloneTree::new(s, 2).unwrap();
        let i = pick % t.node_count();
        let v = t.node_at(i).unwrap();
        prop_assert_eq!(t.index_of(&v).unwrap(), Some(i));
        for w in t.neighbors(&v).unwrap() {
            prop_assert!(t.neighbors(&w).unwrap().contains(&v));
        }
    }

    #[test]
    fn avoidance_decreases_with_the_depth_gap(dk in 2u64..10, step in 1u64..5, lk1 in 0u64..10, gap in 1u64..20, w in 1u32..=2) {
        let dk1 = dk + step;
        let a = avoidance_bound_log2(dk, dk1, lk1 + gap, lk1, w).unwrap();
        let b = avoidance_bound_log2(dk, dk1, lk1 + gap + 1, lk1, w).unwrap();
        prop_assert!(b <= a);
        prop_assert!(a <= 0.0);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = (trials as f64 * frac).floor() as u64;
        let s = EventStats::from_counts(k, trials);
        prop_assert!(s.wilson_lo <= s.p_hat + 1e-12 && s.p_hat <= s.wilson_hi + 1e-12);
        prop_assert!(s.wilson_lo >= 0.0 && s.wilson_hi <= 1.0);
    }
}
