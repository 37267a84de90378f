use proptest::prelude::*;

use simo_ident::channel_model::gen_channel;
use simo_ident::identifiability::{check_condition, closed_form_delta1, Verdict};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn margin_ignores_scale(m in 2usize..5, l in 1usize..4, seed in any::<u64>(), c in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let h = gen_channel(m, l, seed).unwrap();
        let lp = l + 1;
        let a = check_condition(&h, lp, 1.0).unwrap().margin;
        let b = check_condition(&h.scaled(c).unwrap(), lp, 1.0).unwrap().margin;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn lp_agrees_with_closed_form_for_single_offset(m in 2usize..6, l in 1usize..5, seed in any::<u64>(), p in 0.2f64..=1.0) {
        let h = gen_channel(m, l, seed).unwrap();
        let lp_margin = check_condition(&h, l + 1, p).unwrap().margin;
        let closed = closed_form_delta1(&h, p).unwrap();
        prop_assert!((lp_margin - closed).abs() <= 1e-9 * closed.max(1.0), "{} vs {}", lp_margin, closed);
    }

    #[test]
    fn verdict_follows_margin(m in 2usize..5, l in 2usize..4, seed in any::<u64>()) {
        let h = gen_channel(m, l, seed).unwrap();
        let r = check_condition(&h, l + 2, 1.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::from_margin(r.margin));
    }
}
