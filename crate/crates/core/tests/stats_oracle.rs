mod common;

use common::{likert, mann_whitney_oracle, naive_midranks, wilcoxon_oracle};
use ossdoorway::analytics::{
    bonferroni, mann_whitney_u, mann_whitney_u_with, midranks, significance_flags, wilcoxon_signed_rank,
    wilcoxon_signed_rank_with, MethodChoice, PValueMethod,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn wilcoxon_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.random_range(1..=12);
        let (pre, post) = (likert(&mut rng, n), likert(&mut rng, n));
        let got = wilcoxon_signed_rank(&pre, &post).unwrap();
        let (stat, p) = wilcoxon_oracle(&pre, &post);
        assert_eq!(got.statistic, stat, "{pre:?} {post:?}");
        assert!(
            (got.p_value - p).abs() < 1e-12,
            "{pre:?} {post:?}: {} vs {p}",
            got.p_value
        );
        assert_eq!(got.method, PValueMethod::ExactEnumeration);
    }
}

#[test]
fn mann_whitney_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=(13 - n).min(7));
        let (a, b) = (likert(&mut rng, n), likert(&mut rng, m));
        let got = mann_whitney_u(&a, &b).unwrap();
        let (stat, p) = mann_whitney_oracle(&a, &b);
        assert_eq!(got.statistic, stat, "{a:?} {b:?}");
        assert!((got.p_value - p).abs() < 1e-12, "{a:?} {b:?}: {} vs {p}", got.p_value);
    }
}

#[test]
fn continuous_values_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let n = rng.random_range(2..=10);
        let pre: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let post: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (_, p) = wilcoxon_oracle(&pre, &post);
        assert!((wilcoxon_signed_rank(&pre, &post).unwrap().p_value - p).abs() < 1e-12);
        let (_, p) = mann_whitney_oracle(&pre, &post[..n.min(4)]);
        assert!((mann_whitney_u(&pre, &post[..n.min(4)]).unwrap().p_value - p).abs() < 1e-12);
    }
}

#[test]
fn exact_and_normal_agree_for_moderate_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let n = rng.random_range(10..=20);
        let pre: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let post: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.2).collect();
        let exact = wilcoxon_signed_rank_with(&pre, &post, MethodChoice::Exact).unwrap();
        let normal = wilcoxon_signed_rank_with(&pre, &post, MethodChoice::Normal).unwrap();
        assert_eq!(normal.method, PValueMethod::NormalApproximation);
        assert!(
            (exact.p_value - normal.p_value).abs() < 0.05,
            "n={n}: {} vs {}",
            exact.p_value,
            normal.p_value
        );

        let a = &pre[..n / 2];
        let b = &post[n / 2..];
        let exact = mann_whitney_u_with(a, b, MethodChoice::Exact).unwrap();
        let normal = mann_whitney_u_with(a, b, MethodChoice::Normal).unwrap();
        assert!(
            (exact.p_value - normal.p_value).abs() < 0.05,
            "{} vs {}",
            exact.p_value,
            normal.p_value
        );
    }
}

#[test]
fn large_samples_use_normal_path() {
    let pre: Vec<f64> = (0..30).map(|i| (i % 5 + 1) as f64).collect();
    let post: Vec<f64> = (0..30).map(|i| ((i + 2) % 5 + 1) as f64).collect();
    let r = wilcoxon_signed_rank(&pre, &post).unwrap();
    assert_eq!(r.method, PValueMethod::NormalApproximation);
    assert!((0.0..=1.0).contains(&r.p_value));
    let r = mann_whitney_u(&pre[..10], &post[..10]).unwrap();
    assert_eq!(r.method, PValueMethod::NormalApproximation);
}

proptest! {
    #[test]
    fn midranks_match_counting(values in prop::collection::vec(1u8..=5, 1..30)) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(midranks(&v), naive_midranks(&v));
    }

    #[test]
    fn wilcoxon_sign_flip_symmetry(pairs in prop::collection::vec((1u8..=5, 1u8..=5), 1..25)) {
        let pre: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let post: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let a = wilcoxon_signed_rank(&pre, &post).unwrap();
        let b = wilcoxon_signed_rank(&post, &pre).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn mann_whitney_exchangeable(a in prop::collection::vec(1u8..=5, 1..12), b in prop::collection::vec(1u8..=5, 1..12)) {
        let a: Vec<f64> = a.iter().map(|&x| x as f64).collect();
        let b: Vec<f64> = b.iter().map(|&x| x as f64).collect();
        let x = mann_whitney_u(&a, &b).unwrap();
        let y = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        prop_assert!(x.statistic <= (a.len() * b.len()) as f64 / 2.0);
    }

    #[test]
    fn bonferroni_is_capped_and_monotone(ps in prop::collection::vec(0.0f64..=1.0, 1..7)) {
        let adjusted = bonferroni(&ps, 7).unwrap();
        for (raw, adj) in ps.iter().zip(&adjusted) {
            prop_assert!(*adj >= *raw && *adj <= 1.0);
            prop_assert!((*adj - (raw * 7.0).min(1.0)).abs() < 1e-15);
        }
        let flags = significance_flags(&adjusted, 0.05);
        for (adj, f) in adjusted.iter().zip(flags) {
            prop_assert_eq!(f, *adj < 0.05);
        }
    }
}
