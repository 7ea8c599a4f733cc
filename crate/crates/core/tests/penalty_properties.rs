use proptest::prelude::*;
use shm_core::{conjugate_eval, conjugate_subdiff, penalty_eval, smoothed_conjugate_grad, LevelSet};

fn level_count() -> impl Strategy<Value = usize> {
    2usize..=9
}

proptest! {
    #[test]
    fn fenchel_young_inequality(count in level_count(), u in -1.0f64..=1.0, omega in -4.0f64..=4.0) {
        let levels = LevelSet::uniform(count).unwrap();
        let table = levels.conjugate_table();
        let gap = penalty_eval(u, &levels).unwrap() + conjugate_eval(omega, &table) - u * omega;
        prop_assert!(gap >= -1e-12, "gap {gap}");
        // Equality exactly when u is a subgradient of L★ at ω.
        let sub = conjugate_subdiff(omega, &table);
        if sub.lo - 1e-9 > u || u > sub.hi + 1e-9 {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn fenchel_young_equality_on_the_subdifferential(
        count in level_count(),
        omega in -4.0f64..=4.0,
        theta in 0.0f64..=1.0,
    ) {
        let levels = LevelSet::uniform(count).unwrap();
        let table = levels.conjugate_table();
        let sub = conjugate_subdiff(omega, &table);
        let u = sub.lo + theta * (sub.hi - sub.lo);
        let gap = penalty_eval(u, &levels).unwrap() + conjugate_eval(omega, &table) - u * omega;
        prop_assert!(gap.abs() <= 1e-12, "gap {gap}");
    }

    #[test]
    fn subdifferential_is_monotone(count in level_count(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let table = LevelSet::uniform(count).unwrap().conjugate_table();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (left, right) = (conjugate_subdiff(lo, &table), conjugate_subdiff(hi, &table));
        prop_assert!(left.lo <= right.lo && left.hi <= right.hi);
        if lo < hi {
            prop_assert!(left.hi <= right.lo);
        }
    }

    #[test]
    fn subdifferential_endpoints_are_levels(count in level_count(), omega in -6.0f64..6.0) {
        let levels = LevelSet::uniform(count).unwrap();
        let sub = conjugate_subdiff(omega, &levels.conjugate_table());
        prop_assert!(levels.contains(sub.lo) && levels.contains(sub.hi));
    }
}

#[test]
fn penalty_sup_norm_is_one() {
    for count in 2..=9 {
        let levels = LevelSet::uniform(count).unwrap();
        let max = (0..=20_000)
            .map(|i| penalty_eval(-1.0 + i as f64 / 10_000.0, &levels).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(max, 1.0, "L = {count}");
        assert_eq!(penalty_eval(-1.0, &levels).unwrap(), 1.0);
        assert_eq!(penalty_eval(1.0, &levels).unwrap(), 1.0);
    }
}

/// Edges of the pieces of the smoothed conjugate, where its curvature jumps.
fn smoothing_edges(levels: &LevelSet, mu: f64) -> Vec<f64> {
    let table = levels.conjugate_table();
    let u = levels.values();
    table
        .breakpoints()
        .iter()
        .enumerate()
        .flat_map(|(k, &b)| [b + mu * u[k], b + mu * u[k + 1]])
        .collect()
}

#[test]
fn smoothed_gradient_matches_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0101);
    let h = 1e-7;
    let mut checked = 0;
    while checked < 100 {
        let count = rng.random_range(2..=9);
        let levels = LevelSet::uniform(count).unwrap();
        let table = levels.conjugate_table();
        let mu = 10f64.powf(rng.random_range(-3.0..0.0));
        let omega = rng.random_range(-4.0..4.0);
        if smoothing_edges(&levels, mu).iter().any(|e| (omega - e).abs() < 1e3 * h) {
            continue;
        }
        let (_, grad) = smoothed_conjugate_grad(omega, mu, &table).unwrap();
        let value = |w: f64| smoothed_conjugate_grad(w, mu, &table).unwrap().0;
        let fd = (value(omega + h) - value(omega - h)) / (2.0 * h);
        let rel = (fd - grad).abs() / grad.abs().max(1.0);
        assert!(
            rel <= 1e-6,
            "L = {count}, mu = {mu}, omega = {omega}: fd {fd} vs {grad}"
        );
        checked += 1;
    }
}

#[test]
fn smoothed_conjugate_brackets_the_conjugate() {
    for count in [2, 3, 5, 9] {
        let levels = LevelSet::uniform(count).unwrap();
        let table = levels.conjugate_table();
        for mu in [1e-1, 1e-3, 1e-6] {
            for i in 0..=800 {
                let omega = -4.0 + i as f64 / 100.0;
                let exact = conjugate_eval(omega, &table);
                let (smooth, _) = smoothed_conjugate_grad(omega, mu, &table).unwrap();
                // The envelope of L★ is L★ shifted down by at most μ/2·max u².
                assert!(smooth <= exact + 1e-12 && smooth >= exact - mu / 2.0 - 1e-12);
            }
        }
    }
}
