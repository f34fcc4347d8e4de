use dphase_core::grid::ScalarField;
use dphase_core::maximal::{
    ball_decay_check, capped_maximal_ball, capped_maximal_ball_exact_at, capped_maximal_dyadic,
    gradient_measure, max_capped_power_sum, plane_measure, radius_ladder, threshold_exponent, unit_ball_volume,
    DiscreteMeasure, DyadicGrid, QueryGrid,
};

fn atoms(points: &[[f64; 2]], weights: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::scalar(
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        points.iter().map(|p| p.to_vec()).collect(),
        weights.to_vec(),
    )
    .unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn single_atom_matches_closed_form() {
    let (alpha, sigma) = (0.5, 1.0);
    let x0 = [0.4, 0.55];
    let mu = atoms(&[x0], &[1.0]);
    let q = QueryGrid::unit_square(32);
    let field = capped_maximal_ball(&mu, alpha, sigma, &q).unwrap();
    let radii = radius_ladder(mu.diameter(), q.spacing);
    let ratio = |r: f64| 1f64.min(r) / (std::f64::consts::PI * r * r).powf(0.75);
    for j in 0..32 {
        for i in 0..32 {
            let x = q.point(i, j);
            let d = dist(&x, &x0);
            let ladder = radii.iter().filter(|&&r| r >= d).map(|&r| ratio(r)).fold(0.0, f64::max);
            assert!((field.get(i, j) - ladder).abs() <= 1e-12 * ladder.max(1e-300), "({i},{j})");
            // every branch decreases in r below the diameter, so the
            // supremum sits at the smallest admissible radius
            let exact = capped_maximal_ball_exact_at(&mu, alpha, sigma, &x, q.spacing).unwrap();
            assert!((exact - ratio(d.max(q.spacing))).abs() <= 1e-12 * exact);
            assert!(field.get(i, j) <= exact * (1.0 + 1e-12));
            // the ladder loses at most the factor from r to 2r
            assert!(exact <= 2f64.powf(1.5) * field.get(i, j) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn empty_measure_gives_zero_fields() {
    let mu = atoms(&[[0.2, 0.2]], &[0.0]);
    let q = QueryGrid::unit_square(16);
    assert!(capped_maximal_ball(&mu, 0.5, 1.0, &q).unwrap().values().iter().all(|&v| v == 0.0));
    assert!(capped_maximal_dyadic(&mu, 0.5, 1.0, &q).unwrap().values().iter().all(|&v| v == 0.0));
}

/// The capped ladder value, recomputed from ball masses with and without
/// the cap.
#[test]
fn cap_is_applied_exactly_where_it_binds() {
    let (alpha, sigma) = (0.5, 1.0);
    let mu = atoms(&[[0.3, 0.3], [0.31, 0.32], [0.8, 0.6]], &[0.5, 0.25, 2.0]);
    let q = QueryGrid::unit_square(16);
    let field = capped_maximal_ball(&mu, alpha, sigma, &q).unwrap();
    let radii = radius_ladder(mu.diameter(), q.spacing);
    let vol = |r: f64| (unit_ball_volume(2) * r * r).powf(1.0 - alpha / 2.0);
    let mut binding = 0;
    for j in 0..16 {
        for i in 0..16 {
            let x = q.point(i, j);
            let capped = radii.iter().map(|&r| mu.ball_mass(&x, r).min(r.powf(sigma)) / vol(r)).fold(0.0, f64::max);
            let free = radii.iter().map(|&r| mu.ball_mass(&x, r) / vol(r)).fold(0.0, f64::max);
            assert!((field.get(i, j) - capped).abs() <= 1e-12 * capped.max(1e-300));
            assert!(capped <= free);
            binding += (capped < free) as usize;
            // a weaker cap (larger σ binds less below unit radius) never lowers the value
            // where it is inactive
            if capped == free {
                let weaker = radii.iter().map(|&r| mu.ball_mass(&x, r).min(r.powf(sigma * 0.5)) / vol(r)).fold(0.0, f64::max);
                assert_eq!(weaker, free);
            }
        }
    }
    assert!(binding > 0);
}

#[test]
fn doubling_scales_below_the_cap() {
    let (alpha, sigma) = (0.5, 1.0);
    let q = QueryGrid::unit_square(16);
    // tiny masses never reach the cap
    let light = atoms(&[[0.25, 0.7], [0.6, 0.2]], &[1e-6, 3e-6]);
    let heavy = light.scaled(2.0);
    let (b1, b2) = (capped_maximal_ball(&light, alpha, sigma, &q).unwrap(), capped_maximal_ball(&heavy, alpha, sigma, &q).unwrap());
    let (d1, d2) = (capped_maximal_dyadic(&light, alpha, sigma, &q).unwrap(), capped_maximal_dyadic(&heavy, alpha, sigma, &q).unwrap());
    for k in 0..b1.len() {
        assert_eq!(b2.values()[k], 2.0 * b1.values()[k]);
        assert_eq!(d2.values()[k], 2.0 * d1.values()[k]);
    }
    // unit masses do reach it; doubling then gains at most the factor 2
    let unit = atoms(&[[0.25, 0.7], [0.6, 0.2]], &[1.0, 1.0]);
    let b1 = capped_maximal_ball(&unit, alpha, sigma, &q).unwrap();
    let b2 = capped_maximal_ball(&unit.scaled(2.0), alpha, sigma, &q).unwrap();
    let mut strict = 0;
    for k in 0..b1.len() {
        assert!(b2.values()[k] <= 2.0 * b1.values()[k]);
        strict += (b2.values()[k] < 2.0 * b1.values()[k]) as usize;
    }
    assert!(strict > 0);
}

#[test]
fn dyadic_majorant_dominates_the_ball_function() {
    let (alpha, sigma) = (0.5, 1.0);
    let bound = 2f64.powf(2.0 - alpha) * 9.0;
    let mu = atoms(&[[0.37, 0.61]], &[1.0]);
    let q = QueryGrid::unit_square(32);
    let ball = capped_maximal_ball(&mu, alpha, sigma, &q).unwrap();
    let dyadic = capped_maximal_dyadic(&mu, alpha, sigma, &q).unwrap();
    let c = ball.values().iter().zip(dyadic.values()).map(|(b, d)| b / d).fold(0.0, f64::max);
    assert!(c.is_finite() && c <= bound, "{c}");
}

#[test]
fn dyadic_levels_sum_exactly() {
    let mu = plane_measure(2, 1, 200).unwrap();
    let grid = DyadicGrid::build(&mu, 1.0 / 64.0).unwrap();
    let (k_min, k_max) = grid.k_range();
    assert!(2f64.powi(k_max) > mu.diameter() && 2f64.powi(k_max - 1) <= mu.diameter());
    for k in k_min + 1..=k_max {
        let mut parents = std::collections::BTreeMap::new();
        for (key, m) in grid.level(k - 1) {
            let up: Vec<i64> = key.iter().map(|c| c.div_euclid(2)).collect();
            *parents.entry(up).or_insert(0.0) += m;
        }
        assert_eq!(&parents, grid.level(k));
    }
    let finest: f64 = grid.level(k_min).values().sum();
    assert!((finest - mu.total_variation()).abs() <= 1e-12);
    // an atom on a cube face belongs to the cube on its upper side
    let face = atoms(&[[0.5, 0.25]], &[1.0]);
    let g = DyadicGrid::build(&face, 0.2).unwrap();
    assert_eq!(g.cube_mass(-2, &[2, 1]), 1.0);
    assert_eq!(g.cube_mass(-2, &[1, 1]), 0.0);
}

#[test]
fn plane_measure_masses_and_chords() {
    let mu = plane_measure(2, 1, 256).unwrap();
    assert_eq!(mu.len(), 256);
    assert!((mu.total_variation() - 1.0).abs() <= 1e-10);
    assert!((0..256).all(|k| mu.mass(k) == 1.0 / 256.0));
    let atom = 1.0 / 256.0;
    for &(x, r) in &[(0.5f64, 0.1f64), (0.5, 0.37), (0.05, 0.2), (0.9, 0.3), (0.3, 1.0)] {
        let chord = (x + r).min(1.0) - (x - r).max(0.0);
        let mass = mu.ball_mass(&[x, 0.5], r);
        assert!((mass - chord).abs() <= atom + 1e-12, "x {x} r {r}: {mass} vs {chord}");
    }
    let mu3 = plane_measure(3, 2, 16).unwrap();
    assert!((mu3.total_variation() - 1.0).abs() <= 1e-10);
    assert!(plane_measure(2, 2, 8).is_err());
}

#[test]
fn dyadic_field_is_stable_under_refinement() {
    let (alpha, sigma) = (0.75, 1.0);
    let q = QueryGrid::unit_square(64);
    let coarse = capped_maximal_dyadic(&plane_measure(2, 1, 256).unwrap(), alpha, sigma, &q).unwrap();
    let fine = capped_maximal_dyadic(&plane_measure(2, 1, 512).unwrap(), alpha, sigma, &q).unwrap();
    for j in 0..64 {
        let d = ((j as f64 + 0.5) / 64.0 - 0.5).abs();
        if d <= 8.0 / 64.0 {
            continue;
        }
        for i in 0..64 {
            let (a, b) = (coarse.get(i, j), fine.get(i, j));
            assert!((a - b).abs() <= 0.02 * b, "({i},{j}): {a} vs {b}");
        }
    }
}

#[test]
fn threshold_arithmetic_and_parameter_checks() {
    assert_eq!(threshold_exponent(2, 0.75, 1.0), 4.0);
    let mu = atoms(&[[0.5, 0.5]], &[1.0]);
    let q = QueryGrid::unit_square(8);
    assert!(capped_maximal_ball(&mu, 0.5, 2.0, &q).is_err());
    assert!(capped_maximal_ball(&mu, 1.0, 1.0, &q).is_err());
    assert!(capped_maximal_dyadic(&mu, 0.0, 1.0, &q).is_err());
}

/// Brute force over a lattice containing the extreme point.
#[test]
fn capped_power_sum_is_maximized_at_the_extreme_point() {
    fn search(level: usize, count: usize, left: f64, cap: f64, step: f64, p: f64) -> f64 {
        if level == count {
            return 0.0;
        }
        let mut best = 0.0f64;
        let mut a = 0.0;
        while a <= cap.min(left) + 1e-12 {
            best = best.max(a.powf(p) + search(level + 1, count, left - a, cap, step, p));
            a += step;
        }
        best
    }
    for &(total, cap, count, p) in &[(2.5, 1.0, 4, 2.0), (1.75, 0.5, 5, 1.5), (3.0, 1.0, 3, 3.0), (0.75, 0.25, 6, 4.5)] {
        let step = cap / 4.0;
        let brute = search(0, count, total, cap, step, p);
        let formula = max_capped_power_sum(total, cap, count, p);
        assert!((brute - formula).abs() <= 1e-9, "{total} {cap} {count} {p}: {brute} vs {formula}");
    }
}

#[test]
fn ball_decay_examples() {
    let n = 48;
    let h = 1.0 / n as f64;
    let flat = ScalarField::filled(n, n, h, 0.7).unwrap();
    assert_eq!(ball_decay_check(&flat).unwrap(), 0.0);
    let step = |m: f64| ScalarField::from_fn(n, n, h, |i, _| if i < n / 2 { 0.0 } else { m }).unwrap();
    let one = ball_decay_check(&step(1.0)).unwrap();
    assert!(one.is_finite() && one > 0.0);
    assert_eq!(ball_decay_check(&step(2.0)).unwrap(), 2.0 * one);
    // balls centered on the edge carry M times their chord: with the
    // jump atoms on one pixel column, a ball of radius (k + 1/2) h holds
    // 2k + 1 of them, so the ratio is exactly 2M
    let m = 3.0;
    let du = gradient_measure(&step(m)).unwrap();
    let (cx, _) = step(m).center(n / 2 - 1, 0);
    for k in [4usize, 8, 16] {
        let r = (k as f64 + 0.5) * h;
        for row in [n / 2, n / 2 + 3] {
            let (_, cy) = step(m).center(0, row);
            let v = du.ball_vector(&[cx, cy], r);
            let ratio = v[0].hypot(v[1]) / r;
            let expected = 2.0 * m;
            assert!((ratio - expected).abs() <= 1e-9, "k {k}: {ratio} vs {expected}");
        }
    }
}
