use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmute_core::boundary::*;
use transmute_core::extension::mask;
use transmute_core::geometry::*;
use transmute_core::wkb::OscillatoryProbe;

fn square(nodes: usize) -> Grid {
    build_grid(&DomainSpec::rectangle([0.0, 0.0], [PI, PI]), &[nodes, nodes]).unwrap()
}

fn random_data(grid: &Grid, region: &Region, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<Bump> = (0..4)
        .map(|_| Bump::new([rng.gen_range(0.9..2.2), rng.gen_range(0.9..2.2)], rng.gen_range(0.3..0.6), rng.gen_range(-1.0..1.0)))
        .collect();
    mask(&GridFunction::from_fn(grid, |x| bumps.iter().map(|b| b.eval(x, 2)).sum()), region)
}

#[test]
fn resolvent_matches_spectral() {
    let grid = square(33);
    let g = MetricField::offdiag_bump([1.0, 1.0], 0.3, [1.57, 1.57], 1.0);
    let v = PotentialField::gaussian(2, 1.0, [1.2, 1.8], 0.5);
    let region = Region::from_box(&grid, &[0.4, 0.4], &[2.74, 2.74]).unwrap();
    let spectral = SpectralNd::build(&grid, &g, &v, &region).unwrap();
    let resolvent = ResolventNd::build(&grid, &g, &v, &region, 0.5).unwrap();
    assert!(resolvent.lambda_min > 0.0 && resolvent.lambda_min < resolvent.lambda_max);
    let data: Vec<GridFunction> = (0..3).map(|s| random_data(&grid, &region, s)).collect();
    let batched = resolvent.apply_many(&data).unwrap();
    for (f, b) in data.iter().zip(&batched) {
        let a = spectral.apply(f).unwrap();
        let err = a.axpy(-1.0, b).max_abs() / a.max_abs();
        assert!(err < 1e-7, "{err:e}");
        let single = resolvent.apply(f).unwrap();
        assert!(single.axpy(-1.0, b).max_abs() <= 1e-14 * a.max_abs());
    }
}

#[test]
fn two_dimensional_pairing_limit() {
    let grid = square(129);
    let g = MetricField::constant_diagonal(2, [2.0, 0.5]);
    let region = Region::from_box(&grid, &[0.3, 0.3], &[2.84, 2.84]).unwrap();
    let nd = ResolventNd::build(&grid, &g, &PotentialField::zero(2), &region, 0.5).unwrap();
    let ns = [8.0, 11.0, 16.0, 22.0];
    for xi in [[1.0, 0.0], [0.0, 1.0]] {
        let probe = OscillatoryProbe::new(Bump::new([1.57, 1.57], 0.8, 1.0), xi, ns[0]);
        let lim = pairing_limit(&nd, &probe, &ns).unwrap();
        let want = analytic_pairing_limit(&grid, &region, &g, &probe);
        assert!((lim.fit.limit - want).abs() < 0.05 * want, "{xi:?}: {} vs {want}", lim.fit.limit);
        assert!(lim.imaginary_ratio() < 1e-10);
    }
}

#[test]
fn aliasing_cap_is_respected() {
    let grid = square(65);
    let xi = [0.6, 0.8];
    let n = max_frequency(&grid, xi);
    assert!(aliasing_product(&grid, xi, n) <= ALIASING_LIMIT * (1.0 + 1e-12));
    assert!(aliasing_product(&grid, xi, 1.01 * n) > ALIASING_LIMIT);
}
