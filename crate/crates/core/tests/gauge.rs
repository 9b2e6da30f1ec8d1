use std::f64::consts::PI;
use transmute_core::calculus::QuadratureRule;
use transmute_core::geometry::*;
use transmute_core::operator::{assemble, eigendecompose, SpectralDecomposition};
use transmute_core::transmute::*;

struct Pair {
    grid: Grid,
    base: SpectralDecomposition,
    gauged: SpectralDecomposition,
    perturbed: SpectralDecomposition,
}

fn pair(nodes: usize, psi: &Diffeomorphism) -> Pair {
    let grid = build_grid(&DomainSpec::interval(0.0, PI), &[nodes]).unwrap();
    let gamma = Region::from_box(&grid, &[1.0], &[2.0]).unwrap();
    psi.check_invariants(&grid, &gamma).unwrap();
    let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.3, [1.0, 0.0]);
    let v = PotentialField::gaussian(1, 1.0, [2.4, 0.0], 0.4);
    let (pg, pv) = pullback(psi, &g, &v, &grid).unwrap();
    let vc = v.plus(&PotentialField::bump(1, Bump::new([1.5, 0.0], 0.2, 1.0)));
    let spec = |g: &MetricField, v: &PotentialField| eigendecompose(&assemble(&grid, g, v).unwrap(), nodes - 2).unwrap();
    Pair { base: spec(&g, &v), gauged: spec(&pg, &pv), perturbed: spec(&g, &vc), grid }
}

fn discrepancy(p: &Pair) -> GaugeDiscrepancy {
    let gamma = Region::from_box(&p.grid, &[1.0], &[2.0]).unwrap();
    let data = GridFunction::from_fn(&p.grid, |x| Bump::new([1.5, 0.0], 0.4, 1.0).eval(x, 1));
    let pulse = |t: f64| if t < 1.0 { (PI * t).sin().powi(2) } else { 0.0 };
    let q = QuadratureRule::default();
    let probe = GaugeProbe { data: &data, heat_times: &[0.1, 0.5, 1.0], pulse: &pulse, dt: 0.01, t_end: 2.0, quadrature: &q };
    gauge_discrepancy(&p.base, &p.gauged, &gamma, &probe).unwrap()
}

fn shift() -> Diffeomorphism {
    Diffeomorphism::bump_shift(1, [2.6, 0.0], 0.35, [0.1, 0.0])
}

#[test]
fn identity_gauge_is_exact() {
    let d = discrepancy(&pair(129, &Diffeomorphism::identity(1)));
    assert!(d.worst() <= 1e-12, "{d:?}");
}

#[test]
fn gauge_discrepancies_converge_at_second_order() {
    let coarse = discrepancy(&pair(257, &shift()));
    let fine = discrepancy(&pair(513, &shift()));
    let order = |a: f64, b: f64| (a / b).log2();
    assert!(order(coarse.nd_map, fine.nd_map) >= 1.5);
    assert!(order(coarse.semigroup, fine.semigroup) >= 1.5);
    assert!(order(coarse.source_to_solution, fine.source_to_solution) >= 1.5);
    for (a, b) in coarse.heat_kernel.iter().zip(&fine.heat_kernel) {
        assert!(order(a.1, b.1) >= 1.5, "t = {}: {} -> {}", a.0, a.1, b.1);
    }
    assert!(fine.worst() < 1e-3);
}

#[test]
fn heat_moments_vanish_for_gauge_pairs_only() {
    let p = pair(513, &shift());
    let level = discrepancy(&p).worst();
    let o1 = Region::from_box(&p.grid, &[1.05], &[1.4]).unwrap();
    let o2 = Region::from_box(&p.grid, &[1.6], &[1.95]).unwrap();
    let b = Bump::new([1.225, 0.0], 0.15, 1.0);
    let f = GridFunction::from_fn_interior(&p.grid, |x| b.eval(x, 1));
    let q = QuadratureRule::adaptive(1e-14, 1e-10);
    let gauge = heat_moment_vanish(&p.base, &p.gauged, &f, &o1, &o2, 3, &q).unwrap();
    let control = heat_moment_vanish(&p.base, &p.perturbed, &f, &o1, &o2, 3, &q).unwrap();
    assert!(gauge.relative().iter().all(|m| *m <= level), "{:?} vs {level:e}", gauge.relative());
    assert!(control.relative()[0] >= 10.0 * level);
}
