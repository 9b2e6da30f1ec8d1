//! WKB approximate solutions `Φ_N` of the extension problem with oscillating
//! Neumann data `φ_N = N e^{iN x·ξ} η`, and their residual.
//!
//! Everything is expressed in the fast variable `Y = N y`. A coefficient
//! `ψ̃(x, Y) = Σ_m c_m(x) Y^m e^{-s(x) Y}` with `s = |ξ|_g` is a [`YPoly`] whose
//! coefficients are complex jets about the evaluation point, so the operators
//!
//! * `L_0 = -∂_Y² + s²`
//! * `L_1 = 2 g^{ij} ξ_i ∂_j + div(g^{-1})·ξ`
//! * `L_2 = g^{ij} ∂_i ∂_j + div(g^{-1})·∇ + V`
//!
//! act on it exactly.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::geometry::fields::{invert_jet, metric_norm, Bump, MetricField, PotentialField};
use crate::geometry::grid::{Grid, GridFunction};
use crate::geometry::region::Region;
use crate::jet::{seed, CJet, Jet, MAX_ORDER};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Neumann probe `φ_N(x) = N e^{iN x·ξ} η(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatoryProbe {
    pub eta: Bump,
    pub xi: [f64; 2],
    pub n: f64,
}

impl OscillatoryProbe {
    pub fn new(eta: Bump, xi: [f64; 2], n: f64) -> Self {
        Self { eta, xi, n }
    }

    pub fn with_frequency(&self, n: f64) -> Self {
        Self { n, ..*self }
    }

    /// Support of `η` at least two cells inside the window, `ξ ≠ 0`, `N ≥ 1`.
    pub fn check_admissible(&self, grid: &Grid, window: &Region) -> Result<()> {
        let dim = grid.dim();
        if self.xi[..dim].iter().all(|&v| v == 0.0) {
            return Err(LabError::Precondition("covector must be nonzero".into()));
        }
        if !(self.n >= 1.0) {
            return Err(LabError::Precondition(format!("frequency N = {} must be at least 1", self.n)));
        }
        let margin = 2.0 * grid.max_spacing();
        let (lo, hi) = (window.lower(), window.upper());
        for k in 0..dim {
            let c = self.eta.center[k];
            if c - self.eta.radius < lo[k] + margin || c + self.eta.radius > hi[k] - margin {
                return Err(LabError::Precondition("probe support must stay two cells inside the window".into()));
            }
        }
        Ok(())
    }

    /// Real and imaginary parts of `φ_N` on the grid.
    pub fn neumann_data(&self, grid: &Grid) -> (GridFunction, GridFunction) {
        let dim = grid.dim();
        let mut re = GridFunction::zeros(grid);
        let mut im = GridFunction::zeros(grid);
        for &p in grid.interior_nodes() {
            let x = grid.point(p);
            let e = self.eta.eval(x, dim);
            if e == 0.0 {
                continue;
            }
            let phase = self.n * (0..dim).map(|k| x[k] * self.xi[k]).sum::<f64>();
            re.0[p] = self.n * e * phase.cos();
            im.0[p] = self.n * e * phase.sin();
        }
        (re, im)
    }
}

/// `Σ_m c_m Y^m e^{-s Y}` with jet coefficients about one point.
#[derive(Clone, Debug)]
pub struct YPoly {
    pub c: Vec<CJet>,
}

impl YPoly {
    fn zero() -> Self {
        Self { c: Vec::new() }
    }

    fn constant(c: CJet) -> Self {
        Self { c: vec![c] }
    }

    fn add_at(&mut self, m: usize, v: CJet) {
        while self.c.len() <= m {
            let order = v.order();
            self.c.push(CJet::zero().truncate(order));
        }
        self.c[m] += v;
    }

    pub fn plus(&self, other: &YPoly) -> YPoly {
        let mut out = self.clone();
        for (m, v) in other.c.iter().enumerate() {
            out.add_at(m, *v);
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> YPoly {
        YPoly { c: self.c.iter().map(|v| v.scale(s)).collect() }
    }

    /// Coefficient values at the expansion point.
    pub fn values(&self) -> Vec<Complex64> {
        self.c.iter().map(|v| v.value()).collect()
    }

    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }
}

/// Evaluates `Σ c_m Y^m e^{-s Y}`.
pub fn eval_poly(c: &[Complex64], s: f64, y: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for v in c.iter().rev() {
        acc = acc * y + v;
    }
    acc * (-s * y).exp()
}

/// `∫_0^∞ |Σ c_m Y^m e^{-sY}|² dY = Σ c_m conj(c_m') (m+m')! / (2s)^{m+m'+1}`.
pub fn poly_norm_sq(c: &[Complex64], s: f64) -> f64 {
    let mut fact = vec![1.0f64; 2 * c.len() + 1];
    for k in 1..fact.len() {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut total = 0.0;
    for (m, a) in c.iter().enumerate() {
        for (mp, b) in c.iter().enumerate() {
            total += (a * b.conj()).re * fact[m + mp] / (2.0 * s).powi((m + mp + 1) as i32);
        }
    }
    total.max(0.0)
}

/// Geometric data at one point as jets: `g^{ij}`, `div(g^{-1})`, `s = |ξ|_g`, `V`.
struct Local {
    dim: usize,
    xi: [f64; 2],
    ginv: [[Jet; 2]; 2],
    div: [Jet; 2],
    s: Jet,
    v: Jet,
}

fn c(j: &Jet) -> CJet {
    j.to_complex()
}

impl Local {
    fn new(g: &MetricField, v: &PotentialField, xi: [f64; 2], x: [f64; 2], order: usize) -> Self {
        let dim = g.dim();
        let gj = g.jet(x, order);
        let (ginv, det) = invert_jet(&gj, dim);
        let sg = det.sqrt();
        let isg = sg.recip();
        let mut div = [Jet::zero().truncate(order - 1); 2];
        for i in 0..dim {
            let mut acc = Jet::zero().truncate(order - 1);
            for j in 0..dim {
                acc += (sg * ginv[i][j]).d(j);
            }
            div[i] = acc * isg;
        }
        let mut q = Jet::zero().truncate(order);
        for i in 0..dim {
            for j in 0..dim {
                q += ginv[i][j].scale(xi[i] * xi[j]);
            }
        }
        Self { dim, xi, ginv, div, s: q.sqrt(), v: v.jet(x, order) }
    }

    /// `ξ·d f = g^{ij} ξ_i ∂_j f`.
    fn xi_d(&self, f: &CJet) -> CJet {
        let mut acc = CJet::zero().truncate(f.order() - 1);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += c(&self.ginv[i][j].scale(self.xi[i])) * f.d(j);
            }
        }
        acc
    }

    /// `div(g^{-1})·ξ`.
    fn div_xi(&self) -> Jet {
        let mut acc = Jet::zero();
        for i in 0..self.dim {
            acc += self.div[i].scale(self.xi[i]);
        }
        acc
    }

    /// `g^{kl} ∂_k a ∂_l b`.
    fn dot(&self, a: &CJet, b: &CJet) -> CJet {
        let mut acc = CJet::zero().truncate(a.order().min(b.order()) - 1);
        for k in 0..self.dim {
            for l in 0..self.dim {
                acc += c(&self.ginv[k][l]) * a.d(k) * b.d(l);
            }
        }
        acc
    }

    /// `g^{kl} ∂_k ∂_l f + div(g^{-1})·∇f` (no potential).
    fn laplace(&self, f: &CJet) -> CJet {
        let mut acc = CJet::zero().truncate(f.order() - 2);
        for k in 0..self.dim {
            let fk = f.d(k);
            acc += c(&self.div[k]) * fk;
            for l in 0..self.dim {
                acc += c(&self.ginv[k][l]) * fk.d(l);
            }
        }
        acc
    }

    fn sc(&self) -> CJet {
        c(&self.s)
    }

    /// `b = 2 ξ·d s`.
    fn b(&self) -> CJet {
        self.xi_d(&self.sc()).scale(Complex64::new(2.0, 0.0))
    }

    fn l0(&self, p: &YPoly) -> YPoly {
        let s = self.sc();
        let mut out = YPoly::zero();
        for (m, cm) in p.c.iter().enumerate() {
            if m >= 1 {
                out.add_at(m - 1, (s * *cm).scale(Complex64::new(2.0 * m as f64, 0.0)));
            }
            if m >= 2 {
                out.add_at(m - 2, cm.scale(Complex64::new(-((m * (m - 1)) as f64), 0.0)));
            }
        }
        out
    }

    fn l1(&self, p: &YPoly) -> YPoly {
        let b = self.b();
        let dx = c(&self.div_xi());
        let mut out = YPoly::zero();
        for (m, cm) in p.c.iter().enumerate() {
            out.add_at(m, self.xi_d(cm).scale(Complex64::new(2.0, 0.0)) + dx * *cm);
            out.add_at(m + 1, -(b * *cm));
        }
        out
    }

    fn l2(&self, p: &YPoly) -> YPoly {
        let s = self.sc();
        let ls = self.laplace(&s);
        let ds2 = self.dot(&s, &s);
        let v = c(&self.v);
        let mut out = YPoly::zero();
        for (m, cm) in p.c.iter().enumerate() {
            out.add_at(m, self.laplace(cm) + v * *cm);
            out.add_at(m + 1, -(*cm * ls + self.dot(cm, &s).scale(Complex64::new(2.0, 0.0))));
            out.add_at(m + 2, *cm * ds2);
        }
        out
    }

    /// Solves `L_0 ψ = Σ F_m Y^m e^{-sY}` with `-∂_Y ψ(0) = 0`, decaying.
    fn solve_l0(&self, rhs: &YPoly) -> YPoly {
        let s = self.sc();
        let is = s.recip();
        let top = rhs.c.len();
        let order = rhs.c.iter().map(|v| v.order()).min().unwrap_or(MAX_ORDER);
        let mut h = vec![CJet::zero().truncate(order); top + 1];
        for m in (0..top).rev() {
            let mut acc = rhs.c[m];
            if m + 2 <= top {
                acc += h[m + 2].scale(Complex64::new(((m + 2) * (m + 1)) as f64, 0.0));
            }
            h[m + 1] = acc * is.scale(Complex64::new(1.0 / (2.0 * (m + 1) as f64), 0.0));
        }
        h[0] = h[1] * is;
        YPoly { c: h }
    }
}

/// Cascade coefficients at one point (values, not jets).
#[derive(Clone, Debug)]
pub struct WkbCoefficients {
    pub s: f64,
    pub eta_tilde: f64,
    pub f: [Complex64; 2],
    pub h: [Complex64; 3],
    pub big_f: [Complex64; 4],
    pub big_h: [Complex64; 5],
}

/// Cascade coefficients as jets.
struct Cascade {
    eta_t: CJet,
    f: [CJet; 2],
    h: [CJet; 3],
    big_f: [CJet; 4],
    big_h: [CJet; 5],
}

/// The approximate solution `Φ_N = e^{iN x·ξ} Σ_k N^{-k} ψ̃_k(x, N y)`.
#[derive(Clone, Debug)]
pub struct WkbSolution {
    metric: MetricField,
    potential: PotentialField,
    probe: OscillatoryProbe,
}

pub fn build_wkb(
    grid: &Grid,
    window: &Region,
    g: &MetricField,
    v: &PotentialField,
    probe: &OscillatoryProbe,
) -> Result<WkbSolution> {
    probe.check_admissible(grid, window)?;
    Ok(WkbSolution { metric: g.clone(), potential: v.clone(), probe: *probe })
}

impl WkbSolution {
    pub fn probe(&self) -> &OscillatoryProbe {
        &self.probe
    }

    fn local(&self, x: [f64; 2]) -> Local {
        Local::new(&self.metric, &self.potential, self.probe.xi, x, MAX_ORDER)
    }

    fn cascade(&self, loc: &Local, x: [f64; 2]) -> Cascade {
        let dim = loc.dim;
        let eta = self.probe.eta.eval_jet(&seed(x, MAX_ORDER), dim);
        let s = loc.sc();
        let is = s.recip();
        let eta_t = c(&eta) * is;
        let two = Complex64::new(2.0, 0.0);
        let b = loc.b();
        let dx = c(&loc.div_xi());
        // i L_1 ψ̃_0 = (f_1 + f_2 Y) e^{-sY}
        let f1 = (loc.xi_d(&eta_t).scale(two) + dx * eta_t).scale(I);
        let f2 = (eta_t * b).scale(-I);
        let h2 = f2 * is.scale(Complex64::new(0.25, 0.0));
        let h1 = f1 * is.scale(Complex64::new(0.5, 0.0)) + f2 * (is * is).scale(Complex64::new(0.25, 0.0));
        let h0 = h1 * is;
        let h = [h0, h1, h2];
        let a: Vec<CJet> = h.iter().map(|hk| loc.xi_d(hk).scale(two) + dx * *hk).collect();
        let ls = loc.laplace(&s);
        let ds2 = loc.dot(&s, &s);
        let v = c(&loc.v);
        let l2_eta = loc.laplace(&eta_t) + v * eta_t;
        let first = eta_t * ls + loc.dot(&eta_t, &s).scale(two);
        let big_f = [
            a[0].scale(I) + l2_eta,
            a[1].scale(I) - (h0 * b).scale(I) - first,
            a[2].scale(I) - (h1 * b).scale(I) + ds2 * eta_t,
            (h2 * b).scale(-I),
        ];
        let [f_1, f_2, f_3, f_4] = big_f;
        let s2 = s * s;
        let s3 = s2 * s;
        let r = |k: f64| Complex64::new(k, 0.0);
        let big_h4 = f_4 * is.scale(r(1.0 / 8.0));
        let big_h3 = (f_3 * s.scale(r(2.0)) + f_4.scale(r(3.0))) * s2.recip().scale(r(1.0 / 12.0));
        let big_h2 = (f_2 * s2.scale(r(2.0)) + f_3 * s.scale(r(2.0)) + f_4.scale(r(3.0))) * s3.recip().scale(r(1.0 / 8.0));
        let big_h1 = (f_1 * s3.scale(r(4.0)) + f_2 * s2.scale(r(2.0)) + f_3 * s.scale(r(2.0)) + f_4.scale(r(3.0)))
            * (s3 * s).recip().scale(r(1.0 / 8.0));
        let big_h0 = big_h1 * is;
        Cascade { eta_t, f: [f1, f2], h, big_f, big_h: [big_h0, big_h1, big_h2, big_h3, big_h4] }
    }

    /// `ψ̃_0, ψ̃_1, ψ̃_2` as Y-polynomials about `x`.
    fn psi(&self, cas: &Cascade) -> [YPoly; 3] {
        [YPoly::constant(cas.eta_t), YPoly { c: cas.h.to_vec() }, YPoly { c: cas.big_h.to_vec() }]
    }

    pub fn coefficients(&self, x: [f64; 2]) -> WkbCoefficients {
        let loc = self.local(x);
        let cas = self.cascade(&loc, x);
        let v = |j: &CJet| j.value();
        WkbCoefficients {
            s: loc.s.value(),
            eta_tilde: cas.eta_t.value().re,
            f: cas.f.map(|j| v(&j)),
            h: cas.h.map(|j| v(&j)),
            big_f: cas.big_f.map(|j| v(&j)),
            big_h: cas.big_h.map(|j| v(&j)),
        }
    }

    /// Values of the `ψ̃_k` coefficient lists at `x`.
    pub fn psi_values(&self, x: [f64; 2]) -> ([Vec<Complex64>; 3], f64) {
        let loc = self.local(x);
        let cas = self.cascade(&loc, x);
        let p = self.psi(&cas);
        ([p[0].values(), p[1].values(), p[2].values()], loc.s.value())
    }

    /// `Φ_N(x, y)` for the probe frequency `n`.
    pub fn phi(&self, x: [f64; 2], y: f64, n: f64) -> Complex64 {
        let dim = self.metric.dim();
        let (p, s) = self.psi_values(x);
        let big_y = n * y;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, pk) in p.iter().enumerate() {
            acc += eval_poly(pk, s, big_y) * n.powi(-(k as i32));
        }
        let phase = n * (0..dim).map(|k| x[k] * self.probe.xi[k]).sum::<f64>();
        acc * Complex64::from_polar(1.0, phase)
    }

    /// `-∂_y Φ_N(x, 0)` evaluated analytically.
    pub fn neumann_trace(&self, x: [f64; 2], n: f64) -> Complex64 {
        let dim = self.metric.dim();
        let (p, s) = self.psi_values(x);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, pk) in p.iter().enumerate() {
            let c0 = pk.first().copied().unwrap_or_default();
            let c1 = pk.get(1).copied().unwrap_or_default();
            // ∂_y = N ∂_Y and ∂_Y(Σ c_m Y^m e^{-sY})|_0 = c_1 - s c_0
            acc += -(c1 - c0 * s) * n * n.powi(-(k as i32));
        }
        let phase = n * (0..dim).map(|k| x[k] * self.probe.xi[k]).sum::<f64>();
        acc * Complex64::from_polar(1.0, phase)
    }

    /// Residual bands at `x`: the `N^2, N^1, N^0, N^{-1}, N^{-2}` coefficients
    /// of `e^{-iN x·ξ}(-Δ_g - ∂_y² + V)Φ_N` as Y-polynomial values.
    pub fn residual_bands(&self, x: [f64; 2]) -> ([Vec<Complex64>; 5], f64) {
        let loc = self.local(x);
        let cas = self.cascade(&loc, x);
        let [p0, p1, p2] = self.psi(&cas);
        let mi = -I;
        let b2 = loc.l0(&p0);
        let b1 = loc.l0(&p1).plus(&loc.l1(&p0).scaled(mi));
        let b0 = loc.l0(&p2).plus(&loc.l1(&p1).scaled(mi)).plus(&loc.l2(&p0).scaled(Complex64::new(-1.0, 0.0)));
        let bm1 = loc.l1(&p2).scaled(mi).plus(&loc.l2(&p1)).scaled(Complex64::new(-1.0, 0.0));
        let bm2 = loc.l2(&p2).scaled(Complex64::new(-1.0, 0.0));
        ([b2.values(), b1.values(), b0.values(), bm1.values(), bm2.values()], loc.s.value())
    }

    /// Largest deviation in the closure identities at `x`:
    /// `h_0 = h_1/s`, `H_0 = H_1/s`, and the four algebraic relations between
    /// `F_k` and `H_k`. Relative to the largest `|F_k|`.
    pub fn closure_defect(&self, x: [f64; 2]) -> f64 {
        let k = self.coefficients(x);
        let s = k.s;
        let [f1, f2, f3, f4] = k.big_f;
        let [h0, h1, h2, h3, h4] = k.big_h;
        let scale = k.big_f.iter().chain(k.f.iter()).map(|v| v.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let checks = [
            (k.h[0] - k.h[1] / s).norm(),
            (h0 - h1 / s).norm(),
            (f1 - (h1 * s - h2) * 2.0).norm(),
            (f2 - (h2 * (4.0 * s) - h3 * 6.0)).norm(),
            (f3 - (h3 * (6.0 * s) - h4 * 12.0)).norm(),
            (f4 - h4 * (8.0 * s)).norm(),
        ];
        checks.iter().fold(0.0f64, |m, v| m.max(*v)) / scale
    }

    /// Deviation of the explicit `F_k` from the generic operator expansion of
    /// `i L_1 ψ̃_1 + L_2 ψ̃_0`, of `f_k` from `i L_1 ψ̃_0`, and of `h_k`, `H_k`
    /// from the generic `L_0` solve of those right-hand sides; relative.
    pub fn expansion_defect(&self, x: [f64; 2]) -> f64 {
        let loc = self.local(x);
        let cas = self.cascade(&loc, x);
        let [p0, p1, _] = self.psi(&cas);
        let rhs1 = loc.l1(&p0).scaled(I).values();
        let rhs2 = loc.l1(&p1).scaled(I).plus(&loc.l2(&p0)).values();
        let f: Vec<Complex64> = cas.f.iter().map(|v| v.value()).collect();
        let big_f: Vec<Complex64> = cas.big_f.iter().map(|v| v.value()).collect();
        let scale = f.iter().chain(&big_f).map(|v| v.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let h: Vec<Complex64> = cas.h.iter().map(|v| v.value()).collect();
        let big_h: Vec<Complex64> = cas.big_h.iter().map(|v| v.value()).collect();
        let solved_h = loc.solve_l0(&loc.l1(&p0).scaled(I)).values();
        let solved_big_h = loc.solve_l0(&loc.l1(&p1).scaled(I).plus(&loc.l2(&p0))).values();
        let hscale = h.iter().chain(&big_h).map(|v| v.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let diff = |a: &[Complex64], b: &[Complex64]| {
            (0..a.len().max(b.len()))
                .map(|m| (a.get(m).copied().unwrap_or_default() - b.get(m).copied().unwrap_or_default()).norm())
                .fold(0.0, f64::max)
        };
        let forward = diff(&rhs1, &f).max(diff(&rhs2, &big_f)) / scale;
        let backward = diff(&solved_h, &h).max(diff(&solved_big_h, &big_h)) / hscale;
        forward.max(backward)
    }

    /// Largest relative size of the `N^2, N^1, N^0` residual bands at `x`
    /// (these vanish when the cascade solves its ODE system).
    pub fn cascade_defect(&self, x: [f64; 2]) -> f64 {
        let (bands, s) = self.residual_bands(x);
        let cas_scale = {
            let (p, _) = self.psi_values(x);
            p.iter().flat_map(|v| v.iter()).map(|c| c.norm()).fold(f64::MIN_POSITIVE, f64::max)
        };
        bands[..3].iter().map(|b| poly_norm_sq(b, s).sqrt()).fold(0.0, f64::max) / cas_scale
    }
}

/// Residual norms of `Φ_N` over `Ω × (0, ∞)` for a list of frequencies.
#[derive(Clone, Debug)]
pub struct WkbResidual {
    pub n: Vec<f64>,
    /// `L²(dx dY)` norm in the fast variable `Y = N y`.
    pub fast_norm: Vec<f64>,
    /// `L²(dx dy)` norm.
    pub plain_norm: Vec<f64>,
    /// Sup over grid nodes and sampled heights.
    pub sup_norm: Vec<f64>,
    pub slope_fast: f64,
    pub slope_plain: f64,
    pub slope_sup: f64,
    /// Largest `N^2, N^1, N^0` band norm relative to the solution scale.
    pub leading_band_defect: f64,
}

/// Least-squares slope of `log v` against `log n`.
pub fn loglog_slope(n: &[f64], v: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = n.iter().zip(v).filter(|(_, v)| **v > 0.0).map(|(n, v)| (n.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn wkb_residual(sol: &WkbSolution, grid: &Grid, y_max: f64, n_list: &[f64]) -> Result<WkbResidual> {
    if n_list.len() < 2 {
        return Err(LabError::Precondition("need at least two frequencies".into()));
    }
    let dim = grid.dim();
    let weights = grid.weights();
    let mut nodes: Vec<(usize, [Vec<Complex64>; 5], f64)> = Vec::new();
    let mut smin = f64::INFINITY;
    let mut defect: f64 = 0.0;
    for &p in grid.interior_nodes() {
        let x = grid.point(p);
        if sol.probe.eta.eval(x, dim) == 0.0 {
            continue;
        }
        let (bands, s) = sol.residual_bands(x);
        if bands.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(LabError::NonSmooth(format!("residual not finite at node {p}")));
        }
        smin = smin.min(s);
        defect = defect.max(sol.cascade_defect(x));
        nodes.push((p, bands, s));
    }
    let n_max = n_list.iter().copied().fold(0.0, f64::max);
    if nodes.is_empty() {
        return Ok(WkbResidual {
            n: n_list.to_vec(),
            fast_norm: vec![0.0; n_list.len()],
            plain_norm: vec![0.0; n_list.len()],
            sup_norm: vec![0.0; n_list.len()],
            slope_fast: f64::NAN,
            slope_plain: f64::NAN,
            slope_sup: f64::NAN,
            leading_band_defect: 0.0,
        });
    }
    if !(y_max * n_max * smin >= 20.0) {
        return Err(LabError::Precondition(format!("y_max = {y_max} too small for the decay tail")));
    }
    let mut fast = Vec::new();
    let mut plain = Vec::new();
    let mut sup = Vec::new();
    for &n in n_list {
        let mut total = 0.0;
        let mut top: f64 = 0.0;
        for (p, bands, s) in &nodes {
            // full residual polynomial in Y for this N
            let mut poly: Vec<Complex64> = Vec::new();
            for (k, b) in bands.iter().enumerate() {
                let scale = n.powi(2 - k as i32);
                for (m, v) in b.iter().enumerate() {
                    if poly.len() <= m {
                        poly.resize(m + 1, Complex64::new(0.0, 0.0));
                    }
                    poly[m] += v * scale;
                }
            }
            total += weights[*p] * poly_norm_sq(&poly, *s);
            for j in 0..400 {
                let yy = (30.0 / s).min(n * y_max) * j as f64 / 399.0;
                top = top.max(eval_poly(&poly, *s, yy).norm());
            }
        }
        fast.push(total.sqrt());
        plain.push((total / n).sqrt());
        sup.push(top);
    }
    Ok(WkbResidual {
        n: n_list.to_vec(),
        slope_fast: loglog_slope(n_list, &fast),
        slope_plain: loglog_slope(n_list, &plain),
        slope_sup: loglog_slope(n_list, &sup),
        fast_norm: fast,
        plain_norm: plain,
        sup_norm: sup,
        leading_band_defect: defect,
    })
}

/// Largest `|-∂_yΦ_N(x,0) - φ_N(x)|` over grid nodes, relative to `max|φ_N|`,
/// for real and imaginary parts separately.
pub fn wkb_neumann_check(sol: &WkbSolution, grid: &Grid, n: f64) -> (f64, f64) {
    let probe = sol.probe.with_frequency(n);
    let (re, im) = probe.neumann_data(grid);
    let scale = re.max_abs().max(im.max_abs()).max(f64::MIN_POSITIVE);
    let mut dre: f64 = 0.0;
    let mut dim_: f64 = 0.0;
    for &p in grid.interior_nodes() {
        let x = grid.point(p);
        let t = sol.neumann_trace(x, n);
        dre = dre.max((t.re - re.0[p]).abs());
        dim_ = dim_.max((t.im - im.0[p]).abs());
    }
    (dre / scale, dim_ / scale)
}

/// `|ξ|_g` at a point, rejecting `ξ = 0`.
pub fn symbol_norm(g: &MetricField, x: [f64; 2], xi: [f64; 2]) -> Result<f64> {
    metric_norm(g, x, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    // wide enough that the N^{-1} band dominates from N = 8 on
    const ETA: Bump = Bump { center: [1.6, 0.0], radius: 1.4, amplitude: 1.0 };

    fn setup_1d(g: MetricField, v: PotentialField) -> (Grid, WkbSolution) {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[257]).unwrap();
        let window = Region::from_box(&grid, &[0.1], &[3.1]).unwrap();
        let probe = OscillatoryProbe::new(ETA, [1.0, 0.0], 8.0);
        let sol = build_wkb(&grid, &window, &g, &v, &probe).unwrap();
        (grid, sol)
    }

    #[test]
    fn constant_metric_degenerates() {
        let (_, sol) = setup_1d(MetricField::constant_diagonal(1, [2.0, 1.0]), PotentialField::constant(1, 1.0));
        let k = sol.coefficients([1.4, 0.0]);
        assert!(k.f[1].norm() < 1e-14);
        assert!(k.h[2].norm() < 1e-14);
        assert!(k.big_f[3].norm() < 1e-14);
        assert!(k.big_h[4].norm() < 1e-14);
        // at the bump's stationary point f_1 vanishes
        assert!(sol.coefficients([1.6, 0.0]).f[0].norm() < 1e-14);
    }

    #[test]
    fn second_source_term_against_direct_formula() {
        // g = 1 + x²/4: g^{11} = 1/g, ∂g^{11} = -(x/2)/g², s = ξ/sqrt(g)
        let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.25, [0.0, 0.0]);
        let (_, sol) = setup_1d(g, PotentialField::zero(1));
        let x: f64 = 1.3;
        let gx = 1.0 + x * x / 4.0;
        let ginv = 1.0 / gx;
        let dginv = -(x / 2.0) / (gx * gx);
        let s = ginv.sqrt();
        let bump = ETA.eval([x, 0.0], 1);
        let eta_t = bump / s;
        let k = sol.coefficients([x, 0.0]);
        // f_2 = -i η̃ g^{11} ξ ∂_1(g^{11}) ξ² / s
        let want = -eta_t * ginv * dginv / s;
        assert!((k.f[1].im - want).abs() < 1e-13 && k.f[1].re.abs() < 1e-15);
        // the contraction ∂_k g^{ij} ξ_k ξ_i ξ_j / s with a + sign differs by -g^{11}
        let literal = eta_t * dginv / s;
        assert!((k.f[1].im - literal).abs() > 0.1 * literal.abs());
    }

    #[test]
    fn cascade_solves_ode_system() {
        let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.3, [1.0, 0.0]);
        let (grid, sol) = setup_1d(g, PotentialField::gaussian(1, 1.0, [1.5, 0.0], 0.5));
        for &p in grid.interior_nodes().iter().step_by(7) {
            let x = grid.point(p);
            if sol.probe().eta.eval(x, 1) == 0.0 {
                continue;
            }
            assert!(sol.closure_defect(x) < 1e-12);
            assert!(sol.expansion_defect(x) < 1e-12);
            assert!(sol.cascade_defect(x) < 1e-10);
        }
    }

    #[test]
    fn neumann_data_reproduced() {
        let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.3, [1.0, 0.0]);
        let (grid, sol) = setup_1d(g, PotentialField::zero(1));
        for n in [1.0, 64.0] {
            let (a, b) = wkb_neumann_check(&sol, &grid, n);
            assert!(a < 1e-10 && b < 1e-10);
        }
    }

    #[test]
    fn residual_decays_at_first_order() {
        let g = MetricField::diagonal_poly(1, [1.0, 1.0], 0.3, [1.0, 0.0]);
        let (grid, sol) = setup_1d(g, PotentialField::gaussian(1, 1.0, [1.5, 0.0], 0.5));
        let r = wkb_residual(&sol, &grid, 1.0, &[8.0, 16.0, 32.0, 64.0]).unwrap();
        assert!(r.slope_fast > -1.3 && r.slope_fast < -0.7, "{}", r.slope_fast);
        assert!(r.slope_sup > -1.3 && r.slope_sup < -0.7, "{}", r.slope_sup);
        assert!((r.slope_plain - r.slope_fast + 0.5).abs() < 1e-12);
        assert!(r.leading_band_defect < 1e-10);
    }

    #[test]
    fn constant_coefficients_halve_per_octave() {
        let (grid, sol) = setup_1d(MetricField::constant_diagonal(1, [2.0, 1.0]), PotentialField::constant(1, 0.5));
        let r = wkb_residual(&sol, &grid, 1.0, &[32.0, 64.0]).unwrap();
        let ratio = r.fast_norm[1] / r.fast_norm[0];
        assert!(ratio > 0.4 && ratio < 0.6, "{ratio}");
    }

    #[test]
    fn vanishing_amplitude_gives_zero() {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[129]).unwrap();
        let window = Region::from_box(&grid, &[0.6], &[2.6]).unwrap();
        let probe = OscillatoryProbe::new(Bump::new([1.6, 0.0], 0.6, 0.0), [1.0, 0.0], 8.0);
        let sol = build_wkb(&grid, &window, &MetricField::identity(1), &PotentialField::zero(1), &probe).unwrap();
        let r = wkb_residual(&sol, &grid, 1.0, &[8.0, 16.0]).unwrap();
        assert!(r.fast_norm.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_probes() {
        let grid = build_grid(&DomainSpec::interval(0.0, PI), &[129]).unwrap();
        let window = Region::from_box(&grid, &[0.6], &[2.6]).unwrap();
        let g = MetricField::identity(1);
        let v = PotentialField::zero(1);
        let zero_xi = OscillatoryProbe::new(Bump::new([1.6, 0.0], 0.3, 1.0), [0.0, 0.0], 8.0);
        assert!(build_wkb(&grid, &window, &g, &v, &zero_xi).is_err());
        let touching = OscillatoryProbe::new(Bump::new([1.0, 0.0], 0.4, 1.0), [1.0, 0.0], 8.0);
        assert!(build_wkb(&grid, &window, &g, &v, &touching).is_err());
    }

    #[test]
    fn norm_closed_form() {
        let c = [Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2), Complex64::new(0.1, 0.0)];
        let s = 1.7;
        let q = crate::calculus::QuadratureRule::default();
        let (v, _) = q.integrate_scalar(|y| eval_poly(&c, s, y).norm_sqr(), 0.0, 60.0).unwrap();
        assert!((v - poly_norm_sq(&c, s)).abs() < 1e-12);
    }
}
