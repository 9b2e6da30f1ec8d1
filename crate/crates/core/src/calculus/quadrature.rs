use crate::error::{LabError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// The 15 Kronrod abscissae on `[-1, 1]`, increasing, with weights.
fn kronrod_rule() -> ([f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut w = [0.0; 15];
    for i in 0..7 {
        x[i] = -XGK[i];
        w[i] = WGK[i];
        x[14 - i] = XGK[i];
        w[14 - i] = WGK[i];
    }
    w[7] = WGK[7];
    (x, w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    /// Adaptive Gauss–Kronrod (7/15) bisection.
    Adaptive { max_intervals: usize },
    /// Fixed number of equal 15-point panels.
    FixedPanels { panels: usize },
}

/// Quadrature over a finite interval, typically in a logarithmic variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureRule {
    pub scheme: Scheme,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

#[derive(Clone, Debug)]
pub struct Quadrature {
    pub value: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::adaptive(1e-13, 1e-12)
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl QuadratureRule {
    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        Self { scheme: Scheme::Adaptive { max_intervals: 4000 }, abs_tol, rel_tol }
    }

    pub fn fixed_panels(panels: usize) -> Self {
        Self { scheme: Scheme::FixedPanels { panels }, abs_tol: f64::INFINITY, rel_tol: f64::INFINITY }
    }

    /// Nodes and weights of a fixed-panel rule on `[a, b]`.
    pub fn nodes_weights(&self, a: f64, b: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let Scheme::FixedPanels { panels } = self.scheme else { return None };
        let (x, w) = kronrod_rule();
        let len = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(15 * panels);
        let mut weights = Vec::with_capacity(15 * panels);
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * len;
            for i in 0..15 {
                nodes.push(c + 0.5 * len * x[i]);
                weights.push(0.5 * len * w[i]);
            }
        }
        Some((nodes, weights))
    }

    fn panel(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, weight: &[f64]) -> Panel {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let fc = f(c);
        let n = fc.len();
        let mut k = vec![0.0; n];
        let mut g = vec![0.0; n];
        for i in 0..n {
            k[i] = WGK[7] * fc[i];
            g[i] = WG[3] * fc[i];
        }
        for j in 0..7 {
            let f1 = f(c - r * XGK[j]);
            let f2 = f(c + r * XGK[j]);
            for i in 0..n {
                let s = f1[i] + f2[i];
                k[i] += WGK[j] * s;
                if j % 2 == 1 {
                    g[i] += WG[j / 2] * s;
                }
            }
        }
        let mut error: f64 = 0.0;
        for i in 0..n {
            k[i] *= r;
            g[i] *= r;
            error = error.max(weight.get(i).copied().unwrap_or(1.0) * (k[i] - g[i]).abs());
        }
        Panel { a, b, value: k, error }
    }

    /// Integrates a vector-valued `f` over `[a, b]`. `weight` scales the
    /// per-component error (missing entries count as 1); the reported error is
    /// the weighted maximum.
    pub fn integrate(&self, f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, weight: &[f64]) -> Result<Quadrature> {
        match self.scheme {
            Scheme::FixedPanels { panels } => {
                let len = (b - a) / panels as f64;
                let mut value: Vec<f64> = Vec::new();
                let mut error = 0.0;
                for p in 0..panels {
                    let pan = Self::panel(f, a + p as f64 * len, a + (p + 1) as f64 * len, weight);
                    if value.is_empty() {
                        value = pan.value;
                    } else {
                        value.iter_mut().zip(&pan.value).for_each(|(v, x)| *v += x);
                    }
                    error += pan.error;
                }
                Ok(Quadrature { value, error, evaluations: 15 * panels })
            }
            Scheme::Adaptive { max_intervals } => {
                let mut panels = vec![Self::panel(f, a, b, weight)];
                let mut evaluations = 15;
                loop {
                    let n = panels[0].value.len();
                    let mut total = vec![0.0; n];
                    let mut error = 0.0;
                    for p in &panels {
                        total.iter_mut().zip(&p.value).for_each(|(t, v)| *t += v);
                        error += p.error;
                    }
                    let scale = total
                        .iter()
                        .enumerate()
                        .map(|(i, v)| weight.get(i).copied().unwrap_or(1.0) * v.abs())
                        .fold(0.0, f64::max);
                    let target = self.abs_tol.max(self.rel_tol * scale);
                    if error <= target {
                        return Ok(Quadrature { value: total, error, evaluations });
                    }
                    if panels.len() >= max_intervals {
                        return Err(LabError::Quadrature { estimate: error, tolerance: target });
                    }
                    let worst = panels.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).map(|(i, _)| i).unwrap();
                    let p = panels.swap_remove(worst);
                    let mid = 0.5 * (p.a + p.b);
                    if !(mid > p.a && mid < p.b) {
                        return Err(LabError::Quadrature { estimate: error, tolerance: target });
                    }
                    panels.push(Self::panel(f, p.a, mid, weight));
                    panels.push(Self::panel(f, mid, p.b, weight));
                    evaluations += 30;
                }
            }
        }
    }

    pub fn integrate_scalar(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
        let q = self.integrate(&|x| vec![f(x)], a, b, &[])?;
        Ok((q.value[0], q.error))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness_and_positivity() {
        let rule = QuadratureRule::fixed_panels(3);
        let (x, w) = rule.nodes_weights(0.0, 2.0).unwrap();
        assert!(w.iter().all(|&v| v > 0.0));
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(20)).sum();
        assert!((s - 2f64.powi(21) / 21.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let rule = QuadratureRule::adaptive(1e-13, 1e-12);
        let (v, _) = rule.integrate_scalar(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn gaussian_in_log_variable() {
        // ∫_0^∞ e^{-t} t^{-1/2} dt = sqrt(pi), substituting t = e^v
        let rule = QuadratureRule::default();
        let (v, _) = rule.integrate_scalar(|v: f64| (-(v.exp())).exp() * (0.5 * v).exp(), -80.0, 4.0).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
