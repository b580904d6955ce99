//! Tensor-product quadrature over rectangular parameter domains.
//!
//! Non-periodic directions use composite Gauss–Legendre panels. Panel
//! boundaries always include the declared breakpoints, so integrands with
//! kinks at known places (cutoff radii, flow fronts) stay on smooth panels.
//! Periodic directions use the equispaced rule. Node evaluation runs in
//! parallel, and the weighted values are reduced with a fixed pairwise
//! summation so results do not depend on the thread schedule.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn cached_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=40).map(gauss_legendre).collect());
    assert!(
        (1..=40).contains(&n),
        "Gauss-Legendre order {n} out of range 1..=40"
    );
    &rules[n - 1]
}

/// Discretisation level shared by every patch of a configuration.
///
/// Level `l` splits each smooth segment into `base_panels * 2^l` panels of
/// `order` Gauss points; periodic directions get `base_panels * order * 2^l`
/// equispaced nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub level: u32,
    pub order: usize,
}

impl Resolution {
    pub const fn new(level: u32) -> Self {
        Self { level, order: 8 }
    }

    pub const fn with_order(level: u32, order: usize) -> Self {
        Self { level, order }
    }

    fn multiplier(&self) -> usize {
        1usize << self.level.min(12)
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self::new(2)
    }
}

/// One coordinate direction of a parameter domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Interior points where panels must end.
    pub breaks: Vec<f64>,
    pub periodic: bool,
    /// Panels per smooth segment at level 0.
    pub base_panels: usize,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            breaks: Vec::new(),
            periodic: false,
            base_panels: 1,
        }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self {
            periodic: true,
            base_panels: 4,
            ..Self::new(lo, hi)
        }
    }

    pub fn with_breaks(mut self, breaks: impl IntoIterator<Item = f64>) -> Self {
        self.breaks.extend(breaks);
        self
    }

    pub fn with_panels(mut self, base_panels: usize) -> Self {
        self.base_panels = base_panels.max(1);
        self
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.periodic
            || (x >= self.lo - 1e-12 * self.length().abs()
                && x <= self.hi + 1e-12 * self.length().abs())
    }

    /// Segment endpoints including the interior breakpoints, sorted.
    pub fn segments(&self) -> Vec<f64> {
        let mut pts = vec![self.lo];
        let span = self.length();
        let mut inner: Vec<f64> = self
            .breaks
            .iter()
            .copied()
            .filter(|b| *b > self.lo + 1e-13 * span && *b < self.hi - 1e-13 * span)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * span);
        pts.extend(inner);
        pts.push(self.hi);
        pts
    }

    /// One-dimensional rule at the given resolution.
    pub fn rule(&self, res: &Resolution) -> Rule1d {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if self.periodic {
            let n = self.base_panels * res.order * res.multiplier();
            let h = self.length() / n as f64;
            for i in 0..n {
                nodes.push(self.lo + (i as f64 + 0.5) * h);
                weights.push(h);
            }
            return Rule1d { nodes, weights };
        }
        let (gx, gw) = cached_rule(res.order);
        let panels = self.base_panels * res.multiplier();
        for seg in self.segments().windows(2) {
            let h = (seg[1] - seg[0]) / panels as f64;
            for p in 0..panels {
                let a = seg[0] + p as f64 * h;
                let mid = a + 0.5 * h;
                for (x, w) in gx.iter().zip(gw) {
                    nodes.push(mid + 0.5 * h * x);
                    weights.push(0.5 * h * w);
                }
            }
        }
        Rule1d { nodes, weights }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn integrate(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(x, w)| w * f(*x))
            .collect();
        pairwise_sum(&vals)
    }
}

/// Rectangular parameter domain of a patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub u: Interval,
    pub v: Interval,
}

impl ParamDomain {
    pub fn new(u: Interval, v: Interval) -> Self {
        Self { u, v }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.u.contains(u) && self.v.contains(v)
    }

    pub fn measure(&self) -> f64 {
        self.u.length() * self.v.length()
    }

    pub fn grid(&self, res: &Resolution) -> QuadratureGrid {
        QuadratureGrid::tensor(&self.u.rule(res), &self.v.rule(res), *res)
    }
}

/// Nodes and weights of a tensor-product rule.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub resolution: Resolution,
}

impl QuadratureGrid {
    pub fn tensor(u: &Rule1d, v: &Rule1d, resolution: Resolution) -> Self {
        let mut nodes = Vec::with_capacity(u.nodes.len() * v.nodes.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (a, wa) in u.nodes.iter().zip(&u.weights) {
            for (b, wb) in v.nodes.iter().zip(&v.weights) {
                nodes.push([*a, *b]);
                weights.push(wa * wb);
            }
        }
        Self {
            nodes,
            weights,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| w * f(p[0], p[1]))
            .collect();
        pairwise_sum(&vals)
    }

    /// Integrates `K` quantities at once; the first error aborts.
    pub fn try_integrate_n<const K: usize>(
        &self,
        f: impl Fn(f64, f64) -> Result<[f64; K]> + Sync,
    ) -> Result<[f64; K]> {
        let vals: Vec<[f64; K]> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| f(p[0], p[1]).map(|v| v.map(|x| w * x)))
            .collect::<Result<_>>()?;
        Ok(pairwise_sum_n(&vals))
    }

    pub fn try_integrate(&self, f: impl Fn(f64, f64) -> Result<f64> + Sync) -> Result<f64> {
        self.try_integrate_n(|u, v| f(u, v).map(|x| [x]))
            .map(|[x]| x)
    }

    /// Maximum of a node function, for residual checks.
    pub fn try_max(&self, f: impl Fn(f64, f64) -> Result<f64> + Sync) -> Result<f64> {
        let vals: Vec<f64> = self
            .nodes
            .par_iter()
            .map(|p| f(p[0], p[1]))
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Pairwise summation with a fixed split, independent of threading.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn pairwise_sum_n<const K: usize>(xs: &[[f64; K]]) -> [f64; K] {
    if xs.len() <= 16 {
        let mut acc = [0.0; K];
        for x in xs {
            for k in 0..K {
                acc[k] += x[k];
            }
        }
        return acc;
    }
    let mid = xs.len() / 2;
    let a = pairwise_sum_n(&xs[..mid]);
    let b = pairwise_sum_n(&xs[mid..]);
    std::array::from_fn(|k| a[k] + b[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_point_rule_matches_closed_form() {
        let (x, w) = gauss_legendre(3);
        let r = (3.0f64 / 5.0).sqrt();
        assert_relative_eq!(x[0], -r, epsilon = 1e-15);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn rule_is_exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_rule_respects_breakpoints() {
        let iv = Interval::new(0.0, 3.0).with_breaks([1.0, 2.0]);
        let rule = iv.rule(&Resolution::new(1));
        // |x - 1| has a kink at the breakpoint and is integrated exactly.
        let q = rule.integrate(|x| (x - 1.0).abs());
        assert_relative_eq!(q, 0.5 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn periodic_rule_integrates_trig_polynomials() {
        let iv = Interval::periodic(0.0, std::f64::consts::TAU);
        let q = iv.rule(&Resolution::new(0)).integrate(|t| t.cos().powi(2));
        assert_relative_eq!(q, std::f64::consts::PI, epsilon = 1e-14);
    }

    #[test]
    fn pairwise_sum_is_schedule_independent() {
        let xs: Vec<f64> = (0..10_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let grid = QuadratureGrid {
            nodes: (0..xs.len()).map(|i| [i as f64, 0.0]).collect(),
            weights: vec![1.0; xs.len()],
            resolution: Resolution::default(),
        };
        let a = grid.integrate(|u, _| 1.0 / (1.0 + u));
        let b = grid.integrate(|u, _| 1.0 / (1.0 + u));
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), pairwise_sum(&xs).to_bits());
    }
}
