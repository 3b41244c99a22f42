//! Chebyshev-zero interpolation on an interval.
//!
//! Nodes are the zeros of `T_s`, either used as-is or stretched so the outer
//! two zeros land exactly on the interval ends. The stretched layout lets
//! neighbouring intervals share their endpoint nodes, which is what makes a
//! piecewise interpolant continuous.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ChebError {
    #[error("number of nodes must be at least 1")]
    ZeroNodes,
    #[error("interval [{a}, {b}] is empty or not finite")]
    EmptyInterval { a: f64, b: f64 },
    #[error("function value {value} at node {index} (t = {t}) is not finite")]
    NonFiniteNode { index: usize, t: f64, value: f64 },
    #[error("expected {expected} node values, got {got}")]
    ValueCount { expected: usize, got: usize },
}

/// Placement of the `s` interpolation nodes inside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum NodeLayout {
    /// Zeros of `T_s` scaled so the first and last zero sit on `a` and `b`.
    #[default]
    EndpointAnchored,
    /// Plain affine image of the zeros of `T_s` on `[-1, 1]`.
    ChebyshevZeros,
}

/// Zeros of the Chebyshev polynomial `T_s`, ascending.
///
/// Written as `sin((2k-1-s) pi / 2s)`, which equals `cos((2(s-k)+1) pi / 2s)`
/// but is odd in `k -> s+1-k` in floating point, so the set is exactly
/// symmetric and the middle zero of odd `s` is exactly `0`.
pub fn chebyshev_zeros(s: usize) -> Result<Vec<f64>, ChebError> {
    if s == 0 {
        return Err(ChebError::ZeroNodes);
    }
    let denom = 2.0 * s as f64;
    Ok((1..=s).map(|k| ((2 * k) as f64 - 1.0 - s as f64) * PI / denom).map(f64::sin).collect())
}

/// Nodes of `layout` on the reference interval `[-1, 1]`.
pub fn reference_nodes(layout: NodeLayout, s: usize) -> Result<Vec<f64>, ChebError> {
    let mut z = chebyshev_zeros(s)?;
    if layout == NodeLayout::EndpointAnchored && s > 1 {
        let top = z[s - 1];
        for x in z.iter_mut() {
            *x /= top;
        }
        z[0] = -1.0;
        z[s - 1] = 1.0;
    }
    Ok(z)
}

fn check_interval(a: f64, b: f64) -> Result<(), ChebError> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(ChebError::EmptyInterval { a, b })
    }
}

/// Affine image of reference nodes on `[a, b]`. Reference `-1` and `1` map to
/// `a` and `b` bit-exactly.
pub fn map_reference(reference: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    reference
        .iter()
        .map(|&x| {
            if x == -1.0 {
                a
            } else if x == 1.0 {
                b
            } else {
                c + h * x
            }
        })
        .collect()
}

/// Endpoint-anchored Chebyshev nodes on `[a, b]`. For `s = 1` the single node
/// is the midpoint.
pub fn map_nodes(s: usize, a: f64, b: f64) -> Result<Vec<f64>, ChebError> {
    check_interval(a, b)?;
    Ok(map_reference(&reference_nodes(NodeLayout::EndpointAnchored, s)?, a, b))
}

/// Barycentric weights `1 / prod_{j != i} (x_i - x_j)`, rescaled so the
/// largest has magnitude 1.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| 1.0 / nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| xi - xj).product::<f64>())
        .collect();
    let big = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for x in w.iter_mut() {
        *x /= big;
    }
    w
}

/// Lagrange basis values `l_i(x)` written into `out`. Exact node hits produce
/// a unit vector.
pub fn lagrange_basis(nodes: &[f64], weights: &[f64], x: f64, out: &mut [f64]) {
    if let Some(hit) = nodes.iter().position(|&n| n == x) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[hit] = 1.0;
        return;
    }
    let mut total = 0.0;
    for ((o, &n), &w) in out.iter_mut().zip(nodes).zip(weights) {
        *o = w / (x - n);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Interpolation polynomial of degree `s - 1` on `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolant1D {
    pub a: f64,
    pub b: f64,
    pub layout: NodeLayout,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// Weights for the reference nodes; invariant under the affine map.
    weights: Vec<f64>,
    reference: Vec<f64>,
}

/// A value together with whether it was extrapolated outside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub extrapolated: bool,
}

impl Interpolant1D {
    /// Interpolant of given node values (ordered like [`Interpolant1D::nodes`]).
    pub fn from_values(layout: NodeLayout, a: f64, b: f64, values: Vec<f64>) -> Result<Self, ChebError> {
        check_interval(a, b)?;
        let reference = reference_nodes(layout, values.len())?;
        let nodes = map_reference(&reference, a, b);
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ChebError::NonFiniteNode { index, t: nodes[index], value });
        }
        Ok(Self { a, b, layout, weights: barycentric_weights(&reference), reference, nodes, values })
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Barycentric evaluation. Outside `[a, b]` the polynomial is extended.
    pub fn eval(&self, t: f64) -> f64 {
        if let Some(hit) = self.nodes.iter().position(|&n| n == t) {
            return self.values[hit];
        }
        if self.nodes.len() == 1 {
            return self.values[0];
        }
        let x = (t - 0.5 * (self.a + self.b)) / (0.5 * (self.b - self.a));
        // Offsetting by the first value keeps constants exact.
        let base = self.values[0];
        let (mut num, mut den) = (0.0, 0.0);
        for ((&r, &w), &v) in self.reference.iter().zip(&self.weights).zip(&self.values) {
            let diff = x - r;
            if diff == 0.0 {
                return v;
            }
            let c = w / diff;
            num += c * (v - base);
            den += c;
        }
        base + num / den
    }

    pub fn eval_flagged(&self, t: f64) -> Evaluation {
        Evaluation { value: self.eval(t), extrapolated: t < self.a || t > self.b }
    }
}

/// Interpolate `f` at endpoint-anchored nodes.
pub fn interpolate(f: impl Fn(f64) -> f64, a: f64, b: f64, s: usize) -> Result<Interpolant1D, ChebError> {
    interpolate_with(NodeLayout::EndpointAnchored, f, a, b, s)
}

pub fn interpolate_with(
    layout: NodeLayout,
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    s: usize,
) -> Result<Interpolant1D, ChebError> {
    check_interval(a, b)?;
    let nodes = map_reference(&reference_nodes(layout, s)?, a, b);
    let values = nodes.iter().map(|&t| f(t)).collect();
    Interpolant1D::from_values(layout, a, b, values)
}

fn lebesgue_function(nodes: &[f64], weights: &[f64], x: f64, scratch: &mut [f64]) -> f64 {
    lagrange_basis(nodes, weights, x, scratch);
    scratch.iter().map(|v| v.abs()).sum()
}

/// Lebesgue constant of the endpoint-anchored nodes, sampled on `samples`
/// points of `[-1, 1]` (at least `10 s^2 + 1`), with golden-section
/// refinement of the maximum between consecutive nodes.
pub fn lebesgue_constant(s: usize, samples: usize) -> Result<f64, ChebError> {
    lebesgue_constant_on(NodeLayout::EndpointAnchored, s, -1.0, 1.0, samples)
}

/// Lebesgue constant over the node span of `layout` mapped to `[a, b]`.
pub fn lebesgue_constant_on(layout: NodeLayout, s: usize, a: f64, b: f64, samples: usize) -> Result<f64, ChebError> {
    check_interval(a, b)?;
    if s == 0 {
        return Err(ChebError::ZeroNodes);
    }
    if s == 1 {
        return Ok(1.0);
    }
    // The Lebesgue function is affine invariant, so work on the reference
    // nodes; `a` and `b` only enter through validation.
    let nodes = reference_nodes(layout, s)?;
    let weights = barycentric_weights(&nodes);
    let mut scratch = vec![0.0; s];
    let lo = nodes[0];
    let hi = nodes[s - 1];
    let count = samples.max(10 * s * s + 1);
    let mut best = 1.0f64;
    for i in 0..count {
        let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        best = best.max(lebesgue_function(&nodes, &weights, x, &mut scratch));
    }
    for pair in nodes.windows(2) {
        let (x, v) = golden_max(|x| lebesgue_function(&nodes, &weights, x, &mut scratch), pair[0], pair[1], 1e-15);
        let _ = x;
        best = best.max(v);
    }
    Ok(best)
}

/// Golden-section search for the maximum of a unimodal `g` on `[lo, hi]`.
pub(crate) fn golden_max(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    if g1 >= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}
