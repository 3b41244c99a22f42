//! Continuous piecewise Chebyshev interpolant on a [`Mesh1D`].

use crate::cheb::{interpolate, ChebError, Interpolant1D};
use crate::class::SingularFunction;
use crate::mesh1d::Mesh1D;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SplineError {
    #[error("f is not finite at node t = {t} (value {value})")]
    NonFiniteNode { t: f64, value: f64 },
    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("need at least 2 nodes per interval for a continuous spline (got {0})")]
    TooFewNodes(usize),
    #[error("at least 3 samples per interval are required (got {0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Cheb(#[from] ChebError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline1D {
    pub mesh: Mesh1D,
    pub s: usize,
    pub pieces: Vec<Interpolant1D>,
    /// Distinct interpolation points, ascending.
    pub nodes: Vec<f64>,
    pub source: String,
    breakpoints: Vec<f64>,
}

impl Spline1D {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Index of the interval holding `t`; a breakpoint belongs to the interval
    /// on its left.
    pub fn locate(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&x| x < t).saturating_sub(1).min(self.pieces.len() - 1)
    }

    pub fn eval(&self, t: f64) -> Result<f64, SplineError> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(SplineError::OutsideDomain(vec![t]));
        }
        Ok(self.pieces[self.locate(t)].eval(t))
    }

    /// Largest `|left limit - right limit|` over interior breakpoints.
    pub fn continuity_defect(&self) -> f64 {
        self.pieces.windows(2).map(|w| (w[0].eval(w[0].b) - w[1].eval(w[1].a)).abs()).fold(0.0, f64::max)
    }
}

/// Interpolate `f` with `s` endpoint-anchored Chebyshev nodes on every mesh
/// interval.
pub fn build_spline1d(f: impl Fn(f64) -> f64, mesh: &Mesh1D, s: usize, source: &str) -> Result<Spline1D, SplineError> {
    if s < 2 {
        return Err(SplineError::TooFewNodes(s));
    }
    let mut pieces = Vec::with_capacity(mesh.len());
    let mut nodes = Vec::with_capacity((s - 1) * mesh.len() + 1);
    for iv in &mesh.intervals {
        let p = interpolate(&f, iv.a, iv.b, s).map_err(|e| match e {
            ChebError::NonFiniteNode { t, value, .. } => SplineError::NonFiniteNode { t, value },
            other => SplineError::Cheb(other),
        })?;
        let skip = usize::from(!nodes.is_empty());
        nodes.extend_from_slice(&p.nodes[skip..]);
        pieces.push(p);
    }
    Ok(Spline1D { mesh: mesh.clone(), s, pieces, nodes, source: source.to_string(), breakpoints: mesh.breakpoints() })
}

/// Spline of a one-dimensional class member with `s` nodes per interval.
pub fn spline_of(f: &SingularFunction, mesh: &Mesh1D) -> Result<Spline1D, SplineError> {
    build_spline1d(|t| f.eval1(t), mesh, mesh.params.s as usize, &f.family().to_string())
}

/// Sample points used by [`sup_error`] on `[a, b]`: `q` Chebyshev-Lobatto
/// points (endpoints included).
pub fn lobatto_samples(a: f64, b: f64, q: usize) -> impl Iterator<Item = f64> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (0..q).map(move |j| {
        if j == 0 {
            a
        } else if j + 1 == q {
            b
        } else {
            c - h * (std::f64::consts::PI * j as f64 / (q - 1) as f64).cos()
        }
    })
}

/// Number of geometric ladder points placed toward `-1` and `1`.
pub const BOUNDARY_LADDER: i32 = 40;

/// Sampled `max |f - sp|`: `q` Lobatto points per interval plus a geometric
/// ladder `len * 2^-j` toward each end of the domain.
pub fn sup_error(sp: &Spline1D, f: impl Fn(f64) -> f64, q: usize) -> Result<f64, SplineError> {
    if q < 3 {
        return Err(SplineError::TooFewSamples(q));
    }
    let mut worst = 0.0f64;
    for p in &sp.pieces {
        for t in lobatto_samples(p.a, p.b, q) {
            worst = worst.max((f(t) - p.eval(t)).abs());
        }
    }
    let first = &sp.pieces[0];
    let last = &sp.pieces[sp.pieces.len() - 1];
    for j in 1..=BOUNDARY_LADDER {
        let scale = 0.5f64.powi(j);
        let tl = -1.0 + (first.b - first.a) * scale;
        let tr = 1.0 - (last.b - last.a) * scale;
        worst = worst.max((f(tl) - first.eval(tl)).abs());
        worst = worst.max((f(tr) - last.eval(tr)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{test_function, ClassKind, Family, FunctionClassSpec};
    use crate::mesh1d::{build_mesh1d, Variant1D};
    use approx::assert_abs_diff_eq;

    fn bar_q(r: u32, gamma: f64, u: u32) -> FunctionClassSpec {
        FunctionClassSpec::new(ClassKind::BarQu, r, gamma, u, 1).unwrap()
    }

    #[test]
    fn polynomial_is_reproduced() {
        let spec = bar_q(2, 1.0, 1);
        let mesh = build_mesh1d(&spec, 8, Variant1D::LogBoundary).unwrap();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t;
        let sp = build_spline1d(f, &mesh, 3, "quadratic").unwrap();
        assert!(sup_error(&sp, f, 33).unwrap() <= 1e-11);
    }

    #[test]
    fn continuity_and_node_count() {
        let spec = bar_q(2, 1.0, 1);
        let f = test_function(&spec, Family::LogPower).unwrap();
        let mesh = build_mesh1d(&spec, 8, Variant1D::LogBoundary).unwrap();
        let sp = spline_of(&f, &mesh).unwrap();
        assert!(sp.continuity_defect() <= 1e-10);
        assert_eq!(sp.node_count(), (sp.s - 1) * mesh.len() + 1);
        // enumeration oracle: 2 (ceil(ln 8) + 7) intervals, 2 new nodes each, plus -1
        assert_eq!(sp.node_count(), 2 * 2 * (3 + 7) + 1);
        assert!(sp.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn evaluation_rules() {
        let spec = bar_q(2, 1.0, 1);
        let f = test_function(&spec, Family::LogPower).unwrap();
        let mesh = build_mesh1d(&spec, 8, Variant1D::LogBoundary).unwrap();
        let sp = spline_of(&f, &mesh).unwrap();
        assert_eq!(sp.eval(-1.0).unwrap(), f.eval1(-1.0));
        assert!(sp.eval(0.0).unwrap().is_finite());
        assert!(sp.eval(1.5).is_err());
        for w in sp.pieces.windows(2) {
            let t = w[0].b;
            assert_abs_diff_eq!(w[0].eval(t), w[1].eval(t), epsilon = 1e-10);
            assert_eq!(sp.locate(t), sp.locate(w[0].a + 0.5 * (t - w[0].a)));
        }
    }

    #[test]
    fn single_interval_monomial() {
        // t^s - P(t) = T_s(c t) / (c^s 2^(s-1)), max at t = +-1 interior ladder side
        let spec = FunctionClassSpec::new(ClassKind::QrGamma, 1, 2.0, 1, 1).unwrap();
        let mut mesh = build_mesh1d(&spec, 2, Variant1D::LogBoundary).unwrap();
        let whole = crate::mesh1d::Interval1D { a: -1.0, b: 1.0, ..mesh.intervals[0] };
        mesh.intervals = vec![whole];
        let s = 3usize;
        let sp = build_spline1d(|t| t.powi(3), &mesh, s, "cube").unwrap();
        let c = (std::f64::consts::PI / 6.0).cos();
        let exact = 0.25 / c.powi(3);
        let err = sup_error(&sp, |t| t.powi(3), 65).unwrap();
        assert!(err <= exact + 1e-12 && err >= 0.98 * exact, "{err} vs {exact}");
    }

    #[test]
    fn error_ratio_under_doubling() {
        let spec = bar_q(2, 1.0, 1);
        let f = test_function(&spec, Family::LogPower).unwrap();
        let err = |n: usize| {
            let mesh = build_mesh1d(&spec, n, Variant1D::LogBoundary).unwrap();
            sup_error(&spline_of(&f, &mesh).unwrap(), |t| f.eval1(t), 33).unwrap()
        };
        let ratio = err(8) / err(16);
        assert!(ratio > 8.0 * 0.65 && ratio < 8.0 * 1.35, "ratio {ratio}");
    }

    #[test]
    fn more_samples_never_lower_the_error() {
        let spec = bar_q(2, 1.0, 1);
        let f = test_function(&spec, Family::LogPower).unwrap();
        let mesh = build_mesh1d(&spec, 16, Variant1D::LogBoundary).unwrap();
        let sp = spline_of(&f, &mesh).unwrap();
        let errs: Vec<f64> = [3, 5, 9, 17, 33, 65].iter().map(|&q| sup_error(&sp, |t| f.eval1(t), q).unwrap()).collect();
        assert!(errs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn local_modification_stays_local() {
        let spec = bar_q(2, 1.0, 1);
        let mesh = build_mesh1d(&spec, 8, Variant1D::LogBoundary).unwrap();
        let target = mesh.intervals[5];
        let base = |t: f64| (3.0 * t).sin();
        let bumped = |t: f64| if t > target.a && t < target.b { base(t) + 1.0 } else { base(t) };
        let a = build_spline1d(base, &mesh, 3, "a").unwrap();
        let b = build_spline1d(bumped, &mesh, 3, "b").unwrap();
        for (i, (pa, pb)) in a.pieces.iter().zip(&b.pieces).enumerate() {
            if i != 5 {
                assert_eq!(pa.values, pb.values, "interval {i}");
            }
        }
        assert_ne!(a.pieces[5].values, b.pieces[5].values);
    }

    #[test]
    fn sample_count_guard() {
        let spec = bar_q(2, 1.0, 1);
        let mesh = build_mesh1d(&spec, 4, Variant1D::LogBoundary).unwrap();
        let sp = build_spline1d(|t| t, &mesh, 3, "id").unwrap();
        assert_eq!(sup_error(&sp, |t| t, 2), Err(SplineError::TooFewSamples(2)));
        assert_eq!(build_spline1d(|t| t, &mesh, 1, "id").unwrap_err(), SplineError::TooFewNodes(1));
    }
}
