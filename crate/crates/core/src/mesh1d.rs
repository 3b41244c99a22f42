//! Graded partitions of `[-1, 1]` with logarithmic subdivision of the layers.

use crate::class::{derive_params, ClassError, ClassKind, DerivedParams, FunctionClassSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MeshError {
    #[error("N must be at least 2 (got {0})")]
    TooFewLayers(usize),
    #[error("grading exponent v must exceed 1 (got {0})")]
    InvalidGrading(f64),
    #[error("variant {variant} does not apply to class {kind} with u = {u}")]
    VariantMismatch { variant: String, kind: ClassKind, u: u32 },
    #[error("subdivision count must be at least 1")]
    ZeroSubdivision,
    #[error(transparent)]
    Class(#[from] ClassError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Which subdivision rule to apply to the graded layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant1D {
    /// Only the boundary layer is split, into `ceil(ln N)` pieces.
    #[serde(rename = "ThmA_u1", alias = "log-boundary")]
    LogBoundary,
    /// `M_0 = ceil(ln^(u/r) N)`, `M_k = ceil(ln^((u-1)/s)(N/k))`.
    #[serde(rename = "ThmA_u2", alias = "log-layers")]
    LogLayers,
    /// `M_0 = ceil(ln^(u/(r+1-mu)) N)`, `M_k = ceil(ln^(u/s) N)`.
    #[serde(rename = "ThmB_Qu", alias = "fractional-log")]
    FractionalLog,
    /// Same boundary layer as [`Variant1D::FractionalLog`], but
    /// `M_k = ceil(ln^(u/s)(N/k))` for `k >= 1`.
    #[serde(rename = "fractional-log-local")]
    FractionalLogLocal,
}

impl Variant1D {
    pub fn name(self) -> &'static str {
        match self {
            Variant1D::LogBoundary => "ThmA_u1",
            Variant1D::LogLayers => "ThmA_u2",
            Variant1D::FractionalLog => "ThmB_Qu",
            Variant1D::FractionalLogLocal => "fractional-log-local",
        }
    }

    /// The natural variant for a class.
    pub fn default_for(spec: &FunctionClassSpec) -> Variant1D {
        match spec.kind {
            ClassKind::Qu => Variant1D::FractionalLog,
            ClassKind::BarQu if spec.u >= 2 => Variant1D::LogLayers,
            _ => Variant1D::LogBoundary,
        }
    }

    fn applies_to(self, spec: &FunctionClassSpec) -> bool {
        match self {
            Variant1D::LogBoundary => spec.kind != ClassKind::Qu && (spec.kind != ClassKind::BarQu || spec.u == 1),
            Variant1D::LogLayers => spec.kind == ClassKind::BarQu,
            Variant1D::FractionalLog | Variant1D::FractionalLogLocal => spec.kind == ClassKind::Qu,
        }
    }
}

impl fmt::Display for Variant1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant1D {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ThmA_u1" | "log-boundary" => Ok(Variant1D::LogBoundary),
            "ThmA_u2" | "log-layers" => Ok(Variant1D::LogLayers),
            "ThmB_Qu" | "fractional-log" => Ok(Variant1D::FractionalLog),
            "fractional-log-local" => Ok(Variant1D::FractionalLogLocal),
            other => Err(format!("unknown 1D variant `{other}`")),
        }
    }
}

/// `ceil(x)` guarded against rounding just above an integer, never below 1.
pub fn ceil_count(x: f64) -> u32 {
    ((x - 1e-12).ceil().max(1.0)) as u32
}

/// Width `((k+1)/N)^v - (k/N)^v` of layer `k`.
pub fn layer_width(k: usize, n: usize, v: f64) -> f64 {
    let nf = n as f64;
    ((k + 1) as f64 / nf).powf(v) - (k as f64 / nf).powf(v)
}

/// Breakpoints `t_k = -1 + (k/N)^v` (left) or `tau_k = 1 - (k/N)^v` (right)
/// for `k = 0..=N`. The last point is exactly `0`.
pub fn graded_points(n: usize, v: f64, side: Side) -> Result<Vec<f64>, MeshError> {
    if n < 2 {
        return Err(MeshError::TooFewLayers(n));
    }
    if !(v > 1.0 && v.is_finite()) {
        return Err(MeshError::InvalidGrading(v));
    }
    let nf = n as f64;
    let mut pts: Vec<f64> = (0..=n).map(|k| -1.0 + (k as f64 / nf).powf(v)).collect();
    pts[n] = 0.0;
    if side == Side::Right {
        for p in pts.iter_mut() {
            *p = -*p;
        }
        pts[n] = 0.0;
    }
    Ok(pts)
}

/// Subdivision counts `M_0..M_{N-1}` plus any notes about the request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub counts: Vec<u32>,
    pub warnings: Vec<String>,
}

impl Schedule {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&m| m as u64).sum()
    }
}

pub fn subdivision_counts(spec: &FunctionClassSpec, n: usize, variant: Variant1D) -> Result<Schedule, MeshError> {
    if n < 2 {
        return Err(MeshError::TooFewLayers(n));
    }
    let p = derive_params(spec)?;
    if !variant.applies_to(spec) {
        return Err(MeshError::VariantMismatch { variant: variant.name().into(), kind: spec.kind, u: spec.u });
    }
    let ln_n = (n as f64).ln();
    let (r, u, s) = (spec.r as f64, spec.u as f64, p.s as f64);
    let mut warnings = Vec::new();
    let counts = match variant {
        Variant1D::LogBoundary => {
            let mut c = vec![1; n];
            c[0] = ceil_count(ln_n);
            c
        }
        Variant1D::LogLayers => {
            if spec.u == 1 {
                warnings.push("u = 1 with ThmA_u2: exponent (u-1)/s is 0, so M_k = 1 for k >= 1".to_string());
            }
            (0..n)
                .map(|k| {
                    if k == 0 {
                        ceil_count(ln_n.powf(u / r))
                    } else {
                        ceil_count((n as f64 / k as f64).ln().powf((u - 1.0) / s))
                    }
                })
                .collect()
        }
        Variant1D::FractionalLog => {
            let m0 = ceil_count(ln_n.powf(u / (r + 1.0 - p.mu)));
            let mk = ceil_count(ln_n.powf(u / s));
            (0..n).map(|k| if k == 0 { m0 } else { mk }).collect()
        }
        Variant1D::FractionalLogLocal => {
            let m0 = ceil_count(ln_n.powf(u / (r + 1.0 - p.mu)));
            (0..n).map(|k| if k == 0 { m0 } else { ceil_count((n as f64 / k as f64).ln().powf(u / s)) }).collect()
        }
    };
    Ok(Schedule { counts, warnings })
}

/// One piece of a [`Mesh1D`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval1D {
    pub a: f64,
    pub b: f64,
    pub side: Side,
    /// Graded layer, `0` touching the boundary.
    pub layer: usize,
    /// Position within the layer's subdivision, counted from the boundary.
    pub sub: usize,
}

impl Interval1D {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub spec: FunctionClassSpec,
    pub params: DerivedParams,
    pub variant: Variant1D,
    pub n: usize,
    pub schedule: Schedule,
    /// Ascending, tiling `[-1, 1]`.
    pub intervals: Vec<Interval1D>,
}

impl Mesh1D {
    /// All breakpoints, ascending, from `-1` to `1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.intervals.iter().map(|i| i.a).collect();
        pts.push(self.intervals.last().map_or(1.0, |i| i.b));
        pts
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Split `[a, b]` into `m` equal parts; the last point is exactly `b`.
pub fn split_equal(a: f64, b: f64, m: u32) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=m).map(|j| a + (b - a) * j as f64 / m as f64).collect();
    pts[m as usize] = b;
    pts
}

/// Graded mesh with each layer `[t_k, t_{k+1}]` (and its mirror) split into
/// `M_k` equal parts. The right half is the exact negation of the left half.
pub fn build_mesh1d(spec: &FunctionClassSpec, n: usize, variant: Variant1D) -> Result<Mesh1D, MeshError> {
    let params = derive_params(spec)?;
    let schedule = subdivision_counts(spec, n, variant)?;
    let t = graded_points(n, params.v, Side::Left)?;
    let mut left = Vec::new();
    for k in 0..n {
        let pts = split_equal(t[k], t[k + 1], schedule.counts[k]);
        for (j, w) in pts.windows(2).enumerate() {
            left.push(Interval1D { a: w[0], b: w[1], side: Side::Left, layer: k, sub: j });
        }
    }
    let right: Vec<Interval1D> = left.iter().rev().map(|i| Interval1D { a: -i.b, b: -i.a, side: Side::Right, ..*i }).collect();
    let mut intervals = left;
    intervals.extend(right);
    Ok(Mesh1D { spec: *spec, params, variant, n, schedule, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(kind: ClassKind, r: u32, gamma: f64, u: u32) -> FunctionClassSpec {
        FunctionClassSpec::new(kind, r, gamma, u, 1).unwrap()
    }

    #[test]
    fn graded_point_examples() {
        assert_eq!(graded_points(2, 2.0, Side::Left).unwrap(), vec![-1.0, -0.75, 0.0]);
        assert_eq!(graded_points(2, 2.0, Side::Right).unwrap(), vec![1.0, 0.75, 0.0]);
        assert_abs_diff_eq!(graded_points(4, 1.5, Side::Left).unwrap()[1], -0.875, epsilon = 1e-15);
        assert_eq!(graded_points(1, 2.0, Side::Left), Err(MeshError::TooFewLayers(1)));
        assert!(graded_points(4, 1.0, Side::Left).is_err());
    }

    #[test]
    fn schedule_examples() {
        let a = subdivision_counts(&spec(ClassKind::BarQu, 2, 1.0, 1), 8, Variant1D::LogBoundary).unwrap();
        assert_eq!(a.counts, vec![3, 1, 1, 1, 1, 1, 1, 1]);

        let b = subdivision_counts(&spec(ClassKind::BarQu, 1, 2.0, 2), 8, Variant1D::LogLayers).unwrap();
        assert_eq!(b.counts[0], 5);
        assert_eq!(b.counts[4], 1);
        assert!(b.warnings.is_empty());

        let c = subdivision_counts(&spec(ClassKind::Qu, 1, 0.5, 1), 8, Variant1D::FractionalLog).unwrap();
        assert_eq!(c.counts[0], 2);
        assert!(c.counts[1..].iter().all(|&m| m == 2));

        let d = subdivision_counts(&spec(ClassKind::Qu, 1, 0.5, 1), 8, Variant1D::FractionalLogLocal).unwrap();
        assert_eq!(d.counts[..3], [2, 2, 2]);
        assert!(d.counts[3..].iter().all(|&m| m == 1));

        let w = subdivision_counts(&spec(ClassKind::BarQu, 2, 1.0, 1), 8, Variant1D::LogLayers).unwrap();
        assert_eq!(w.warnings.len(), 1);
        assert!(w.counts[1..].iter().all(|&m| m == 1));

        assert!(matches!(
            subdivision_counts(&spec(ClassKind::Qu, 1, 0.5, 1), 8, Variant1D::LogLayers),
            Err(MeshError::VariantMismatch { .. })
        ));
    }

    #[test]
    fn ceil_guard() {
        assert_eq!(ceil_count(2.0 + 1e-14), 2);
        assert_eq!(ceil_count(2.0001), 3);
        assert_eq!(ceil_count(0.2), 1);
        assert_eq!(ceil_count(4f64.ln() / 2f64.ln()), 2);
    }

    #[test]
    fn mesh_n2_has_four_intervals() {
        let m = build_mesh1d(&spec(ClassKind::BarQu, 1, 1.0, 1), 2, Variant1D::LogBoundary).unwrap();
        // v = 2, M_0 = ceil(ln 2) = 1
        assert_eq!(m.len(), 4);
        assert_eq!(m.breakpoints(), vec![-1.0, -0.75, 0.0, 0.75, 1.0]);
    }

    #[test]
    fn interval_count_by_enumeration() {
        // r=1, gamma=2, u=2: s=3, v=3
        let sp = spec(ClassKind::BarQu, 1, 2.0, 2);
        let m = build_mesh1d(&sp, 4, Variant1D::LogLayers).unwrap();
        let ln4 = 4f64.ln();
        let mut expected = (ln4 * ln4).ceil() as usize;
        for k in 1..4 {
            expected += (4.0 / k as f64).ln().powf(1.0 / 3.0).ceil().max(1.0) as usize;
        }
        assert_eq!(m.len(), 2 * expected);
    }

    #[test]
    fn tiling_and_grading() {
        let sp = spec(ClassKind::Qu, 1, 0.5, 1);
        for n in [2, 3, 8, 33, 128] {
            let m = build_mesh1d(&sp, n, Variant1D::FractionalLog).unwrap();
            let bp = m.breakpoints();
            assert_eq!(bp[0], -1.0);
            assert_eq!(*bp.last().unwrap(), 1.0);
            assert!(bp.windows(2).all(|w| w[0] < w[1]));
            for w in m.intervals.windows(2) {
                assert_eq!(w[0].b, w[1].a);
            }
            let total: f64 = m.intervals.iter().map(Interval1D::len).sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
            assert_eq!(m.len() as u64, 2 * m.schedule.total());
            let widths: Vec<f64> = (0..n).map(|k| layer_width(k, n, m.params.v)).collect();
            assert!(widths.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant1D::LogBoundary, Variant1D::LogLayers, Variant1D::FractionalLog, Variant1D::FractionalLogLocal] {
            assert_eq!(v.name().parse::<Variant1D>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Variant1D>(&json).unwrap(), v);
        }
    }
}
