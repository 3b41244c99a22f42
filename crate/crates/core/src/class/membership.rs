//! Numerical class-membership check on a probe grid.

use super::{derive_params, distance_to_boundary, ClassError, ClassFunction, ClassKind, FunctionClassSpec};
use serde::{Deserialize, Serialize};

/// Probe points strictly inside `[-1,1]^l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub points: Vec<Vec<f64>>,
    pub description: String,
}

impl ProbeGrid {
    /// Geometric ladder `d_j = 2^-j`, `j = 1..=20`, approaching every face
    /// through its center and every corner along the diagonal, plus a `5^l`
    /// uniform interior grid.
    pub fn standard(l: usize) -> Self {
        let ladder: Vec<f64> = (1..=20).map(|j| 0.5f64.powi(j)).collect();
        let mut points = Vec::new();
        for axis in 0..l {
            for sign in [-1.0, 1.0] {
                for &d in &ladder {
                    let mut p = vec![0.0; l];
                    p[axis] = sign * (1.0 - d);
                    points.push(p);
                }
            }
        }
        if l > 1 {
            for corner in 0..(1usize << l) {
                for &d in &ladder {
                    let p = (0..l).map(|i| if corner >> i & 1 == 1 { 1.0 - d } else { d - 1.0 }).collect();
                    points.push(p);
                }
            }
        }
        let uniform = [-0.8, -0.4, 0.0, 0.4, 0.8];
        for idx in 0..uniform.len().pow(l as u32) {
            let mut rest = idx;
            let mut p = Vec::with_capacity(l);
            for _ in 0..l {
                p.push(uniform[rest % uniform.len()]);
                rest /= uniform.len();
            }
            points.push(p);
        }
        Self {
            description: format!(
                "l={l}: face-center and corner-diagonal ladders d=2^-j (j=1..20), 5^{l} interior grid; {} points",
                points.len()
            ),
            points,
        }
    }

    /// Keep only the points at distance at least `min_distance` from the boundary.
    pub fn restricted(&self, min_distance: f64) -> Self {
        let points: Vec<Vec<f64>> =
            self.points.iter().filter(|p| distance_to_boundary(p).map(|d| d >= min_distance).unwrap_or(false)).cloned().collect();
        Self { description: format!("{} restricted to d >= {min_distance}; {} points", self.description, points.len()), points }
    }
}

/// Result of [`check_membership`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// Largest ratio `|D^v f| / bound`; `f / epsilon_star` satisfies every
    /// class inequality on the grid.
    pub epsilon_star: f64,
    /// Worst ratio per derivative order `|v| = 0..=s`.
    pub per_order: Vec<f64>,
    /// Orders whose power exponent in the bound is non-positive.
    pub flagged_orders: Vec<u32>,
    pub worst_point: Vec<f64>,
    pub worst_order: Vec<u32>,
    pub grid: String,
}

/// Right-hand side of the class inequality for derivative order `order` at
/// boundary distance `d`.
pub(crate) fn class_bound(spec: &FunctionClassSpec, zeta: f64, order: u32, d: f64) -> f64 {
    let r = spec.r;
    let u = spec.u as i32;
    let ln_pow = |p: i32| 1.0 + d.ln().abs().powi(p);
    match spec.kind {
        ClassKind::Qr | ClassKind::QrGamma => {
            if order <= r {
                1.0
            } else {
                d.powf(-(order as f64 - r as f64 - zeta))
            }
        }
        ClassKind::BarQu => {
            if order < r {
                1.0
            } else if order == r {
                ln_pow(u)
            } else {
                ln_pow(u - 1) / d.powi((order - r) as i32)
            }
        }
        ClassKind::Qu => {
            if order <= r {
                1.0
            } else {
                ln_pow(u) / d.powf(order as f64 - r as f64 - zeta)
            }
        }
    }
}

/// All multi-indices in `l` variables with total order `<= max_order`,
/// ordered by total order, then lexicographically.
pub(crate) fn multi_indices(l: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=max_order {
        let mut current = vec![0u32; l];
        fill(&mut out, &mut current, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(out, current, pos + 1, remaining - k);
    }
}

/// Smallest constant `eps*` such that `f / eps*` satisfies all derivative
/// bounds of `spec` on `grid`, for every multi-index with `|v| <= s`.
pub fn check_membership<F: ClassFunction + ?Sized>(
    f: &F,
    spec: &FunctionClassSpec,
    grid: &ProbeGrid,
) -> Result<MembershipReport, ClassError> {
    let params = derive_params(spec)?;
    let l = spec.l;
    if f.dim() != l {
        return Err(ClassError::DimensionMismatch { expected: l, got: f.dim() });
    }
    let indices = multi_indices(l, params.s);
    let mut per_order = vec![0.0f64; params.s as usize + 1];
    let mut best = (0.0f64, Vec::new(), Vec::new());
    for p in &grid.points {
        if p.len() != l {
            return Err(ClassError::DimensionMismatch { expected: l, got: p.len() });
        }
        let d = distance_to_boundary(p)?;
        if d <= 0.0 {
            return Err(ClassError::ProbeOnBoundary(p.clone()));
        }
        for v in &indices {
            let order: u32 = v.iter().sum();
            let value = f.derivative(p, v);
            if !value.is_finite() {
                return Err(ClassError::NonFiniteDerivative { point: p.clone(), order: v.clone() });
            }
            let ratio = value.abs() / class_bound(spec, params.zeta, order, d);
            let slot = &mut per_order[order as usize];
            *slot = slot.max(ratio);
            if ratio > best.0 {
                best = (ratio, p.clone(), v.clone());
            }
        }
    }
    // Power exponents |v| - r - zeta are positive for every |v| > r since zeta < 1;
    // kept as a report field so callers can see it explicitly.
    let flagged_orders = (spec.r + 1..=params.s).filter(|&o| o as f64 - spec.r as f64 - params.zeta <= 0.0).collect();
    Ok(MembershipReport {
        epsilon_star: best.0,
        per_order,
        flagged_orders,
        worst_point: best.1,
        worst_order: best.2,
        grid: grid.description.clone(),
    })
}
