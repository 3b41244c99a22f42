//! Bump families used to bound widths from below.
//!
//! A bump on the box `[a, b]` is
//! `A * W * prod_i ((t_i - a_i)(b_i - t_i))^s / H^((2l-1)s)`, where `H` is the
//! nominal cell size and `W` the class bound at the cell's inner edge. The
//! amplitude `A` is the largest value for which every order-`s` derivative
//! stays below `W`.

use crate::box_index::{AaBox, BoxIndex};
use crate::cheb::golden_max;
use crate::class::membership::multi_indices;
use crate::class::{derive_params, ClassError, ClassKind, FunctionClassSpec};
use crate::mesh_ld::{
    decompose_domain, decompose_radii, for_each_index, regime_threshold, schedule_ld, Cell, MeshLdError, PartitionLD,
    PartitionVariant, SchemeLd, REGIME_TOL,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Slack allowed when checking sampled derivatives against their bound.
pub const DERIVATIVE_SLACK: f64 = 1.000001;

/// Samples per dimension for the derivative check.
pub const DERIVATIVE_GRID: usize = 33;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum WidthsError {
    #[error("N must be at least 2 (got {0})")]
    TooFewLayers(usize),
    #[error("scheme {scheme} needs {needed}, but v = {v} and l/(l-1) = {threshold}")]
    RegimeMismatch { scheme: LowerBoundScheme, needed: &'static str, v: f64, threshold: f64 },
    #[error("scheme {scheme} does not apply to class {kind}")]
    ClassMismatch { scheme: LowerBoundScheme, kind: ClassKind },
    #[error("coefficient {index} is {value}; sign patterns need |C| <= 1")]
    CoefficientOutOfRange { index: usize, value: f64 },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshLdError),
    #[error(transparent)]
    Class(#[from] ClassError),
}

/// `(x (1 - x))^s` and its derivatives on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    pub s: u32,
    /// Monomial coefficients of each derivative, lowest degree first.
    derivs: Vec<Vec<f64>>,
    /// `max_{[0,1]} |Q^(j)|` for `j = 0..=s`.
    pub maxima: Vec<f64>,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl BumpProfile {
    pub fn new(s: u32) -> Self {
        let s_us = s as usize;
        // x^s (1-x)^s = sum_i C(s,i) (-1)^i x^(s+i)
        let mut coef = vec![0.0; 2 * s_us + 1];
        let mut binom = 1.0;
        for i in 0..=s_us {
            coef[s_us + i] = if i % 2 == 0 { binom } else { -binom };
            binom = binom * (s_us - i) as f64 / (i + 1) as f64;
        }
        let mut derivs = vec![coef];
        for _ in 0..s {
            let prev = derivs.last().expect("nonempty");
            derivs.push(prev.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect());
        }
        let maxima = derivs.iter().map(|c| abs_max_on_unit(c)).collect();
        Self { s, derivs, maxima }
    }

    /// `Q^(j)(x)`.
    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        self.derivs.get(j).map_or(0.0, |c| horner(c, x))
    }
}

/// `max_{[0,1]} |p|` by a dense grid followed by golden-section refinement.
fn abs_max_on_unit(c: &[f64]) -> f64 {
    const GRID: usize = 4000;
    let g = |x: f64| horner(c, x).abs();
    let (mut best_i, mut best) = (0, g(0.0));
    for i in 1..=GRID {
        let v = g(i as f64 / GRID as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = best_i.saturating_sub(1) as f64 / GRID as f64;
    let hi = (best_i + 1).min(GRID) as f64 / GRID as f64;
    best.max(golden_max(g, lo, hi, 1e-15).1)
}

/// Layer-dependent factor multiplying a bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    Unit,
    /// `(1 + |ln((k+1)/N)^v|^power) / ((k+1)/N)^(v gamma)`.
    LayerLog {
        power: u32,
    },
    /// `N^(v gamma) ln^power N`.
    BoundaryLog {
        power: u32,
    },
    /// `rho^-gamma`.
    InverseRho {
        rho: f64,
    },
}

impl Weight {
    pub fn factor(&self, k: usize, n: usize, v: f64, gamma: f64) -> f64 {
        let nf = n as f64;
        match *self {
            Weight::Unit => 1.0,
            Weight::LayerLog { power } => {
                let d = ((k + 1) as f64 / nf).powf(v);
                (1.0 + d.ln().abs().powi(power as i32)) / d.powf(gamma)
            }
            Weight::BoundaryLog { power } => nf.powf(v * gamma) * nf.ln().powi(power as i32),
            Weight::InverseRho { rho } => rho.powf(-gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub layer: usize,
    pub s: u32,
    /// Nominal cell size `H`.
    pub scale: f64,
    pub amplitude: f64,
    pub rule: Weight,
    pub weight: f64,
}

impl AaBox for Bump {
    fn lo(&self) -> &[f64] {
        &self.lo
    }
    fn hi(&self) -> &[f64] {
        &self.hi
    }
}

impl Bump {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn inside(&self, t: &[f64]) -> bool {
        crate::box_index::contains(self, t)
    }

    /// `D^order phi(t)`; zero outside the closed box.
    pub fn derivative(&self, profile: &BumpProfile, t: &[f64], order: &[u32]) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        let s = self.s as i32;
        let total: i32 = order.iter().map(|&o| o as i32).sum();
        // H^((2l-1)s) is split across the factors to keep magnitudes moderate
        let mut acc = self.amplitude * self.weight * self.scale.powi(s - total);
        for i in 0..self.dim() {
            let len = self.hi[i] - self.lo[i];
            let x = (t[i] - self.lo[i]) / len;
            acc *= (len / self.scale).powi(2 * s - order[i] as i32) * profile.derivative(order[i] as usize, x);
        }
        acc
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        let s = self.s as i32;
        let mut acc = self.amplitude * self.weight * self.scale.powi(s);
        for ((x, a), b) in t.iter().zip(&self.lo).zip(&self.hi) {
            let p = (x - a) * (b - x) / (self.scale * self.scale);
            acc *= p.powi(s);
        }
        acc
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Value at the center, which is the maximum.
    pub fn max_value(&self) -> f64 {
        let s = self.s as i32;
        self.amplitude
            * self.weight
            * self.scale.powi(s)
            * self.lo.iter().zip(&self.hi).map(|(a, b)| (0.5 * (b - a) / self.scale).powi(2 * s)).product::<f64>()
    }

    /// Largest sampled `|D^v phi| / W` over `|v| = s` on a `q^l` grid.
    pub fn derivative_ratio(&self, profile: &BumpProfile, q: usize) -> f64 {
        let l = self.dim();
        let orders: Vec<Vec<u32>> = multi_indices(l, self.s).into_iter().filter(|o| o.iter().sum::<u32>() == self.s).collect();
        let axes: Vec<Vec<f64>> = (0..l)
            .map(|d| (0..q).map(|j| self.lo[d] + (self.hi[d] - self.lo[d]) * j as f64 / (q - 1) as f64).collect())
            .collect();
        let mut worst = 0.0f64;
        let mut t = vec![0.0; l];
        for_each_index(&vec![q; l], |idx| {
            for d in 0..l {
                t[d] = axes[d][idx[d]];
            }
            for o in &orders {
                worst = worst.max(self.derivative(profile, &t, o).abs());
            }
        });
        worst / self.weight
    }
}

/// Largest `A` with `A * max_{|v|=s} prod_i (L_i/H)^(2s-v_i) max|Q^(v_i)| <= 1`,
/// i.e. the amplitude making every order-`s` derivative at most the weight.
pub fn calibrate_amplitude(profile: &BumpProfile, lo: &[f64], hi: &[f64], scale: f64) -> f64 {
    let s = profile.s;
    let worst = multi_indices(lo.len(), s)
        .into_iter()
        .filter(|o| o.iter().sum::<u32>() == s)
        .map(|o| {
            o.iter()
                .enumerate()
                .map(|(i, &vi)| ((hi[i] - lo[i]) / scale).powi((2 * s - vi) as i32) * profile.maxima[vi as usize])
                .product::<f64>()
        })
        .fold(0.0f64, f64::max);
    1.0 / worst
}

fn make_bump(profile: &BumpProfile, cell: &Cell, scale: f64, rule: Weight, weight: f64) -> Bump {
    Bump {
        lo: cell.lo.clone(),
        hi: cell.hi.clone(),
        layer: cell.layer,
        s: profile.s,
        scale,
        amplitude: calibrate_amplitude(profile, &cell.lo, &cell.hi, scale),
        rule,
        weight,
    }
}

/// Bump on a frame cell of layer `k` with nominal size `h_k / M_k`.
#[allow(clippy::too_many_arguments)]
pub fn bump_layer(
    profile: &BumpProfile,
    cell: &Cell,
    k: usize,
    n: usize,
    v: f64,
    gamma: f64,
    h: f64,
    m: u32,
    rule: Weight,
) -> Bump {
    make_bump(profile, cell, h / m as f64, rule, rule.factor(k, n, v, gamma))
}

/// Unit-weight bump on a cell of the central cube with nominal size `h`.
pub fn bump_interior(profile: &BumpProfile, cell: &Cell, h: f64) -> Bump {
    make_bump(profile, cell, h, Weight::Unit, 1.0)
}

/// Distances `rho_0 < rho_1 < ... < rho_m <= 1` with `rho_0 = N^-v` and
/// `(rho_k - rho_{k-1})^s / rho_k^gamma = N^-s ln^(u-1) N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoMesh {
    pub n: usize,
    pub target: f64,
    /// `rho_0..=rho_m`.
    pub rho: Vec<f64>,
    pub m: usize,
    /// Relative residuals of the layer equation for `k = 1..=m`.
    pub residuals: Vec<f64>,
    /// The root following `rho_m`, which exceeds 1.
    pub overshoot: f64,
}

impl RhoMesh {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Thickness of layer `k` (`rho_0` for `k = 0`).
    pub fn thickness(&self, k: usize) -> f64 {
        if k == 0 {
            self.rho[0]
        } else {
            self.rho[k] - self.rho[k - 1]
        }
    }
}

fn next_rho(prev: f64, s: f64, gamma: f64, target: f64) -> f64 {
    let g = |rho: f64| (rho - prev).powf(s) / rho.powf(gamma);
    let mut lo = prev;
    let mut hi = prev + target.powf(1.0 / s).max(prev);
    while g(hi) < target {
        hi = prev + 2.0 * (hi - prev);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (g(lo) - target).abs() <= (g(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

pub fn rho_sequence(n: usize, s: u32, gamma: f64, u: u32) -> Result<RhoMesh, WidthsError> {
    if n < 2 {
        return Err(WidthsError::TooFewLayers(n));
    }
    let nf = n as f64;
    let sf = s as f64;
    let v = sf / (sf - gamma);
    let target = nf.powf(-sf) * nf.ln().powi(u as i32 - 1);
    let mut rho = vec![nf.powf(-v)];
    let mut residuals = Vec::new();
    let overshoot = loop {
        let prev = *rho.last().expect("nonempty");
        let next = next_rho(prev, sf, gamma, target);
        if next > 1.0 {
            break next;
        }
        residuals.push(((next - prev).powf(sf) / next.powf(gamma) - target).abs() / target);
        rho.push(next);
    };
    Ok(RhoMesh { n, target, m: rho.len() - 1, rho, residuals, overshoot })
}

/// Bump constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundScheme {
    /// Graded layers, `barQ_u`, `v <= l/(l-1)`.
    LayeredBarQu,
    /// Graded layers, `Q_u`, `v <= l/(l-1)`.
    LayeredQu,
    /// Rho layers, `barQ_u`, `v >= l/(l-1)`.
    RhoBarQu,
    /// Rho layers, `Q_u`, `v >= l/(l-1)`.
    RhoQu,
}

impl LowerBoundScheme {
    pub fn name(self) -> &'static str {
        match self {
            LowerBoundScheme::LayeredBarQu => "layered-barqu",
            LowerBoundScheme::LayeredQu => "layered-qu",
            LowerBoundScheme::RhoBarQu => "rho-barqu",
            LowerBoundScheme::RhoQu => "rho-qu",
        }
    }

    /// The scheme matching a class and regime.
    pub fn default_for(spec: &FunctionClassSpec) -> Result<Self, WidthsError> {
        let v = derive_params(spec)?.v;
        let layered = v <= regime_threshold(spec.l)? + REGIME_TOL;
        Ok(match (layered, spec.kind == ClassKind::Qu) {
            (true, false) => LowerBoundScheme::LayeredBarQu,
            (true, true) => LowerBoundScheme::LayeredQu,
            (false, false) => LowerBoundScheme::RhoBarQu,
            (false, true) => LowerBoundScheme::RhoQu,
        })
    }

    fn for_qu(self) -> bool {
        matches!(self, LowerBoundScheme::LayeredQu | LowerBoundScheme::RhoQu)
    }
}

impl fmt::Display for LowerBoundScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LowerBoundScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [LowerBoundScheme::LayeredBarQu, LowerBoundScheme::LayeredQu, LowerBoundScheme::RhoBarQu, LowerBoundScheme::RhoQu]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown lower-bound scheme `{s}`"))
    }
}

#[derive(Debug, Clone)]
pub struct BumpFamily {
    pub scheme: LowerBoundScheme,
    pub spec: FunctionClassSpec,
    pub n: usize,
    pub partition: PartitionLD,
    pub bumps: Vec<Bump>,
    pub profile: BumpProfile,
    pub rho: Option<RhoMesh>,
}

impl BumpFamily {
    /// `min` over bumps of the maximum value.
    pub fn epsilon(&self) -> f64 {
        self.bumps.iter().map(Bump::max_value).fold(f64::INFINITY, f64::min)
    }

    /// Largest sampled `|D^v phi| / W` over all bumps.
    pub fn worst_derivative_ratio(&self, q: usize) -> f64 {
        self.bumps.par_iter().map(|b| b.derivative_ratio(&self.profile, q)).reduce(|| 0.0, f64::max)
    }
}

pub fn bump_family(spec: &FunctionClassSpec, n: usize, scheme: LowerBoundScheme) -> Result<BumpFamily, WidthsError> {
    if n < 2 {
        return Err(WidthsError::TooFewLayers(n));
    }
    let p = derive_params(spec)?;
    let threshold = regime_threshold(spec.l)?;
    if scheme.for_qu() != (spec.kind == ClassKind::Qu) {
        return Err(WidthsError::ClassMismatch { scheme, kind: spec.kind });
    }
    let profile = BumpProfile::new(p.s);
    let log_power = if scheme.for_qu() { spec.u } else { spec.u - 1 };
    match scheme {
        LowerBoundScheme::LayeredBarQu | LowerBoundScheme::LayeredQu => {
            if p.v > threshold + REGIME_TOL {
                return Err(WidthsError::RegimeMismatch { scheme, needed: "v <= l/(l-1)", v: p.v, threshold });
            }
            let schedule = if scheme.for_qu() { SchemeLd::LowerBoundQu } else { SchemeLd::LowerBoundBarQu };
            let counts = schedule_ld(spec, n, schedule)?.counts;
            let partition = decompose_domain(n, p.v, spec.l, &counts, PartitionVariant::Independent)?;
            let rule = Weight::LayerLog { power: log_power };
            let bumps = partition
                .cells
                .par_iter()
                .map(|c| {
                    let layer = &partition.layers[c.layer];
                    if layer.central {
                        bump_interior(&profile, c, layer.h / layer.m as f64)
                    } else {
                        bump_layer(&profile, c, c.layer, n, p.v, spec.gamma, layer.h, layer.m, rule)
                    }
                })
                .collect();
            Ok(BumpFamily { scheme, spec: *spec, n, partition, bumps, profile, rho: None })
        }
        LowerBoundScheme::RhoBarQu | LowerBoundScheme::RhoQu => {
            if p.v < threshold - REGIME_TOL {
                return Err(WidthsError::RegimeMismatch { scheme, needed: "v >= l/(l-1)", v: p.v, threshold });
            }
            let rho = rho_sequence(n, p.s, spec.gamma, spec.u)?;
            let mut radii = vec![1.0];
            radii.extend(rho.rho.iter().map(|r| 1.0 - r).filter(|&r| r > 0.0));
            let partition = decompose_radii(&radii, spec.l, &vec![1; radii.len()], PartitionVariant::Independent)?;
            let bumps = partition
                .cells
                .par_iter()
                .map(|c| {
                    let layer = &partition.layers[c.layer];
                    if layer.central {
                        bump_interior(&profile, c, layer.h)
                    } else if c.layer == 0 {
                        bump_layer(&profile, c, 0, n, p.v, spec.gamma, layer.h, 1, Weight::BoundaryLog { power: log_power })
                    } else {
                        let rule = Weight::InverseRho { rho: rho.rho[c.layer] };
                        bump_layer(&profile, c, c.layer, n, p.v, spec.gamma, layer.h, 1, rule)
                    }
                })
                .collect();
            Ok(BumpFamily { scheme, spec: *spec, n, partition, bumps, profile, rho: Some(rho) })
        }
    }
}

/// Summary of a bump family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub scheme: LowerBoundScheme,
    #[serde(rename = "N")]
    pub n: usize,
    /// Number of bumps.
    pub bumps: usize,
    pub epsilon: f64,
    /// Largest sampled `|D^v phi| / W`; at most [`DERIVATIVE_SLACK`] when the
    /// constraints hold.
    pub derivative_ratio: f64,
    pub constraints_hold: bool,
    pub rho_m: Option<usize>,
    pub rho_max_residual: Option<f64>,
}

/// Build the family, verify its derivative constraints on a 33^l grid per
/// bump, and report `(n, epsilon_N)`.
pub fn lower_bound_estimate(spec: &FunctionClassSpec, n: usize, scheme: LowerBoundScheme) -> Result<LowerBound, WidthsError> {
    let family = bump_family(spec, n, scheme)?;
    let ratio = family.worst_derivative_ratio(DERIVATIVE_GRID);
    Ok(LowerBound {
        scheme,
        n,
        bumps: family.bumps.len(),
        epsilon: family.epsilon(),
        derivative_ratio: ratio,
        constraints_hold: ratio <= DERIVATIVE_SLACK,
        rho_m: family.rho.as_ref().map(|r| r.m),
        rho_max_residual: family.rho.as_ref().map(RhoMesh::max_residual),
    })
}

/// Outcome of evaluating `xi = sum_i C_i phi_i` at every bump center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPattern {
    pub checked: usize,
    pub mismatches: usize,
    /// `min |xi(c_i)| / |C_i|` over nonzero coefficients.
    pub min_ratio: f64,
    pub epsilon: f64,
    pub passed: bool,
}

pub fn sign_pattern_check(family: &BumpFamily, coefficients: &[f64]) -> Result<SignPattern, WidthsError> {
    if coefficients.len() != family.bumps.len() {
        return Err(WidthsError::CoefficientCount { expected: family.bumps.len(), got: coefficients.len() });
    }
    if let Some((index, &value)) = coefficients.iter().enumerate().find(|(_, c)| !(c.abs() <= 1.0)) {
        return Err(WidthsError::CoefficientOutOfRange { index, value });
    }
    let epsilon = family.epsilon();
    let index = BoxIndex::new(&family.bumps);
    let mut mismatches = 0;
    let mut min_ratio = f64::INFINITY;
    for (bump, &c) in family.bumps.iter().zip(coefficients) {
        let center = bump.center();
        let xi: f64 = index
            .candidates_at(&center)
            .into_iter()
            .map(|j| coefficients[j as usize] * family.bumps[j as usize].value(&center))
            .sum();
        let matches = if c == 0.0 { xi == 0.0 } else { xi.signum() == c.signum() };
        if !matches {
            mismatches += 1;
        }
        if c != 0.0 {
            min_ratio = min_ratio.min(xi.abs() / c.abs());
        }
    }
    let passed = mismatches == 0 && min_ratio >= epsilon * (1.0 - 1e-12);
    Ok(SignPattern { checked: family.bumps.len(), mismatches, min_ratio, epsilon, passed })
}
