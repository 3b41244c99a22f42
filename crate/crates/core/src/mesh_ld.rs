//! Layered box partitions of `[-1, 1]^l`.
//!
//! Layer `k` is the frame `{(k/N)^v <= d(t) <= ((k+1)/N)^v}`; in terms of the
//! sup-norm radius `|t|_inf = 1 - d(t)` it lies between the inner radius
//! `1 - ((k+1)/N)^v` and the outer radius `1 - (k/N)^v`. The innermost layer
//! `N-1` is the central cube.
//!
//! Each frame is cut by a tensor grid whose per-axis breakpoints are
//! `{-R, -rho, interior..., rho, R}`: the cells of that grid having at least one
//! coordinate in a thickness segment `[-R,-rho]` or `[rho,R]` tile the frame.
//! All axes use the same breakpoints, so the partition is symmetric under
//! coordinate permutations and reflections.

use crate::box_index::{interiors_overlap, AaBox, BoxIndex};
use crate::class::{derive_params, ClassError, ClassKind, FunctionClassSpec};
use crate::mesh1d::{ceil_count, split_equal, Schedule};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Tolerance for deciding which side of `v = l/(l-1)` a configuration is on.
pub const REGIME_TOL: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MeshLdError {
    #[error("dimension must be at least 2 (got {0})")]
    Dimension(usize),
    #[error("N must be at least 2 (got {0})")]
    TooFewLayers(usize),
    #[error("grading exponent v must exceed 1 (got {0})")]
    InvalidGrading(f64),
    #[error("schedule has {got} entries, expected {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("subdivision counts must be at least 1")]
    ZeroSubdivision,
    #[error("scheme {scheme} needs {needed}, but v = {v} and l/(l-1) = {threshold}")]
    RegimeMismatch { scheme: SchemeLd, needed: &'static str, v: f64, threshold: f64 },
    #[error("scheme {scheme} does not apply to class {kind}")]
    ClassMismatch { scheme: SchemeLd, kind: ClassKind },
    #[error("layer radii must start at 1 and strictly decrease to a positive value")]
    InvalidRadii,
    #[error("layer {0} is out of range")]
    LayerOutOfRange(usize),
    #[error("malformed partition dump line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Class(#[from] ClassError),
}

/// Whether cells of neighbouring layers line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionVariant {
    /// Each layer gridded on its own.
    Independent,
    /// Each layer inherits the breakpoints of the layer inside it, so every
    /// interlayer face of an inner cell is a union of outer-cell faces.
    Aligned,
}

impl fmt::Display for PartitionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionVariant::Independent => "independent",
            PartitionVariant::Aligned => "aligned",
        })
    }
}

impl std::str::FromStr for PartitionVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(PartitionVariant::Independent),
            "aligned" => Ok(PartitionVariant::Aligned),
            other => Err(format!("unknown partition variant `{other}`")),
        }
    }
}

/// Subdivision rule for the layers of an `l`-dimensional partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeLd {
    /// `M_0 = ceil((ln N)^(u/r))`, `M_k = ceil((ln N/k)^((u-1)/s))`; needs
    /// `v <= l/(l-1)`.
    LogGraded,
    /// All `M_k = 1`; needs `v >= l/(l-1)`.
    Unsubdivided,
    /// `M_0 = ceil((ln N)^(u/(r+1-mu)))`, `M_k = ceil((ln N/k)^(u/s))` for `Q_u`
    /// with `v <= l/(l-1)`.
    QuLogGraded,
    /// `M_k = ceil((ln N/k)^(u/s))`, `ln N` for `k = 0`; bump families for `Q_u`.
    LowerBoundQu,
    /// `M_k = ceil((ln N/k)^((u-1)/s))`, `ln N` for `k = 0`; bump families for
    /// `barQ_u`.
    LowerBoundBarQu,
}

impl SchemeLd {
    pub fn name(self) -> &'static str {
        match self {
            SchemeLd::LogGraded => "log-graded",
            SchemeLd::Unsubdivided => "unsubdivided",
            SchemeLd::QuLogGraded => "qu-log-graded",
            SchemeLd::LowerBoundQu => "lower-bound-qu",
            SchemeLd::LowerBoundBarQu => "lower-bound-barqu",
        }
    }

    /// The spline scheme matching a class and dimension.
    pub fn default_for(spec: &FunctionClassSpec) -> Result<SchemeLd, MeshLdError> {
        let p = derive_params(spec)?;
        let threshold = regime_threshold(spec.l)?;
        Ok(if p.v > threshold + REGIME_TOL {
            SchemeLd::Unsubdivided
        } else if spec.kind == ClassKind::Qu {
            SchemeLd::QuLogGraded
        } else {
            SchemeLd::LogGraded
        })
    }
}

impl fmt::Display for SchemeLd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeLd {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [SchemeLd::LogGraded, SchemeLd::Unsubdivided, SchemeLd::QuLogGraded, SchemeLd::LowerBoundQu, SchemeLd::LowerBoundBarQu]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

/// `l / (l - 1)`.
pub fn regime_threshold(l: usize) -> Result<f64, MeshLdError> {
    if l < 2 {
        return Err(MeshLdError::Dimension(l));
    }
    Ok(l as f64 / (l - 1) as f64)
}

/// Which growth law the cell count follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `v < l/(l-1)`: `n ~ N^l`.
    Below,
    /// `v = l/(l-1)`: `n ~ N^l ln N`.
    Critical,
    /// `v > l/(l-1)`: `n ~ N^(v(l-1))`.
    Above,
}

pub fn regime(v: f64, l: usize) -> Result<Regime, MeshLdError> {
    let t = regime_threshold(l)?;
    Ok(if (v - t).abs() <= REGIME_TOL {
        Regime::Critical
    } else if v < t {
        Regime::Below
    } else {
        Regime::Above
    })
}

/// Subdivision counts `M_0..M_{N-1}` for an `l`-dimensional scheme.
pub fn schedule_ld(spec: &FunctionClassSpec, n: usize, scheme: SchemeLd) -> Result<Schedule, MeshLdError> {
    if n < 2 {
        return Err(MeshLdError::TooFewLayers(n));
    }
    let p = derive_params(spec)?;
    let threshold = regime_threshold(spec.l)?;
    let below = p.v <= threshold + REGIME_TOL;
    let mismatch = |needed| MeshLdError::RegimeMismatch { scheme, needed, v: p.v, threshold };
    let class_mismatch = MeshLdError::ClassMismatch { scheme, kind: spec.kind };
    let (r, u, s) = (spec.r as f64, spec.u as f64, p.s as f64);
    let nf = n as f64;
    let ln_ratio = |k: usize| if k == 0 { nf.ln() } else { (nf / k as f64).ln() };
    let counts: Vec<u32> =
        match scheme {
            SchemeLd::LogGraded => {
                if !below {
                    return Err(mismatch("v <= l/(l-1)"));
                }
                if spec.kind == ClassKind::Qu {
                    return Err(class_mismatch);
                }
                (0..n)
                    .map(|k| if k == 0 { ceil_count(nf.ln().powf(u / r)) } else { ceil_count(ln_ratio(k).powf((u - 1.0) / s)) })
                    .collect()
            }
            SchemeLd::Unsubdivided => {
                if p.v < threshold - REGIME_TOL {
                    return Err(mismatch("v >= l/(l-1)"));
                }
                vec![1; n]
            }
            SchemeLd::QuLogGraded => {
                if !below {
                    return Err(mismatch("v <= l/(l-1)"));
                }
                if spec.kind != ClassKind::Qu {
                    return Err(class_mismatch);
                }
                (0..n)
                    .map(|k| {
                        if k == 0 {
                            ceil_count(nf.ln().powf(u / (r + 1.0 - p.mu)))
                        } else {
                            ceil_count(ln_ratio(k).powf(u / s))
                        }
                    })
                    .collect()
            }
            SchemeLd::LowerBoundQu => {
                if spec.kind != ClassKind::Qu {
                    return Err(class_mismatch);
                }
                (0..n).map(|k| ceil_count(ln_ratio(k).powf(u / s))).collect()
            }
            SchemeLd::LowerBoundBarQu => {
                if spec.kind == ClassKind::Qu {
                    return Err(class_mismatch);
                }
                (0..n).map(|k| ceil_count(ln_ratio(k).powf((u - 1.0) / s))).collect()
            }
        };
    Ok(Schedule { counts, warnings: Vec::new() })
}

/// The layer containing `t`: the unique `k` in `0..N` with
/// `(k/N)^v <= d(t) <= ((k+1)/N)^v`, boundary values going to the lower `k`.
pub fn layer_index(t: &[f64], n: usize, v: f64) -> Result<usize, MeshLdError> {
    let d = crate::class::distance_to_boundary(t)?;
    let nf = n as f64;
    // largest k with (k/N)^v < d
    let mut k = 0;
    while k + 1 < n && ((k + 1) as f64 / nf).powf(v) < d {
        k += 1;
    }
    Ok(k)
}

/// `h_k = ((k+1)/N)^v - (k/N)^v`.
pub use crate::mesh1d::layer_width;

/// One box of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub layer: usize,
    /// Index of the parent (pre-subdivision) interval on each axis.
    pub ids: Vec<u32>,
    /// Index within the parent's subdivision on each axis.
    pub sub: Vec<u32>,
}

impl AaBox for Cell {
    fn lo(&self) -> &[f64] {
        &self.lo
    }
    fn hi(&self) -> &[f64] {
        &self.hi
    }
}

impl Cell {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        crate::box_index::contains(self, p)
    }

    /// All `2^l` vertices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let l = self.dim();
        (0..1usize << l).map(|mask| (0..l).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect()).collect()
    }
}

/// Split every edge of `cell` into `m` equal parts.
pub fn subdivide_cell(cell: &Cell, m: u32) -> Result<Vec<Cell>, MeshLdError> {
    if m == 0 {
        return Err(MeshLdError::ZeroSubdivision);
    }
    let l = cell.dim();
    let axes: Vec<Vec<f64>> = (0..l).map(|i| split_equal(cell.lo[i], cell.hi[i], m)).collect();
    let mut out = Vec::with_capacity((m as usize).pow(l as u32));
    for_each_index(&vec![m as usize; l], |idx| {
        out.push(Cell {
            lo: (0..l).map(|i| axes[i][idx[i]]).collect(),
            hi: (0..l).map(|i| axes[i][idx[i] + 1]).collect(),
            layer: cell.layer,
            ids: cell.ids.clone(),
            sub: idx.iter().map(|&j| j as u32).collect(),
        });
    });
    Ok(out)
}

/// Visit every multi-index in `[0, extent_0) x ... x [0, extent_{l-1})`,
/// last axis fastest.
pub(crate) fn for_each_index(extent: &[usize], mut f: impl FnMut(&[usize])) {
    if extent.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; extent.len()];
    loop {
        f(&idx);
        let mut axis = extent.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < extent[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Split `[a, b]` (length `len >= h`) into `floor(len / 2h) + 1` equal parts,
/// each of length in `[h, 2h)`.
fn split_window(a: f64, b: f64, h: f64) -> Vec<f64> {
    let p = ((b - a) / (2.0 * h)).floor() as u32 + 1;
    split_equal(a, b, p)
}

/// Split `[a, b]` into `floor(len / h)` equal parts when it is at least `2h`
/// long, otherwise keep it.
fn split_long(a: f64, b: f64, h: f64) -> Vec<f64> {
    let len = b - a;
    if len >= 2.0 * h {
        split_equal(a, b, (len / h).floor() as u32)
    } else {
        vec![a, b]
    }
}

/// Grid data of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub k: usize,
    /// Outer sup-norm radius `R`.
    pub outer: f64,
    /// Inner radius `rho` (`0` for the central cube).
    pub inner: f64,
    pub central: bool,
    /// Layer thickness `R - rho`; half the edge of the central cube.
    pub h: f64,
    pub m: u32,
    /// Per-axis breakpoints before subdivision.
    pub pre: Vec<f64>,
    /// Per-axis breakpoints after subdivision.
    pub fine: Vec<f64>,
    /// Fine index where each pre-subdivision piece starts, plus the end.
    pub offsets: Vec<usize>,
    /// Range of this layer's cells in [`PartitionLD::cells`].
    pub first_cell: usize,
    pub cell_count: usize,
}

impl Layer {
    /// Whether fine-grid index `idx` belongs to the frame (or the central cube).
    fn owns(&self, idx: &[usize]) -> bool {
        if self.central {
            return true;
        }
        let (first, last) = (self.offsets[1], self.offsets[self.offsets.len() - 2]);
        idx.iter().any(|&i| i < first || i >= last)
    }

    /// Number of fine pieces inside pre-subdivision piece `i`.
    fn splits(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Box partition of `[-1, 1]^l` into layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLD {
    pub l: usize,
    pub n: usize,
    pub v: f64,
    pub variant: PartitionVariant,
    pub schedule: Vec<u32>,
    /// Ordered from the boundary inward; the last layer is central.
    pub layers: Vec<Layer>,
    pub cells: Vec<Cell>,
    #[serde(skip)]
    lookup: Vec<HashMap<Vec<u32>, usize>>,
}

/// Radii `R_k = 1 - (k/N)^v`, `k = 0..N`, the last being the central cube.
pub fn graded_radii(n: usize, v: f64) -> Result<Vec<f64>, MeshLdError> {
    if n < 2 {
        return Err(MeshLdError::TooFewLayers(n));
    }
    if !(v > 1.0 && v.is_finite()) {
        return Err(MeshLdError::InvalidGrading(v));
    }
    let nf = n as f64;
    Ok((0..n).map(|k| if k == 0 { 1.0 } else { 1.0 - (k as f64 / nf).powf(v) }).collect())
}

/// Pre-subdivision cells of the frame layer `k` of an independent partition
/// (the central cube for `k = N-1`).
pub fn decompose_layer(k: usize, n: usize, v: f64, l: usize) -> Result<Vec<Cell>, MeshLdError> {
    if k >= n {
        return Err(MeshLdError::LayerOutOfRange(k));
    }
    let p = decompose_domain(n, v, l, &vec![1; n], PartitionVariant::Independent)?;
    Ok(p.layer_cells(k).to_vec())
}

/// Independent or aligned partition with the graded radii.
pub fn decompose_domain(
    n: usize,
    v: f64,
    l: usize,
    schedule: &[u32],
    variant: PartitionVariant,
) -> Result<PartitionLD, MeshLdError> {
    let radii = graded_radii(n, v)?;
    let mut p = decompose_radii(&radii, l, schedule, variant)?;
    p.n = n;
    p.v = v;
    Ok(p)
}

/// Vertex-aligned partition (continuous spline variant).
pub fn decompose_domain_aligned(n: usize, v: f64, l: usize, schedule: &[u32]) -> Result<PartitionLD, MeshLdError> {
    decompose_domain(n, v, l, schedule, PartitionVariant::Aligned)
}

/// Partition from an arbitrary decreasing radius sequence `1 = R_0 > ... >
/// R_{c} > 0`; frames sit between consecutive radii and the central cube has
/// half-width `R_c`. A frame too thin inside to be gridded (`2 rho < h`) is
/// merged with everything inside it into the central cube.
pub fn decompose_radii(radii: &[f64], l: usize, schedule: &[u32], variant: PartitionVariant) -> Result<PartitionLD, MeshLdError> {
    if l < 2 {
        return Err(MeshLdError::Dimension(l));
    }
    if radii.is_empty() || radii[0] != 1.0 || radii.windows(2).any(|w| !(w[1] < w[0])) || !(radii[radii.len() - 1] > 0.0) {
        return Err(MeshLdError::InvalidRadii);
    }
    if schedule.len() != radii.len() {
        return Err(MeshLdError::ScheduleLength { expected: radii.len(), got: schedule.len() });
    }
    if schedule.contains(&0) {
        return Err(MeshLdError::ZeroSubdivision);
    }
    // merge degenerate frames
    let mut count = radii.len();
    for k in 0..radii.len() - 1 {
        let h = radii[k] - radii[k + 1];
        if 2.0 * radii[k + 1] < h {
            count = k + 1;
            break;
        }
    }
    let radii = &radii[..count];

    let mut layers: Vec<Layer> = Vec::with_capacity(count);
    // central cube first, then outward
    let c = count - 1;
    let half = radii[c];
    let pre = split_window(-half, half, half);
    layers.push(make_layer(c, half, 0.0, true, half, schedule[c], pre, false));
    for k in (0..c).rev() {
        let (outer, inner) = (radii[k], radii[k + 1]);
        let h = outer - inner;
        let mut pre = vec![-outer];
        match variant {
            PartitionVariant::Independent => pre.extend(split_window(-inner, inner, h)),
            PartitionVariant::Aligned => {
                let inherited = &layers.last().expect("inner layer").fine;
                pre.push(inherited[0]);
                for w in inherited.windows(2) {
                    pre.extend_from_slice(&split_long(w[0], w[1], h)[1..]);
                }
            }
        }
        pre.push(outer);
        let aligned = variant == PartitionVariant::Aligned;
        layers.push(make_layer(k, outer, inner, false, h, schedule[k], pre, aligned));
    }
    layers.reverse();

    let mut cells = Vec::new();
    let mut lookup = Vec::with_capacity(layers.len());
    for layer in layers.iter_mut() {
        layer.first_cell = cells.len();
        let mut map = HashMap::new();
        let pieces = layer.pre.len() - 1;
        for_each_index(&vec![pieces; l], |ids| {
            let frame = layer.central || ids.iter().any(|&i| i == 0 || i + 1 == pieces);
            if !frame {
                return;
            }
            let extent: Vec<usize> = ids.iter().map(|&i| layer.splits(i)).collect();
            for_each_index(&extent, |sub| {
                let fine: Vec<usize> = ids.iter().zip(sub).map(|(&i, &j)| layer.offsets[i] + j).collect();
                map.insert(fine.iter().map(|&i| i as u32).collect::<Vec<_>>(), cells.len());
                cells.push(Cell {
                    lo: fine.iter().map(|&i| layer.fine[i]).collect(),
                    hi: fine.iter().map(|&i| layer.fine[i + 1]).collect(),
                    layer: layer.k,
                    ids: ids.iter().map(|&i| i as u32).collect(),
                    sub: sub.iter().map(|&j| j as u32).collect(),
                });
            });
        });
        layer.cell_count = cells.len() - layer.first_cell;
        lookup.push(map);
    }
    Ok(PartitionLD { l, n: radii.len(), v: f64::NAN, variant, schedule: schedule[..count].to_vec(), layers, cells, lookup })
}

/// Subdivide the pre-grid. Plain layers split every piece into `m` parts. An
/// aligned frame splits its thickness into `m` and leaves inherited pieces
/// alone unless they exceed `2h/m`, which are then cut into
/// `ceil(len / (h/m))` parts; re-splitting every inherited piece would
/// multiply cell counts layer over layer.
#[allow(clippy::too_many_arguments)]
fn make_layer(k: usize, outer: f64, inner: f64, central: bool, h: f64, m: u32, pre: Vec<f64>, aligned: bool) -> Layer {
    let fine_h = h / m as f64;
    let last = pre.len() - 2;
    let mut fine = vec![pre[0]];
    let mut offsets = vec![0];
    for (i, w) in pre.windows(2).enumerate() {
        let len = w[1] - w[0];
        let parts = if !aligned || i == 0 || i == last {
            m
        } else if len > 2.0 * fine_h * (1.0 + 1e-12) {
            ceil_count(len / fine_h)
        } else {
            1
        };
        fine.extend_from_slice(&split_equal(w[0], w[1], parts)[1..]);
        offsets.push(fine.len() - 1);
    }
    Layer { k, outer, inner, central, h, m, pre, fine, offsets, first_cell: 0, cell_count: 0 }
}

/// Result of a structural check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

/// Cell count and its ratio to the regime's growth term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub n: usize,
    pub regime: Regime,
    pub predicted: f64,
    pub ratio: f64,
}

pub fn count_cells(p: &PartitionLD) -> Result<CellCount, MeshLdError> {
    let regime = regime(p.v, p.l)?;
    let nf = p.n as f64;
    let lf = p.l as f64;
    let predicted = match regime {
        Regime::Below => nf.powf(lf),
        Regime::Critical => nf.powf(lf) * nf.ln(),
        Regime::Above => nf.powf(p.v * (lf - 1.0)),
    };
    Ok(CellCount { n: p.cells.len(), regime, predicted, ratio: p.cells.len() as f64 / predicted })
}

impl PartitionLD {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn layer_cells(&self, k: usize) -> &[Cell] {
        let layer = &self.layers[k];
        &self.cells[layer.first_cell..layer.first_cell + layer.cell_count]
    }

    /// Fine-grid index of a cell within its layer.
    pub fn fine_index(&self, cell: &Cell) -> Vec<u32> {
        let layer = &self.layers[cell.layer];
        cell.ids.iter().zip(&cell.sub).map(|(&i, &j)| (layer.offsets[i as usize] + j as usize) as u32).collect()
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .layers
            .iter()
            .map(|layer| {
                (layer.first_cell..layer.first_cell + layer.cell_count).map(|id| (self.fine_index(&self.cells[id]), id)).collect()
            })
            .collect();
    }

    /// Layer owning `t`: the outermost layer whose closed radius range
    /// contains `|t|_inf`.
    pub fn layer_of(&self, t: &[f64]) -> usize {
        let radius = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.layers.iter().position(|layer| layer.inner <= radius).unwrap_or(self.layers.len() - 1)
    }

    /// Cell containing `t`. Faces go to the lower layer, then to the cell on
    /// the lower side of each axis.
    pub fn locate(&self, t: &[f64]) -> Option<usize> {
        if t.len() != self.l || t.iter().any(|x| !(x.abs() <= 1.0)) {
            return None;
        }
        if self.lookup.len() != self.layers.len() {
            // deserialized partitions lack the lookup table
            return self.cells.iter().position(|c| c.contains(t));
        }
        let k = self.layer_of(t);
        let layer = &self.layers[k];
        let last = layer.fine.len() - 2;
        let idx: Vec<u32> = t
            .iter()
            .map(|&x| {
                if !layer.central && x == layer.inner {
                    // the inner face belongs to this layer's thickness segment
                    return layer.fine.iter().position(|&b| b == x).unwrap_or(0) as u32;
                }
                layer.fine.partition_point(|&b| b < x).saturating_sub(1).min(last) as u32
            })
            .collect();
        let usize_idx: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
        if layer.owns(&usize_idx) {
            if let Some(&id) = self.lookup[k].get(&idx) {
                return Some(id);
            }
        }
        self.cells.iter().position(|c| c.contains(t))
    }

    /// Cell of layer `k` containing `t`, if any; ties go to the lower side.
    pub fn locate_in_layer(&self, t: &[f64], k: usize) -> Option<usize> {
        let layer = self.layers.get(k)?;
        if self.lookup.len() == self.layers.len() {
            let last = layer.fine.len() - 2;
            let idx: Vec<usize> = t.iter().map(|&x| layer.fine.partition_point(|&b| b < x).saturating_sub(1).min(last)).collect();
            if layer.owns(&idx) {
                let key: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
                if let Some(&id) = self.lookup[k].get(&key) {
                    if self.cells[id].contains(t) {
                        return Some(id);
                    }
                }
            }
        }
        (layer.first_cell..layer.first_cell + layer.cell_count).find(|&id| self.cells[id].contains(t))
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(Cell::volume).sum()
    }

    /// Disjoint interiors (via the spatial index) and volumes summing to `2^l`.
    pub fn check_tiling(&self) -> Check {
        let index = BoxIndex::new(&self.cells);
        let mut overlaps = 0usize;
        for (i, c) in self.cells.iter().enumerate() {
            for j in index.candidates(&c.lo, &c.hi) {
                let j = j as usize;
                if j > i && interiors_overlap(c, &self.cells[j]) {
                    overlaps += 1;
                }
            }
        }
        let target = 2f64.powi(self.l as i32);
        let vol = self.total_volume();
        let rel = (vol - target).abs() / target;
        let inside = self.cells.iter().all(|c| c.lo.iter().zip(&c.hi).all(|(&a, &b)| -1.0 <= a && a < b && b <= 1.0));
        Check::new(
            overlaps == 0 && rel <= 1e-9 && inside,
            format!("{} cells, {overlaps} overlapping pairs, volume {vol:.16e} (rel. dev. {rel:.3e})", self.cells.len()),
        )
    }

    /// Every pre-subdivision edge of layer `k` lies in `[h_k, 2 h_k)`.
    pub fn check_edge_window(&self) -> Check {
        let mut bad = Vec::new();
        for layer in &self.layers {
            for w in layer.pre.windows(2) {
                let e = w[1] - w[0];
                if !(e >= layer.h && e < 2.0 * layer.h) {
                    bad.push(format!("layer {}: edge {e:.6e} vs h {:.6e}", layer.k, layer.h));
                }
            }
        }
        let detail = if bad.is_empty() {
            "all pre-subdivision edges within [h_k, 2h_k)".into()
        } else {
            format!("{} edges outside [h_k, 2h_k), first: {}", bad.len(), bad[..bad.len().min(3)].join("; "))
        };
        Check::new(bad.is_empty(), detail)
    }

    /// Breakpoints of each layer reappear in the next layer outward, so the
    /// interlayer traces nest.
    pub fn check_vertex_nesting(&self) -> Check {
        let mut missing = 0usize;
        for pair in self.layers.windows(2) {
            let (outer, inner) = (&pair[0], &pair[1]);
            for b in &inner.fine {
                if outer.fine.binary_search_by(|x| x.total_cmp(b)).is_err() {
                    missing += 1;
                }
            }
        }
        Check::new(missing == 0, format!("{missing} inner-layer breakpoints missing from the next layer out"))
    }

    /// For every pair of cells sharing an `(l-1)`-dimensional face, the
    /// shared part is a full face of at least one of them.
    pub fn check_conformity(&self) -> Check {
        let index = BoxIndex::new(&self.cells);
        let mut bad = 0usize;
        let mut pairs = 0usize;
        for (i, a) in self.cells.iter().enumerate() {
            for j in index.candidates(&a.lo, &a.hi) {
                let j = j as usize;
                if j <= i {
                    continue;
                }
                let b = &self.cells[j];
                if let Some(axis) = shared_face_axis(a, b) {
                    pairs += 1;
                    let full_a = (0..self.l).filter(|&d| d != axis).all(|d| a.lo[d] >= b.lo[d] && a.hi[d] <= b.hi[d]);
                    let full_b = (0..self.l).filter(|&d| d != axis).all(|d| b.lo[d] >= a.lo[d] && b.hi[d] <= a.hi[d]);
                    if !(full_a || full_b) {
                        bad += 1;
                    }
                }
            }
        }
        Check::new(bad == 0, format!("{pairs} face-adjacent pairs, {bad} non-conforming"))
    }

    /// One line per cell: `k ids... subs... a_1 b_1 ... a_l b_l`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let mut parts = vec![c.layer.to_string()];
            parts.extend(c.ids.iter().map(u32::to_string));
            parts.extend(c.sub.iter().map(u32::to_string));
            for (a, b) in c.lo.iter().zip(&c.hi) {
                parts.push(format!("{a:.16e}"));
                parts.push(format!("{b:.16e}"));
            }
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out
    }

    /// Restore the lookup table after deserialization.
    pub fn reindex(mut self) -> Self {
        self.rebuild_lookup();
        self
    }
}

/// Axis of the common face if the closed boxes touch along a face of positive
/// `(l-1)`-measure.
pub(crate) fn shared_face_axis(a: &Cell, b: &Cell) -> Option<usize> {
    let l = a.lo.len();
    let mut touching = None;
    for d in 0..l {
        if a.hi[d] == b.lo[d] || b.hi[d] == a.lo[d] {
            if touching.is_some() {
                return None;
            }
            touching = Some(d);
        } else if !(a.lo[d] < b.hi[d] && b.lo[d] < a.hi[d]) {
            return None;
        }
    }
    touching
}

/// Parse [`PartitionLD::dump`] output for dimension `l`.
pub fn parse_dump(text: &str, l: usize) -> Result<Vec<Cell>, MeshLdError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(no, line)| {
            let err = |reason: String| MeshLdError::Parse { line: no + 1, reason };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 1 + 4 * l {
                return Err(err(format!("expected {} fields, found {}", 1 + 4 * l, fields.len())));
            }
            let int = |s: &str| s.parse::<u32>().map_err(|e| err(format!("`{s}`: {e}")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let layer = int(fields[0])? as usize;
            let ids = fields[1..=l].iter().map(|s| int(s)).collect::<Result<Vec<_>, _>>()?;
            let sub = fields[1 + l..=2 * l].iter().map(|s| int(s)).collect::<Result<Vec<_>, _>>()?;
            let coords = fields[1 + 2 * l..].iter().map(|s| float(s)).collect::<Result<Vec<_>, _>>()?;
            Ok(Cell {
                lo: coords.iter().step_by(2).copied().collect(),
                hi: coords.iter().skip(1).step_by(2).copied().collect(),
                layer,
                ids,
                sub,
            })
        })
        .collect()
}
