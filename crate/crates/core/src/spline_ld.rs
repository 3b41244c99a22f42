//! Tensor-product Chebyshev interpolation on the cells of a [`PartitionLD`].
//!
//! The continuous variant is built from the central cube outward. A node of
//! layer `k` lying on the surface shared with layer `k+1` takes the value of
//! the already fitted layer-`k+1` spline instead of `f`, so the outer cell's
//! face polynomial reproduces the inner one exactly. Inside a layer the grid is
//! conforming, so shared faces carry identical node sets and values.

use crate::box_index::{AaBox, BoxIndex};
use crate::cheb::{barycentric_weights, lagrange_basis, map_reference, reference_nodes, ChebError, NodeLayout};
use crate::class::{ClassKind, FunctionClassSpec, SingularFunction};
use crate::mesh_ld::{for_each_index, shared_face_axis, PartitionLD, PartitionVariant};
use crate::spline1d::{lobatto_samples, BOUNDARY_LADDER};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SplineLdError {
    #[error("f is not finite at node {point:?} (value {value})")]
    NonFiniteNode { point: Vec<f64>, value: f64 },
    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("need at least 2 nodes per dimension (got {0})")]
    TooFewNodes(usize),
    #[error("at least 3 samples per dimension are required (got {0})")]
    TooFewSamples(usize),
    #[error("the continuous spline needs an aligned partition")]
    ContinuousNeedsAligned,
    #[error("cell box is empty or has the wrong dimension")]
    BadCell,
    #[error(transparent)]
    Cheb(#[from] ChebError),
}

/// Tensor interpolant with `nodes_per_dim` Chebyshev nodes along every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolantLD {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub layout: NodeLayout,
    /// Mapped nodes per axis.
    pub nodes: Vec<Vec<f64>>,
    /// Node values, last axis fastest.
    pub values: Vec<f64>,
    weights: Vec<f64>,
}

impl AaBox for InterpolantLD {
    fn lo(&self) -> &[f64] {
        &self.lo
    }
    fn hi(&self) -> &[f64] {
        &self.hi
    }
}

impl InterpolantLD {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.weights.len()
    }

    /// Grid points in storage order.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let s = self.nodes_per_dim();
        let mut out = Vec::with_capacity(self.values.len());
        for_each_index(&vec![s; self.dim()], |idx| {
            out.push(idx.iter().enumerate().map(|(axis, &j)| self.nodes[axis][j]).collect());
        });
        out
    }

    /// Value of the polynomial at `t` (extrapolates outside the cell).
    pub fn eval(&self, t: &[f64]) -> f64 {
        let s = self.nodes_per_dim();
        let mut basis = vec![0.0; s];
        let mut buf = self.values.clone();
        // contract the fastest axis first
        for axis in (0..self.dim()).rev() {
            lagrange_basis(&self.nodes[axis], &self.weights, t[axis], &mut basis);
            buf = buf.chunks_exact(s).map(|c| c.iter().zip(&basis).map(|(v, b)| v * b).sum()).collect();
        }
        buf[0]
    }
}

/// Interpolation data on a box without evaluating anything yet.
fn grid_for(layout: NodeLayout, lo: &[f64], hi: &[f64], s: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>), SplineLdError> {
    if s < 2 {
        return Err(SplineLdError::TooFewNodes(s));
    }
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(SplineLdError::BadCell);
    }
    let reference = reference_nodes(layout, s)?;
    let weights = barycentric_weights(&reference);
    let nodes = lo.iter().zip(hi).map(|(&a, &b)| map_reference(&reference, a, b)).collect();
    Ok((nodes, weights))
}

fn fit(
    layout: NodeLayout,
    lo: &[f64],
    hi: &[f64],
    s: usize,
    mut value: impl FnMut(&[f64]) -> f64,
) -> Result<InterpolantLD, SplineLdError> {
    let (nodes, weights) = grid_for(layout, lo, hi, s)?;
    let mut p = InterpolantLD { lo: lo.to_vec(), hi: hi.to_vec(), layout, nodes, values: Vec::new(), weights };
    let mut values = Vec::with_capacity(s.pow(lo.len() as u32));
    for point in p.grid() {
        let v = value(&point);
        if !v.is_finite() {
            return Err(SplineLdError::NonFiniteNode { point, value: v });
        }
        values.push(v);
    }
    p.values = values;
    Ok(p)
}

/// Tensor interpolant of `f` on the box `[lo, hi]` with `s` endpoint-anchored
/// nodes per dimension.
pub fn tensor_interpolate(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], s: usize) -> Result<InterpolantLD, SplineLdError> {
    fit(NodeLayout::EndpointAnchored, lo, hi, s, f)
}

pub fn tensor_interpolate_with(
    layout: NodeLayout,
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    s: usize,
) -> Result<InterpolantLD, SplineLdError> {
    fit(layout, lo, hi, s, f)
}

/// Nodes per dimension for a class: `s`, or `s + 1` for `Q_u` when `s = r + 1`.
pub fn nodes_per_dim(spec: &FunctionClassSpec, s: usize) -> usize {
    if spec.kind == ClassKind::Qu && s == spec.r as usize + 1 {
        s + 1
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineLD {
    pub partition: PartitionLD,
    /// One interpolant per partition cell, same order.
    pub pieces: Vec<InterpolantLD>,
    pub nodes_per_dim: usize,
    pub continuous: bool,
    /// Number of distinct interpolation points.
    pub node_count: usize,
    pub source: String,
}

/// Fit every cell of `partition` with `s` nodes per dimension.
pub fn build_spline_ld<F>(
    f: &F,
    partition: &PartitionLD,
    s: usize,
    continuous: bool,
    source: &str,
) -> Result<SplineLD, SplineLdError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if continuous && partition.variant != PartitionVariant::Aligned {
        return Err(SplineLdError::ContinuousNeedsAligned);
    }
    let layout = NodeLayout::EndpointAnchored;
    let mut pieces: Vec<Option<InterpolantLD>> = vec![None; partition.cells.len()];
    if !continuous {
        let fitted: Vec<InterpolantLD> =
            partition.cells.par_iter().map(|c| fit(layout, &c.lo, &c.hi, s, |t| f(t))).collect::<Result<_, _>>()?;
        pieces = fitted.into_iter().map(Some).collect();
    } else {
        for k in (0..partition.layers.len()).rev() {
            let layer = &partition.layers[k];
            let range = layer.first_cell..layer.first_cell + layer.cell_count;
            let inner = (!layer.central).then_some(layer.inner);
            let done = &pieces;
            let fitted: Vec<InterpolantLD> = partition.cells[range.clone()]
                .par_iter()
                .map(|c| {
                    fit(layout, &c.lo, &c.hi, s, |t| match inner {
                        Some(rho) if t.iter().fold(0.0f64, |m, x| m.max(x.abs())) == rho => {
                            let id = partition.locate_in_layer(t, k + 1).expect("inner layer covers its boundary");
                            done[id].as_ref().expect("inner layer fitted first").eval(t)
                        }
                        _ => f(t),
                    })
                })
                .collect::<Result<_, _>>()?;
            for (id, p) in range.zip(fitted) {
                pieces[id] = Some(p);
            }
        }
    }
    let pieces: Vec<InterpolantLD> = pieces.into_iter().map(|p| p.expect("every cell fitted")).collect();
    let mut distinct = HashSet::new();
    for p in &pieces {
        for point in p.grid() {
            distinct.insert(point.iter().map(|x| x.to_bits()).collect::<Vec<u64>>());
        }
    }
    Ok(SplineLD {
        partition: partition.clone(),
        node_count: distinct.len(),
        pieces,
        nodes_per_dim: s,
        continuous,
        source: source.to_string(),
    })
}

/// Spline of a class member: `s` (or `s + 1`) nodes per dimension.
pub fn spline_ld_of(f: &SingularFunction, partition: &PartitionLD, continuous: bool) -> Result<SplineLD, SplineLdError> {
    let spec = f.spec();
    let s = crate::class::derive_params(spec).map(|p| p.s as usize).unwrap_or(2);
    build_spline_ld(&|t: &[f64]| f.eval(t), partition, nodes_per_dim(spec, s), continuous, &f.family().to_string())
}

impl SplineLD {
    pub fn dim(&self) -> usize {
        self.partition.l
    }

    /// Index of the cell used for evaluation at `t`.
    pub fn locate(&self, t: &[f64]) -> Result<usize, SplineLdError> {
        self.partition.locate(t).ok_or_else(|| SplineLdError::OutsideDomain(t.to_vec()))
    }

    pub fn eval(&self, t: &[f64]) -> Result<f64, SplineLdError> {
        Ok(self.pieces[self.locate(t)?].eval(t))
    }

    /// Largest difference between the polynomials of face-adjacent cells,
    /// sampled on a `q^(l-1)` Lobatto grid of each shared face.
    pub fn max_interface_jump(&self, q: usize) -> Result<f64, SplineLdError> {
        if q < 3 {
            return Err(SplineLdError::TooFewSamples(q));
        }
        let cells = &self.partition.cells;
        let index = BoxIndex::new(cells);
        let l = self.dim();
        let worst = (0..cells.len())
            .into_par_iter()
            .map(|i| {
                let a = &cells[i];
                let mut worst = 0.0f64;
                for j in index.candidates(&a.lo, &a.hi) {
                    let j = j as usize;
                    if j <= i {
                        continue;
                    }
                    let b = &cells[j];
                    let Some(axis) = shared_face_axis(a, b) else { continue };
                    let face = if a.hi[axis] == b.lo[axis] { a.hi[axis] } else { a.lo[axis] };
                    let axes: Vec<Vec<f64>> = (0..l)
                        .map(|d| {
                            if d == axis {
                                vec![face]
                            } else {
                                lobatto_samples(a.lo[d].max(b.lo[d]), a.hi[d].min(b.hi[d]), q).collect()
                            }
                        })
                        .collect();
                    let extent: Vec<usize> = axes.iter().map(Vec::len).collect();
                    let mut t = vec![0.0; l];
                    for_each_index(&extent, |idx| {
                        for d in 0..l {
                            t[d] = axes[d][idx[d]];
                        }
                        worst = worst.max((self.pieces[i].eval(&t) - self.pieces[j].eval(&t)).abs());
                    });
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        Ok(worst)
    }
}

/// Sampled `max |f - sp|`: a `q^l` Lobatto grid on every cell (vertices
/// included), plus a geometric ladder toward each face on the domain boundary.
pub fn sup_error_ld<F>(sp: &SplineLD, f: &F, q: usize) -> Result<f64, SplineLdError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if q < 3 {
        return Err(SplineLdError::TooFewSamples(q));
    }
    let l = sp.dim();
    let worst = sp
        .pieces
        .par_iter()
        .map(|p| {
            let axes: Vec<Vec<f64>> = (0..l).map(|d| lobatto_samples(p.lo[d], p.hi[d], q).collect()).collect();
            let mut worst = 0.0f64;
            let mut t = vec![0.0; l];
            let mut probe = |axes: &[Vec<f64>], worst: &mut f64| {
                let extent: Vec<usize> = axes.iter().map(Vec::len).collect();
                for_each_index(&extent, |idx| {
                    for d in 0..l {
                        t[d] = axes[d][idx[d]];
                    }
                    *worst = worst.max((f(&t) - p.eval(&t)).abs());
                });
            };
            probe(&axes, &mut worst);
            for d in 0..l {
                let len = p.hi[d] - p.lo[d];
                for (edge, dir) in [(p.lo[d], 1.0), (p.hi[d], -1.0)] {
                    if edge.abs() != 1.0 {
                        continue;
                    }
                    let mut ladder = axes.clone();
                    ladder[d] = (1..=BOUNDARY_LADDER).map(|j| edge + dir * len * 0.5f64.powi(j)).collect();
                    probe(&ladder, &mut worst);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}
