//! Local spline approximation of functions with boundary singularities on
//! `[-1,1]^l`, graded meshes, and lower-bound bump constructions.

// `!(x < y)` is used on purpose so that NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod box_index;
pub mod cheb;
pub mod class;
pub mod harness;
pub mod mesh1d;
pub mod mesh_ld;
pub mod minimax;
pub mod spline1d;
pub mod spline_ld;
pub mod widths;

pub use class::{
    check_membership, derive_params, distance_to_boundary, test_function, ClassError, ClassFunction, ClassKind, DerivedParams,
    Family, FunctionClassSpec, MembershipReport, ProbeGrid, SingularFunction,
};
pub use mesh1d::{build_mesh1d, Mesh1D, Variant1D};
pub use mesh_ld::{decompose_domain, Cell, PartitionLD, PartitionVariant, SchemeLd};
pub use spline1d::{build_spline1d, Spline1D};
pub use spline_ld::{build_spline_ld, SplineLD};
