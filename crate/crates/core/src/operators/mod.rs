//! Summation-by-parts difference and norm operators: the 1-D building
//! blocks, material scaling, and the 2-D assemblies for the perforated
//! outer region and the embedded blocks.

mod assembly;
mod materials;
mod one_d;

pub use assembly::{assemble_outer_2d, build_embedded_2d, kron_reference_2d, verify_sbp_2d, GlobalOperators2D, Sbp2dReport};
pub use materials::{MaterialField, C0, EPS0, MU0};
pub use one_d::{
    blocked_omega_ops, build_modified_ops_1d, build_reference_ops_1d, segments, verify_sbp_identity, ModifiedOperators1D,
    OperatorSet1D, SbpReport, PROJ_FAR, PROJ_NEAR,
};
