//! Equivariant and invariant Kalman filtering for inertial-integrated
//! navigation on the matrix Lie group SE₂(3).
//!
//! The crate is organised bottom-up:
//!
//! - [`liegroup`]: SO(3)/SE₂(3) algebra, the Γₘ function family, adjoints.
//! - [`kinematics`]: the four group-affine strapdown models as `(W₁, W₂)`
//!   pairs, their exact flow, the lift and velocity action, and verifiers.
//! - [`errordyn`]: left/right invariant errors, linearised `F`, `G`, `H`
//!   and the invariant feedback.
//! - [`transition`]: analytic discrete transition matrices and process noise.
//! - [`filter`]: the 15-state filter in the transformed ECEF frame, GNSS
//!   updates and observability analysis.
//! - [`sim`]: analytic ground truth, IMU/GNSS synthesis.
//! - [`cli`]: configuration, CSV formats and the command-line subcommands.
//!
//! Data-parallel loops (Monte Carlo runs, randomized property checks) go
//! through [`par`], which uses rayon when the `parallel` feature is enabled
//! and falls back to plain iterators otherwise.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod earth;
pub mod error;
pub mod errordyn;
pub mod filter;
pub mod kinematics;
pub mod liegroup;
pub mod numeric;
pub mod par;
pub mod sim;
pub mod transition;
pub mod verify;

pub use error::{Error, Result};
pub use liegroup::{FrameTag, GroupElement, Mat3, Rotation, Tangent9, Vec3};
