//! Numerical laboratory for decentralized flock dynamics.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod energy;
pub mod frequency;
pub mod linalg;
pub mod model;
pub mod par;
pub mod stability;
pub mod planar;
pub mod experiments;
