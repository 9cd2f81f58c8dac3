//! Qualitative posture representation, motion primitives and interpretable
//! activity recognition for 3D stick-figure sequences.

pub mod fluents;
pub mod geometry;
pub mod qmp;
pub mod recognition;
pub mod skeleton;
pub mod synth;
