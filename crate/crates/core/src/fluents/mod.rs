//! Instantaneous and locally temporal posture fluents.

pub mod confidence;
pub mod evaluate;
pub mod registry;
pub mod stream;

pub use confidence::{
    curve_samples, middle_confidence, motion_confidence, step_motion_confidence, temporal_confidences,
    transition_confidence, Direction, Motion, MotionThreshold, TransitionSpec,
};
pub use evaluate::{channel_confidences, eval_instantaneous, eval_near, fluent_confidences, state_key, FluentReport};
pub use registry::{
    near_id, near_pairs, table_thresholds, Channel, ConfigError, Family, FluentConfig, FluentRegistry, FluentSpec,
    Measurement, Reference,
};
pub use stream::{eval_temporal, fluent_stream, FluentStream, StreamEvaluator, TemporalWindow};
