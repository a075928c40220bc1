//! Small layer library with hand-written backward passes.
//!
//! Everything is generic over the scalar type; gradient-check tests run in
//! f64 while training typically runs in f32.

pub mod attention;
pub mod checkpoint;
pub mod conv;
pub mod linear;
pub mod norm;
pub mod ops;
pub mod optim;
pub mod param;
pub mod pool;
pub mod rng;
pub mod schedule;

pub use attention::CrossAttention;
pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::RowNorm;
pub use optim::{clip_global_norm, zero_all_grads, AdamW, AdamWConfig, ParamGroup};
pub use param::{NamedSlots, Param, ParamSlot};
pub use schedule::WarmupCosine;
