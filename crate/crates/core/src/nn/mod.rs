//! Layers, initializers, optimizers and learning-rate schedules.

mod layers;
mod optim;
mod schedule;

pub use layers::{
    dense_forward, forward_all, kaiming_uniform, normal_init, Activation, GroupBuilder, Layer, Param, ParamGroup,
    CONV_INIT_STD,
};
pub use optim::{adam_step, sgd_step, Optimizer, OptimizerKind};
pub use schedule::{time_embedding, LrSchedule};
