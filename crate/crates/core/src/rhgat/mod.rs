//! Relational hypergraph attention encoder with hand-written reverse mode.

mod backward;
mod forward;
pub mod gradcheck;
mod head;
mod matrix;
mod params;
mod train;

pub use backward::{backward, Gradients};
pub use forward::{forward, pool, ForwardCache, LayerCache};
pub use head::{head_backward, loss, pool_and_head, Target};
pub use matrix::{axpy, dot, Matrix};
pub use params::{Head, LayerParams, ModelDims, RHgatParams, Task};
pub use train::{
    accuracy, predict, presence_dataset, sample_gradients, sample_loss, train, train_toy, Sample, TrainConfig,
    TrainReport, DESIGNATED_ID,
};
