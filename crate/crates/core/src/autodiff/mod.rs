//! Dense tensors, a reverse-mode tape, Adam, and the NSBW checkpoint format.

mod adam;
mod checkpoint;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport};
pub use tape::{Gradients, OpAttrs, OpKind, Tape, Var};
pub use tensor::Tensor;
