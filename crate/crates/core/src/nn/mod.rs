//! A small reverse-mode neural network core: enough ops for the two
//! seizure models, an Adam optimizer, and a finite-difference checker
//! that keeps the hand-written backward passes honest.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod loss;
pub mod ops;

pub use adam::{maxnorm_project, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use graph::{Forward, Gradients, Graph, Mode, NodeId, Op, ParamId, Params};
pub use loss::{bce_logit_grad, bce_loss, cce_logit_grad, cce_loss, contrastive_loss};
