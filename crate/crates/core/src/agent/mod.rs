//! Learning stack: recurrent Q-network, optimizer, replay and the additive
//! value-decomposition learner.

pub mod learner;
pub mod network;
pub mod optim;
pub mod replay;

pub use learner::{
    epsilon_greedy, epsilon_schedule, td_loss, td_loss_and_grad, td_target, vdn_mix, HiddenMode, LearnerConfig, VdnLearner,
};
pub use network::{argmax, NetShape, StepCache};
pub use optim::{clip_grad_norm, Adam};
pub use replay::{EpisodeObs, ReplayBuffer, Transition};
