//! Replay, targets, the three training losses, the entropy temperature,
//! optimizers and the episode/update loop.

mod buffer;
mod config;
mod losses;
mod model;
mod optim;
mod trainer;

pub use buffer::{EpisodeRecord, ReplayBuffer, Transition};
pub use config::{Ablation, NetConfig, OptimizerKind, PolicyInput, TrainConfig};
pub use losses::{
    agent_alpha, alpha_update, entropy, epsilon, loss_concaveq, loss_policy, loss_qstar,
    soft_values, target_entropy, td_target, weight_fn, PolicySample,
};
pub use model::{
    BoundVars, Learner, LossVars, PreparedBatch, TargetNetworkPair, TrainMetrics, CRITIC, GROUPS,
    MIXER, POLICY, QSTAR, UTILITY,
};
pub use optim::Optimizer;
pub use trainer::{
    episode_seed, evaluate, run_episode, EpisodeMetrics, EvalSummary, MetricsRecord, Trainer,
};
