//! Network architectures: shared agent utility and policy networks,
//! hypernetwork-conditioned mixers, the unrestricted central estimator and
//! the one-layer soft critic.

mod agent;
pub mod checkpoint;
mod hyper;
mod layers;
mod mixers;
mod params;

pub use agent::{AgentInputSpec, AgentUtilityNet, PolicyNet, MASK_SENTINEL};
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use hyper::{HyperHead, Hypernetwork};
pub use layers::{Linear, Mlp};
pub use mixers::{HyperMixer, MixerKind, MixerWeights, SoftCriticMixer, UnrestrictedMixer};
pub use params::ParameterSet;
