//! DDPG agent with nearest-neighbour action quantization, driven only by
//! scalar gain feedback.

mod ddpg;
mod env;
mod noise;
mod replay;
mod reward;

pub use ddpg::{
    actor_architecture, critic_architecture, decode_phases, encode_phases, encode_phases_into, Agent,
    AgentCheckpoint, AgentConfig, StepLog,
};
pub use env::{Environment, GainFeedback};
pub use noise::{decay_noise, NoiseSchedule, OuNoise};
pub use replay::{ReplayMemory, Transition};
pub use reward::{Reward, RewardTracker};
