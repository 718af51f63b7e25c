//! Seeded RNG streams.
//!
//! Every stochastic process in a run draws from its own ChaCha12 stream so
//! that one process's draw count cannot shift another's. All streams share
//! the master seed; they differ only in the ChaCha stream number:
//!
//! ```text
//! stream(channel, replication) = replication * 8 + channel
//! ```
//!
//! Channels: 0 arrivals, 1 departures, 2 lifetimes, 3 latent (agent
//! features, cluster draws, lower-bound coins), 4 reward noise, 5 policy
//! randomization, 6 instance generation. Replication 0 is the base run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const CHANNELS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    Arrivals = 0,
    Departures = 1,
    Lifetimes = 2,
    Latent = 3,
    Reward = 4,
    Policy = 5,
    Instance = 6,
}

/// One ChaCha12 stream per channel, derived from `(master_seed, replication)`.
pub fn stream(master_seed: u64, replication: u64, channel: Channel) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(replication.wrapping_mul(CHANNELS) + channel as u64);
    rng
}

/// The full set of per-channel streams a simulation run consumes.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub arrivals: ChaCha12Rng,
    pub departures: ChaCha12Rng,
    pub lifetimes: ChaCha12Rng,
    pub latent: ChaCha12Rng,
    pub reward: ChaCha12Rng,
    pub policy: ChaCha12Rng,
}

impl RunStreams {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            arrivals: stream(master_seed, replication, Channel::Arrivals),
            departures: stream(master_seed, replication, Channel::Departures),
            lifetimes: stream(master_seed, replication, Channel::Lifetimes),
            latent: stream(master_seed, replication, Channel::Latent),
            reward: stream(master_seed, replication, Channel::Reward),
            policy: stream(master_seed, replication, Channel::Policy),
        }
    }
}
