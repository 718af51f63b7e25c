//! Reproducible instance generators: pivotal-arrival hard instances,
//! zero-knowledge block instances, stable two-arm pairs, clustered and
//! linear populations. Generators are pure given (parameters, seed); the
//! spec serializes to JSON and round-trips byte-identically.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{LinearTransferConfig, SimInputs, TransferMode};
use crate::error::{Error, Result};
use crate::population::{
    AgentFactory, AgentId, AgentPattern, AgentProfile, LifetimeLaw, PatternKind, TraceEvent,
};
use crate::rewards::{mean_of, ModelKind, NoiseKind, RewardModel};
use crate::rng::{stream, Channel};

/// How arriving agents' profiles are produced at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "factory", rename_all = "snake_case")]
pub enum FactorySpec {
    /// Explicit profile per agent id (trace-driven instances).
    Table { profiles: Vec<AgentProfile> },
    /// Cluster labels: initial agents take `initial_labels` in id order,
    /// arrivals draw a label categorically with the given weights.
    ClusterMix {
        weights: Vec<f64>,
        initial_labels: Vec<usize>,
    },
    /// Features sampled uniformly from the unit ball (optionally its
    /// nonnegative orthant), rejected until the induced means are valid.
    LinearFeatures {
        positive_orthant: bool,
        max_attempts: u32,
    },
}

/// Latent structure a generator committed to; kept for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "latent", rename_all = "snake_case")]
pub enum LatentInfo {
    None,
    Pivotal {
        /// Entry error per pivotal arrival, in arrival order.
        p_values: Vec<f64>,
        /// Latent fair coins: `true` means arm 1 is the favored arm.
        signs: Vec<bool>,
    },
    Blocks {
        block_len: u64,
        lambda_informative: f64,
        lambda_ordinary: f64,
        q: f64,
        delta_gap: f64,
        blocks: Vec<BlockInfo>,
    },
    StablePair {
        /// `false` = nu (arm 1 optimal), `true` = nu' (arm 2 optimal).
        alternative: bool,
        delta_gap: f64,
    },
}

/// Realized per-block data for the zero-knowledge hard instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    /// 1-based block index; the block covers rounds
    /// `(index-1)*H0 + 1 ..= index*H0`.
    pub index: u64,
    /// Latent coin: 1 or 2, the favored arm of informative agents.
    pub z: u8,
    /// Good blocks have exactly one informative arrival at the block head,
    /// no other informative arrivals, and a head lifetime of exactly `H0`.
    pub good: bool,
    pub informative: Vec<AgentId>,
}

/// A fully parameterized, reproducible simulation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: String,
    pub arms: usize,
    pub horizon: u64,
    pub initial_agents: u64,
    pub pattern: AgentPattern,
    pub model: RewardModel,
    pub transfer: TransferMode,
    pub factory: FactorySpec,
    pub latent: LatentInfo,
    pub seed: u64,
}

impl InstanceSpec {
    /// Re-validates reward-model and profile invariants.
    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 || self.horizon == 0 {
            return Err(Error::Misuse("arms and horizon must be >= 1"));
        }
        self.model.validate()?;
        self.pattern.validate()?;
        match &self.factory {
            FactorySpec::Table { profiles } => {
                for p in profiles {
                    p.validate(self.arms)?;
                }
            }
            FactorySpec::ClusterMix {
                weights,
                initial_labels,
            } => {
                let clusters = self.model.clusters().ok_or(Error::Misuse(
                    "cluster-mix factory requires a clustered model",
                ))?;
                if weights.len() != clusters {
                    return Err(Error::Misuse("one mix weight per cluster required"));
                }
                if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Misuse("mix weights must be nonnegative with positive sum"));
                }
                if initial_labels.len() != self.initial_agents as usize {
                    return Err(Error::Misuse("one initial label per initial agent required"));
                }
                if initial_labels.iter().any(|l| *l >= clusters) {
                    return Err(Error::Misuse("initial label out of range"));
                }
            }
            FactorySpec::LinearFeatures { max_attempts, .. } => {
                if *max_attempts == 0 {
                    return Err(Error::Misuse("max_attempts must be >= 1"));
                }
                if !matches!(
                    self.model.kind,
                    ModelKind::Linear { .. } | ModelKind::Nonlinear { .. }
                ) {
                    return Err(Error::Misuse(
                        "feature factory requires a linear or nonlinear model",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Serializes to the documented JSON text format.
    pub fn to_text(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let spec: InstanceSpec =
            serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Wires the instance into engine inputs.
    pub fn build(&self, policy: crate::policy::PolicyKind) -> Result<SimInputs> {
        self.validate()?;
        let factory: Box<dyn AgentFactory> = match &self.factory {
            FactorySpec::Table { profiles } => Box::new(TableFactory {
                profiles: profiles.iter().map(|p| (p.id.0, p.clone())).collect(),
            }),
            FactorySpec::ClusterMix {
                weights,
                initial_labels,
            } => Box::new(ClusterMixFactory {
                model: self.model.clone(),
                weights: weights.clone(),
                initial_labels: initial_labels.clone(),
            }),
            FactorySpec::LinearFeatures {
                positive_orthant,
                max_attempts,
            } => Box::new(FeatureFactory {
                model: self.model.clone(),
                positive_orthant: *positive_orthant,
                max_attempts: *max_attempts,
            }),
        };
        Ok(SimInputs {
            arms: self.arms,
            horizon: self.horizon,
            m0: self.initial_agents,
            pattern: self.pattern.clone(),
            factory,
            model: self.model.clone(),
            transfer: self.transfer,
            policy,
        })
    }
}

struct TableFactory {
    profiles: HashMap<u64, AgentProfile>,
}

impl AgentFactory for TableFactory {
    fn make(&mut self, id: AgentId, round: u64, _: &mut ChaCha12Rng) -> Result<AgentProfile> {
        self.profiles
            .get(&id.0)
            .cloned()
            .ok_or(Error::MalformedTrace {
                round,
                agent: id.0,
                reason: "no profile for this agent id",
            })
    }
}

struct ClusterMixFactory {
    model: RewardModel,
    weights: Vec<f64>,
    initial_labels: Vec<usize>,
}

impl AgentFactory for ClusterMixFactory {
    fn make(&mut self, id: AgentId, round: u64, latent: &mut ChaCha12Rng) -> Result<AgentProfile> {
        let label = if round == 0 {
            *self
                .initial_labels
                .get(id.0 as usize)
                .ok_or(Error::InternalInvariant(format!(
                    "initial agent {id} has no cluster label"
                )))?
        } else {
            let total: f64 = self.weights.iter().sum();
            let u = latent.random::<f64>() * total;
            let mut acc = 0.0;
            let mut label = self.weights.len() - 1;
            for (c, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    label = c;
                    break;
                }
            }
            label
        };
        let mut profile = AgentProfile {
            id,
            arrival_time: round,
            lifetime: None,
            mean_vector: vec![0.0; self.model.arms],
            features: None,
            cluster: Some(label),
            entry_estimates: vec![0.0; self.model.arms],
            certificate: 1.0,
        };
        for arm in 0..self.model.arms {
            profile.mean_vector[arm] = mean_of(&self.model, &profile, arm)?;
        }
        Ok(profile)
    }
}

struct FeatureFactory {
    model: RewardModel,
    positive_orthant: bool,
    max_attempts: u32,
}

impl AgentFactory for FeatureFactory {
    fn make(&mut self, id: AgentId, round: u64, latent: &mut ChaCha12Rng) -> Result<AgentProfile> {
        let dim = match &self.model.kind {
            ModelKind::Linear { theta, .. } | ModelKind::Nonlinear { theta, .. } => {
                theta.first().map(Vec::len).unwrap_or(0)
            }
            _ => 0,
        };
        for _ in 0..self.max_attempts {
            // Uniform in the unit ball: direction from Gaussians, radius
            // from U^{1/d}.
            let mut x: Vec<f64> = (0..dim)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, latent))
                .collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let radius = latent.random::<f64>().powf(1.0 / dim.max(1) as f64);
            for v in &mut x {
                *v = *v / norm * radius;
                if self.positive_orthant {
                    *v = v.abs();
                }
            }
            let mut profile = AgentProfile {
                id,
                arrival_time: round,
                lifetime: None,
                mean_vector: vec![0.0; self.model.arms],
                features: Some(x),
                cluster: None,
                entry_estimates: vec![0.0; self.model.arms],
                certificate: 1.0,
            };
            let mut ok = true;
            for arm in 0..self.model.arms {
                match mean_of(&self.model, &profile, arm) {
                    Ok(mu) => profile.mean_vector[arm] = mu,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(profile);
            }
        }
        Err(Error::InvalidParameter {
            name: "max_attempts",
            reason: "no feature draw induced means in [0, 1]",
            value: self.max_attempts as f64,
        })
    }
}

fn tabular_model(arms: usize) -> RewardModel {
    RewardModel {
        arms,
        kind: ModelKind::Tabular,
        noise: NoiseKind::Bernoulli,
    }
}

fn background_profile(id: u64, arrival: u64, level: f64) -> AgentProfile {
    AgentProfile {
        id: AgentId(id),
        arrival_time: arrival,
        lifetime: None,
        mean_vector: vec![level, level],
        features: None,
        cluster: None,
        entry_estimates: vec![level, level],
        certificate: 0.0,
    }
}

/// Pivotal-arrival hard instance (two arms). Scheduled arrivals enter with
/// uninformative entry estimates `(1/2, 1/2)`, a latent fair sign choosing
/// the favored arm, and means `(1/2 + P, 1/2)` or `(1/2, 1/2 + P)`. Each
/// batch also carries a fully certified compensator that mirrors the
/// previous pivotal agent, restoring arm-indifference of the continuing
/// pool so every batch stays pivotal.
pub fn gen_pivotal(
    horizon: u64,
    arrival_schedule: &[(u64, u64)],
    p_values: &[f64],
    seed: u64,
) -> Result<InstanceSpec> {
    let total_arrivals: u64 = arrival_schedule.iter().map(|(_, c)| c).sum();
    if p_values.is_empty() {
        return Err(Error::Misuse("at least one entry-error value required"));
    }
    if p_values.len() != 1 && p_values.len() != total_arrivals as usize {
        return Err(Error::Misuse(
            "p_values must have one entry total or one per arrival",
        ));
    }
    for &p in p_values {
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "pivotal entry error must lie in (0, 1/2]",
                value: p,
            });
        }
    }
    let mut latent = stream(seed, 0, Channel::Instance);
    let m0 = 2u64;
    let mut profiles: Vec<AgentProfile> = (0..m0)
        .map(|id| background_profile(id, 0, 0.5))
        .collect();
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut signs = Vec::new();
    let mut ps = Vec::new();
    let mut next_id = m0;
    let mut prev_pivotal: Vec<(f64, bool)> = Vec::new();

    let mut schedule: Vec<(u64, u64)> = arrival_schedule.to_vec();
    schedule.sort_by_key(|e| e.0);
    let mut arrival_index = 0usize;
    for &(round, count) in &schedule {
        if round == 0 || round > horizon {
            return Err(Error::Misuse("arrival rounds must lie in [1, horizon]"));
        }
        if count == 0 {
            continue;
        }
        // Compensators for the whole previous batch arrive first: swapped
        // means, exact entry estimates, certificate zero. They restore the
        // continuing pool's arm-indifference before the new coins land.
        for (p, sign) in prev_pivotal.drain(..) {
            let means = if sign {
                vec![0.5, 0.5 + p]
            } else {
                vec![0.5 + p, 0.5]
            };
            profiles.push(AgentProfile {
                id: AgentId(next_id),
                arrival_time: round,
                lifetime: None,
                mean_vector: means.clone(),
                features: None,
                cluster: None,
                entry_estimates: means,
                certificate: 0.0,
            });
            events.push(TraceEvent {
                round,
                arrive: true,
                agent: AgentId(next_id),
            });
            next_id += 1;
        }
        for _ in 0..count {
            let p = if p_values.len() == 1 {
                p_values[0]
            } else {
                p_values[arrival_index]
            };
            let sign = latent.random::<f64>() < 0.5;
            let means = if sign {
                vec![0.5 + p, 0.5]
            } else {
                vec![0.5, 0.5 + p]
            };
            profiles.push(AgentProfile {
                id: AgentId(next_id),
                arrival_time: round,
                lifetime: None,
                mean_vector: means,
                features: None,
                cluster: None,
                entry_estimates: vec![0.5, 0.5],
                certificate: p,
            });
            events.push(TraceEvent {
                round,
                arrive: true,
                agent: AgentId(next_id),
            });
            signs.push(sign);
            ps.push(p);
            prev_pivotal.push((p, sign));
            next_id += 1;
            arrival_index += 1;
        }
    }
    events.sort_by_key(|e| e.round);

    let spec = InstanceSpec {
        name: "pivotal".into(),
        arms: 2,
        horizon,
        initial_agents: m0,
        pattern: AgentPattern {
            kind: PatternKind::Trace { events },
            lifetime_law: LifetimeLaw::None,
        },
        model: tabular_model(2),
        transfer: TransferMode::Pretrained,
        factory: FactorySpec::Table { profiles },
        latent: LatentInfo::Pivotal {
            p_values: ps,
            signs,
        },
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// Flips every latent sign of a pivotal instance (swaps the two arms of
/// every non-symmetric agent).
pub fn swap_pivotal_signs(spec: &InstanceSpec) -> Result<InstanceSpec> {
    let mut out = spec.clone();
    match (&mut out.latent, &mut out.factory) {
        (LatentInfo::Pivotal { signs, .. }, FactorySpec::Table { profiles }) => {
            for s in signs.iter_mut() {
                *s = !*s;
            }
            for p in profiles.iter_mut() {
                p.mean_vector.reverse();
                p.entry_estimates.reverse();
            }
            Ok(out)
        }
        _ => Err(Error::Misuse("sign swap applies to pivotal instances only")),
    }
}

/// Zero-knowledge block instance. The horizon is partitioned into blocks
/// of `block_len` rounds; informative agents arrive at rate
/// `lambda_informative` with geometric(q) lifetimes and block-level latent
/// means `(1/2 + delta, 1/2)` or `(1/2, 1/2 + delta)`; ordinary agents
/// (rate `lambda_ordinary`, same lifetime law) are arm-indifferent at 1/2.
/// Block goodness is computed from the realized trace.
#[allow(clippy::too_many_arguments)]
pub fn gen_zero_knowledge_blocks(
    block_len: u64,
    lambda_informative: f64,
    lambda_ordinary: f64,
    q: f64,
    delta_gap: f64,
    horizon: u64,
    seed: u64,
) -> Result<InstanceSpec> {
    if block_len < 2 {
        return Err(Error::Misuse("block length must be >= 2"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must lie in (0, 1)",
            value: q,
        });
    }
    if !(delta_gap > 0.0 && delta_gap <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "delta_gap",
            reason: "must lie in (0, 1/2]",
            value: delta_gap,
        });
    }
    let mut arrivals_rng = stream(seed, 0, Channel::Instance);
    let mut latent = stream(seed, 1, Channel::Instance);

    let n_blocks = horizon.div_ceil(block_len);
    let z: Vec<u8> = (0..n_blocks)
        .map(|_| if latent.random::<f64>() < 0.5 { 1 } else { 2 })
        .collect();

    let mut profiles = Vec::new();
    let mut events = Vec::new();
    let mut informative_per_block: Vec<Vec<(AgentId, u64, u64)>> =
        vec![Vec::new(); n_blocks as usize];
    let mut next_id = 0u64;

    let geometric = |rng: &mut ChaCha12Rng, q: f64| -> u64 {
        let geo = rand_distr::Geometric::new(q).expect("validated q");
        1 + geo.sample(rng)
    };

    for t in 1..=horizon {
        let block = (t - 1) / block_len;
        let n_inf = crate::population::poisson_sample(lambda_informative, &mut arrivals_rng)?;
        let n_ord = crate::population::poisson_sample(lambda_ordinary, &mut arrivals_rng)?;
        // Departures happen through the profile lifetimes; the trace only
        // scripts arrivals.
        for _ in 0..n_inf {
            let id = AgentId(next_id);
            next_id += 1;
            let life = geometric(&mut latent, q);
            let zb = z[block as usize];
            let means = if zb == 1 {
                vec![0.5 + delta_gap, 0.5]
            } else {
                vec![0.5, 0.5 + delta_gap]
            };
            profiles.push(AgentProfile {
                id,
                arrival_time: t,
                lifetime: Some(life),
                mean_vector: means,
                features: None,
                cluster: None,
                entry_estimates: vec![0.0, 0.0],
                certificate: 1.0,
            });
            events.push(TraceEvent {
                round: t,
                arrive: true,
                agent: id,
            });
            informative_per_block[block as usize].push((id, t, life));
        }
        for _ in 0..n_ord {
            let id = AgentId(next_id);
            next_id += 1;
            let life = geometric(&mut latent, q);
            profiles.push(AgentProfile {
                id,
                arrival_time: t,
                lifetime: Some(life),
                mean_vector: vec![0.5, 0.5],
                features: None,
                cluster: None,
                entry_estimates: vec![0.0, 0.0],
                certificate: 1.0,
            });
            events.push(TraceEvent {
                round: t,
                arrive: true,
                agent: id,
            });
        }
    }
    events.sort_by(|a, b| a.round.cmp(&b.round).then(a.agent.cmp(&b.agent)));

    let blocks: Vec<BlockInfo> = (0..n_blocks)
        .map(|b| {
            let head = b * block_len + 1;
            let full = head + block_len - 1 <= horizon;
            let inf = &informative_per_block[b as usize];
            let good = full
                && inf.len() == 1
                && inf[0].1 == head
                && inf[0].2 == block_len;
            BlockInfo {
                index: b + 1,
                z: z[b as usize],
                good,
                informative: inf.iter().map(|(id, _, _)| *id).collect(),
            }
        })
        .collect();

    let spec = InstanceSpec {
        name: "zero_knowledge_blocks".into(),
        arms: 2,
        horizon,
        initial_agents: 0,
        pattern: AgentPattern {
            kind: PatternKind::Trace { events },
            lifetime_law: LifetimeLaw::None,
        },
        model: tabular_model(2),
        transfer: TransferMode::ZeroKnowledge,
        factory: FactorySpec::Table { profiles },
        latent: LatentInfo::Blocks {
            block_len,
            lambda_informative,
            lambda_ordinary,
            q,
            delta_gap,
            blocks,
        },
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// The stable-arm lower-bound pair: two homogeneous instances that differ
/// only in arm 2's mean. `nu` has means `(1/2 + delta, 1/2)`; `nu'` has
/// `(1/2 + delta, 1/2 + 2 delta)`.
pub fn gen_stable_pair(
    delta_gap: f64,
    horizon: u64,
    seed: u64,
) -> Result<(InstanceSpec, InstanceSpec)> {
    if !(delta_gap > 0.0 && delta_gap < 0.25) {
        return Err(Error::InvalidParameter {
            name: "delta_gap",
            reason: "must lie in (0, 1/4)",
            value: delta_gap,
        });
    }
    let make = |alternative: bool| -> Result<InstanceSpec> {
        let theta = if alternative {
            vec![vec![0.5 + delta_gap, 0.5 + 2.0 * delta_gap]]
        } else {
            vec![vec![0.5 + delta_gap, 0.5]]
        };
        let spec = InstanceSpec {
            name: if alternative { "stable_nu_prime" } else { "stable_nu" }.into(),
            arms: 2,
            horizon,
            initial_agents: 5,
            pattern: AgentPattern::poisson(1.0, 0.0),
            model: RewardModel {
                arms: 2,
                kind: ModelKind::Clustered { theta },
                noise: NoiseKind::Bernoulli,
            },
            transfer: TransferMode::Cluster { delta: 0.05 },
            factory: FactorySpec::ClusterMix {
                weights: vec![1.0],
                initial_labels: vec![0; 5],
            },
            latent: LatentInfo::StablePair {
                alternative,
                delta_gap,
            },
            seed,
        };
        spec.validate()?;
        Ok(spec)
    };
    Ok((make(false)?, make(true)?))
}

/// Clustered open system: per-cluster Poisson arrival rates (the total is
/// Poisson with the rate sum; labels are drawn categorically, which
/// preserves the independent per-cluster Poisson streams exactly).
pub fn gen_clustered(
    theta: Vec<Vec<f64>>,
    rates: &[f64],
    initial_labels: Vec<usize>,
    horizon: u64,
    noise: NoiseKind,
    transfer_delta: f64,
    seed: u64,
) -> Result<InstanceSpec> {
    if theta.is_empty() {
        return Err(Error::Misuse("at least one cluster required"));
    }
    if rates.len() != theta.len() {
        return Err(Error::Misuse("one arrival rate per cluster required"));
    }
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Misuse("cluster arrival rates must be positive"));
    }
    let arms = theta[0].len();
    let total_rate: f64 = rates.iter().sum();
    let spec = InstanceSpec {
        name: "clustered".into(),
        arms,
        horizon,
        initial_agents: initial_labels.len() as u64,
        pattern: AgentPattern::poisson(total_rate, 0.0),
        model: RewardModel {
            arms,
            kind: ModelKind::Clustered { theta },
            noise,
        },
        transfer: TransferMode::Cluster {
            delta: transfer_delta,
        },
        factory: FactorySpec::ClusterMix {
            weights: rates.to_vec(),
            initial_labels,
        },
        latent: LatentInfo::None,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// Linear open system with the effective-information schedule
/// `N_eff(t) = c_gamma t^gamma` driving arrival certificates.
#[allow(clippy::too_many_arguments)]
pub fn gen_linear(
    theta: Vec<Vec<f64>>,
    gamma: u32,
    horizon: u64,
    m0: u64,
    arrival_rate: f64,
    noise: NoiseKind,
    transfer: LinearTransferConfig,
    seed: u64,
) -> Result<InstanceSpec> {
    if gamma != 1 && gamma != 2 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "effective-information regime must be 1 or 2",
            value: gamma as f64,
        });
    }
    let arms = theta.len();
    let s_bound = theta
        .iter()
        .map(|th| th.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let spec = InstanceSpec {
        name: "linear".into(),
        arms,
        horizon,
        initial_agents: m0,
        pattern: AgentPattern::poisson(arrival_rate, 0.0),
        model: RewardModel {
            arms,
            kind: ModelKind::Linear { theta, s_bound },
            noise,
        },
        transfer: TransferMode::Linear(LinearTransferConfig { gamma, ..transfer }),
        factory: FactorySpec::LinearFeatures {
            positive_orthant: true,
            max_attempts: 1000,
        },
        latent: LatentInfo::None,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}
