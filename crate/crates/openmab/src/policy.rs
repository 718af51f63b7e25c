//! The decision layer: global-value aggregation, common UCB selection,
//! local statistic updates, the clustered variant, and baseline policies.
//!
//! Arms are 0-based in code; file formats and CLI output print them
//! 1-based (0 marks "no pull", which happens only on empty rounds).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::argmax_lowest;

/// Per-agent local statistics: one (count, mean, radius) triple per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStats {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
    pub radii: Vec<f64>,
}

impl LocalStats {
    /// Fresh initial-agent state: zero counts, zero means, unit radii.
    pub fn initial(arms: usize) -> Self {
        Self {
            counts: vec![0; arms],
            means: vec![0.0; arms],
            radii: vec![1.0; arms],
        }
    }

    /// Arrival state from a certified transfer outcome.
    pub fn from_transfer(outcome: &crate::transfer::TransferOutcome) -> Self {
        let arms = outcome.estimates.len();
        Self {
            counts: vec![outcome.counts_init(); arms],
            means: outcome.estimates.clone(),
            radii: vec![outcome.radius_init(); arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }
}

/// Per-arm global index components: `index(i) = estimate(i) + stat_bonus(i)
/// + arrival_bonus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalIndex {
    /// `Vhat_t(i)`: sum of active agents' current mean estimates.
    pub estimate: Vec<f64>,
    /// `Bstat_t(i)`: continuing agents' radii plus the communication term.
    pub stat_bonus: Vec<f64>,
    /// `E^A_t`: sum of arrival certificates; identical across arms.
    pub arrival_bonus: f64,
}

impl GlobalIndex {
    pub fn arms(&self) -> usize {
        self.estimate.len()
    }

    pub fn index(&self, arm: usize) -> f64 {
        self.estimate[arm] + self.stat_bonus[arm] + self.arrival_bonus
    }
}

/// One active agent's contribution to the aggregation pass. Arrivals carry
/// their certificate; continuing agents contribute their radii instead.
pub struct AgentAggregate<'a> {
    pub stats: &'a LocalStats,
    pub arrival_certificate: Option<f64>,
}

/// Exact complete-graph aggregation: sums estimates over all active
/// agents, radii over continuing agents, and certificates over arrivals.
/// `eps_comm` injects a per-arm synthetic aggregation error into the
/// statistical bonus (zero for exact sums).
pub fn aggregate_global<'a>(
    arms: usize,
    agents: impl IntoIterator<Item = AgentAggregate<'a>>,
    eps_comm: &[f64],
) -> Result<GlobalIndex> {
    if eps_comm.len() != arms {
        return Err(Error::Misuse("eps_comm must carry one entry per arm"));
    }
    if eps_comm.iter().any(|e| *e < 0.0) {
        return Err(Error::Misuse("eps_comm entries must be nonnegative"));
    }
    let mut estimate = vec![0.0; arms];
    let mut stat_bonus = eps_comm.to_vec();
    let mut arrival_bonus = 0.0;
    for agent in agents {
        if agent.stats.arms() != arms {
            return Err(Error::InternalInvariant(format!(
                "active agent carries {} arms of stats, expected {arms}",
                agent.stats.arms()
            )));
        }
        for (slot, m) in estimate.iter_mut().zip(&agent.stats.means) {
            *slot += m;
        }
        match agent.arrival_certificate {
            Some(c) => arrival_bonus += c,
            None => {
                for (slot, r) in stat_bonus.iter_mut().zip(&agent.stats.radii) {
                    *slot += r;
                }
            }
        }
    }
    Ok(GlobalIndex {
        estimate,
        stat_bonus,
        arrival_bonus,
    })
}

/// `argmax_i { Vhat(i) + Bstat(i) + E^A }`, ties to the lowest arm.
pub fn select_arm(index: &GlobalIndex) -> usize {
    let scores: Vec<f64> = (0..index.arms()).map(|i| index.index(i)).collect();
    argmax_lowest(&scores)
}

/// Updates one agent's triple for the pulled arm:
/// count += 1, running mean, radius `min(prev, (C1 ln t / max(1,n))^beta)`.
/// At t = 1 the log vanishes and would falsely certify, so the min-update
/// is skipped there; unpulled arms are untouched.
pub fn update_local(
    stats: &mut LocalStats,
    selected: usize,
    reward: f64,
    t: u64,
    c1: f64,
    beta: f64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Misuse("rounds are 1-based; t = 0 is the initial state"));
    }
    if selected >= stats.arms() {
        return Err(Error::Misuse("selected arm out of range"));
    }
    let c1_log_t = (t >= 2).then(|| c1 * (t as f64).ln());
    update_local_fast(stats, selected, reward, c1_log_t, beta);
    Ok(())
}

/// Hot-path form of [`update_local`]: `c1_log_t` is `C1 ln t` precomputed
/// once per round, or `None` at t = 1 where the min-update is skipped.
pub(crate) fn update_local_fast(
    stats: &mut LocalStats,
    selected: usize,
    reward: f64,
    c1_log_t: Option<f64>,
    beta: f64,
) {
    let n = stats.counts[selected] + 1;
    stats.counts[selected] = n;
    stats.means[selected] = ((n - 1) as f64 * stats.means[selected] + reward) / n as f64;
    if let Some(cl) = c1_log_t {
        let x = cl / n as f64;
        let candidate = if beta == 0.5 { x.sqrt() } else { x.powf(beta) };
        if candidate < stats.radii[selected] {
            stats.radii[selected] = candidate;
        }
    }
}

/// Batch form: every active agent must supply a reward for the pulled arm.
pub fn update_and_broadcast(
    all: &mut [LocalStats],
    selected: usize,
    rewards: &[f64],
    t: u64,
    c1: f64,
    beta: f64,
) -> Result<()> {
    if all.len() != rewards.len() {
        return Err(Error::Misuse("one reward per active agent required"));
    }
    for (stats, &r) in all.iter_mut().zip(rewards) {
        update_local(stats, selected, r, t, c1, beta)?;
    }
    Ok(())
}

/// Round-robin burn-in schedule over `k` arms (0-based arm index).
pub fn burnin_arm(t: u64, k: usize) -> Result<usize> {
    if t == 0 {
        return Err(Error::Misuse("rounds are 1-based"));
    }
    if k == 0 {
        return Err(Error::Misuse("arm count must be >= 1"));
    }
    Ok(((t - 1) % k as u64) as usize)
}

/// Clustered UCB-style bonus:
/// `F(i) = sum over represented clusters of M^{(c)} (C1 ln t /
/// max(1, n_{c,i}))^beta`.
pub fn clustered_bonus(
    cluster_sizes: &[u64],
    cluster_counts: &[Vec<u64>],
    t: u64,
    c1: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    if t < 2 {
        return Err(Error::Misuse("clustered bonus applies after burn-in (t >= 2)"));
    }
    if cluster_sizes.len() != cluster_counts.len() {
        return Err(Error::Misuse("one count row per cluster required"));
    }
    let arms = cluster_counts.first().map(|r| r.len()).unwrap_or(0);
    let log_t = (t as f64).ln();
    let mut out = vec![0.0; arms];
    for (size, counts) in cluster_sizes.iter().zip(cluster_counts) {
        if *size == 0 {
            continue;
        }
        for (arm, &n) in counts.iter().enumerate() {
            out[arm] += *size as f64 * (c1 * log_t / n.max(1) as f64).powf(beta);
        }
    }
    Ok(out)
}

/// Synthetic per-arm aggregation-error schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsComm {
    Constant(f64),
    /// Per-round values; rounds past the end reuse the last entry.
    PerRound(Vec<f64>),
}

impl Default for EpsComm {
    fn default() -> Self {
        EpsComm::Constant(0.0)
    }
}

impl EpsComm {
    pub fn value_at(&self, t: u64) -> f64 {
        match self {
            EpsComm::Constant(v) => *v,
            EpsComm::PerRound(vs) => {
                if vs.is_empty() {
                    0.0
                } else {
                    vs[((t as usize).saturating_sub(1)).min(vs.len() - 1)]
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = match self {
            EpsComm::Constant(v) => *v < 0.0 || !v.is_finite(),
            EpsComm::PerRound(vs) => vs.iter().any(|v| *v < 0.0 || !v.is_finite()),
        };
        if bad {
            return Err(Error::Misuse("eps_comm values must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// How commit-after-burn-in picks its commit round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitTau {
    /// Commit at the end of a fixed round.
    Fixed { tau: u64 },
    /// Commit at the first `t` with `(1/K) sum_{s<=t} M_s >= N_id + 1`
    /// (round-robin identification time with `N_id = n_id(delta, conf, K)`).
    RoundRobinId { delta: f64, conf: f64 },
}

/// Which policy drives the common arm choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    CertifiedGlobalUcb {
        c1: f64,
        beta: f64,
        #[serde(default)]
        eps_comm: EpsComm,
    },
    ClusteredUcb {
        c1: f64,
        beta: f64,
        burn_in: u64,
    },
    Oracle,
    UniformRandom,
    RoundRobin,
    CommitAfterBurnin {
        tau: CommitTau,
    },
}

impl PolicyKind {
    pub fn certified_default() -> Self {
        PolicyKind::CertifiedGlobalUcb {
            c1: 2.0,
            beta: 0.5,
            eps_comm: EpsComm::Constant(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyKind::CertifiedGlobalUcb { c1, beta, eps_comm } => {
                if !(*c1 > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "c1",
                        reason: "must be positive",
                        value: *c1,
                    });
                }
                if !(*beta > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "beta",
                        reason: "must be positive",
                        value: *beta,
                    });
                }
                eps_comm.validate()
            }
            PolicyKind::ClusteredUcb { c1, beta, .. } => {
                if !(*c1 > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "c1",
                        reason: "must be positive",
                        value: *c1,
                    });
                }
                if !(*beta > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "beta",
                        reason: "must be positive",
                        value: *beta,
                    });
                }
                Ok(())
            }
            PolicyKind::CommitAfterBurnin { tau } => match tau {
                CommitTau::Fixed { tau } if *tau == 0 => {
                    Err(Error::Misuse("commit round must be >= 1"))
                }
                CommitTau::RoundRobinId { delta, conf } => {
                    if !(*delta > 0.0 && *delta <= 1.0) {
                        return Err(Error::InvalidParameter {
                            name: "delta",
                            reason: "gap must lie in (0, 1]",
                            value: *delta,
                        });
                    }
                    if !(*conf > 0.0 && *conf < 1.0) {
                        return Err(Error::InvalidParameter {
                            name: "conf",
                            reason: "confidence must lie in (0, 1)",
                            value: *conf,
                        });
                    }
                    Ok(())
                }
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}
