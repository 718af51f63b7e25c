//! Round engine: drives the population, certified arrival transfer, the
//! selected policy, reward sampling, local updates, and the evaluator's
//! ground-truth bookkeeping.
//!
//! A round is a sequential transaction: departures and arrivals are
//! realized, arrivals are initialized by certified transfer, the policy
//! picks one common arm, every active agent pulls it, and local statistics
//! are updated. Emitted records order agents by id.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{stability_indicator, RegretLedger};
use crate::policy::{
    aggregate_global, burnin_arm, clustered_bonus, select_arm, AgentAggregate, CommitTau,
    GlobalIndex, LocalStats, PolicyKind,
};
use crate::population::{AgentFactory, AgentId, AgentPattern, Population, PopulationStreams};
use crate::rewards::{
    check_arrival_perturbation, check_one_step_stability, global_values_from_sums, sample_noise,
    GlobalValues, ModelKind, RewardModel,
};
use crate::rng::RunStreams;
use crate::transfer::{
    certificate_valid, cluster_inherit, cluster_radius, linear_neighbor_certificate,
    linear_param_transfer, pretrained_init, pretraining_error, zero_knowledge_init, ClusterStats,
    LinearCertParams, NeighborParams, TransferModeUsed, TransferOutcome,
};
use crate::util::csv_float;

/// Linear-mode transfer knobs (the sqrt-law certificate construction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTransferConfig {
    pub lambda: f64,
    pub kappa: f64,
    pub c_gamma: f64,
    pub gamma: u32,
    pub delta: f64,
}

impl Default for LinearTransferConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            kappa: 1.0,
            c_gamma: 1.0,
            gamma: 1,
            delta: 0.05,
        }
    }
}

/// How arriving agents are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransferMode {
    ZeroKnowledge,
    /// Use the entry estimates and certificate declared on each profile.
    Pretrained,
    /// Inherit cluster-level empirical estimates with the sub-Gaussian
    /// radius at confidence `delta`.
    Cluster { delta: f64 },
    /// Parameter transfer from the pooled ridge estimator with the
    /// sqrt-law certificate.
    Linear(LinearTransferConfig),
}

/// Everything a run needs besides seeds.
pub struct SimInputs {
    pub arms: usize,
    pub horizon: u64,
    pub m0: u64,
    pub pattern: AgentPattern,
    pub factory: Box<dyn AgentFactory>,
    pub model: RewardModel,
    pub transfer: TransferMode,
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Assert the arrival-perturbation and one-step-stability lemmas on
    /// no-departure rounds; a violation aborts the run.
    pub lemma_checks: bool,
    /// Keep per-agent rewards in each record.
    pub record_rewards: bool,
    /// Count radius-monotonicity violations (validation battery).
    pub check_radius_monotone: bool,
    /// Count `|mu_hat - mu| > rho` events over active (agent, arm) pairs
    /// with at least one pull (validation battery).
    pub check_coverage: bool,
    /// Count cluster-estimator deviations beyond the inheritance radius
    /// over all (cluster, arm, round) cells.
    pub check_cluster_coverage: bool,
    /// Test fixture: break the radius min-update so monotonicity fails.
    #[doc(hidden)]
    pub corrupt_radius_update: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            lemma_checks: true,
            record_rewards: false,
            check_radius_monotone: false,
            check_coverage: false,
            check_cluster_coverage: false,
            corrupt_radius_update: false,
        }
    }
}

/// Per-round record (the schema consumed by metrics and the harness).
/// `body` is absent on rounds with an empty active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub population: u64,
    pub arrivals: u64,
    pub body: Option<RoundBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundBody {
    /// 0-based chosen arm.
    pub chosen: usize,
    /// 0-based ground-truth optimal arm.
    pub optimal: usize,
    pub vhat: Vec<f64>,
    pub bstat: Vec<f64>,
    pub arrival_bonus: f64,
    pub stability: u8,
    pub gap: f64,
    /// Per-agent rewards ordered by id; kept only on request.
    pub rewards: Option<Vec<(AgentId, f64)>>,
}

impl RoundRecord {
    /// Fixed CSV column set: `t,M,A,a,i_star,Vhat_1..K,Bstat_1..K,EA,S,gap`
    /// with 1-based arm labels.
    pub fn csv_header(arms: usize) -> String {
        let mut cols = vec!["t".to_string(), "M".to_string(), "A".to_string(), "a".to_string(), "i_star".to_string()];
        for i in 1..=arms {
            cols.push(format!("Vhat_{i}"));
        }
        for i in 1..=arms {
            cols.push(format!("Bstat_{i}"));
        }
        cols.push("EA".to_string());
        cols.push("S".to_string());
        cols.push("gap".to_string());
        cols.join(",")
    }

    pub fn to_csv_row(&self, arms: usize) -> String {
        let mut cols = vec![
            self.round.to_string(),
            self.population.to_string(),
            self.arrivals.to_string(),
        ];
        match &self.body {
            Some(b) => {
                cols.push((b.chosen + 1).to_string());
                cols.push((b.optimal + 1).to_string());
                for v in &b.vhat {
                    cols.push(csv_float(*v));
                }
                for v in &b.bstat {
                    cols.push(csv_float(*v));
                }
                cols.push(csv_float(b.arrival_bonus));
                cols.push(b.stability.to_string());
                cols.push(csv_float(b.gap));
            }
            None => {
                // Empty round: decision columns are recorded as absent.
                for _ in 0..(2 * arms + 5) {
                    cols.push(String::new());
                }
            }
        }
        cols.join(",")
    }
}

/// One arrival's transfer audit entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub round: u64,
    pub agent: AgentId,
    pub mode: TransferModeUsed,
    pub certificate: f64,
    /// Evaluator-side true entry error `P_m`.
    pub true_error: f64,
}

/// Commit-after-burn-in audit data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitInfo {
    pub tau: u64,
    /// Burn-in estimates of the normalized global values.
    pub estimates: Vec<f64>,
    pub committed_arm: usize,
    /// Ground-truth normalized values at the commit round.
    pub true_vbar: Vec<f64>,
    pub m_tau: u64,
    /// Minimum effective sample count backing the estimates.
    pub n_min: f64,
}

/// Everything a finished run exposes.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub arms: usize,
    pub horizon: u64,
    pub m0: u64,
    pub records: Vec<RoundRecord>,
    pub ledger: RegretLedger,
    pub arrivals: Vec<ArrivalRecord>,
    pub cert_violations: u64,
    pub coverage_violations: u64,
    pub coverage_total: u64,
    pub cluster_coverage_violations: u64,
    pub cluster_coverage_total: u64,
    pub radius_monotone_violations: u64,
    /// Realized `sum_t Bstat(a_t)` (certified policy only).
    pub bstat_selected_sum: f64,
    pub commit: Option<CommitInfo>,
    /// `M_t` per round.
    pub m_trajectory: Vec<u64>,
    /// Pooled per-arm observation counts per round.
    pub sample_count_trajectory: Vec<Vec<f64>>,
    pub final_cluster_stats: Option<ClusterStats>,
}

impl RunOutput {
    pub fn total_arrival_error(&self) -> f64 {
        self.arrivals.iter().map(|a| a.true_error).sum()
    }

    pub fn certificate_violation_rate(&self) -> f64 {
        if self.arrivals.is_empty() {
            0.0
        } else {
            self.cert_violations as f64 / self.arrivals.len() as f64
        }
    }
}

struct RidgeState {
    dim: usize,
    lambda: f64,
    v: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    theta: Vec<Vec<f64>>,
    dirty: bool,
}

impl RidgeState {
    fn new(arms: usize, dim: usize, lambda: f64) -> Self {
        Self {
            dim,
            lambda,
            v: (0..arms)
                .map(|_| DMatrix::identity(dim, dim) * lambda)
                .collect(),
            b: (0..arms).map(|_| DVector::zeros(dim)).collect(),
            theta: vec![vec![0.0; dim]; arms],
            dirty: false,
        }
    }

    fn observe(&mut self, arm: usize, x: &[f64], reward: f64) {
        let v = &mut self.v[arm];
        for i in 0..self.dim {
            for j in 0..self.dim {
                v[(i, j)] += x[i] * x[j];
            }
        }
        let b = &mut self.b[arm];
        for i in 0..self.dim {
            b[i] += x[i] * reward;
        }
        self.dirty = true;
    }

    fn theta_all(&mut self) -> Result<&Vec<Vec<f64>>> {
        if self.dirty {
            for arm in 0..self.v.len() {
                let chol = Cholesky::new(self.v[arm].clone()).ok_or_else(|| {
                    Error::InternalInvariant(format!(
                        "ridge design matrix for arm {arm} is not positive definite (lambda {})",
                        self.lambda
                    ))
                })?;
                let sol = chol.solve(&self.b[arm]);
                self.theta[arm] = sol.iter().copied().collect();
            }
            self.dirty = false;
        }
        Ok(&self.theta)
    }
}

struct CommitState {
    rule: CommitTau,
    committed: Option<usize>,
    info: Option<CommitInfo>,
    cum_population: f64,
}

/// A fully wired simulation run.
pub struct Simulation {
    arms: usize,
    horizon: u64,
    m0: u64,
    pop: Population,
    model: RewardModel,
    transfer: TransferMode,
    policy: PolicyKind,
    options: RunOptions,
    reward_rng: ChaCha12Rng,
    policy_rng: ChaCha12Rng,

    stats: Vec<LocalStats>,
    entry_certs: Vec<f64>,
    cluster_slot: Vec<u32>,
    cluster_active: Vec<u64>,
    cluster_stats: Option<ClusterStats>,
    ridge: Option<RidgeState>,
    commit: Option<CommitState>,
    pooled_sums: Vec<f64>,
    pooled_counts: Vec<u64>,

    prev_gv: Option<GlobalValues>,
    prev_opt: Option<usize>,

    records: Vec<RoundRecord>,
    ledger: RegretLedger,
    arrival_log: Vec<ArrivalRecord>,
    cert_violations: u64,
    coverage_violations: u64,
    coverage_total: u64,
    cluster_cov_violations: u64,
    cluster_cov_total: u64,
    radius_violations: u64,
    bstat_selected_sum: f64,
    m_trajectory: Vec<u64>,
    sample_count_trajectory: Vec<Vec<f64>>,
}

const NO_CLUSTER: u32 = u32::MAX;

impl Simulation {
    pub fn new(
        inputs: SimInputs,
        master_seed: u64,
        replication: u64,
        options: RunOptions,
    ) -> Result<Self> {
        let SimInputs {
            arms,
            horizon,
            m0,
            pattern,
            factory,
            model,
            transfer,
            policy,
        } = inputs;
        if arms == 0 || horizon == 0 {
            return Err(Error::Misuse("arms and horizon must be >= 1"));
        }
        model.validate()?;
        policy.validate()?;
        if model.arms != arms {
            return Err(Error::Misuse("model arm count disagrees with the run"));
        }

        let streams = RunStreams::new(master_seed, replication);
        let reward_rng = streams.reward.clone();
        let policy_rng = streams.policy.clone();
        let pop_streams: PopulationStreams = streams.into();
        let pop = Population::new(arms, m0, pattern, factory, pop_streams)?;

        let cluster_count = model.clusters();
        let cluster_stats = match (&transfer, &policy, cluster_count) {
            (TransferMode::Cluster { delta }, _, Some(c)) => {
                Some(ClusterStats::new(c, arms, *delta, horizon))
            }
            (TransferMode::Cluster { .. }, _, None) => {
                return Err(Error::Misuse("cluster transfer requires a clustered model"))
            }
            (_, PolicyKind::ClusteredUcb { .. }, Some(c)) => {
                // The clustered policy maintains cluster stats even when
                // arrivals are initialized another way.
                Some(ClusterStats::new(c, arms, 0.05, horizon))
            }
            (_, PolicyKind::ClusteredUcb { .. }, None) => {
                return Err(Error::Misuse("clustered policy requires a clustered model"))
            }
            _ => None,
        };
        let ridge = match (&transfer, &model.kind) {
            (TransferMode::Linear(cfg), ModelKind::Linear { theta, .. }) => {
                let dim = theta.first().map(Vec::len).unwrap_or(0);
                if dim == 0 {
                    return Err(Error::Misuse("linear model has empty parameters"));
                }
                Some(RidgeState::new(arms, dim, cfg.lambda))
            }
            (TransferMode::Linear(_), _) => {
                return Err(Error::Misuse("linear transfer requires a linear model"))
            }
            _ => None,
        };
        let commit = match &policy {
            PolicyKind::CommitAfterBurnin { tau } => {
                if let CommitTau::Fixed { tau } = tau {
                    if *tau > horizon {
                        return Err(Error::Misuse("commit round must not exceed the horizon"));
                    }
                }
                Some(CommitState {
                    rule: *tau,
                    committed: None,
                    info: None,
                    cum_population: 0.0,
                })
            }
            _ => None,
        };

        let mut sim = Self {
            arms,
            horizon,
            m0,
            pop,
            model,
            transfer,
            policy,
            options,
            reward_rng,
            policy_rng,
            stats: Vec::new(),
            entry_certs: Vec::new(),
            cluster_slot: Vec::new(),
            cluster_active: vec![0; cluster_count.unwrap_or(0)],
            cluster_stats,
            ridge,
            commit,
            pooled_sums: vec![0.0; arms],
            pooled_counts: vec![0; arms],
            prev_gv: None,
            prev_opt: None,
            records: Vec::new(),
            ledger: RegretLedger::new(),
            arrival_log: Vec::new(),
            cert_violations: 0,
            coverage_violations: 0,
            coverage_total: 0,
            cluster_cov_violations: 0,
            cluster_cov_total: 0,
            radius_violations: 0,
            bstat_selected_sum: 0.0,
            m_trajectory: Vec::new(),
            sample_count_trajectory: Vec::new(),
        };

        // Initial agents: zero counts, zero means, unit radii.
        for (_, slot) in sim.pop.active_slots() {
            debug_assert_eq!(slot, sim.stats.len());
            sim.stats.push(LocalStats::initial(arms));
            sim.entry_certs.push(1.0);
        }
        for slot in 0..sim.pop.created() {
            let c = sim.pop.profile_by_slot(slot).cluster;
            sim.cluster_slot.push(c.map(|c| c as u32).unwrap_or(NO_CLUSTER));
            if let Some(c) = c {
                if c < sim.cluster_active.len() {
                    sim.cluster_active[c] += 1;
                }
            }
        }
        if sim.m0 > 0 {
            let gv = sim.ground_truth(0)?;
            sim.prev_opt = Some(gv.optimal_arm);
            sim.prev_gv = Some(gv);
        }
        Ok(sim)
    }

    fn ground_truth(&self, round: u64) -> Result<GlobalValues> {
        let mut v = vec![0.0; self.arms];
        for (_, slot) in self.pop.active_slots() {
            let means = &self.pop.profile_by_slot(slot).mean_vector;
            for (slot_v, mu) in v.iter_mut().zip(means) {
                *slot_v += mu;
            }
        }
        global_values_from_sums(round, v, self.pop.size())
    }

    fn transfer_arrival(&mut self, slot: usize, round: u64) -> Result<TransferOutcome> {
        let profile = self.pop.profile_by_slot(slot);
        match &self.transfer {
            TransferMode::ZeroKnowledge => zero_knowledge_init(self.arms),
            TransferMode::Pretrained => {
                pretrained_init(&profile.entry_estimates, profile.certificate)
            }
            TransferMode::Cluster { .. } => {
                let stats = self
                    .cluster_stats
                    .as_ref()
                    .expect("cluster transfer implies cluster stats");
                cluster_inherit(profile, stats, self.model.noise.sub_gaussian_sigma())
            }
            TransferMode::Linear(cfg) => {
                let continuing = self.pop.size() as usize
                    - self
                        .pop
                        .active_slots()
                        .filter(|(_, s)| self.pop.profile_by_slot(*s).arrival_time == round)
                        .count();
                if continuing == 0 {
                    return zero_knowledge_init(self.arms);
                }
                let (dim, s_bound) = match &self.model.kind {
                    ModelKind::Linear { theta, s_bound } => {
                        (theta.first().map(Vec::len).unwrap_or(0), *s_bound)
                    }
                    _ => unreachable!("checked at construction"),
                };
                let params = LinearCertParams {
                    sigma: self.model.noise.sub_gaussian_sigma(),
                    s_bound,
                    dim,
                    arms: self.arms,
                    horizon: self.horizon,
                    delta: cfg.delta,
                    lambda: cfg.lambda,
                    kappa: cfg.kappa,
                    c_gamma: cfg.c_gamma,
                    gamma: cfg.gamma,
                };
                let certificate = linear_neighbor_certificate(&params, round);
                // Complete graph: every continuing agent holds the same
                // pooled ridge estimate, so the uniform average over
                // neighbors collapses to a single synthetic neighbor.
                let theta = self
                    .ridge
                    .as_mut()
                    .expect("linear transfer implies ridge state")
                    .theta_all()?
                    .clone();
                let profile = self.pop.profile_by_slot(slot);
                linear_param_transfer(
                    profile,
                    &[NeighborParams { theta, certificate }],
                    &[1.0],
                )
            }
        }
    }

    /// Executes one round; returns the emitted record.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        let delta = self.pop.step_delta()?;
        let t = delta.round;

        for id in &delta.departures {
            let slot = self.pop.slot_of(*id).expect("departed agent was admitted");
            let c = self.cluster_slot[slot];
            if c != NO_CLUSTER {
                self.cluster_active[c as usize] -= 1;
            }
        }

        let mut arrival_bonus = 0.0;
        let mut arrival_error_sum = 0.0;
        for id in &delta.arrivals {
            let slot = self.pop.slot_of(*id).expect("arrival was admitted");
            debug_assert_eq!(slot, self.stats.len());
            let outcome = self.transfer_arrival(slot, t)?;
            let profile = self.pop.profile_by_slot(slot);
            let (true_error, _) = pretraining_error(&outcome.estimates, &profile.mean_vector)?;
            if !certificate_valid(&outcome, &profile.mean_vector)? {
                self.cert_violations += 1;
            }
            arrival_bonus += outcome.certificate;
            arrival_error_sum += true_error;
            self.arrival_log.push(ArrivalRecord {
                round: t,
                agent: *id,
                mode: outcome.mode_used,
                certificate: outcome.certificate,
                true_error,
            });
            self.stats.push(LocalStats::from_transfer(&outcome));
            self.entry_certs.push(outcome.certificate);
            let c = profile.cluster.map(|c| c as u32).unwrap_or(NO_CLUSTER);
            self.cluster_slot.push(c);
            if c != NO_CLUSTER {
                self.cluster_active[c as usize] += 1;
            }
        }

        let m = self.pop.size();
        self.m_trajectory.push(m);

        if m == 0 {
            self.prev_gv = None;
            self.sample_count_trajectory
                .push(self.pooled_counts.iter().map(|&c| c as f64).collect());
            self.records.push(RoundRecord {
                round: t,
                population: 0,
                arrivals: delta.arrivals.len() as u64,
                body: None,
            });
            return Ok(self.records.last().expect("just pushed"));
        }

        let gv = self.ground_truth(t)?;

        if self.options.lemma_checks && delta.departures.is_empty() {
            if let Some(prev) = &self.prev_gv {
                check_arrival_perturbation(prev, &gv, delta.arrivals.len() as u64, m)?;
                check_one_step_stability(prev, &gv, delta.arrivals.len() as u64, m)?;
            }
        }

        // Decision.
        let (chosen, vhat, bstat) = self.select(t, &gv)?;

        // Common pull, reward sampling, and local updates, in id order.
        let (c1, beta) = match &self.policy {
            PolicyKind::CertifiedGlobalUcb { c1, beta, .. } => (*c1, *beta),
            PolicyKind::ClusteredUcb { c1, beta, .. } => (*c1, *beta),
            _ => (2.0, 0.5),
        };
        let c1_log_t = (t >= 2).then(|| c1 * (t as f64).ln());
        let mut rewards_buf: Option<Vec<(AgentId, f64)>> =
            self.options.record_rewards.then(Vec::new);
        let noise = self.model.noise;
        for (id, slot) in self.pop.active_slots() {
            let mu = self.pop.profile_by_slot(slot).mean_vector[chosen];
            let r = sample_noise(noise, mu, &mut self.reward_rng);
            let stats = &mut self.stats[slot];
            let rho_before = stats.radii[chosen];
            crate::policy::update_local_fast(stats, chosen, r, c1_log_t, beta);
            if self.options.corrupt_radius_update {
                if let Some(cl) = c1_log_t {
                    stats.radii[chosen] = 1.5 * (cl / stats.counts[chosen].max(1) as f64).sqrt();
                }
            }
            if self.options.check_radius_monotone && stats.radii[chosen] > rho_before + 1e-15 {
                self.radius_violations += 1;
            }
            let c = self.cluster_slot[slot];
            if c != NO_CLUSTER {
                if let Some(cs) = self.cluster_stats.as_mut() {
                    cs.record(c as usize, chosen, r);
                }
            }
            if let Some(ridge) = self.ridge.as_mut() {
                let x = self
                    .pop
                    .profile_by_slot(slot)
                    .features
                    .as_ref()
                    .ok_or(Error::ModelMismatch {
                        agent: id.0,
                        missing: "features",
                    })?;
                ridge.observe(chosen, x, r);
            }
            self.pooled_sums[chosen] += r;
            self.pooled_counts[chosen] += 1;
            if let Some(buf) = rewards_buf.as_mut() {
                buf.push((id, r));
            }
        }

        if self.options.check_coverage {
            for (_, slot) in self.pop.active_slots() {
                let profile = self.pop.profile_by_slot(slot);
                let stats = &self.stats[slot];
                for arm in 0..self.arms {
                    if stats.counts[arm] >= 1 {
                        self.coverage_total += 1;
                        if (stats.means[arm] - profile.mean_vector[arm]).abs() > stats.radii[arm] {
                            self.coverage_violations += 1;
                        }
                    }
                }
            }
        }
        if self.options.check_cluster_coverage {
            if let (Some(cs), ModelKind::Clustered { theta }) =
                (self.cluster_stats.as_ref(), &self.model.kind)
            {
                let sigma = self.model.noise.sub_gaussian_sigma();
                for c in 0..cs.clusters() {
                    for arm in 0..self.arms {
                        if let Some(mean) = cs.mean(c, arm) {
                            self.cluster_cov_total += 1;
                            let radius = cluster_radius(
                                sigma,
                                cs.delta,
                                cs.arms(),
                                cs.clusters(),
                                cs.horizon,
                                cs.count(c, arm),
                            );
                            if (mean - theta[c][arm]).abs() > radius {
                                self.cluster_cov_violations += 1;
                            }
                        }
                    }
                }
            }
        }

        self.sample_count_trajectory
            .push(self.pooled_counts.iter().map(|&c| c as f64).collect());

        // Commit trigger, evaluated on end-of-round state.
        let mut commit_due: Option<u64> = None;
        if let Some(commit) = self.commit.as_mut() {
            commit.cum_population += m as f64;
            if commit.committed.is_none() {
                let due = match commit.rule {
                    CommitTau::Fixed { tau } => t == tau,
                    CommitTau::RoundRobinId { delta, conf } => {
                        let n_id = crate::metrics::n_id(delta, conf, self.arms)?;
                        commit.cum_population / self.arms as f64 >= n_id + 1.0
                    }
                };
                if due {
                    commit_due = Some(t);
                }
            }
        }
        if let Some(tau) = commit_due {
            self.commit_now(tau, &gv)?;
        }

        let s = match self.prev_opt {
            Some(p) => stability_indicator(p, gv.optimal_arm),
            None => 1,
        };
        self.prev_opt = Some(gv.optimal_arm);

        self.ledger
            .accumulate(&gv, chosen, m, s, arrival_bonus, arrival_error_sum);
        self.records.push(RoundRecord {
            round: t,
            population: m,
            arrivals: delta.arrivals.len() as u64,
            body: Some(RoundBody {
                chosen,
                optimal: gv.optimal_arm,
                vhat,
                bstat,
                arrival_bonus,
                stability: s,
                gap: gv.gap,
                rewards: rewards_buf,
            }),
        });
        self.prev_gv = Some(gv);
        Ok(self.records.last().expect("just pushed"))
    }

    fn select(&mut self, t: u64, gv: &GlobalValues) -> Result<(usize, Vec<f64>, Vec<f64>)> {
        let zeros = || vec![0.0; self.arms];
        match &self.policy {
            PolicyKind::CertifiedGlobalUcb { eps_comm, .. } => {
                let eps = vec![eps_comm.value_at(t); self.arms];
                let index: GlobalIndex = {
                    let stats = &self.stats;
                    let pop = &self.pop;
                    let entry_certs = &self.entry_certs;
                    aggregate_global(
                        self.arms,
                        pop.active_slots().map(|(_, slot)| {
                            let is_arrival = pop.profile_by_slot(slot).arrival_time == t;
                            AgentAggregate {
                                stats: &stats[slot],
                                arrival_certificate: is_arrival.then(|| entry_certs[slot]),
                            }
                        }),
                        &eps,
                    )?
                };
                let chosen = select_arm(&index);
                self.bstat_selected_sum += index.stat_bonus[chosen];
                Ok((chosen, index.estimate, index.stat_bonus))
            }
            PolicyKind::ClusteredUcb { c1, beta, burn_in } => {
                let cs = self
                    .cluster_stats
                    .as_ref()
                    .expect("clustered policy implies cluster stats");
                let mut vtilde = vec![0.0; self.arms];
                let mut counts = Vec::with_capacity(cs.clusters());
                for c in 0..cs.clusters() {
                    let mut row = Vec::with_capacity(self.arms);
                    for arm in 0..self.arms {
                        row.push(cs.count(c, arm));
                        if self.cluster_active[c] > 0 {
                            vtilde[arm] +=
                                self.cluster_active[c] as f64 * cs.mean(c, arm).unwrap_or(0.0);
                        }
                    }
                    counts.push(row);
                }
                if t <= *burn_in || t < 2 {
                    let chosen = burnin_arm(t, self.arms)?;
                    return Ok((chosen, vtilde, zeros()));
                }
                let bonus = clustered_bonus(&self.cluster_active, &counts, t, *c1, *beta)?;
                let scores: Vec<f64> = vtilde.iter().zip(&bonus).map(|(v, f)| v + f).collect();
                let chosen = crate::util::argmax_lowest(&scores);
                Ok((chosen, vtilde, bonus))
            }
            PolicyKind::Oracle => Ok((gv.optimal_arm, zeros(), zeros())),
            PolicyKind::UniformRandom => {
                let chosen = self.policy_rng.random_range(0..self.arms);
                Ok((chosen, zeros(), zeros()))
            }
            PolicyKind::RoundRobin => Ok((burnin_arm(t, self.arms)?, zeros(), zeros())),
            PolicyKind::CommitAfterBurnin { .. } => {
                let commit = self.commit.as_ref().expect("commit policy implies state");
                let chosen = match commit.committed {
                    Some(arm) => arm,
                    None => burnin_arm(t, self.arms)?,
                };
                Ok((chosen, zeros(), zeros()))
            }
        }
    }

    /// Builds the burn-in estimator of the normalized global values and
    /// commits to its argmax.
    fn commit_now(&mut self, tau: u64, gv: &GlobalValues) -> Result<()> {
        let m = self.pop.size();
        let (estimates, n_min) = match (&self.cluster_stats, &self.model.kind) {
            (Some(cs), ModelKind::Clustered { .. }) => {
                // Cluster-weighted estimator of Vbar for the represented
                // clusters.
                let mut est = vec![0.0; self.arms];
                let mut n_min = f64::INFINITY;
                for c in 0..cs.clusters() {
                    if self.cluster_active[c] == 0 {
                        continue;
                    }
                    let w = self.cluster_active[c] as f64 / m as f64;
                    for arm in 0..self.arms {
                        match cs.mean(c, arm) {
                            Some(mean) => {
                                est[arm] += w * mean;
                                n_min = n_min.min(cs.count(c, arm) as f64);
                            }
                            None => {
                                return Err(Error::UndefinedEstimate { arm, tau });
                            }
                        }
                    }
                }
                (est, n_min)
            }
            _ => {
                let mut est = vec![0.0; self.arms];
                let mut n_min = f64::INFINITY;
                for arm in 0..self.arms {
                    if self.pooled_counts[arm] == 0 {
                        return Err(Error::UndefinedEstimate { arm, tau });
                    }
                    est[arm] = self.pooled_sums[arm] / self.pooled_counts[arm] as f64;
                    n_min = n_min.min(self.pooled_counts[arm] as f64);
                }
                (est, n_min)
            }
        };
        let committed_arm = crate::util::argmax_lowest(&estimates);
        let commit = self.commit.as_mut().expect("commit policy implies state");
        commit.committed = Some(committed_arm);
        commit.info = Some(CommitInfo {
            tau,
            estimates,
            committed_arm,
            true_vbar: gv.normalized.clone(),
            m_tau: m,
            n_min,
        });
        Ok(())
    }

    /// Runs all `horizon` rounds and returns the collected output.
    pub fn run(mut self) -> Result<RunOutput> {
        for _ in 0..self.horizon {
            self.step()?;
        }
        Ok(RunOutput {
            arms: self.arms,
            horizon: self.horizon,
            m0: self.m0,
            records: self.records,
            ledger: self.ledger,
            arrivals: self.arrival_log,
            cert_violations: self.cert_violations,
            coverage_violations: self.coverage_violations,
            coverage_total: self.coverage_total,
            cluster_coverage_violations: self.cluster_cov_violations,
            cluster_coverage_total: self.cluster_cov_total,
            radius_monotone_violations: self.radius_violations,
            bstat_selected_sum: self.bstat_selected_sum,
            commit: self.commit.and_then(|c| c.info),
            m_trajectory: self.m_trajectory,
            sample_count_trajectory: self.sample_count_trajectory,
            final_cluster_stats: self.cluster_stats,
        })
    }
}
