//! Certified arrival transfer.
//!
//! An arriving agent is initialized from the best certified source
//! available: declared pretrained estimates, parameter transfer from
//! continuing neighbors (linear or nonlinear models), cluster-level
//! inheritance, or zero knowledge. Every outcome carries a certificate
//! `P̄_m`: a declared upper bound on the entry-estimate error across arms.
//! The arriving agent starts with zero pull counts and radius `P̄_m` on
//! every arm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::AgentProfile;
use crate::rewards::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferModeUsed {
    Pretrained,
    Linear,
    Nonlinear,
    Cluster,
    ZeroKnowledge,
}

/// Entry estimates and certified radius for one arriving agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    /// `mu_hat_{m,i}(t-1)`, one per arm.
    pub estimates: Vec<f64>,
    /// `P̄_m >= 0`, an upper bound on `max_i |estimates[i] - mu_m^i|`
    /// whenever the inputs were honest.
    pub certificate: f64,
    pub mode_used: TransferModeUsed,
}

impl TransferOutcome {
    /// Initial pull count on every arm.
    pub fn counts_init(&self) -> u64 {
        0
    }

    /// Initial radius on every arm (the certificate).
    pub fn radius_init(&self) -> f64 {
        self.certificate
    }
}

/// No usable entry information: zero estimates, maximal bounded
/// certificate under normalized rewards.
pub fn zero_knowledge_init(arms: usize) -> Result<TransferOutcome> {
    if arms == 0 {
        return Err(Error::Misuse("arm count must be >= 1"));
    }
    Ok(TransferOutcome {
        estimates: vec![0.0; arms],
        certificate: 1.0,
        mode_used: TransferModeUsed::ZeroKnowledge,
    })
}

/// Passes declared pretrained estimates through unchanged. Whether the
/// declared radius actually covers the true error is the evaluator's
/// business ([`pretraining_error`] / [`certificate_valid`]), not this op's.
pub fn pretrained_init(entry_estimates: &[f64], declared_radius: f64) -> Result<TransferOutcome> {
    if entry_estimates.is_empty() {
        return Err(Error::Misuse("entry estimates must cover at least one arm"));
    }
    if !(declared_radius >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "declared_radius",
            reason: "must be nonnegative",
            value: declared_radius,
        });
    }
    Ok(TransferOutcome {
        estimates: entry_estimates.to_vec(),
        certificate: declared_radius,
        mode_used: TransferModeUsed::Pretrained,
    })
}

/// One continuing neighbor's transferable state: per-arm parameter
/// estimates and a scalar certificate bounding `max_i ||theta_hat_i -
/// theta_i||_2`.
#[derive(Debug, Clone)]
pub struct NeighborParams {
    pub theta: Vec<Vec<f64>>,
    pub certificate: f64,
}

fn validate_weights(weights: &[f64], neighbors: usize) -> Result<()> {
    if weights.len() != neighbors {
        return Err(Error::InvalidWeights {
            reason: "one weight per neighbor required",
            sum: f64::NAN,
        });
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidWeights {
            reason: "weights must be nonnegative",
            sum: f64::NAN,
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights {
            reason: "weights must sum to one",
            sum,
        });
    }
    Ok(())
}

fn weighted_theta(neighbors: &[NeighborParams], weights: &[f64], arms: usize) -> Result<Vec<Vec<f64>>> {
    let dim = neighbors[0]
        .theta
        .first()
        .map(Vec::len)
        .ok_or(Error::Misuse("neighbor carries no per-arm parameters"))?;
    let mut out = vec![vec![0.0; dim]; arms];
    for (n, w) in neighbors.iter().zip(weights) {
        if n.theta.len() != arms {
            return Err(Error::Misuse("neighbor parameter table must cover every arm"));
        }
        for (arm, th) in n.theta.iter().enumerate() {
            if th.len() != dim {
                return Err(Error::Misuse("neighbor parameter dimensions disagree"));
            }
            for (o, v) in out[arm].iter_mut().zip(th) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Weighted-average certificate: with row-stochastic weights and honest
/// neighbor certificates, `||sum_j w_j theta_hat_j - theta|| <= sum_j w_j
/// c_j`, and `||x|| <= 1` carries the bound to the mean estimates.
fn weighted_certificate(neighbors: &[NeighborParams], weights: &[f64]) -> f64 {
    neighbors
        .iter()
        .zip(weights)
        .map(|(n, w)| w * n.certificate)
        .sum()
}

/// Linear parameter transfer: `theta_hat_m = sum_j w_j theta_hat_j`,
/// estimates `x_m . theta_hat_m`, certificate the weighted neighbor
/// certificate (clamped to 1 under normalized rewards). With no neighbors,
/// falls back to zero knowledge.
pub fn linear_param_transfer(
    agent: &AgentProfile,
    neighbors: &[NeighborParams],
    weights: &[f64],
) -> Result<TransferOutcome> {
    let arms = agent.arms();
    if neighbors.is_empty() {
        return zero_knowledge_init(arms);
    }
    validate_weights(weights, neighbors.len())?;
    let x = agent.features.as_ref().ok_or(Error::ModelMismatch {
        agent: agent.id.0,
        missing: "features",
    })?;
    let theta = weighted_theta(neighbors, weights, arms)?;
    let estimates = theta.iter().map(|th| dot(x, th)).collect();
    Ok(TransferOutcome {
        estimates,
        certificate: weighted_certificate(neighbors, weights).min(1.0),
        mode_used: TransferModeUsed::Linear,
    })
}

/// Nonlinear parameter transfer: estimates go through the link
/// `f_i(x, theta)`, the certificate picks up the per-arm Lipschitz
/// constants: `max_i L_i * sum_j w_j c_j`.
pub fn nonlinear_param_transfer(
    agent: &AgentProfile,
    neighbors: &[NeighborParams],
    weights: &[f64],
    link: impl Fn(&[f64], &[f64]) -> f64,
    lipschitz: &[f64],
) -> Result<TransferOutcome> {
    let arms = agent.arms();
    if neighbors.is_empty() {
        return zero_knowledge_init(arms);
    }
    validate_weights(weights, neighbors.len())?;
    if lipschitz.len() != arms {
        return Err(Error::Misuse("one Lipschitz constant per arm required"));
    }
    let x = agent.features.as_ref().ok_or(Error::ModelMismatch {
        agent: agent.id.0,
        missing: "features",
    })?;
    let theta = weighted_theta(neighbors, weights, arms)?;
    let estimates = theta.iter().map(|th| link(x, th)).collect();
    let param_bound = weighted_certificate(neighbors, weights);
    let l_max = lipschitz.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(TransferOutcome {
        estimates,
        certificate: (l_max * param_bound).min(1.0),
        mode_used: TransferModeUsed::Nonlinear,
    })
}

/// Aggregated per-(cluster, arm) observation counts and empirical means,
/// retained across departures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    clusters: usize,
    arms: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
    /// Confidence parameter for the inheritance radius.
    pub delta: f64,
    /// Horizon used by the union bound in the radius.
    pub horizon: u64,
}

impl ClusterStats {
    pub fn new(clusters: usize, arms: usize, delta: f64, horizon: u64) -> Self {
        Self {
            clusters,
            arms,
            counts: vec![0; clusters * arms],
            sums: vec![0.0; clusters * arms],
            delta,
            horizon,
        }
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn record(&mut self, cluster: usize, arm: usize, reward: f64) {
        let idx = cluster * self.arms + arm;
        self.counts[idx] += 1;
        self.sums[idx] += reward;
    }

    pub fn count(&self, cluster: usize, arm: usize) -> u64 {
        self.counts[cluster * self.arms + arm]
    }

    /// Empirical mean; defined only when at least one observation exists.
    pub fn mean(&self, cluster: usize, arm: usize) -> Option<f64> {
        let idx = cluster * self.arms + arm;
        (self.counts[idx] > 0).then(|| self.sums[idx] / self.counts[idx] as f64)
    }

    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

/// Sub-Gaussian inheritance radius for one (cluster, arm) cell:
/// `sigma * sqrt(2 log(2KCT/delta) / max(1, N))`.
pub fn cluster_radius(sigma: f64, delta: f64, arms: usize, clusters: usize, horizon: u64, n: u64) -> f64 {
    let log_arg = 2.0 * arms as f64 * clusters as f64 * horizon as f64 / delta;
    sigma * (2.0 * log_arg.ln() / (n.max(1) as f64)).sqrt()
}

/// Cluster inheritance. Arms the cluster has observed inherit the cluster
/// mean with the sub-Gaussian radius (clamped to 1); unobserved arms fall
/// back to estimate 0 with radius 1. A fully unobserved cluster degrades
/// to zero knowledge. The certificate is the max over arms.
pub fn cluster_inherit(
    agent: &AgentProfile,
    stats: &ClusterStats,
    sigma: f64,
) -> Result<TransferOutcome> {
    let arms = agent.arms();
    let cluster = agent.cluster.ok_or(Error::ModelMismatch {
        agent: agent.id.0,
        missing: "cluster label",
    })?;
    if cluster >= stats.clusters() {
        return Err(Error::ModelMismatch {
            agent: agent.id.0,
            missing: "known cluster label",
        });
    }
    if (0..arms).all(|i| stats.count(cluster, i) == 0) {
        return zero_knowledge_init(arms);
    }
    let mut estimates = vec![0.0; arms];
    let mut certificate = 0.0f64;
    for arm in 0..arms {
        let radius = match stats.mean(cluster, arm) {
            Some(mean) => {
                estimates[arm] = mean;
                cluster_radius(
                    sigma,
                    stats.delta,
                    stats.arms(),
                    stats.clusters(),
                    stats.horizon,
                    stats.count(cluster, arm),
                )
                .min(1.0)
            }
            None => 1.0,
        };
        certificate = certificate.max(radius);
    }
    Ok(TransferOutcome {
        estimates,
        certificate,
        mode_used: TransferModeUsed::Cluster,
    })
}

/// Parameters of the sqrt-law certificate a continuing agent reports for
/// its linear parameter estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCertParams {
    pub sigma: f64,
    pub s_bound: f64,
    pub dim: usize,
    pub arms: usize,
    pub horizon: u64,
    pub delta: f64,
    /// Ridge regularizer.
    pub lambda: f64,
    /// Slope of the minimum-eigenvalue proxy in the effective sample count.
    pub kappa: f64,
    /// Effective-information schedule `N_eff(t) = c_gamma * t^gamma`.
    pub c_gamma: f64,
    pub gamma: u32,
}

/// `beta_T(delta) / sqrt(lambda + kappa * N_eff(t))` with
/// `beta_T(delta) = sigma * sqrt(d * ln(K T / delta)) + sqrt(lambda) * S`.
pub fn linear_neighbor_certificate(p: &LinearCertParams, t: u64) -> f64 {
    let beta = p.sigma * (p.dim as f64 * (p.arms as f64 * p.horizon as f64 / p.delta).ln()).sqrt()
        + p.lambda.sqrt() * p.s_bound;
    let n_eff = p.c_gamma * (t as f64).powi(p.gamma as i32);
    beta / (p.lambda + p.kappa * n_eff).sqrt()
}

/// Evaluator-only: true entry error `P_m = max_i |estimate - mean|` and
/// pre-training degree `D_m = 1 / P_m` (infinite when `P_m = 0`).
pub fn pretraining_error(estimates: &[f64], true_means: &[f64]) -> Result<(f64, f64)> {
    if estimates.len() != true_means.len() {
        return Err(Error::Misuse("estimate and mean vectors must have equal length"));
    }
    let p = estimates
        .iter()
        .zip(true_means)
        .map(|(e, m)| (e - m).abs())
        .fold(0.0f64, f64::max);
    let d = if p == 0.0 { f64::INFINITY } else { 1.0 / p };
    Ok((p, d))
}

/// Round-level entry error: the max over an arrival batch, with the
/// convention `P_t = 0`, `D_t = inf` for an empty batch.
pub fn round_pretraining_error(batch_errors: &[f64]) -> (f64, f64) {
    let p = batch_errors.iter().copied().fold(0.0f64, f64::max);
    let d = if p == 0.0 { f64::INFINITY } else { 1.0 / p };
    (p, d)
}

/// Evaluator-only check of the certified-transfer contract.
pub fn certificate_valid(outcome: &TransferOutcome, true_means: &[f64]) -> Result<bool> {
    let (p, _) = pretraining_error(&outcome.estimates, true_means)?;
    Ok(p <= outcome.certificate + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::AgentId;
    use crate::rewards::logistic;
    use proptest::prelude::*;

    fn linear_agent(features: Vec<f64>, arms: usize) -> AgentProfile {
        AgentProfile {
            id: AgentId(1),
            arrival_time: 1,
            lifetime: None,
            mean_vector: vec![0.5; arms],
            features: Some(features),
            cluster: None,
            entry_estimates: vec![0.0; arms],
            certificate: 1.0,
        }
    }

    #[test]
    fn zero_knowledge_is_zero_vector_with_unit_certificate() {
        let out = zero_knowledge_init(3).unwrap();
        assert_eq!(out.estimates, vec![0.0, 0.0, 0.0]);
        assert_eq!(out.certificate, 1.0);
        assert_eq!(out.mode_used, TransferModeUsed::ZeroKnowledge);
        assert_eq!(out.counts_init(), 0);
        assert_eq!(out.radius_init(), 1.0);
        assert!(zero_knowledge_init(0).is_err());
    }

    #[test]
    fn zero_knowledge_true_error_is_max_mean() {
        let out = zero_knowledge_init(2).unwrap();
        let (p, _) = pretraining_error(&out.estimates, &[0.7, 0.2]).unwrap();
        assert_eq!(p, 0.7);
        assert!(certificate_valid(&out, &[0.7, 0.2]).unwrap());

        // All-zero means: true error 0 even though the certificate is 1.
        let (p, d) = pretraining_error(&out.estimates, &[0.0, 0.0]).unwrap();
        assert_eq!(p, 0.0);
        assert!(d.is_infinite());
    }

    #[test]
    fn pretrained_passes_through_and_evaluator_flags_violations() {
        let exact = pretrained_init(&[0.3, 0.6], 0.0).unwrap();
        let (p, d) = pretraining_error(&exact.estimates, &[0.3, 0.6]).unwrap();
        assert_eq!(p, 0.0);
        assert!(d.is_infinite());
        assert!(certificate_valid(&exact, &[0.3, 0.6]).unwrap());

        let ok = pretrained_init(&[0.5, 0.5], 0.1).unwrap();
        let (p, _) = pretraining_error(&ok.estimates, &[0.6, 0.5]).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        assert!(certificate_valid(&ok, &[0.6, 0.5]).unwrap());

        let violated = pretrained_init(&[0.5, 0.5], 0.05).unwrap();
        assert!(!certificate_valid(&violated, &[0.6, 0.5]).unwrap());

        assert!(pretrained_init(&[0.5], -0.01).is_err());
    }

    #[test]
    fn linear_transfer_exact_neighbor_gives_zero_error() {
        let agent = linear_agent(vec![0.6, 0.8], 2);
        let theta = vec![vec![0.3, 0.2], vec![0.1, 0.4]];
        let neighbors = [NeighborParams {
            theta: theta.clone(),
            certificate: 0.0,
        }];
        let out = linear_param_transfer(&agent, &neighbors, &[1.0]).unwrap();
        assert_eq!(out.certificate, 0.0);
        let truth: Vec<f64> = theta.iter().map(|th| dot(&[0.6, 0.8], th)).collect();
        let (p, _) = pretraining_error(&out.estimates, &truth).unwrap();
        assert!(p < 1e-15);
    }

    #[test]
    fn linear_transfer_symmetric_errors_cancel() {
        let agent = linear_agent(vec![1.0, 0.0], 1);
        let theta = vec![vec![0.4, 0.1]];
        let e = [0.05, -0.03];
        let plus = NeighborParams {
            theta: vec![vec![theta[0][0] + e[0], theta[0][1] + e[1]]],
            certificate: 0.1,
        };
        let minus = NeighborParams {
            theta: vec![vec![theta[0][0] - e[0], theta[0][1] - e[1]]],
            certificate: 0.1,
        };
        let out = linear_param_transfer(&agent, &[plus, minus], &[0.5, 0.5]).unwrap();
        let truth = dot(&[1.0, 0.0], &theta[0]);
        assert!((out.estimates[0] - truth).abs() < 1e-15);
        assert!((out.certificate - 0.1).abs() < 1e-15);
    }

    #[test]
    fn linear_transfer_error_bounded_by_certificate() {
        // Neighbor error vector of norm 0.2 on a unit feature.
        let agent = linear_agent(vec![1.0, 0.0], 1);
        let neighbors = [NeighborParams {
            theta: vec![vec![0.4 + 0.2, 0.9]],
            certificate: 0.2,
        }];
        let out = linear_param_transfer(&agent, &neighbors, &[1.0]).unwrap();
        assert!((out.certificate - 0.2).abs() < 1e-15);
        let (p, _) = pretraining_error(&out.estimates, &[0.4]).unwrap();
        assert!(p <= 0.2 + 1e-15);
    }

    #[test]
    fn linear_transfer_without_neighbors_degrades_to_zero_knowledge() {
        let agent = linear_agent(vec![1.0], 2);
        let out = linear_param_transfer(&agent, &[], &[]).unwrap();
        assert_eq!(out.mode_used, TransferModeUsed::ZeroKnowledge);
        assert_eq!(out.certificate, 1.0);
    }

    #[test]
    fn bad_weights_are_rejected() {
        let agent = linear_agent(vec![1.0], 1);
        let n = NeighborParams {
            theta: vec![vec![0.5]],
            certificate: 0.0,
        };
        let r = linear_param_transfer(&agent, &[n.clone()], &[0.9]);
        assert!(matches!(r, Err(Error::InvalidWeights { .. })));
        let r = linear_param_transfer(&agent, &[n], &[-1.0, 2.0]);
        assert!(matches!(r, Err(Error::InvalidWeights { .. })));
    }

    #[test]
    fn nonlinear_transfer_examples() {
        let agent = linear_agent(vec![1.0], 1);
        let link = |x: &[f64], th: &[f64]| logistic(dot(x, th));

        let exact = [NeighborParams {
            theta: vec![vec![0.3]],
            certificate: 0.0,
        }];
        let out = nonlinear_param_transfer(&agent, &exact, &[1.0], link, &[0.25]).unwrap();
        assert_eq!(out.certificate, 0.0);
        assert!((out.estimates[0] - logistic(0.3)).abs() < 1e-15);

        // Parameter error of norm 0.1 with L = 0.25 certifies 0.025, and the
        // realized mean error respects it.
        let off = [NeighborParams {
            theta: vec![vec![0.3 + 0.1]],
            certificate: 0.1,
        }];
        let out = nonlinear_param_transfer(&agent, &off, &[1.0], link, &[0.25]).unwrap();
        assert!((out.certificate - 0.025).abs() < 1e-15);
        let err = (out.estimates[0] - logistic(0.3)).abs();
        assert!(err <= 0.025 + 1e-15, "err {err}");

        // Degenerate Lipschitz constant certifies zero regardless of error.
        let out = nonlinear_param_transfer(&agent, &off, &[1.0], |_, _| 0.5, &[0.0]).unwrap();
        assert_eq!(out.certificate, 0.0);
    }

    #[test]
    fn nonlinear_lipschitz_bound_holds_over_random_draws() {
        let mut rng = crate::rng::stream(21, 0, crate::rng::Channel::Latent);
        use rand::Rng;
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
            let th: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let dt: Vec<f64> = (0..3).map(|_| (rng.random::<f64>() - 0.5) * 0.4).collect();
            let th2: Vec<f64> = th.iter().zip(&dt).map(|(a, b)| a + b).collect();
            let dn = dt.iter().map(|v| v * v).sum::<f64>().sqrt();
            let lhs = (logistic(dot(&x, &th)) - logistic(dot(&x, &th2))).abs();
            assert!(lhs <= 0.25 * dn + 1e-12, "lhs {lhs} > L*||dtheta|| {}", 0.25 * dn);
        }
    }

    #[test]
    fn cluster_inherit_radius_matches_closed_form() {
        // sigma=0.5, K=2, C=2, T=100, delta=0.1, N=50.
        let mut stats = ClusterStats::new(2, 2, 0.1, 100);
        for arm in 0..2 {
            for _ in 0..50 {
                stats.record(0, arm, 0.6);
            }
        }
        let mut agent = linear_agent(vec![1.0], 2);
        agent.cluster = Some(0);
        let out = cluster_inherit(&agent, &stats, 0.5).unwrap();
        let oracle = 0.5 * (2.0 * (2.0f64 * 2.0 * 2.0 * 100.0 / 0.1).ln() / 50.0).sqrt();
        assert!((out.certificate - oracle).abs() < 1e-15);
        assert!((oracle - 0.2998).abs() < 1e-4, "oracle {oracle}");
        assert_eq!(out.estimates, vec![0.6, 0.6]);
        assert_eq!(out.mode_used, TransferModeUsed::Cluster);
    }

    #[test]
    fn cluster_inherit_huge_count_certifies_near_zero() {
        let mut stats = ClusterStats::new(1, 2, 0.1, 100);
        stats.counts = vec![1_000_000_000_000, 1_000_000_000_000];
        stats.sums = vec![0.3e12, 0.7e12];
        let mut agent = linear_agent(vec![1.0], 2);
        agent.cluster = Some(0);
        let out = cluster_inherit(&agent, &stats, 0.5).unwrap();
        assert!(out.certificate < 1e-5);
        assert!((out.estimates[0] - 0.3).abs() < 1e-9);
        assert!((out.estimates[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn unseen_cluster_degrades_to_zero_knowledge() {
        let stats = ClusterStats::new(2, 2, 0.1, 100);
        let mut agent = linear_agent(vec![1.0], 2);
        agent.cluster = Some(1);
        let out = cluster_inherit(&agent, &stats, 0.5).unwrap();
        assert_eq!(out.mode_used, TransferModeUsed::ZeroKnowledge);
        assert_eq!(out.certificate, 1.0);

        // Partially observed cluster: per-arm fallback, certificate 1.
        let mut stats = ClusterStats::new(2, 2, 0.1, 100);
        stats.record(1, 0, 0.4);
        let out = cluster_inherit(&agent, &stats, 0.5).unwrap();
        assert_eq!(out.mode_used, TransferModeUsed::Cluster);
        assert_eq!(out.certificate, 1.0);
        assert_eq!(out.estimates[1], 0.0);

        agent.cluster = None;
        assert!(cluster_inherit(&agent, &stats, 0.5).is_err());
    }

    #[test]
    fn pretraining_error_matches_brute_force() {
        let mut rng = crate::rng::stream(22, 0, crate::rng::Channel::Latent);
        use rand::Rng;
        let est: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let mu: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let (p, d) = pretraining_error(&est, &mu).unwrap();
        let mut brute = 0.0f64;
        for i in 0..10 {
            let diff = (est[i] - mu[i]).abs();
            if diff > brute {
                brute = diff;
            }
        }
        assert_eq!(p, brute);
        assert_eq!(d, 1.0 / brute);
        assert!(pretraining_error(&est, &mu[..5]).is_err());
    }

    #[test]
    fn empty_batch_round_error_conventions() {
        let (p, d) = round_pretraining_error(&[]);
        assert_eq!(p, 0.0);
        assert!(d.is_infinite());
        let (p, _) = round_pretraining_error(&[0.1, 0.4, 0.2]);
        assert_eq!(p, 0.4);
    }

    #[test]
    fn linear_certificate_decays_with_the_schedule() {
        let p = LinearCertParams {
            sigma: 0.5,
            s_bound: 1.0,
            dim: 2,
            arms: 2,
            horizon: 1000,
            delta: 0.05,
            lambda: 1.0,
            kappa: 1.0,
            c_gamma: 1.0,
            gamma: 2,
        };
        let early = linear_neighbor_certificate(&p, 10);
        let late = linear_neighbor_certificate(&p, 1000);
        assert!(late < early / 50.0, "expected ~1/t decay: {early} -> {late}");
    }

    proptest! {
        /// Honest inputs imply certificate soundness: if every neighbor
        /// certificate truly bounds its parameter error, the transferred
        /// entry error never exceeds the transferred certificate.
        #[test]
        fn certificate_soundness_under_honest_neighbors(
            raw_x in proptest::collection::vec(-1.0f64..1.0, 3),
            theta in proptest::collection::vec(-0.8f64..0.8, 3),
            errs in proptest::collection::vec(proptest::collection::vec(-0.2f64..0.2, 3), 1..4),
            raw_w in proptest::collection::vec(0.01f64..1.0, 1..4),
        ) {
            prop_assume!(errs.len() == raw_w.len());
            let xn = raw_x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let x: Vec<f64> = raw_x.iter().map(|v| v / xn).collect();
            let wsum: f64 = raw_w.iter().sum();
            let w: Vec<f64> = raw_w.iter().map(|v| v / wsum).collect();

            let neighbors: Vec<NeighborParams> = errs
                .iter()
                .map(|e| {
                    let th: Vec<f64> = theta.iter().zip(e).map(|(a, b)| a + b).collect();
                    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                    NeighborParams { theta: vec![th], certificate: norm }
                })
                .collect();

            let mut agent = linear_agent(x.clone(), 1);
            agent.features = Some(x.clone());
            let out = linear_param_transfer(&agent, &neighbors, &w).unwrap();
            let truth = dot(&x, &theta);
            let (p, _) = pretraining_error(&out.estimates, &[truth]).unwrap();
            prop_assert!(p <= out.certificate + 1e-12);

            let link = |x: &[f64], th: &[f64]| logistic(dot(x, th));
            let out = nonlinear_param_transfer(&agent, &neighbors, &w, link, &[0.25]).unwrap();
            let truth = logistic(dot(&x, &theta));
            let (p, _) = pretraining_error(&out.estimates, &[truth]).unwrap();
            prop_assert!(p <= out.certificate + 1e-12);
        }
    }
}
