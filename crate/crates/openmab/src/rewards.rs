//! Heterogeneous reward models and evaluator-side global values.
//!
//! Means are always in [0, 1]; Gaussian noise may leave that range, the
//! means may not. Everything here is pure over immutable inputs.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{AgentId, AgentProfile};
use crate::util::argmax_lowest;

/// Reward noise around the per-agent mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    Bernoulli,
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        if let NoiseKind::Gaussian { sigma } = *self {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: "gaussian noise scale must be positive and finite",
                    value: sigma,
                });
            }
        }
        Ok(())
    }

    /// Sub-Gaussian scale used by confidence-radius constructions.
    pub fn sub_gaussian_sigma(&self) -> f64 {
        match *self {
            NoiseKind::Gaussian { sigma } => sigma,
            NoiseKind::Bernoulli => 0.5,
        }
    }
}

/// Built-in nonlinear link functions of the inner product `x . theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// `f(x, theta) = 1 / (1 + exp(-x . theta))`; Lipschitz in theta with
    /// constant `||x|| / 4`.
    Logistic,
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinkKind {
    pub fn eval(&self, x: &[f64], theta: &[f64]) -> f64 {
        match self {
            LinkKind::Logistic => logistic(dot(x, theta)),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How per-agent means are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Means are read off each agent's profile.
    Tabular,
    /// `mu_m^i = x_m . theta[i]`, `||theta[i]|| <= s_bound`.
    Linear { theta: Vec<Vec<f64>>, s_bound: f64 },
    /// `mu_m^i = link(x_m, theta[i])` with declared per-arm Lipschitz
    /// constants (in theta).
    Nonlinear {
        link: LinkKind,
        theta: Vec<Vec<f64>>,
        lipschitz: Vec<f64>,
    },
    /// `mu_m^i = theta[c(m)][i]`.
    Clustered { theta: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub arms: usize,
    pub kind: ModelKind,
    pub noise: NoiseKind,
}

impl RewardModel {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        match &self.kind {
            ModelKind::Tabular => {}
            ModelKind::Linear { theta, s_bound } => {
                if theta.len() != self.arms {
                    return Err(Error::Misuse("linear model needs one theta per arm"));
                }
                for (arm, th) in theta.iter().enumerate() {
                    let norm = th.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > *s_bound + 1e-12 {
                        return Err(Error::InvalidModel {
                            agent: u64::MAX,
                            arm,
                            value: norm,
                        });
                    }
                }
            }
            ModelKind::Nonlinear { theta, lipschitz, .. } => {
                if theta.len() != self.arms || lipschitz.len() != self.arms {
                    return Err(Error::Misuse("nonlinear model needs theta and lipschitz per arm"));
                }
                if lipschitz.iter().any(|l| *l < 0.0) {
                    return Err(Error::Misuse("lipschitz constants must be nonnegative"));
                }
            }
            ModelKind::Clustered { theta } => {
                for (c, row) in theta.iter().enumerate() {
                    if row.len() != self.arms {
                        return Err(Error::Misuse("cluster theta rows must have one entry per arm"));
                    }
                    for (arm, &v) in row.iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidModel {
                                agent: c as u64,
                                arm,
                                value: v,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn clusters(&self) -> Option<usize> {
        match &self.kind {
            ModelKind::Clustered { theta } => Some(theta.len()),
            _ => None,
        }
    }
}

/// True mean reward of `agent` on `arm` under the model. Pure.
pub fn mean_of(model: &RewardModel, agent: &AgentProfile, arm: usize) -> Result<f64> {
    if arm >= model.arms {
        return Err(Error::Misuse("arm index out of range"));
    }
    let mu = match &model.kind {
        ModelKind::Tabular => {
            *agent
                .mean_vector
                .get(arm)
                .ok_or(Error::ModelMismatch {
                    agent: agent.id.0,
                    missing: "mean_vector entry",
                })?
        }
        ModelKind::Linear { theta, .. } => {
            let x = agent.features.as_ref().ok_or(Error::ModelMismatch {
                agent: agent.id.0,
                missing: "features",
            })?;
            dot(x, &theta[arm])
        }
        ModelKind::Nonlinear { link, theta, .. } => {
            let x = agent.features.as_ref().ok_or(Error::ModelMismatch {
                agent: agent.id.0,
                missing: "features",
            })?;
            link.eval(x, &theta[arm])
        }
        ModelKind::Clustered { theta } => {
            let c = agent.cluster.ok_or(Error::ModelMismatch {
                agent: agent.id.0,
                missing: "cluster label",
            })?;
            *theta
                .get(c)
                .and_then(|row| row.get(arm))
                .ok_or(Error::ModelMismatch {
                    agent: agent.id.0,
                    missing: "cluster row",
                })?
        }
    };
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidModel {
            agent: agent.id.0,
            arm,
            value: mu,
        });
    }
    Ok(mu)
}

/// One stochastic reward draw; consumes exactly one event from `rng`.
pub fn sample_reward(
    model: &RewardModel,
    agent: &AgentProfile,
    arm: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let mu = mean_of(model, agent, arm)?;
    Ok(sample_noise(model.noise, mu, rng))
}

/// Noise applied around a known mean (hot-path variant of [`sample_reward`]).
pub(crate) fn sample_noise(noise: NoiseKind, mu: f64, rng: &mut ChaCha12Rng) -> f64 {
    match noise {
        NoiseKind::Gaussian { sigma } => {
            let n = Normal::new(0.0, sigma).expect("validated sigma");
            mu + n.sample(rng)
        }
        NoiseKind::Bernoulli => {
            if rng.random::<f64>() < mu {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Evaluator-side global values at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalValues {
    pub round: u64,
    /// `V_t(i) = sum over active agents of mu_m^i`.
    pub unnormalized: Vec<f64>,
    /// `V_t(i) / M_t`.
    pub normalized: Vec<f64>,
    /// Maximizer, ties to the lowest arm index.
    pub optimal_arm: usize,
    /// `Vbar(i*) - max_{i != i*} Vbar(i)`; infinite when K = 1.
    pub gap: f64,
}

impl GlobalValues {
    /// Whether the maximizer is unique (gap strictly positive).
    pub fn unique_maximizer(&self) -> bool {
        self.gap > 0.0
    }
}

/// Computes V, Vbar, the optimal arm, and the gap over the active agents.
pub fn global_values<'a>(
    model: &RewardModel,
    round: u64,
    agents: impl IntoIterator<Item = &'a AgentProfile>,
) -> Result<GlobalValues> {
    let mut v = vec![0.0; model.arms];
    let mut m = 0u64;
    for agent in agents {
        for (arm, slot) in v.iter_mut().enumerate() {
            *slot += mean_of(model, agent, arm)?;
        }
        m += 1;
    }
    if m == 0 {
        return Err(Error::EmptyPopulation { round });
    }
    global_values_from_sums(round, v, m)
}

/// Builds [`GlobalValues`] from precomputed arm sums (used by the engine,
/// which maintains V incrementally).
pub(crate) fn global_values_from_sums(round: u64, v: Vec<f64>, m: u64) -> Result<GlobalValues> {
    if m == 0 {
        return Err(Error::EmptyPopulation { round });
    }
    let normalized: Vec<f64> = v.iter().map(|x| x / m as f64).collect();
    let optimal_arm = argmax_lowest(&normalized);
    debug_assert_eq!(optimal_arm, argmax_lowest(&v), "argmax must agree for V and Vbar");
    let gap = if normalized.len() == 1 {
        f64::INFINITY
    } else {
        let best = normalized[optimal_arm];
        let second = normalized
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != optimal_arm)
            .map(|(_, &x)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        best - second
    };
    Ok(GlobalValues {
        round,
        unnormalized: v,
        normalized,
        optimal_arm,
        gap,
    })
}

/// Floating-point slack for the exact lemma checks below; real violations
/// are orders of magnitude larger.
const LEMMA_EPS: f64 = 1e-12;

/// With no departures this round, `max_i |Vbar_t(i) - Vbar_{t-1}(i)|` may
/// not exceed `|A_t| / M_t`.
pub fn check_arrival_perturbation(
    prev: &GlobalValues,
    cur: &GlobalValues,
    arrivals: u64,
    m_t: u64,
) -> Result<()> {
    if m_t == 0 {
        return Ok(());
    }
    let bound = arrivals as f64 / m_t as f64;
    for (i, (a, b)) in cur.normalized.iter().zip(&prev.normalized).enumerate() {
        let shift = (a - b).abs();
        if shift > bound + LEMMA_EPS {
            return Err(Error::AssertionFailed {
                check: "arrival_perturbation",
                round: cur.round,
                details: format!("arm {i}: |dVbar| = {shift} > |A|/M = {bound}"),
            });
        }
    }
    Ok(())
}

/// With no departures, a unique previous maximizer, and
/// `|A_t|/M_t < gap_{t-1}/2`, the optimal arm cannot change.
pub fn check_one_step_stability(
    prev: &GlobalValues,
    cur: &GlobalValues,
    arrivals: u64,
    m_t: u64,
) -> Result<()> {
    if m_t == 0 || !prev.unique_maximizer() {
        return Ok(());
    }
    let ratio = arrivals as f64 / m_t as f64;
    if ratio < prev.gap / 2.0 - LEMMA_EPS && cur.optimal_arm != prev.optimal_arm {
        return Err(Error::AssertionFailed {
            check: "one_step_stability",
            round: cur.round,
            details: format!(
                "|A|/M = {ratio} < gap/2 = {} but optimal arm moved {} -> {}",
                prev.gap / 2.0,
                prev.optimal_arm,
                cur.optimal_arm
            ),
        });
    }
    Ok(())
}

/// Parses a tabular model file: one `agent_id,mu_1,...,mu_K` row per agent.
pub fn parse_tabular(input: &str) -> Result<Vec<(AgentId, Vec<f64>)>> {
    let mut rows: Vec<(AgentId, Vec<f64>)> = Vec::new();
    let mut arms: Option<usize> = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let id = parts
            .next()
            .ok_or_else(|| Error::Parse {
                line: lineno + 1,
                reason: "missing agent id".into(),
            })?
            .parse::<u64>()
            .map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("bad agent id: {e}"),
            })?;
        let mut means = Vec::new();
        for p in parts {
            let mu = p.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("bad mean `{p}`: {e}"),
            })?;
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("mean {mu} outside [0, 1]"),
                });
            }
            means.push(mu);
        }
        if means.is_empty() {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "row has no means".into(),
            });
        }
        match arms {
            None => arms = Some(means.len()),
            Some(k) if k != means.len() => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("row has {} means, expected {k}", means.len()),
                })
            }
            _ => {}
        }
        if rows.iter().any(|(existing, _)| existing.0 == id) {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: format!("duplicate agent id {id}"),
            });
        }
        rows.push((AgentId(id), means));
    }
    Ok(rows)
}

pub fn format_tabular(rows: &[(AgentId, Vec<f64>)]) -> String {
    let mut s = String::new();
    for (id, means) in rows {
        s.push_str(&id.to_string());
        for m in means {
            s.push(',');
            s.push_str(&format!("{m:?}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Channel};

    fn agent(means: Vec<f64>) -> AgentProfile {
        let k = means.len();
        AgentProfile {
            id: AgentId(0),
            arrival_time: 0,
            lifetime: None,
            mean_vector: means,
            features: None,
            cluster: None,
            entry_estimates: vec![0.0; k],
            certificate: 1.0,
        }
    }

    #[test]
    fn mean_of_clustered_is_table_lookup() {
        let model = RewardModel {
            arms: 2,
            kind: ModelKind::Clustered {
                theta: vec![vec![0.7, 0.2]],
            },
            noise: NoiseKind::Bernoulli,
        };
        let mut a = agent(vec![0.7, 0.2]);
        a.cluster = Some(0);
        assert_eq!(mean_of(&model, &a, 0).unwrap(), 0.7);
        a.cluster = None;
        assert!(matches!(
            mean_of(&model, &a, 0),
            Err(Error::ModelMismatch { missing: "cluster label", .. })
        ));
    }

    #[test]
    fn mean_of_linear_is_inner_product() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Linear {
                theta: vec![vec![0.4, 0.9]],
                s_bound: 1.0,
            },
            noise: NoiseKind::Bernoulli,
        };
        let mut a = agent(vec![0.4]);
        a.features = Some(vec![1.0, 0.0]);
        assert_eq!(mean_of(&model, &a, 0).unwrap(), 0.4);
    }

    #[test]
    fn logistic_at_zero_is_half() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Nonlinear {
                link: LinkKind::Logistic,
                theta: vec![vec![1.0, -1.0]],
                lipschitz: vec![0.25],
            },
            noise: NoiseKind::Bernoulli,
        };
        let mut a = agent(vec![0.5]);
        a.features = Some(vec![0.5, 0.5]); // x . theta = 0
        assert_eq!(mean_of(&model, &a, 0).unwrap(), 0.5);
    }

    #[test]
    fn mean_outside_unit_interval_is_invalid_model() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Linear {
                theta: vec![vec![-0.5]],
                s_bound: 1.0,
            },
            noise: NoiseKind::Bernoulli,
        };
        let mut a = agent(vec![0.0]);
        a.features = Some(vec![1.0]);
        assert!(matches!(mean_of(&model, &a, 0), Err(Error::InvalidModel { .. })));
    }

    #[test]
    fn degenerate_gaussian_noise_returns_the_mean() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Gaussian { sigma: 1e-12 },
        };
        let a = agent(vec![0.37]);
        let mut rng = stream(1, 0, Channel::Reward);
        for _ in 0..100 {
            let r = sample_reward(&model, &a, 0, &mut rng).unwrap();
            assert!((r - 0.37).abs() < 1e-9);
        }
    }

    #[test]
    fn bernoulli_empirical_mean_matches() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        let a = agent(vec![0.3]);
        let mut rng = stream(2, 0, Channel::Reward);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_reward(&model, &a, 0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.3).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gaussian_empirical_sd_matches() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Gaussian { sigma: 0.1 },
        };
        let a = agent(vec![0.5]);
        let mut rng = stream(3, 0, Channel::Reward);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_reward(&model, &a, 0, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
    }

    #[test]
    fn global_values_two_agent_example() {
        let model = RewardModel {
            arms: 2,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        let agents = [agent(vec![0.2, 0.8]), agent(vec![0.4, 0.6])];
        let gv = global_values(&model, 1, agents.iter()).unwrap();
        assert_eq!(gv.unnormalized, vec![0.6000000000000001, 1.4]);
        assert!((gv.normalized[0] - 0.3).abs() < 1e-15);
        assert!((gv.normalized[1] - 0.7).abs() < 1e-15);
        assert_eq!(gv.optimal_arm, 1);
        assert!((gv.gap - 0.4).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_agents_average_to_the_common_vector() {
        let model = RewardModel {
            arms: 3,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        let agents: Vec<AgentProfile> = (0..7).map(|_| agent(vec![0.1, 0.9, 0.4])).collect();
        let gv = global_values(&model, 1, agents.iter()).unwrap();
        for (got, want) in gv.normalized.iter().zip([0.1, 0.9, 0.4]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn global_values_match_brute_force_oracle() {
        // Independent double-loop summation oracle on a random instance.
        let mut rng = stream(11, 0, Channel::Latent);
        let model = RewardModel {
            arms: 4,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        let agents: Vec<AgentProfile> = (0..5)
            .map(|_| agent((0..4).map(|_| rng.random::<f64>()).collect()))
            .collect();
        let gv = global_values(&model, 3, agents.iter()).unwrap();

        for arm in 0..4 {
            let mut total = 0.0;
            for a in &agents {
                total += a.mean_vector[arm];
            }
            assert_eq!(gv.unnormalized[arm], total);
            assert_eq!(gv.normalized[arm], total / 5.0);
        }
    }

    #[test]
    fn empty_population_errors() {
        let model = RewardModel {
            arms: 2,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        assert!(matches!(
            global_values(&model, 9, std::iter::empty()),
            Err(Error::EmptyPopulation { round: 9 })
        ));
    }

    #[test]
    fn single_arm_gap_is_infinite() {
        let model = RewardModel {
            arms: 1,
            kind: ModelKind::Tabular,
            noise: NoiseKind::Bernoulli,
        };
        let a = agent(vec![0.4]);
        let gv = global_values(&model, 1, std::iter::once(&a)).unwrap();
        assert!(gv.gap.is_infinite());
    }

    #[test]
    fn tabular_parse_round_trip_and_errors() {
        let rows = parse_tabular("0,0.5,0.25\n1,1,0\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].1, vec![0.5, 0.25]);
        let text = format_tabular(&rows);
        assert_eq!(parse_tabular(&text).unwrap(), rows);

        assert!(parse_tabular("0,1.5\n").is_err());
        assert!(parse_tabular("0,0.5\n1,0.5,0.5\n").is_err());
        assert!(parse_tabular("0,0.5\n0,0.5\n").is_err());
        assert!(parse_tabular("x,0.5\n").is_err());
    }
}
