//! Ground-truth-aware evaluation: regret under both conventions,
//! stability bookkeeping, burn-in times, and closed-form bound
//! calculators. All logarithms are natural; probabilities are clamped to
//! [0, 1] at read time only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::GlobalValues;

// ---------------------------------------------------------------------------
// Regret ledger
// ---------------------------------------------------------------------------

/// Which cumulative regret to read off a ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Per-round aggregate gap `V(i*) - V(a)`.
    RRound,
    /// Agent-summed aggregate gap `M (V(i*) - V(a))`.
    RAgentsum,
    /// Per-round normalized gap `Vbar(i*) - Vbar(a)`.
    RRoundNorm,
    /// Agent-summed normalized gap `M (Vbar(i*) - Vbar(a))`.
    RAgentsumNorm,
}

impl Convention {
    pub const ALL: [Convention; 4] = [
        Convention::RRound,
        Convention::RAgentsum,
        Convention::RRoundNorm,
        Convention::RAgentsumNorm,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Convention::RRound => "r_round",
            Convention::RAgentsum => "r_agentsum",
            Convention::RRoundNorm => "r_round_norm",
            Convention::RAgentsumNorm => "r_agentsum_norm",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Convention::ALL.into_iter().find(|c| c.label() == label)
    }
}

/// Per-round regret bookkeeping. Empty rounds contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub round: u64,
    pub population: u64,
    /// `V(i*) - V(a)`.
    pub aggregate_gap: f64,
    /// `M * aggregate_gap`.
    pub agent_summed_gap: f64,
    /// `Vbar(i*) - Vbar(a)`.
    pub normalized_gap: f64,
    /// `M * normalized_gap` (numerically the aggregate gap).
    pub agent_summed_normalized: f64,
    /// Stability indicator `S_t`.
    pub stability: u8,
    /// Ground-truth gap `Delta_t`.
    pub gap: f64,
    /// Arrival bonus `E^A_t` the policy charged.
    pub arrival_bonus: f64,
    /// Sum of true entry errors over the round's arrival batch.
    pub arrival_error_sum: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub rows: Vec<RegretRow>,
    totals: [f64; 4],
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one round. The convention split happens at read time; all
    /// four gaps are always recorded.
    pub fn accumulate(
        &mut self,
        gv: &GlobalValues,
        chosen: usize,
        population: u64,
        stability: u8,
        arrival_bonus: f64,
        arrival_error_sum: f64,
    ) {
        let aggregate = gv.unnormalized[gv.optimal_arm] - gv.unnormalized[chosen];
        let normalized = gv.normalized[gv.optimal_arm] - gv.normalized[chosen];
        let m = population as f64;
        let row = RegretRow {
            round: gv.round,
            population,
            aggregate_gap: aggregate,
            agent_summed_gap: m * aggregate,
            normalized_gap: normalized,
            agent_summed_normalized: m * normalized,
            stability,
            gap: gv.gap,
            arrival_bonus,
            arrival_error_sum,
        };
        debug_assert!(aggregate >= -1e-9 && normalized >= -1e-9);
        self.totals[0] += row.aggregate_gap;
        self.totals[1] += row.agent_summed_gap;
        self.totals[2] += row.normalized_gap;
        self.totals[3] += row.agent_summed_normalized;
        self.rows.push(row);
    }

    pub fn total(&self, convention: Convention) -> f64 {
        match convention {
            Convention::RRound => self.totals[0],
            Convention::RAgentsum => self.totals[1],
            Convention::RRoundNorm => self.totals[2],
            Convention::RAgentsumNorm => self.totals[3],
        }
    }

    /// Cumulative normalized per-round regret over rounds strictly after
    /// `tau`.
    pub fn normalized_total_after(&self, tau: u64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.round > tau)
            .map(|r| r.normalized_gap)
            .sum()
    }
}

/// `1` iff the optimal arm is unchanged between consecutive rounds.
pub fn stability_indicator(prev_opt: usize, cur_opt: usize) -> u8 {
    u8::from(prev_opt == cur_opt)
}

// ---------------------------------------------------------------------------
// Closed-form calculators
// ---------------------------------------------------------------------------

fn check_gap(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta_gap",
            reason: "gap must lie in (0, 1]",
            value: delta,
        });
    }
    Ok(())
}

fn check_conf(conf: f64) -> Result<()> {
    if !(conf > 0.0 && conf < 1.0) {
        return Err(Error::InvalidParameter {
            name: "conf",
            reason: "confidence parameter must lie in (0, 1)",
            value: conf,
        });
    }
    Ok(())
}

/// Population size needed for stability: `(8 / Delta^2) ln(2KT / delta)`.
pub fn n_stab(delta_gap: f64, conf: f64, arms: usize, horizon: u64) -> Result<f64> {
    check_gap(delta_gap)?;
    check_conf(conf)?;
    if arms == 0 || horizon == 0 {
        return Err(Error::Misuse("arms and horizon must be >= 1"));
    }
    Ok(8.0 / (delta_gap * delta_gap) * (2.0 * arms as f64 * horizon as f64 / conf).ln())
}

/// Effective samples needed for identification: `(8 / Delta^2) ln(2K / delta)`.
pub fn n_id(delta_gap: f64, conf: f64, arms: usize) -> Result<f64> {
    check_gap(delta_gap)?;
    check_conf(conf)?;
    if arms == 0 {
        return Err(Error::Misuse("arms must be >= 1"));
    }
    Ok(8.0 / (delta_gap * delta_gap) * (2.0 * arms as f64 / conf).ln())
}

/// First round whose population reaches the threshold. Demands a
/// nondecreasing trajectory (no departures), which makes the first
/// crossing the infimum.
pub fn tau_stab(population: &[u64], threshold: f64) -> Result<Option<u64>> {
    if population.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Misuse(
            "tau_stab requires a nondecreasing population trajectory",
        ));
    }
    Ok(population
        .iter()
        .position(|&m| m as f64 >= threshold)
        .map(|i| i as u64 + 1))
}

/// First round whose minimum per-arm effective sample count reaches the
/// threshold. Counts must be nondecreasing per arm.
pub fn tau_id(counts: &[Vec<f64>], threshold: f64) -> Result<Option<u64>> {
    for arm in 0..counts.first().map(Vec::len).unwrap_or(0) {
        let mut prev = f64::NEG_INFINITY;
        for row in counts {
            if row[arm] < prev {
                return Err(Error::Misuse("tau_id requires nondecreasing sample counts"));
            }
            prev = row[arm];
        }
    }
    Ok(counts
        .iter()
        .position(|row| row.iter().copied().fold(f64::INFINITY, f64::min) >= threshold)
        .map(|i| i as u64 + 1))
}

/// The two failure terms of the stable-arm good event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGoodEvent {
    /// `2K(T - tau + 1) exp(-M_tau (Delta0 - Delta)^2 / 2)`.
    pub stability_term: f64,
    /// `2K exp(-N_min(tau) Delta^2 / 8)`.
    pub identification_term: f64,
}

impl DeltaGoodEvent {
    /// Failure-probability bound, clamped to [0, 1] at read time.
    pub fn delta(&self) -> f64 {
        (self.stability_term + self.identification_term).clamp(0.0, 1.0)
    }

    /// Raw (unclamped) sum of the two terms.
    pub fn raw(&self) -> f64 {
        self.stability_term + self.identification_term
    }
}

/// Good-event failure bound for a committed burn-in `tau`.
#[allow(clippy::too_many_arguments)]
pub fn delta_good_event(
    m_tau: f64,
    delta0: f64,
    delta_gap: f64,
    arms: usize,
    horizon: u64,
    tau: u64,
    n_min: f64,
) -> Result<DeltaGoodEvent> {
    if !(delta_gap > 0.0 && delta_gap < delta0 && delta0 <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta_gap",
            reason: "need 0 < Delta < Delta0 <= 1",
            value: delta_gap,
        });
    }
    if tau > horizon {
        return Err(Error::Misuse("tau must not exceed the horizon"));
    }
    if m_tau < 0.0 || n_min < 0.0 {
        return Err(Error::Misuse("population and sample counts must be nonnegative"));
    }
    let k = arms as f64;
    let stability_term = 2.0
        * k
        * (horizon - tau + 1) as f64
        * (-m_tau * (delta0 - delta_gap).powi(2) / 2.0).exp();
    let identification_term = 2.0 * k * (-n_min * delta_gap * delta_gap / 8.0).exp();
    Ok(DeltaGoodEvent {
        stability_term,
        identification_term,
    })
}

/// Model-specific identification failure terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelIdTerm {
    /// `2K exp(-c_lin N Delta^2 / (16 d))`.
    Linear {
        arms: usize,
        dim: usize,
        c_lin: f64,
        n_min: f64,
        delta_gap: f64,
    },
    /// `2K exp(-c_nl N Delta^2 / (16 L_max^2 p))`.
    Nonlinear {
        arms: usize,
        param_dim: usize,
        c_nl: f64,
        l_max: f64,
        n_min: f64,
        delta_gap: f64,
    },
    /// `2KC exp(-N Delta^2 / 8)`.
    Clustered {
        arms: usize,
        clusters: usize,
        n_min: f64,
        delta_gap: f64,
    },
    /// Discovery failure for initially unseen clusters:
    /// `C exp(-lambda_min tau)`.
    ClusterDiscovery {
        clusters: usize,
        lambda_min: f64,
        tau: f64,
    },
    /// `2K exp(-N Delta^2 / 8)`.
    ZeroKnowledge {
        arms: usize,
        n_min: f64,
        delta_gap: f64,
    },
}

pub fn model_identification_term(term: ModelIdTerm) -> Result<f64> {
    let positive = |name: &'static str, v: f64| -> Result<()> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be positive and finite",
                value: v,
            });
        }
        Ok(())
    };
    match term {
        ModelIdTerm::Linear {
            arms,
            dim,
            c_lin,
            n_min,
            delta_gap,
        } => {
            check_gap(delta_gap)?;
            positive("c_lin", c_lin)?;
            Ok(2.0 * arms as f64
                * (-c_lin * n_min * delta_gap * delta_gap / (16.0 * dim as f64)).exp())
        }
        ModelIdTerm::Nonlinear {
            arms,
            param_dim,
            c_nl,
            l_max,
            n_min,
            delta_gap,
        } => {
            check_gap(delta_gap)?;
            positive("c_nl", c_nl)?;
            positive("l_max", l_max)?;
            Ok(2.0 * arms as f64
                * (-c_nl * n_min * delta_gap * delta_gap
                    / (16.0 * l_max * l_max * param_dim as f64))
                    .exp())
        }
        ModelIdTerm::Clustered {
            arms,
            clusters,
            n_min,
            delta_gap,
        } => {
            check_gap(delta_gap)?;
            Ok(2.0 * arms as f64 * clusters as f64
                * (-n_min * delta_gap * delta_gap / 8.0).exp())
        }
        ModelIdTerm::ClusterDiscovery {
            clusters,
            lambda_min,
            tau,
        } => {
            positive("lambda_min", lambda_min)?;
            Ok(clusters as f64 * (-lambda_min * tau).exp())
        }
        ModelIdTerm::ZeroKnowledge {
            arms,
            n_min,
            delta_gap,
        } => {
            check_gap(delta_gap)?;
            Ok(2.0 * arms as f64 * (-n_min * delta_gap * delta_gap / 8.0).exp())
        }
    }
}

/// Probability that a block is good in the zero-knowledge hard instance:
/// exactly one informative arrival at the block head, none afterwards, and
/// a lifetime of exactly the block length.
pub fn p_good(lambda_informative: f64, block_len: u64, q: f64) -> Result<f64> {
    if !(lambda_informative > 0.0) || !lambda_informative.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda_informative",
            reason: "must be positive and finite",
            value: lambda_informative,
        });
    }
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
    let head = lambda_informative * (-lambda_informative).exp();
    let quiet = (-(lambda_informative * (block_len - 1) as f64)).exp();
    let lifetime = (1.0 - q).powi(block_len as i32 - 1) * q;
    Ok(head * quiet * lifetime)
}

/// Bernoulli KL divergence `kl(p, q) = p ln(p/q) + (1-p) ln((1-p)/(1-q))`,
/// with the `0 ln 0 = 0` convention.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "must lie in [0, 1]",
            value: p,
        });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must lie in (0, 1)",
            value: q,
        });
    }
    let mut kl = 0.0;
    if p > 0.0 {
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    Ok(kl)
}

/// Diagnostic comparison of realized regret against the entry-error
/// budget `M_0 ln T + sum of arrival P_m`. Reports ratios, flags nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub regret_aggregate: f64,
    pub budget: f64,
    /// `regret / budget`; the implied constant of the bound.
    pub ratio: f64,
    /// Realized `sum_t Bstat(a_t)`.
    pub bstat_sum: f64,
    /// `bstat_sum / (M_0 ln T)`.
    pub implied_c0: f64,
}

pub fn theorem1_budget_check(
    ledger: &RegretLedger,
    m0: u64,
    horizon: u64,
    arrival_error_total: f64,
    bstat_sum: f64,
) -> BudgetReport {
    let regret = ledger.total(Convention::RRound);
    let log_term = m0 as f64 * (horizon.max(1) as f64).ln();
    let budget = log_term + arrival_error_total;
    BudgetReport {
        regret_aggregate: regret,
        budget,
        ratio: if budget > 0.0 { regret / budget } else { f64::NAN },
        bstat_sum,
        implied_c0: if log_term > 0.0 {
            bstat_sum / log_term
        } else {
            f64::NAN
        },
    }
}

/// Assembled bound report (CLI `bounds` surface and run summaries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundReport {
    pub n_stab: Option<f64>,
    pub n_id: Option<f64>,
    pub tau_stab: Option<u64>,
    pub tau_id: Option<u64>,
    /// `max(tau_stab, tau_id)` whenever both exist.
    pub tau: Option<u64>,
    pub delta_good: Option<DeltaGoodEvent>,
    pub model_terms: Vec<(String, f64)>,
    pub good_event: Option<bool>,
}

impl BoundReport {
    pub fn with_taus(mut self, tau_stab: Option<u64>, tau_id: Option<u64>) -> Self {
        self.tau_stab = tau_stab;
        self.tau_id = tau_id;
        self.tau = match (tau_stab, tau_id) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::global_values_from_sums;

    #[test]
    fn accumulate_zero_on_optimal_play() {
        let gv = global_values_from_sums(1, vec![0.6, 1.4], 2).unwrap();
        let mut ledger = RegretLedger::new();
        ledger.accumulate(&gv, gv.optimal_arm, 2, 1, 0.0, 0.0);
        for c in Convention::ALL {
            assert_eq!(ledger.total(c), 0.0);
        }
    }

    #[test]
    fn accumulate_arithmetic_example() {
        // V = (0.6, 1.4), M = 2, chosen arm 1 (0-based 0):
        // aggregate 0.8, normalized 0.4, agent-summed 1.6.
        let gv = global_values_from_sums(1, vec![0.6, 1.4], 2).unwrap();
        let mut ledger = RegretLedger::new();
        ledger.accumulate(&gv, 0, 2, 1, 0.0, 0.0);
        assert!((ledger.total(Convention::RRound) - 0.8).abs() < 1e-12);
        assert!((ledger.total(Convention::RRoundNorm) - 0.4).abs() < 1e-12);
        assert!((ledger.total(Convention::RAgentsum) - 1.6).abs() < 1e-12);
        assert!((ledger.total(Convention::RAgentsumNorm) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn three_round_trace_matches_recomputation_oracle() {
        let rounds = [
            (vec![0.6, 1.4], 2u64, 0usize),
            (vec![0.9, 1.2], 3u64, 1usize),
            (vec![2.0, 1.0], 4u64, 1usize),
        ];
        let mut ledger = RegretLedger::new();
        for (t, (v, m, a)) in rounds.iter().enumerate() {
            let gv = global_values_from_sums(t as u64 + 1, v.clone(), *m).unwrap();
            ledger.accumulate(&gv, *a, *m, 1, 0.0, 0.0);
        }
        // Independent spreadsheet-style recomputation.
        let mut agg = 0.0;
        let mut norm = 0.0;
        for (v, m, a) in &rounds {
            let best = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            agg += best - v[*a];
            norm += (best - v[*a]) / *m as f64;
        }
        let agent_oracle: f64 = rounds
            .iter()
            .map(|(v, m, a)| {
                let best = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                *m as f64 * (best - v[*a])
            })
            .sum();
        assert!((ledger.total(Convention::RRound) - agg).abs() < 1e-12);
        assert!((ledger.total(Convention::RRoundNorm) - norm).abs() < 1e-12);
        assert!((ledger.total(Convention::RAgentsum) - agent_oracle).abs() < 1e-12);
    }

    #[test]
    fn stability_indicator_basics() {
        assert_eq!(stability_indicator(2, 2), 1);
        assert_eq!(stability_indicator(1, 2), 0);
    }

    #[test]
    fn n_stab_examples() {
        // 32 ln 4000.
        let v = n_stab(0.5, 0.1, 2, 100).unwrap();
        let oracle = 32.0 * 4000f64.ln();
        assert!((v - oracle).abs() < 1e-10);
        assert!((oracle - 265.41).abs() < 0.01, "oracle {oracle}");

        // Log argument e gives exactly 8.
        let v = n_stab(1.0, 2.0 / std::f64::consts::E, 1, 1).unwrap();
        assert!((v - 8.0).abs() < 1e-12);

        // Doubling T adds (8 ln 2) / Delta^2.
        let a = n_stab(0.3, 0.05, 3, 500).unwrap();
        let b = n_stab(0.3, 0.05, 3, 1000).unwrap();
        assert!((b - a - 8.0 * 2f64.ln() / 0.09).abs() < 1e-9);

        assert!(n_stab(0.0, 0.1, 2, 10).is_err());
        assert!(n_stab(0.5, 1.5, 2, 10).is_err());
    }

    #[test]
    fn n_id_examples() {
        let v = n_id(0.5, 0.1, 2).unwrap();
        let oracle = 32.0 * 40f64.ln();
        assert!((v - oracle).abs() < 1e-10);
        assert!((oracle - 118.05).abs() < 0.01, "oracle {oracle}");

        let v = n_id(1.0, 2.0 / std::f64::consts::E, 1).unwrap();
        assert!((v - 8.0).abs() < 1e-12);

        // n_id <= n_stab for any horizon >= 1.
        for t in [1u64, 7, 1000] {
            assert!(n_id(0.4, 0.2, 3).unwrap() <= n_stab(0.4, 0.2, 3, t).unwrap());
        }
    }

    #[test]
    fn tau_stab_examples() {
        let m: Vec<u64> = (1..=10).collect();
        assert_eq!(tau_stab(&m, 5.5).unwrap(), Some(6));
        assert_eq!(tau_stab(&m, 0.0).unwrap(), Some(1));
        assert_eq!(tau_stab(&m, 99.0).unwrap(), None);
        assert!(tau_stab(&[3, 2], 1.0).is_err());
    }

    #[test]
    fn tau_stab_poisson_first_passage_median() {
        // Median first time a Poisson(1) partial sum reaches 50, over 1e3
        // seeds, lands in [45, 56].
        use crate::rng::{stream, Channel};
        let mut taus = Vec::new();
        for seed in 0..1000u64 {
            let mut rng = stream(seed, 0, Channel::Arrivals);
            let mut m = 0u64;
            let mut traj = Vec::new();
            for _ in 0..200 {
                m += crate::population::poisson_sample(1.0, &mut rng).unwrap();
                traj.push(m);
            }
            taus.push(tau_stab(&traj, 50.0).unwrap().unwrap());
        }
        taus.sort_unstable();
        let median = taus[taus.len() / 2];
        assert!((45..=56).contains(&median), "median {median}");
    }

    #[test]
    fn tau_id_examples() {
        // Round-robin, K = 2, M = 1: N_i(t) = floor(t/2).
        let counts: Vec<Vec<f64>> = (1..=30u64)
            .map(|t| vec![(t / 2) as f64, ((t + 1) / 2) as f64])
            .collect();
        assert_eq!(tau_id(&counts, 10.0).unwrap(), Some(20));
        assert_eq!(tau_id(&counts, 0.0).unwrap(), Some(1));
        assert!(tau_id(&[vec![2.0], vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn delta_good_event_examples() {
        // K=2, T=100, tau=10, Delta0=0.4, Delta=0.2, M_tau=500, N_min=400.
        let d = delta_good_event(500.0, 0.4, 0.2, 2, 100, 10, 400.0).unwrap();
        let term1 = 4.0 * 91.0 * (-10.0f64).exp();
        let term2 = 4.0 * (-2.0f64).exp();
        assert!((d.stability_term - term1).abs() < 1e-12);
        assert!((d.identification_term - term2).abs() < 1e-12);
        assert!((d.delta() - 0.5579).abs() < 1e-4);

        // Huge population and samples kill both terms.
        let d = delta_good_event(1e9, 0.4, 0.2, 2, 100, 10, 1e9).unwrap();
        assert!(d.delta() < 1e-300);

        // Delta near Delta0: the stability exponent vanishes and the raw
        // term approaches 2K(T - tau + 1); the read-time value clamps to 1.
        let d = delta_good_event(500.0, 0.4, 0.4 - 1e-9, 2, 100, 10, 400.0).unwrap();
        assert!((d.stability_term - 364.0).abs() < 1e-3);
        assert_eq!(d.delta(), 1.0);

        assert!(delta_good_event(500.0, 0.4, 0.4, 2, 100, 10, 400.0).is_err());
        assert!(delta_good_event(500.0, 0.4, 0.2, 2, 100, 200, 400.0).is_err());
    }

    #[test]
    fn model_identification_examples() {
        // Clustered: K=2, C=3, Delta=0.4, N=200 -> 12 e^{-4}.
        let v = model_identification_term(ModelIdTerm::Clustered {
            arms: 2,
            clusters: 3,
            n_min: 200.0,
            delta_gap: 0.4,
        })
        .unwrap();
        assert!((v - 12.0 * (-4.0f64).exp()).abs() < 1e-12);
        assert!((v - 0.2198).abs() < 1e-4);

        // Discovery: lambda_min=0.5, C=3, tau=20 -> 3 e^{-10}.
        let v = model_identification_term(ModelIdTerm::ClusterDiscovery {
            clusters: 3,
            lambda_min: 0.5,
            tau: 20.0,
        })
        .unwrap();
        assert!((v - 3.0 * (-10.0f64).exp()).abs() < 1e-15);

        // Any kind vanishes as N grows.
        let v = model_identification_term(ModelIdTerm::Linear {
            arms: 2,
            dim: 4,
            c_lin: 1.0,
            n_min: 1e9,
            delta_gap: 0.3,
        })
        .unwrap();
        assert!(v < 1e-300);

        assert!(model_identification_term(ModelIdTerm::ZeroKnowledge {
            arms: 2,
            n_min: 10.0,
            delta_gap: 0.0,
        })
        .is_err());
    }

    #[test]
    fn p_good_example() {
        let v = p_good(0.5, 2, 0.5).unwrap();
        let oracle = 0.5 * (-0.5f64).exp() * (-0.5f64).exp() * 0.25;
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.04598).abs() < 1e-5, "p_good {v}");
        assert!(p_good(0.5, 1, 0.5).is_err());
        assert!(p_good(0.5, 2, 1.0).is_err());
    }

    #[test]
    fn bernoulli_kl_basics() {
        assert_eq!(bernoulli_kl(0.5, 0.5).unwrap(), 0.0);
        assert!(bernoulli_kl(0.0, 0.5).unwrap() > 0.0);
        assert!(bernoulli_kl(0.5, 0.0).is_err());
        assert!(bernoulli_kl(1.5, 0.5).is_err());
        // kl(1/2, q) = -ln(4 q (1-q)) / 2.
        let v = bernoulli_kl(0.5, 0.7).unwrap();
        let oracle = -0.5 * (4.0 * 0.7 * 0.3f64).ln();
        assert!((v - oracle).abs() < 1e-15);
    }

    #[test]
    fn budget_check_oracle_run_has_zero_ratio() {
        let gv = global_values_from_sums(1, vec![0.6, 1.4], 2).unwrap();
        let mut ledger = RegretLedger::new();
        ledger.accumulate(&gv, gv.optimal_arm, 2, 1, 0.0, 0.0);
        let report = theorem1_budget_check(&ledger, 2, 100, 3.0, 0.5);
        assert_eq!(report.regret_aggregate, 0.0);
        assert_eq!(report.ratio, 0.0);
        assert!((report.budget - (2.0 * 100f64.ln() + 3.0)).abs() < 1e-12);
        assert!((report.implied_c0 - 0.5 / (2.0 * 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn bound_report_tau_is_max_of_parts() {
        let r = BoundReport::default().with_taus(Some(10), Some(25));
        assert_eq!(r.tau, Some(25));
        let r = BoundReport::default().with_taus(Some(10), None);
        assert_eq!(r.tau, None);
    }
}
