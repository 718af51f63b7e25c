//! Open agent population: arrivals, departures, lifetimes, snapshots.
//!
//! A population evolves round by round. Within a round, departures are
//! realized first, then arrivals; the net positive-part law
//! `M_t = (M_{t-1} + A_t - D_t)_+` holds with the realized departure count
//! (departures can never exceed the current population). Agent ids are
//! allocated sequentially and never reused.

use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque agent identity, unique within a run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct AgentId(pub u64);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One agent: identity, lifetime, ground-truth means, optional structure
/// (features / cluster), and the entry information it declares on arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: AgentId,
    /// Round of arrival; 0 for agents present in the initial population.
    pub arrival_time: u64,
    /// Number of rounds the agent stays active; `None` means immortal.
    pub lifetime: Option<u64>,
    /// True mean reward per arm, each in [0, 1]. Evaluator-only knowledge.
    pub mean_vector: Vec<f64>,
    /// Feature vector with Euclidean norm <= 1 (linear / nonlinear models).
    pub features: Option<Vec<f64>>,
    /// Cluster label (clustered models).
    pub cluster: Option<usize>,
    /// Entry estimates the agent declares on arrival, one per arm.
    pub entry_estimates: Vec<f64>,
    /// Declared upper bound on the entry-estimate error across arms.
    pub certificate: f64,
}

impl AgentProfile {
    pub fn arms(&self) -> usize {
        self.mean_vector.len()
    }

    pub fn validate(&self, arms: usize) -> Result<()> {
        if self.mean_vector.len() != arms || self.entry_estimates.len() != arms {
            return Err(Error::InternalInvariant(format!(
                "agent {} has {} means / {} entry estimates, expected {arms}",
                self.id,
                self.mean_vector.len(),
                self.entry_estimates.len()
            )));
        }
        for (arm, &mu) in self.mean_vector.iter().enumerate() {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::InvalidModel {
                    agent: self.id.0,
                    arm,
                    value: mu,
                });
            }
        }
        if let Some(x) = &self.features {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "features",
                    reason: "Euclidean norm must be <= 1",
                    value: norm,
                });
            }
        }
        if !(self.certificate >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "certificate",
                reason: "must be nonnegative",
                value: self.certificate,
            });
        }
        if let Some(l) = self.lifetime {
            if l == 0 {
                return Err(Error::InvalidParameter {
                    name: "lifetime",
                    reason: "must be positive when present",
                    value: 0.0,
                });
            }
        }
        Ok(())
    }
}

/// Lifetime law applied to agents created in count-driven modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum LifetimeLaw {
    #[default]
    None,
    /// P(L = k) = (1-q)^{k-1} q for k = 1, 2, ...
    Geometric { q: f64 },
    Fixed { rounds: u64 },
}

impl LifetimeLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            LifetimeLaw::Geometric { q } if !(q > 0.0 && q < 1.0) => Err(Error::InvalidParameter {
                name: "lifetime q",
                reason: "must lie in (0, 1)",
                value: q,
            }),
            LifetimeLaw::Fixed { rounds: 0 } => Err(Error::InvalidParameter {
                name: "lifetime rounds",
                reason: "must be positive",
                value: 0.0,
            }),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> Option<u64> {
        match *self {
            LifetimeLaw::None => None,
            LifetimeLaw::Fixed { rounds } => Some(rounds),
            LifetimeLaw::Geometric { q } => {
                let geo = Geometric::new(q).expect("validated q");
                Some(1 + geo.sample(rng))
            }
        }
    }
}

/// A single trace event (explicit arrival/departure script).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    pub arrive: bool,
    pub agent: AgentId,
}

/// How the population evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternKind {
    /// `A_t ~ Poisson(arrival_rate)`, `D_t ~ Poisson(departure_rate)`;
    /// departing agents are drawn uniformly without replacement.
    Poisson {
        arrival_rate: f64,
        departure_rate: f64,
    },
    /// Explicit per-round arrival/departure counts, sorted by round.
    Schedule { rounds: Vec<(u64, u64, u64)> },
    /// Explicit per-agent events, sorted by round.
    Trace { events: Vec<TraceEvent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPattern {
    pub kind: PatternKind,
    #[serde(default)]
    pub lifetime_law: LifetimeLaw,
}

impl AgentPattern {
    pub fn poisson(arrival_rate: f64, departure_rate: f64) -> Self {
        Self {
            kind: PatternKind::Poisson {
                arrival_rate,
                departure_rate,
            },
            lifetime_law: LifetimeLaw::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PatternKind::Poisson {
                arrival_rate,
                departure_rate,
            } => {
                for (name, &r) in [("arrival_rate", arrival_rate), ("departure_rate", departure_rate)] {
                    if !r.is_finite() || r < 0.0 {
                        return Err(Error::InvalidParameter {
                            name,
                            reason: "must be finite and nonnegative",
                            value: r,
                        });
                    }
                }
            }
            PatternKind::Schedule { rounds } => {
                let mut prev = 0;
                for &(t, _, _) in rounds {
                    if t == 0 || t <= prev && prev != 0 {
                        return Err(Error::Misuse("schedule rounds must be strictly increasing and >= 1"));
                    }
                    prev = t;
                }
            }
            PatternKind::Trace { events } => {
                let mut prev = 0;
                for e in events {
                    if e.round == 0 || e.round < prev {
                        return Err(Error::Misuse("trace rounds must be nondecreasing and >= 1"));
                    }
                    prev = e.round;
                }
            }
        }
        self.lifetime_law.validate()
    }
}

/// The active set at one round, partitioned into arrivals, continuing
/// agents, and the agents that departed at the start of the round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub round: u64,
    /// Active ids, sorted ascending.
    pub active: Vec<AgentId>,
    pub arrivals: Vec<AgentId>,
    pub continuing: Vec<AgentId>,
    pub departures: Vec<AgentId>,
}

impl PopulationSnapshot {
    pub fn size(&self) -> u64 {
        self.active.len() as u64
    }

    /// Full partition re-check: arrivals and continuing are disjoint, their
    /// union is the active set, and no departure is active.
    pub fn validate(&self) -> Result<()> {
        let mut merged: Vec<AgentId> = self
            .arrivals
            .iter()
            .chain(self.continuing.iter())
            .copied()
            .collect();
        merged.sort_unstable();
        if merged.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InternalInvariant(format!(
                "round {}: arrivals and continuing overlap",
                self.round
            )));
        }
        if merged != self.active {
            return Err(Error::InternalInvariant(format!(
                "round {}: arrivals + continuing != active",
                self.round
            )));
        }
        if self
            .departures
            .iter()
            .any(|d| self.active.binary_search(d).is_ok())
        {
            return Err(Error::InternalInvariant(format!(
                "round {}: departure still active",
                self.round
            )));
        }
        Ok(())
    }
}

/// Draws a Poisson variate; a zero rate is degenerate at 0 and consumes no
/// randomness.
pub fn poisson_sample(rate: f64, rng: &mut ChaCha12Rng) -> Result<u64> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: "must be finite and nonnegative",
            value: rate,
        });
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(rate).map_err(|_| Error::InvalidParameter {
        name: "rate",
        reason: "rejected by Poisson sampler",
        value: rate,
    })?;
    Ok(dist.sample(rng) as u64)
}

/// Produces profiles for newly arriving agents.
pub trait AgentFactory {
    fn make(
        &mut self,
        id: AgentId,
        arrival_round: u64,
        latent: &mut ChaCha12Rng,
    ) -> Result<AgentProfile>;
}

impl<F> AgentFactory for F
where
    F: FnMut(AgentId, u64, &mut ChaCha12Rng) -> Result<AgentProfile>,
{
    fn make(
        &mut self,
        id: AgentId,
        arrival_round: u64,
        latent: &mut ChaCha12Rng,
    ) -> Result<AgentProfile> {
        self(id, arrival_round, latent)
    }
}

/// RNG streams the population consumes (one process per stream).
#[derive(Debug, Clone)]
pub struct PopulationStreams {
    pub arrivals: ChaCha12Rng,
    pub departures: ChaCha12Rng,
    pub lifetimes: ChaCha12Rng,
    pub latent: ChaCha12Rng,
}

impl From<crate::rng::RunStreams> for PopulationStreams {
    fn from(s: crate::rng::RunStreams) -> Self {
        Self {
            arrivals: s.arrivals,
            departures: s.departures,
            lifetimes: s.lifetimes,
            latent: s.latent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Expiry {
    round: u64,
    slot: u32,
}

impl Ord for Expiry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on (round, slot).
        other
            .round
            .cmp(&self.round)
            .then(other.slot.cmp(&self.slot))
    }
}

impl PartialOrd for Expiry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct ActiveEntry {
    id: AgentId,
    slot: u32,
}

/// What changed at one round; the full active set lives on [`Population`].
#[derive(Debug, Clone)]
pub struct RoundDelta {
    pub round: u64,
    pub arrivals: Vec<AgentId>,
    pub departures: Vec<AgentId>,
}

/// Stateful population stepper.
pub struct Population {
    arms: usize,
    pattern: AgentPattern,
    factory: Box<dyn AgentFactory>,
    streams: PopulationStreams,
    profiles: Vec<AgentProfile>,
    index: HashMap<AgentId, u32>,
    active: Vec<ActiveEntry>,
    expiries: BinaryHeap<Expiry>,
    next_id: u64,
    round: u64,
    schedule_cursor: usize,
    trace_cursor: usize,
    /// Scratch for uniform departure picks.
    scratch: Vec<u32>,
}

impl Population {
    /// Creates the initial population of `m0` agents (arrival time 0).
    pub fn new(
        arms: usize,
        m0: u64,
        pattern: AgentPattern,
        factory: Box<dyn AgentFactory>,
        streams: PopulationStreams,
    ) -> Result<Self> {
        pattern.validate()?;
        let mut pop = Self {
            arms,
            pattern,
            factory,
            streams,
            profiles: Vec::new(),
            index: HashMap::new(),
            active: Vec::new(),
            expiries: BinaryHeap::new(),
            next_id: 0,
            round: 0,
            schedule_cursor: 0,
            trace_cursor: 0,
            scratch: Vec::new(),
        };
        for _ in 0..m0 {
            let id = AgentId(pop.next_id);
            pop.next_id += 1;
            pop.admit(id, 0)?;
        }
        Ok(pop)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn size(&self) -> u64 {
        self.active.len() as u64
    }

    /// Active ids in ascending order.
    pub fn active_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.active.iter().map(|e| e.id)
    }

    /// Active (id, dense slot) pairs in ascending id order.
    pub(crate) fn active_slots(&self) -> impl Iterator<Item = (AgentId, usize)> + '_ {
        self.active.iter().map(|e| (e.id, e.slot as usize))
    }

    pub fn profile(&self, id: AgentId) -> Option<&AgentProfile> {
        self.index.get(&id).map(|&s| &self.profiles[s as usize])
    }

    pub(crate) fn profile_by_slot(&self, slot: usize) -> &AgentProfile {
        &self.profiles[slot]
    }

    pub fn slot_of(&self, id: AgentId) -> Option<usize> {
        self.index.get(&id).map(|&s| s as usize)
    }

    /// Total agents ever created (slots are `0..created`).
    pub fn created(&self) -> usize {
        self.profiles.len()
    }

    pub fn initial_snapshot(&self) -> PopulationSnapshot {
        PopulationSnapshot {
            round: 0,
            active: self.active.iter().map(|e| e.id).collect(),
            arrivals: Vec::new(),
            continuing: self.active.iter().map(|e| e.id).collect(),
            departures: Vec::new(),
        }
    }

    fn admit(&mut self, id: AgentId, arrival_round: u64) -> Result<()> {
        let mut profile = self
            .factory
            .make(id, arrival_round, &mut self.streams.latent)?;
        if profile.lifetime.is_none() {
            profile.lifetime = self.pattern.lifetime_law.sample(&mut self.streams.lifetimes);
        }
        profile.id = id;
        profile.arrival_time = arrival_round;
        profile.validate(self.arms)?;
        let slot = self.profiles.len() as u32;
        match self.index.entry(id) {
            Entry::Occupied(_) => {
                return Err(Error::MalformedTrace {
                    round: arrival_round,
                    agent: id.0,
                    reason: "agent id arrives twice (ids are never reused)",
                })
            }
            Entry::Vacant(v) => {
                v.insert(slot);
            }
        }
        if let Some(l) = profile.lifetime {
            self.expiries.push(Expiry {
                round: arrival_round.max(1) + l,
                slot,
            });
        }
        self.profiles.push(profile);
        // Sequential ids arrive in increasing order; trace ids may not.
        let entry = ActiveEntry { id, slot };
        match self.active.last() {
            Some(last) if last.id >= id => {
                let pos = self
                    .active
                    .partition_point(|e| e.id < id);
                self.active.insert(pos, entry);
            }
            _ => self.active.push(entry),
        }
        Ok(())
    }

    fn remove_active(&mut self, id: AgentId, round: u64) -> Result<()> {
        match self.active.binary_search_by(|e| e.id.cmp(&id)) {
            Ok(pos) => {
                self.active.remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::MalformedTrace {
                round,
                agent: id.0,
                reason: "departure of an agent that is not active",
            }),
        }
    }

    /// Advances one round: departures first, then arrivals.
    pub fn step_delta(&mut self) -> Result<RoundDelta> {
        self.round += 1;
        let t = self.round;
        let mut departures: Vec<AgentId> = Vec::new();
        let mut arrivals: Vec<AgentId> = Vec::new();

        // Lifetime expirations are due regardless of the pattern kind.
        while let Some(&Expiry { round, slot }) = self.expiries.peek() {
            if round > t {
                break;
            }
            self.expiries.pop();
            let id = self.profiles[slot as usize].id;
            // The agent may already have departed through another channel.
            if self.remove_active(id, t).is_ok() {
                departures.push(id);
            }
        }

        // Plan under a short borrow of the pattern, then execute; per-round
        // event slices are tiny, so copying them out is cheap.
        enum Plan {
            Rates { arrival: f64, departure: f64 },
            Counts { arrivals: u64, departures: u64 },
            Events(Vec<TraceEvent>),
        }
        let plan = match &self.pattern.kind {
            PatternKind::Poisson {
                arrival_rate,
                departure_rate,
            } => Plan::Rates {
                arrival: *arrival_rate,
                departure: *departure_rate,
            },
            PatternKind::Schedule { rounds } => {
                let mut counts = (0u64, 0u64);
                while let Some(&(r, a, d)) = rounds.get(self.schedule_cursor) {
                    if r > t {
                        break;
                    }
                    self.schedule_cursor += 1;
                    if r == t {
                        counts = (a, d);
                    }
                }
                Plan::Counts {
                    arrivals: counts.0,
                    departures: counts.1,
                }
            }
            PatternKind::Trace { events } => {
                let start = self.trace_cursor;
                while let Some(e) = events.get(self.trace_cursor) {
                    if e.round > t {
                        break;
                    }
                    self.trace_cursor += 1;
                }
                Plan::Events(events[start..self.trace_cursor].to_vec())
            }
        };

        match plan {
            Plan::Rates { arrival, departure } => {
                let d = poisson_sample(departure, &mut self.streams.departures)?;
                self.depart_uniform(d, t, &mut departures);
                let a = poisson_sample(arrival, &mut self.streams.arrivals)?;
                for _ in 0..a {
                    let id = AgentId(self.next_id);
                    self.next_id += 1;
                    self.admit(id, t)?;
                    arrivals.push(id);
                }
            }
            Plan::Counts {
                arrivals: a,
                departures: d,
            } => {
                self.depart_uniform(d, t, &mut departures);
                for _ in 0..a {
                    let id = AgentId(self.next_id);
                    self.next_id += 1;
                    self.admit(id, t)?;
                    arrivals.push(id);
                }
            }
            Plan::Events(events) => {
                // Departures first, then arrivals, regardless of file order.
                for e in &events {
                    if !e.arrive {
                        if self.index.get(&e.agent).is_none() {
                            return Err(Error::MalformedTrace {
                                round: t,
                                agent: e.agent.0,
                                reason: "departure of an unknown agent id",
                            });
                        }
                        self.remove_active(e.agent, t)?;
                        departures.push(e.agent);
                    }
                }
                for e in &events {
                    if e.arrive {
                        self.next_id = self.next_id.max(e.agent.0 + 1);
                        self.admit(e.agent, t)?;
                        arrivals.push(e.agent);
                    }
                }
            }
        }

        departures.sort_unstable();
        arrivals.sort_unstable();
        Ok(RoundDelta {
            round: t,
            arrivals,
            departures,
        })
    }

    fn depart_uniform(&mut self, requested: u64, round: u64, out: &mut Vec<AgentId>) {
        if requested == 0 || self.active.is_empty() {
            return; // Excess departures beyond the active set are discarded.
        }
        let m = self.active.len();
        let d = (requested as usize).min(m);
        if d == m {
            for e in self.active.drain(..) {
                out.push(e.id);
            }
            return;
        }
        self.scratch.clear();
        self.scratch.extend(0..m as u32);
        for i in 0..d {
            let j = self.streams.departures.random_range(i..m);
            self.scratch.swap(i, j);
        }
        let mut picks: Vec<u32> = self.scratch[..d].to_vec();
        picks.sort_unstable_by(|a, b| b.cmp(a));
        for p in picks {
            let e = self.active.remove(p as usize);
            out.push(e.id);
        }
        let _ = round;
    }

    /// One round, materialized as a full snapshot (the spec-level step).
    pub fn step(&mut self) -> Result<PopulationSnapshot> {
        let delta = self.step_delta()?;
        let active: Vec<AgentId> = self.active.iter().map(|e| e.id).collect();
        let continuing: Vec<AgentId> = active
            .iter()
            .copied()
            .filter(|id| delta.arrivals.binary_search(id).is_err())
            .collect();
        let snap = PopulationSnapshot {
            round: delta.round,
            active,
            arrivals: delta.arrivals,
            continuing,
            departures: delta.departures,
        };
        debug_assert!(snap.validate().is_ok());
        Ok(snap)
    }
}

/// Iterates [`Population::step`] for `t_max` rounds. Deterministic given
/// the pattern and seed streams.
pub fn population_trajectory(
    arms: usize,
    m0: u64,
    pattern: AgentPattern,
    factory: Box<dyn AgentFactory>,
    streams: PopulationStreams,
    t_max: u64,
) -> Result<Vec<PopulationSnapshot>> {
    if t_max == 0 {
        return Err(Error::Misuse("trajectory horizon must be >= 1"));
    }
    let mut pop = Population::new(arms, m0, pattern, factory, streams)?;
    let mut out = Vec::with_capacity(t_max as usize);
    for _ in 0..t_max {
        out.push(pop.step()?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Text formats: `t,event,agent_id` traces and `t,arrivals,departures`
// schedules. Blank lines and `#` comments are ignored.
// ---------------------------------------------------------------------------

pub fn parse_trace(input: &str) -> Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>, what: &str| -> Result<u64> {
            s.ok_or_else(|| Error::Parse {
                line: lineno + 1,
                reason: format!("missing {what}"),
            })?
            .parse::<u64>()
            .map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("bad {what}: {e}"),
            })
        };
        let round = parse(parts.next(), "round")?;
        let event = parts.next().ok_or_else(|| Error::Parse {
            line: lineno + 1,
            reason: "missing event".into(),
        })?;
        let arrive = match event {
            "arrive" => true,
            "depart" => false,
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("unknown event `{other}` (expected arrive|depart)"),
                })
            }
        };
        let agent = parse(parts.next(), "agent id")?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "trailing fields".into(),
            });
        }
        if round == 0 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "round must be >= 1".into(),
            });
        }
        events.push(TraceEvent {
            round,
            arrive,
            agent: AgentId(agent),
        });
    }
    events.sort_by_key(|e| e.round);
    Ok(events)
}

pub fn format_trace(events: &[TraceEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&format!(
            "{},{},{}\n",
            e.round,
            if e.arrive { "arrive" } else { "depart" },
            e.agent
        ));
    }
    s
}

pub fn parse_schedule(input: &str) -> Result<Vec<(u64, u64, u64)>> {
    let mut rows = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: format!("expected `t,arrivals,departures`, got {} fields", fields.len()),
            });
        }
        let mut nums = [0u64; 3];
        for (k, f) in fields.iter().enumerate() {
            nums[k] = f.parse::<u64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("bad integer `{f}`: {e}"),
            })?;
        }
        if nums[0] == 0 {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "round must be >= 1".into(),
            });
        }
        rows.push((nums[0], nums[1], nums[2]));
    }
    rows.sort_by_key(|r| r.0);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse {
            line: 0,
            reason: "duplicate round in schedule".into(),
        });
    }
    Ok(rows)
}

/// A factory producing identical tabular agents; handy for tests and
/// homogeneous instances.
pub struct ConstantFactory {
    pub means: Vec<f64>,
}

impl AgentFactory for ConstantFactory {
    fn make(&mut self, id: AgentId, arrival_round: u64, _: &mut ChaCha12Rng) -> Result<AgentProfile> {
        Ok(AgentProfile {
            id,
            arrival_time: arrival_round,
            lifetime: None,
            mean_vector: self.means.clone(),
            features: None,
            cluster: None,
            entry_estimates: vec![0.0; self.means.len()],
            certificate: 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Channel, RunStreams};

    fn test_streams(seed: u64) -> PopulationStreams {
        RunStreams::new(seed, 0).into()
    }

    fn constant_factory() -> Box<dyn AgentFactory> {
        Box::new(ConstantFactory {
            means: vec![0.5, 0.5],
        })
    }

    #[test]
    fn poisson_zero_rate_is_degenerate() {
        let mut rng = stream(1, 0, Channel::Arrivals);
        for _ in 0..10 {
            assert_eq!(poisson_sample(0.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_rejects_bad_rates() {
        let mut rng = stream(1, 0, Channel::Arrivals);
        assert!(poisson_sample(-1.0, &mut rng).is_err());
        assert!(poisson_sample(f64::NAN, &mut rng).is_err());
        assert!(poisson_sample(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn poisson_matches_analytic_mean_and_variance() {
        let mut rng = stream(2, 0, Channel::Arrivals);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| poisson_sample(3.0, &mut rng).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
        assert!((var - 3.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn poisson_zero_mass_matches_exp_oracle() {
        let mut rng = stream(3, 0, Channel::Arrivals);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| poisson_sample(0.5, &mut rng).unwrap() == 0)
            .count() as f64
            / n as f64;
        let oracle = (-0.5f64).exp();
        assert!((zeros - oracle).abs() < 0.01, "P(X=0) {zeros} vs {oracle}");
    }

    #[test]
    fn step_arithmetic_and_clamp() {
        // 5 + 2 - 3 = 4 via an explicit schedule.
        let pattern = AgentPattern {
            kind: PatternKind::Schedule {
                rounds: vec![(1, 2, 3)],
            },
            lifetime_law: LifetimeLaw::None,
        };
        let mut pop = Population::new(2, 5, pattern, constant_factory(), test_streams(1)).unwrap();
        let snap = pop.step().unwrap();
        assert_eq!(snap.size(), 4);
        assert_eq!(snap.arrivals.len(), 2);
        assert_eq!(snap.departures.len(), 3);
        snap.validate().unwrap();

        // 1 + 0 - 3 clamps at zero: only one departure can be realized.
        let pattern = AgentPattern {
            kind: PatternKind::Schedule {
                rounds: vec![(1, 0, 3)],
            },
            lifetime_law: LifetimeLaw::None,
        };
        let mut pop = Population::new(2, 1, pattern, constant_factory(), test_streams(2)).unwrap();
        let snap = pop.step().unwrap();
        assert_eq!(snap.size(), 0);
        assert_eq!(snap.departures.len(), 1);
    }

    #[test]
    fn zero_rates_reduce_to_fixed_population() {
        let mut pop = Population::new(
            2,
            4,
            AgentPattern::poisson(0.0, 0.0),
            constant_factory(),
            test_streams(3),
        )
        .unwrap();
        let initial: Vec<AgentId> = pop.active_ids().collect();
        for _ in 0..50 {
            let snap = pop.step().unwrap();
            assert_eq!(snap.active, initial);
            assert!(snap.arrivals.is_empty() && snap.departures.is_empty());
        }
    }

    #[test]
    fn all_zero_schedule_keeps_m0() {
        let pattern = AgentPattern {
            kind: PatternKind::Schedule { rounds: vec![] },
            lifetime_law: LifetimeLaw::None,
        };
        let trajectory =
            population_trajectory(2, 3, pattern, constant_factory(), test_streams(4), 20).unwrap();
        assert_eq!(trajectory.len(), 20);
        assert!(trajectory.iter().all(|s| s.size() == 3));
    }

    #[test]
    fn poisson_growth_matches_three_sigma_band() {
        // M_T = sum of T Poisson(1) variates: mean 1e4, sd 1e2.
        let mut pop = Population::new(
            2,
            0,
            AgentPattern::poisson(1.0, 0.0),
            constant_factory(),
            test_streams(5),
        )
        .unwrap();
        for _ in 0..10_000 {
            pop.step_delta().unwrap();
        }
        let m = pop.size() as f64;
        assert!((m - 10_000.0).abs() <= 300.0, "M_T = {m}");
    }

    #[test]
    fn geometric_lifetimes_match_pmf_oracle() {
        // Realized active spans under geometric(q = 0.5): P(L = 2) = 0.25.
        let pattern = AgentPattern {
            kind: PatternKind::Poisson {
                arrival_rate: 0.5,
                departure_rate: 0.0,
            },
            lifetime_law: LifetimeLaw::Geometric { q: 0.5 },
        };
        let mut pop = Population::new(2, 0, pattern, constant_factory(), test_streams(6)).unwrap();
        let mut spans: HashMap<AgentId, u64> = HashMap::new();
        let mut completed = Vec::new();
        let mut rounds = 0u64;
        while completed.len() < 100_000 {
            rounds += 1;
            let delta = pop.step_delta().unwrap();
            for id in &delta.departures {
                completed.push(rounds - 1 - spans[id]);
            }
            for id in &delta.arrivals {
                spans.insert(*id, rounds - 1);
            }
            assert!(rounds < 1_000_000, "lifetime harness runaway");
        }
        let p2 = completed.iter().filter(|&&l| l == 2).count() as f64 / completed.len() as f64;
        assert!((p2 - 0.25).abs() < 0.01, "P(L=2) = {p2}");
    }

    #[test]
    fn partition_invariants_hold_every_step() {
        let pattern = AgentPattern {
            kind: PatternKind::Poisson {
                arrival_rate: 2.0,
                departure_rate: 1.5,
            },
            lifetime_law: LifetimeLaw::Geometric { q: 0.3 },
        };
        let mut pop = Population::new(2, 10, pattern, constant_factory(), test_streams(7)).unwrap();
        let mut prev = pop.size();
        for _ in 0..500 {
            let snap = pop.step().unwrap();
            snap.validate().unwrap();
            let net = prev as i64 + snap.arrivals.len() as i64 - snap.departures.len() as i64;
            assert_eq!(snap.size() as i64, net.max(0));
            prev = snap.size();
        }
    }

    #[test]
    fn identical_seed_gives_identical_trajectories() {
        let pattern = AgentPattern {
            kind: PatternKind::Poisson {
                arrival_rate: 1.2,
                departure_rate: 0.7,
            },
            lifetime_law: LifetimeLaw::None,
        };
        let a = population_trajectory(
            2,
            5,
            pattern.clone(),
            constant_factory(),
            test_streams(42),
            300,
        )
        .unwrap();
        let b =
            population_trajectory(2, 5, pattern, constant_factory(), test_streams(42), 300).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_departures_means_nondecreasing_size() {
        let mut pop = Population::new(
            2,
            1,
            AgentPattern::poisson(0.8, 0.0),
            constant_factory(),
            test_streams(8),
        )
        .unwrap();
        let mut prev = pop.size();
        for _ in 0..400 {
            pop.step_delta().unwrap();
            assert!(pop.size() >= prev);
            prev = pop.size();
        }
    }

    #[test]
    fn trace_round_trip_and_errors() {
        let text = "1,arrive,7\n2,arrive,9\n3,depart,7\n";
        let events = parse_trace(text).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(format_trace(&events), text);

        assert!(parse_trace("1,teleport,7\n").is_err());
        assert!(parse_trace("0,arrive,7\n").is_err());
        assert!(parse_trace("1,arrive\n").is_err());

        // Departing an agent that never arrived is a malformed trace.
        let pattern = AgentPattern {
            kind: PatternKind::Trace {
                events: parse_trace("1,depart,3\n").unwrap(),
            },
            lifetime_law: LifetimeLaw::None,
        };
        let mut pop = Population::new(2, 1, pattern, constant_factory(), test_streams(9)).unwrap();
        match pop.step() {
            Err(Error::MalformedTrace { agent: 3, .. }) => {}
            other => panic!("expected malformed trace, got {other:?}"),
        }

        // Re-arrival of a departed id is also malformed (ids never reused).
        let pattern = AgentPattern {
            kind: PatternKind::Trace {
                events: parse_trace("1,arrive,3\n2,depart,3\n3,arrive,3\n").unwrap(),
            },
            lifetime_law: LifetimeLaw::None,
        };
        let mut pop = Population::new(2, 0, pattern, constant_factory(), test_streams(10)).unwrap();
        pop.step().unwrap();
        pop.step().unwrap();
        assert!(matches!(pop.step(), Err(Error::MalformedTrace { .. })));
    }

    #[test]
    fn schedule_parse_round_trip() {
        let rows = parse_schedule("# header\n1,2,0\n5,0,1\n").unwrap();
        assert_eq!(rows, vec![(1, 2, 0), (5, 0, 1)]);
        assert!(parse_schedule("1,2\n").is_err());
        assert!(parse_schedule("1,2,0\n1,1,0\n").is_err());
        assert!(parse_schedule("0,2,0\n").is_err());
    }
}
