//! Society state and the per-tick dynamics.
//!
//! Draw order within a tick is part of the reproducibility contract:
//!
//! 1. shuffle the agent ids;
//! 2. for each id in shuffled order, draw a partner uniformly among the
//!    other agents and resolve the interaction, applying updates at once;
//! 3. apply noise to every agent in id order (`c1` then `c2`);
//! 4. check the stop conditions and advance the tick counter.
//!
//! Inside one interaction the draws are: action cutoff (only if the
//! initiator's `c1` clears `action_threshold`); then, if a microaggression
//! happened, the positive cutoff or the negative cutoff (only the one whose
//! band contains the reactor), the initiator's perception of the reactor,
//! the reactor's perception of the initiator, and finally the acceptance
//! draw for negative reactions. Perceiving a non-marginalized agent draws
//! nothing.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, Thresholds};
use crate::deltas::{Conviction, DeltaEvent, Group};
use crate::stochastics::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u32,
    pub group: Group,
    pub c1: f64,
    pub c2: f64,
}

impl Agent {
    fn shift(&mut self, delta: [f64; 2]) {
        self.c1 = clamp_percent(self.c1 + delta[0]);
        self.c2 = clamp_percent(self.c2 + delta[1]);
    }
}

pub fn clamp_percent(x: f64) -> f64 {
    x.clamp(0.0, 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaction {
    Positive,
    Neutral,
    Negative,
}

impl Reaction {
    pub fn name(self) -> &'static str {
        match self {
            Reaction::Positive => "positive",
            Reaction::Neutral => "neutral",
            Reaction::Negative => "negative",
        }
    }
}

/// Why a run ended. `TickLimit` is reported by the runner only; the stop
/// check itself never produces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoPotentialPerpetrators,
    NoNegativeReactors,
    PolarizationDeadlock,
    TickLimit,
}

impl StopReason {
    pub const ALL: [StopReason; 4] = [
        StopReason::NoPotentialPerpetrators,
        StopReason::NoNegativeReactors,
        StopReason::PolarizationDeadlock,
        StopReason::TickLimit,
    ];

    /// Human-readable form, as shown to users of the model.
    pub fn label(self) -> &'static str {
        match self {
            StopReason::NoPotentialPerpetrators => "equilibrium: no potential perpetrators",
            StopReason::NoNegativeReactors => "equilibrium: no negative reactors",
            StopReason::PolarizationDeadlock => "deadlock: society is too polarized for change",
            StopReason::TickLimit => "tick limit reached",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            StopReason::NoPotentialPerpetrators => "no_potential_perpetrators",
            StopReason::NoNegativeReactors => "no_negative_reactors",
            StopReason::PolarizationDeadlock => "polarization_deadlock",
            StopReason::TickLimit => "tick_limit",
        }
    }

    pub fn from_label(s: &str) -> Option<StopReason> {
        StopReason::ALL.into_iter().find(|r| r.label() == s || r.id() == s)
    }

    pub fn is_model_condition(self) -> bool {
        self != StopReason::TickLimit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopCondition {
    pub kind: StopReason,
    pub tick_reached: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub initiator_id: u32,
    pub partner_id: u32,
    /// `None` when no microaggression happened.
    pub reaction: Option<Reaction>,
    /// Present exactly for negative reactions.
    pub accepted: Option<bool>,
    /// How the initiator saw the partner; only sampled when it acted.
    pub perceived_partner_group: Option<Group>,
    pub perceived_initiator_group: Option<Group>,
    /// Nominal `(c1, c2)` changes before clamping.
    pub initiator_delta: [f64; 2],
    pub partner_delta: [f64; 2],
}

impl InteractionOutcome {
    pub fn acted(&self) -> bool {
        self.reaction.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocietyState {
    pub tick: u64,
    pub agents: Vec<Agent>,
    pub stopped: Option<StopCondition>,
}

impl SocietyState {
    pub fn count(&self, group: Group) -> usize {
        self.agents.iter().filter(|a| a.group == group).count()
    }
}

// Sampler parameters below come from a validated config; a failure here is
// a caller bug, not a runtime condition.
fn normal(stream: &mut RandomStream, mean: f64, deviation: f64) -> f64 {
    stream.sample_normal(mean, deviation).expect("validated deviation")
}

fn poisson(stream: &mut RandomStream, lambda: f64) -> f64 {
    stream.sample_poisson(lambda).expect("validated lambda") as f64
}

fn bernoulli(stream: &mut RandomStream, percent: f64) -> bool {
    stream.sample_bernoulli(percent).expect("validated probability")
}

/// Build the initial society. Agents `0..marginalized_count` are
/// marginalized; each agent draws `c1` then `c2` in id order.
pub fn init_society(config: &ModelConfig, stream: &mut RandomStream) -> SocietyState {
    let marginalized = config.marginalized_count();
    let agents = (0..config.population)
        .map(|id| {
            let group = if id < marginalized { Group::Marginalized } else { Group::NonMarginalized };
            let [c1, c2] = Conviction::ALL.map(|c| {
                let p = config.init.get(group, c);
                clamp_percent(normal(stream, p.mean, p.deviation))
            });
            Agent { id, group, c1, c2 }
        })
        .collect();
    SocietyState { tick: 0, agents, stopped: None }
}

/// How an observer reads `target`'s group. Marginalized agents go
/// unrecognized with probability `stealth` percent.
pub fn perceive_group(target: &Agent, stealth: f64, stream: &mut RandomStream) -> Group {
    match target.group {
        Group::NonMarginalized => Group::NonMarginalized,
        Group::Marginalized => {
            if bernoulli(stream, stealth) {
                Group::NonMarginalized
            } else {
                Group::Marginalized
            }
        }
    }
}

/// Whether `agent` commits a microaggression: its `c1` must clear both the
/// action threshold and a fresh Poisson cutoff.
pub fn decide_action(agent: &Agent, thresholds: &Thresholds, stream: &mut RandomStream) -> bool {
    agent.c1 >= thresholds.action && agent.c1 >= poisson(stream, thresholds.action_lambda())
}

pub fn classify_reaction(reactor: &Agent, thresholds: &Thresholds, stream: &mut RandomStream) -> Reaction {
    let c1 = reactor.c1;
    if c1 >= thresholds.positive {
        if c1 >= poisson(stream, thresholds.positive_lambda()) {
            return Reaction::Positive;
        }
    } else if c1 <= thresholds.negative && c1 <= poisson(stream, thresholds.negative_lambda()) {
        return Reaction::Negative;
    }
    Reaction::Neutral
}

/// One encounter initiated by `initiator`. Both agents are updated in place,
/// initiator first.
pub fn resolve_interaction(
    initiator: &mut Agent,
    partner: &mut Agent,
    config: &ModelConfig,
    stream: &mut RandomStream,
) -> InteractionOutcome {
    let deltas = &config.deltas;
    let mut outcome = InteractionOutcome {
        initiator_id: initiator.id,
        partner_id: partner.id,
        reaction: None,
        accepted: None,
        perceived_partner_group: None,
        perceived_initiator_group: None,
        initiator_delta: [0.0; 2],
        partner_delta: [0.0; 2],
    };

    if !decide_action(initiator, &config.thresholds, stream) {
        outcome.initiator_delta = deltas.pair(initiator.group, DeltaEvent::Idle, None);
        outcome.partner_delta = deltas.pair(partner.group, DeltaEvent::Idle, None);
    } else {
        let reaction = classify_reaction(partner, &config.thresholds, stream);
        let seen_partner = perceive_group(partner, config.stealth, stream);
        let seen_initiator = perceive_group(initiator, config.stealth, stream);
        let (from, to) = match reaction {
            Reaction::Positive => (DeltaEvent::PositiveFrom, DeltaEvent::PositiveTo),
            Reaction::Neutral => (DeltaEvent::NeutralFrom, DeltaEvent::NeutralTo),
            Reaction::Negative => {
                let accepted = bernoulli(stream, config.critical_faculty);
                outcome.accepted = Some(accepted);
                let from = if accepted {
                    DeltaEvent::NegativeAcceptedFrom
                } else {
                    DeltaEvent::NegativeRejectedFrom
                };
                (from, DeltaEvent::NegativeTo)
            }
        };
        outcome.reaction = Some(reaction);
        outcome.perceived_partner_group = Some(seen_partner);
        outcome.perceived_initiator_group = Some(seen_initiator);
        outcome.initiator_delta = deltas.pair(initiator.group, from, Some(seen_partner));
        outcome.partner_delta = deltas.pair(partner.group, to, Some(seen_initiator));
    }

    initiator.shift(outcome.initiator_delta);
    partner.shift(outcome.partner_delta);
    outcome
}

/// Background drift for one agent, `c1` first.
pub fn apply_noise(agent: &mut Agent, config: &ModelConfig, stream: &mut RandomStream) {
    let [d1, d2] = Conviction::ALL.map(|c| {
        let p = config.noise.get(agent.group, c);
        normal(stream, p.mean, p.deviation)
    });
    agent.c1 = clamp_percent(agent.c1 + d1);
    agent.c2 = clamp_percent(agent.c2 + d2);
}

/// Terminal condition, if any, checked in declaration order of
/// [`StopReason`].
pub fn check_stop(agents: &[Agent], config: &ModelConfig) -> Option<StopReason> {
    let t = &config.thresholds;
    if !agents.iter().any(|a| a.c1 >= t.action) {
        return Some(StopReason::NoPotentialPerpetrators);
    }
    if !agents.iter().any(|a| a.c1 <= t.negative) {
        return Some(StopReason::NoNegativeReactors);
    }
    let (low, high) = config.deadlock_poles();
    let all_polar = agents.iter().all(|a| a.c1 <= low || a.c1 >= high);
    let both_poles = agents.iter().any(|a| a.c1 <= low) && agents.iter().any(|a| a.c1 >= high);
    if all_polar && both_poles {
        return Some(StopReason::PolarizationDeadlock);
    }
    None
}

/// Advance one tick. Returns every interaction, in execution order.
///
/// # Panics
///
/// If the society has already stopped.
pub fn tick(state: &mut SocietyState, config: &ModelConfig, stream: &mut RandomStream) -> Vec<InteractionOutcome> {
    assert!(state.stopped.is_none(), "tick on a stopped society");
    let n = state.agents.len();
    let mut outcomes = Vec::with_capacity(n);
    if n >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        stream.shuffle(&mut order);
        for initiator in order {
            let mut partner = stream.below(n as u64 - 1) as usize;
            if partner >= initiator {
                partner += 1;
            }
            let (a, b) = pair_mut(&mut state.agents, initiator, partner);
            outcomes.push(resolve_interaction(a, b, config, stream));
        }
    }
    for agent in &mut state.agents {
        apply_noise(agent, config, stream);
    }
    state.tick += 1;
    state.stopped = check_stop(&state.agents, config)
        .map(|kind| StopCondition { kind, tick_reached: state.tick });
    outcomes
}

fn pair_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert_ne!(i, j);
    if i < j {
        let (lo, hi) = items.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}
