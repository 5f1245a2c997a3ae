//! Monitor and plot quantities for one tick.
//!
//! Perpetrator and reactor percentages describe threshold band membership
//! (who *could* act or react), not sampled behaviour; the sampled events of
//! the tick are counted separately.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::deltas::Group;
use crate::model::{Agent, InteractionOutcome, Reaction, StopReason};

/// Aggregates over one population slice (everyone, or one group).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub count: u32,
    pub mean_c1: f64,
    pub mean_c2: f64,
    pub pct_potential_perpetrators: f64,
    pub pct_positive_reactors: f64,
    pub pct_negative_reactors: f64,
    pub pct_neutral_reactors: f64,
}

impl SliceMetrics {
    fn of<'a>(agents: impl Iterator<Item = &'a Agent>, config: &ModelConfig) -> Self {
        let t = &config.thresholds;
        let mut m = SliceMetrics::default();
        let (mut c1, mut c2) = (0.0, 0.0);
        let (mut perps, mut pos, mut neg, mut neutral) = (0u32, 0u32, 0u32, 0u32);
        for a in agents {
            m.count += 1;
            c1 += a.c1;
            c2 += a.c2;
            if a.c1 >= t.action {
                perps += 1;
            }
            if a.c1 >= t.positive {
                pos += 1;
            } else if a.c1 <= t.negative {
                neg += 1;
            } else {
                neutral += 1;
            }
        }
        if m.count > 0 {
            let n = f64::from(m.count);
            m.mean_c1 = c1 / n;
            m.mean_c2 = c2 / n;
            m.pct_potential_perpetrators = 100.0 * f64::from(perps) / n;
            m.pct_positive_reactors = 100.0 * f64::from(pos) / n;
            m.pct_negative_reactors = 100.0 * f64::from(neg) / n;
            m.pct_neutral_reactors = 100.0 * f64::from(neutral) / n;
        }
        m
    }
}

/// Sampled events of one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub interactions: u32,
    pub actions: u32,
    pub positive: u32,
    pub neutral: u32,
    pub negative: u32,
    pub accepts: u32,
    pub rejects: u32,
}

impl EventCounts {
    pub fn tally(outcomes: &[InteractionOutcome]) -> Self {
        let mut c = EventCounts { interactions: outcomes.len() as u32, ..Default::default() };
        for o in outcomes {
            match o.reaction {
                None => {}
                Some(r) => {
                    c.actions += 1;
                    match r {
                        Reaction::Positive => c.positive += 1,
                        Reaction::Neutral => c.neutral += 1,
                        Reaction::Negative => c.negative += 1,
                    }
                }
            }
            match o.accepted {
                Some(true) => c.accepts += 1,
                Some(false) => c.rejects += 1,
                None => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: u64,
    pub all: SliceMetrics,
    /// Non-marginalized agents.
    pub p: SliceMetrics,
    /// Marginalized agents.
    pub m: SliceMetrics,
    /// Percentage of potential perpetrators who are marginalized.
    pub marginalized_share_of_perpetrators: f64,
    pub events: EventCounts,
    /// Set on the tick that ended the run.
    pub stop: Option<StopReason>,
}

/// Metrics for the post-tick state `agents` at `tick`.
pub fn snapshot_metrics(
    tick: u64,
    agents: &[Agent],
    config: &ModelConfig,
    outcomes: &[InteractionOutcome],
) -> TickMetrics {
    let all = SliceMetrics::of(agents.iter(), config);
    let p = SliceMetrics::of(agents.iter().filter(|a| a.group == Group::NonMarginalized), config);
    let m = SliceMetrics::of(agents.iter().filter(|a| a.group == Group::Marginalized), config);
    let t = config.thresholds.action;
    let perps = agents.iter().filter(|a| a.c1 >= t).count();
    let m_perps = agents.iter().filter(|a| a.c1 >= t && a.group == Group::Marginalized).count();
    let share = if perps == 0 { 0.0 } else { 100.0 * m_perps as f64 / perps as f64 };
    TickMetrics {
        tick,
        all,
        p,
        m,
        marginalized_share_of_perpetrators: share,
        events: EventCounts::tally(outcomes),
        stop: None,
    }
}

/// Column-major view used by plots and tests.
pub fn column(series: &[TickMetrics], f: impl Fn(&TickMetrics) -> f64) -> Vec<f64> {
    series.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agents(values: &[(Group, f64)]) -> Vec<Agent> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(group, c1))| Agent { id: i as u32, group, c1, c2: 10.0 })
            .collect()
    }

    #[test]
    fn grey_band_is_all_neutral() {
        let c = ModelConfig::default();
        let a = agents(&[(Group::NonMarginalized, 30.0), (Group::Marginalized, 30.0)]);
        let m = snapshot_metrics(0, &a, &c, &[]);
        assert_eq!(m.all.pct_neutral_reactors, 100.0);
        assert_eq!(m.all.pct_positive_reactors, 0.0);
        assert_eq!(m.all.pct_negative_reactors, 0.0);
        assert_eq!(m.all.pct_potential_perpetrators, 0.0);
        assert_eq!(m.marginalized_share_of_perpetrators, 0.0);
    }

    #[test]
    fn slices_and_share() {
        let c = ModelConfig::default();
        let a = agents(&[
            (Group::NonMarginalized, 90.0),
            (Group::NonMarginalized, 70.0),
            (Group::NonMarginalized, 10.0),
            (Group::Marginalized, 80.0),
        ]);
        let m = snapshot_metrics(3, &a, &c, &[]);
        assert_eq!(m.tick, 3);
        assert_eq!((m.all.count, m.p.count, m.m.count), (4, 3, 1));
        assert_eq!(m.all.mean_c1, 62.5);
        assert_eq!(m.p.pct_potential_perpetrators, 200.0 / 3.0);
        assert_eq!(m.m.pct_positive_reactors, 100.0);
        assert_eq!(m.marginalized_share_of_perpetrators, 100.0 / 3.0);
        assert_eq!(m.p.pct_negative_reactors, 100.0 / 3.0);
    }

    #[test]
    fn empty_slice_is_zeroed() {
        let c = ModelConfig::default();
        let a = agents(&[(Group::NonMarginalized, 50.0)]);
        let m = snapshot_metrics(0, &a, &c, &[]);
        assert_eq!(m.m, SliceMetrics::default());
    }

    #[test]
    fn event_tally() {
        let base = InteractionOutcome {
            initiator_id: 0,
            partner_id: 1,
            reaction: None,
            accepted: None,
            perceived_partner_group: None,
            perceived_initiator_group: None,
            initiator_delta: [0.0; 2],
            partner_delta: [0.0; 2],
        };
        let mut neg = base.clone();
        neg.reaction = Some(Reaction::Negative);
        neg.accepted = Some(true);
        let mut neg2 = neg.clone();
        neg2.accepted = Some(false);
        let mut pos = base.clone();
        pos.reaction = Some(Reaction::Positive);
        let c = EventCounts::tally(&[base, neg, neg2, pos]);
        assert_eq!(c.interactions, 4);
        assert_eq!(c.actions, 3);
        assert_eq!((c.positive, c.neutral, c.negative), (1, 0, 2));
        assert_eq!((c.accepts, c.rejects), (1, 1));
    }
}
