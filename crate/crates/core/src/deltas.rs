//! Conviction changes applied after an interaction.
//!
//! Keys follow the slider naming scheme `<p|m>_<c1|c2>_on_<event>[_<p|m>]`,
//! where the leading group is the agent being updated and the trailing group
//! is how that agent perceived its counterpart.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    NonMarginalized,
    Marginalized,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::NonMarginalized, Group::Marginalized];

    /// Slider prefix: `p` for non-marginalized, `m` for marginalized.
    pub fn prefix(self) -> &'static str {
        match self {
            Group::NonMarginalized => "p",
            Group::Marginalized => "m",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn from_prefix(s: &str) -> Option<Group> {
        match s {
            "p" => Some(Group::NonMarginalized),
            "m" => Some(Group::Marginalized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conviction {
    /// "microaggressions do not constitute a wrong"
    C1,
    /// "members of the marginalized group are overly sensitive"
    C2,
}

impl Conviction {
    pub const ALL: [Conviction; 2] = [Conviction::C1, Conviction::C2];

    pub fn name(self) -> &'static str {
        match self {
            Conviction::C1 => "c1",
            Conviction::C2 => "c2",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn from_name(s: &str) -> Option<Conviction> {
        match s {
            "c1" => Some(Conviction::C1),
            "c2" => Some(Conviction::C2),
            _ => None,
        }
    }
}

/// What happened to the agent receiving the delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeltaEvent {
    Idle,
    PositiveTo,
    PositiveFrom,
    NeutralTo,
    NeutralFrom,
    NegativeTo,
    NegativeAcceptedFrom,
    NegativeRejectedFrom,
}

impl DeltaEvent {
    const REACTIONS: [DeltaEvent; 7] = [
        DeltaEvent::PositiveTo,
        DeltaEvent::PositiveFrom,
        DeltaEvent::NeutralTo,
        DeltaEvent::NeutralFrom,
        DeltaEvent::NegativeTo,
        DeltaEvent::NegativeAcceptedFrom,
        DeltaEvent::NegativeRejectedFrom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeltaEvent::Idle => "idle",
            DeltaEvent::PositiveTo => "positive_to",
            DeltaEvent::PositiveFrom => "positive_from",
            DeltaEvent::NeutralTo => "neutral_to",
            DeltaEvent::NeutralFrom => "neutral_from",
            DeltaEvent::NegativeTo => "negative_to",
            DeltaEvent::NegativeAcceptedFrom => "negative_accepted_from",
            DeltaEvent::NegativeRejectedFrom => "negative_rejected_from",
        }
    }

    fn reaction_index(self) -> Option<usize> {
        Self::REACTIONS.iter().position(|e| *e == self)
    }
}

/// One entry of the delta table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeltaKey {
    pub group: Group,
    pub conviction: Conviction,
    pub event: DeltaEvent,
    /// Perceived counterpart group; `None` exactly for idle deltas.
    pub other: Option<Group>,
}

impl DeltaKey {
    pub fn name(&self) -> String {
        let base = format!("{}_{}_on_{}", self.group.prefix(), self.conviction.name(), self.event.name());
        match self.other {
            Some(other) => format!("{base}_{}", other.prefix()),
            None => base,
        }
    }

    pub fn parse(name: &str) -> Option<DeltaKey> {
        let (group, rest) = name.split_once('_')?;
        let group = Group::from_prefix(group)?;
        let (conviction, rest) = rest.split_once('_')?;
        let conviction = Conviction::from_name(conviction)?;
        let rest = rest.strip_prefix("on_")?;
        if rest == "idle" {
            return Some(DeltaKey { group, conviction, event: DeltaEvent::Idle, other: None });
        }
        let (event, other) = rest.rsplit_once('_')?;
        let other = Group::from_prefix(other)?;
        let event = *DeltaEvent::REACTIONS.iter().find(|e| e.name() == event)?;
        Some(DeltaKey { group, conviction, event, other: Some(other) })
    }

    /// All 60 keys, in canonical table order.
    pub fn all() -> Vec<DeltaKey> {
        let mut keys = Vec::with_capacity(60);
        for group in Group::ALL {
            for conviction in Conviction::ALL {
                keys.push(DeltaKey { group, conviction, event: DeltaEvent::Idle, other: None });
            }
        }
        let classes: [&[DeltaEvent]; 3] = [
            &[DeltaEvent::PositiveTo, DeltaEvent::PositiveFrom],
            &[DeltaEvent::NeutralTo, DeltaEvent::NeutralFrom],
            &[
                DeltaEvent::NegativeTo,
                DeltaEvent::NegativeAcceptedFrom,
                DeltaEvent::NegativeRejectedFrom,
            ],
        ];
        for class in classes {
            for group in Group::ALL {
                for conviction in Conviction::ALL {
                    for other in Group::ALL {
                        for &event in class {
                            keys.push(DeltaKey { group, conviction, event, other: Some(other) });
                        }
                    }
                }
            }
        }
        keys
    }
}

/// Signed percentage-point changes, indexed `[group][conviction]` for idle
/// and `[event][group][conviction][perceived other]` for reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    idle: [[f64; 2]; 2],
    reactions: [[[[f64; 2]; 2]; 2]; 7],
}

impl DeltaTable {
    pub fn zero() -> Self {
        Self { idle: [[0.0; 2]; 2], reactions: [[[[0.0; 2]; 2]; 2]; 7] }
    }

    pub fn get(&self, key: DeltaKey) -> f64 {
        *self.slot(key)
    }

    pub fn set(&mut self, key: DeltaKey, value: f64) {
        *self.get_mut(key) = value;
    }

    /// `(c1, c2)` change for an agent of `group` after `event`.
    pub fn pair(&self, group: Group, event: DeltaEvent, other: Option<Group>) -> [f64; 2] {
        Conviction::ALL.map(|conviction| self.get(DeltaKey { group, conviction, event, other }))
    }

    fn slot(&self, key: DeltaKey) -> &f64 {
        let (g, c) = (key.group.index(), key.conviction.index());
        match (key.event.reaction_index(), key.other) {
            (None, _) => &self.idle[g][c],
            (Some(e), Some(o)) => &self.reactions[e][g][c][o.index()],
            (Some(_), None) => panic!("reaction delta {:?} needs a counterpart group", key.event),
        }
    }

    pub(crate) fn get_mut(&mut self, key: DeltaKey) -> &mut f64 {
        let (g, c) = (key.group.index(), key.conviction.index());
        match (key.event.reaction_index(), key.other) {
            (None, _) => &mut self.idle[g][c],
            (Some(e), Some(o)) => &mut self.reactions[e][g][c][o.index()],
            (Some(_), None) => panic!("reaction delta {:?} needs a counterpart group", key.event),
        }
    }
}
