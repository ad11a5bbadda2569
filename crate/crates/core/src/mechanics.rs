//! Mechanic catalogs derived from a game description, and the binary
//! vectors that record which mechanics a play trace triggered.
//!
//! Input mechanics (pressing `use`) come first, then one mechanic per
//! interaction rule in declaration order. Rules that differ only by their
//! score change share a mechanic.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{EventKind, PlayTrace};
use crate::gdl::{Behavior, Effect, GameDescription};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MechanicsError {
    #[error("event refers to interaction rule {rule}, but the game has {count} rules")]
    RuleOutOfRange { rule: usize, count: usize },
    #[error("invalid mechanic vector `{0}`")]
    BadVector(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    /// Any of these interaction rules firing.
    Rules(Vec<usize>),
    /// The avatar pressing `use`; `holding` selects presses with or without
    /// the avatar's use-resource, `None` matches every press.
    Use { holding: Option<bool> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanicDef {
    pub index: usize,
    pub label: String,
    pub trigger: Trigger,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanicCatalog {
    pub game: String,
    pub mechanics: Vec<MechanicDef>,
    rule_to_mechanic: Vec<usize>,
    use_plain: Option<usize>,
    use_with: Option<usize>,
    use_without: Option<usize>,
}

impl MechanicCatalog {
    pub fn len(&self) -> usize {
        self.mechanics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mechanics.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.mechanics.iter().map(|m| m.label.as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.mechanics.iter().position(|m| m.label == label)
    }

    pub fn rule_count(&self) -> usize {
        self.rule_to_mechanic.len()
    }

    /// Number of archive cells the catalog spans (`2^n`).
    pub fn cell_count(&self) -> f64 {
        2f64.powi(self.len() as i32)
    }

    pub fn empty_vector(&self) -> MechanicVector {
        MechanicVector::zeros(self.len())
    }

    /// `index,label,description` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,label,description\n");
        for m in &self.mechanics {
            out.push_str(&format!("{},{},{}\n", m.index, csv_field(&m.label), csv_field(&m.description)));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Which mechanics fired; bit `i` corresponds to catalog entry `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MechanicVector {
    bits: Vec<bool>,
}

impl MechanicVector {
    pub fn zeros(n: usize) -> MechanicVector {
        MechanicVector { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> MechanicVector {
        MechanicVector { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize) {
        self.bits[i] = true;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Labels of the set bits.
    pub fn labels<'c>(&self, catalog: &'c MechanicCatalog) -> Vec<&'c str> {
        self.bits.iter().zip(&catalog.mechanics).filter(|(b, _)| **b).map(|(_, m)| m.label.as_str()).collect()
    }
}

impl fmt::Display for MechanicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for MechanicVector {
    type Err = MechanicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(MechanicsError::BadVector(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(MechanicVector::from_bits)
    }
}

fn effect_words(e: &Effect) -> String {
    match e {
        Effect::KillSprite => "is destroyed by".into(),
        Effect::KillBoth => "and the other are destroyed on contact with".into(),
        Effect::StepBack => "is pushed back by".into(),
        Effect::ReverseDirection => "bounces off".into(),
        Effect::CollectResource => "is collected by".into(),
        Effect::TransformTo { stype } => format!("turns into {stype} on contact with"),
        Effect::Spawn { stype } => format!("creates {stype} on contact with"),
        Effect::KillIfOtherHasMore { resource, limit } => {
            format!("is destroyed if holding {limit}+ {resource} by")
        }
        Effect::ChangeResource { resource, value } => format!("changes {resource} by {value} on contact with"),
        Effect::UndoAll => "undoes all moves on contact with".into(),
    }
}

fn kebab(s: &str) -> String {
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('-');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Builds the catalog straight from the description.
pub fn extract_mechanics(desc: &GameDescription) -> MechanicCatalog {
    let mut mechanics: Vec<MechanicDef> = Vec::new();
    let mut labels_taken = std::collections::BTreeSet::new();
    let mut add = |label: String, trigger: Trigger, description: String, mechanics: &mut Vec<MechanicDef>| {
        let mut unique = label.clone();
        let mut n = 2;
        while !labels_taken.insert(unique.clone()) {
            unique = format!("{label}-{n}");
            n += 1;
        }
        mechanics.push(MechanicDef { index: mechanics.len(), label: unique, trigger, description });
        mechanics.len() - 1
    };

    let avatar = desc.avatar();
    let (mut use_plain, mut use_with, mut use_without) = (None, None, None);
    match (&avatar.use_resource, &avatar.behavior) {
        (Some(r), _) => {
            use_without = Some(add(
                format!("space-no{r}"),
                Trigger::Use { holding: Some(false) },
                format!("avatar pressed use while holding no {r}"),
                &mut mechanics,
            ));
            use_with = Some(add(
                format!("space-with{r}"),
                Trigger::Use { holding: Some(true) },
                format!("avatar pressed use while holding {r}"),
                &mut mechanics,
            ));
        }
        (None, Behavior::AvatarShooter { .. }) => {
            use_plain =
                Some(add("space".into(), Trigger::Use { holding: None }, "avatar pressed use".into(), &mut mechanics));
        }
        _ => {}
    }

    let mut rule_to_mechanic: Vec<usize> = Vec::with_capacity(desc.interactions.len());
    for (ri, r) in desc.interactions.iter().enumerate() {
        let duplicate = desc.interactions[..ri].iter().position(|p| {
            p.actor == r.actor
                && p.collider == r.collider
                && p.effect == r.effect
                && p.condition == r.condition
                && p.prob == r.prob
        });
        if let Some(first) = duplicate {
            let m = rule_to_mechanic[first];
            if let Trigger::Rules(rules) = &mut mechanics[m].trigger {
                rules.push(ri);
            }
            rule_to_mechanic.push(m);
            continue;
        }
        let label = r
            .label
            .clone()
            .unwrap_or_else(|| format!("{}-{}-{}", r.actor, kebab(r.effect.keyword()), r.collider.to_lowercase()));
        let description = r.description.clone().unwrap_or_else(|| {
            let mut d = format!("{} {} {}", r.actor, effect_words(&r.effect), r.collider);
            if let Some(c) = &r.condition {
                d.push_str(&format!(" when {c}"));
            }
            d
        });
        rule_to_mechanic.push(add(label, Trigger::Rules(vec![ri]), description, &mut mechanics));
    }

    MechanicCatalog { game: desc.name.clone(), mechanics, rule_to_mechanic, use_plain, use_with, use_without }
}

/// Sets bit `i` iff some event in the trace matches mechanic `i`.
pub fn vector_from_trace(trace: &PlayTrace, catalog: &MechanicCatalog) -> Result<MechanicVector, MechanicsError> {
    let mut v = catalog.empty_vector();
    for e in &trace.events {
        let hit = match e.kind {
            EventKind::Collision { rule } => Some(
                *catalog
                    .rule_to_mechanic
                    .get(rule)
                    .ok_or(MechanicsError::RuleOutOfRange { rule, count: catalog.rule_count() })?,
            ),
            EventKind::InputUse { with_resource } => match with_resource {
                Some(true) => catalog.use_with,
                Some(false) => catalog.use_without,
                None => catalog.use_plain,
            },
            EventKind::Termination { .. } => None,
        };
        if let Some(i) = hit {
            v.set(i);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{GameEvent, Participant, Status};
    use crate::gdl::parse_game;
    use proptest::prelude::*;

    const GAME: &str = "\
game t
SpriteSet:
wall immovable
key resource limit=1
avatar avatar-shooter stype=sword use_resource=key
sword flicker lifetime=1
bat random-npc
InteractionSet:
avatar wall stepBack
bat sword killSprite score=1
bat sword killSprite score=3
key avatar collectResource label=grab
TerminationSet:
sprite-counter stype=avatar limit=0 loss
LevelMapping:
. =
w = wall
k = key
A = avatar
b = bat
";

    fn trace(events: Vec<EventKind>) -> PlayTrace {
        PlayTrace {
            events: events
                .into_iter()
                .enumerate()
                .map(|(i, kind)| GameEvent { tick: i as u32, kind, participants: [Some(Participant::Sprite(0)), None] })
                .collect(),
            actions: vec![],
            final_status: Status::Loss,
            final_tick: 0,
            score: 0,
            timed_out: true,
            seed: 0,
            max_ticks: 1,
        }
    }

    #[test]
    fn catalog_layout() {
        let c = extract_mechanics(&parse_game(GAME).unwrap());
        assert_eq!(
            c.labels(),
            ["space-nokey", "space-withkey", "avatar-step-back-wall", "bat-kill-sprite-sword", "grab"]
        );
        assert_eq!(c.mechanics[3].trigger, Trigger::Rules(vec![1, 2]));
        assert_eq!(c.rule_count(), 4);
        assert!(c.to_csv().starts_with("index,label,description\n0,space-nokey,"));
    }

    #[test]
    fn no_interactions_plain_mover_gives_empty_catalog() {
        let text = "game e\nSpriteSet:\navatar avatar-mover\nInteractionSet:\nTerminationSet:\nLevelMapping:\n. =\nA = avatar\n";
        let c = extract_mechanics(&parse_game(text).unwrap());
        assert!(c.is_empty());
        assert_eq!(c.cell_count(), 1.0);
    }

    #[test]
    fn empty_trace_gives_zero_vector() {
        let c = extract_mechanics(&parse_game(GAME).unwrap());
        assert_eq!(vector_from_trace(&trace(vec![]), &c).unwrap().to_string(), "00000");
    }

    #[test]
    fn repeats_and_duplicates_collapse() {
        let c = extract_mechanics(&parse_game(GAME).unwrap());
        let once = vector_from_trace(&trace(vec![EventKind::Collision { rule: 1 }]), &c).unwrap();
        let many = vector_from_trace(&trace(vec![EventKind::Collision { rule: 2 }; 5]), &c).unwrap();
        assert_eq!(once, many);
        assert_eq!(once.to_string(), "00010");
        let uses = vector_from_trace(
            &trace(vec![EventKind::InputUse { with_resource: Some(true) }, EventKind::Collision { rule: 3 }]),
            &c,
        )
        .unwrap();
        assert_eq!(uses.labels(&c), ["space-withkey", "grab"]);
    }

    #[test]
    fn out_of_range_rule_is_an_error() {
        let c = extract_mechanics(&parse_game(GAME).unwrap());
        let err = vector_from_trace(&trace(vec![EventKind::Collision { rule: 9 }]), &c).unwrap_err();
        assert_eq!(err, MechanicsError::RuleOutOfRange { rule: 9, count: 4 });
    }

    #[test]
    fn vector_text_round_trip() {
        let v: MechanicVector = "10100110".parse().unwrap();
        assert_eq!(v.count_ones(), 4);
        assert_eq!(v.to_string(), "10100110");
        assert!("10a".parse::<MechanicVector>().is_err());
    }

    fn event_strategy() -> impl Strategy<Value = EventKind> {
        prop_oneof![
            (0usize..4).prop_map(|rule| EventKind::Collision { rule }),
            any::<bool>().prop_map(|b| EventKind::InputUse { with_resource: Some(b) }),
        ]
    }

    proptest! {
        #[test]
        fn monotone_and_order_insensitive(
            events in prop::collection::vec(event_strategy(), 0..20),
            extra in prop::collection::vec(event_strategy(), 0..5),
        ) {
            let c = extract_mechanics(&parse_game(GAME).unwrap());
            let base = vector_from_trace(&trace(events.clone()), &c).unwrap();
            let mut reversed = events.clone();
            reversed.reverse();
            prop_assert_eq!(&base, &vector_from_trace(&trace(reversed), &c).unwrap());
            let mut more = events;
            more.extend(extra);
            let bigger = vector_from_trace(&trace(more), &c).unwrap();
            for i in 0..c.len() {
                prop_assert!(!base.get(i) || bigger.get(i));
            }
        }
    }
}
