//! Deterministic tick-based simulator over a [`GameDescription`].
//!
//! Each tick runs five phases in a fixed order: avatar action, NPC and
//! missile movement, lifetimes and spawners, collision resolution (rules in
//! declaration order), termination checks (in declaration order). All
//! randomness comes from the RNG carried inside [`GameState`], so a state can
//! be cloned and stepped as a forward model.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gdl::{Behavior, Comparator, Direction, Effect, GameDescription, Level, Outcome, TerminationKind, EOS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Nil,
    Up,
    Down,
    Left,
    Right,
    Use,
}

impl Action {
    /// Fixed order, also used for tie-breaking by search agents.
    pub const ALL: [Action; 6] = [Action::Nil, Action::Up, Action::Down, Action::Left, Action::Right, Action::Use];

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Up => Some(Direction::Up),
            Action::Down => Some(Direction::Down),
            Action::Left => Some(Direction::Left),
            Action::Right => Some(Direction::Right),
            Action::Nil | Action::Use => None,
        }
    }

    pub fn from_direction(d: Direction) -> Action {
        match d {
            Direction::Up => Action::Up,
            Direction::Down => Action::Down,
            Direction::Left => Action::Left,
            Direction::Right => Action::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Nil => "nil",
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Use => "use",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    Win,
    Loss,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Win => "win",
            Status::Loss => "loss",
        }
    }
}

impl From<Outcome> for Status {
    fn from(o: Outcome) -> Status {
        match o {
            Outcome::Win => Status::Win,
            Outcome::Loss => Status::Loss,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Participant {
    /// Index into the description's sprite list.
    Sprite(u16),
    Eos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Collision {
        rule: usize,
    },
    /// `with_resource` is `None` when the avatar has no `use_resource`.
    InputUse {
        with_resource: Option<bool>,
    },
    /// `rule` is `None` when the episode ran out of ticks.
    Termination {
        rule: Option<usize>,
        outcome: Outcome,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GameEvent {
    pub tick: u32,
    pub kind: EventKind,
    pub participants: [Option<Participant>; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpriteInstance {
    pub uid: u32,
    pub kind: u16,
    pub x: i16,
    pub y: i16,
    pub prev: (i16, i16),
    pub orientation: Direction,
    /// Ticks left before the sprite may move again.
    pub cooldown: u16,
    pub age: u32,
    pub spawned: u32,
    hit_eos: bool,
    alive: bool,
}

impl SpriteInstance {
    pub fn pos(&self) -> (i16, i16) {
        (self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameState {
    pub tick: u32,
    pub score: i64,
    pub status: Status,
    pub sprites: Vec<SpriteInstance>,
    /// Avatar resource counts, indexed like [`Simulator::resource_names`].
    pub resources: Vec<i64>,
    rng: ChaCha8Rng,
    next_uid: u32,
}

impl GameState {
    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }
}

/// Everything an episode produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayTrace {
    pub events: Vec<GameEvent>,
    pub actions: Vec<Action>,
    pub final_status: Status,
    pub final_tick: u32,
    pub score: i64,
    /// True when the episode hit `max_ticks` without a termination rule firing.
    pub timed_out: bool,
    pub seed: u64,
    pub max_ticks: u32,
}

#[derive(Clone, Debug)]
enum Movement {
    None,
    Random,
    Chase,
    Flee,
    Missile,
}

#[derive(Clone, Debug)]
struct Kind {
    movement: Movement,
    default_dir: Direction,
    /// Ticks between moves (1 = every tick).
    cooldown: u16,
    lifetime: Option<u32>,
    spawner: Option<(u16, u32, Option<u32>, f64)>,
    resource_limit: i64,
}

#[derive(Clone, Debug)]
enum CompiledEffect {
    KillSprite,
    KillBoth,
    StepBack,
    ReverseDirection,
    CollectResource,
    TransformTo(u16),
    Spawn(u16),
    KillIfOtherHasMore(usize, i64),
    ChangeResource(usize, i64),
    UndoAll,
}

#[derive(Clone, Debug)]
struct CompiledRule {
    effect: CompiledEffect,
    score: i64,
    condition: Option<(usize, Comparator, i64)>,
    prob: f64,
}

#[derive(Clone, Debug)]
enum CompiledTermination {
    Counter(Vec<u16>, Comparator, i64),
    Timeout(u32),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("level is {0}x{1} but the game grid is {2}x{3}")]
    LevelSize(usize, usize, usize, usize),
    #[error("tile `{0}` has no mapping")]
    UnknownTile(char),
}

/// A compiled game: lookup tables for the sprite kinds and rules of one
/// description. Cheap to share across threads.
#[derive(Debug)]
pub struct Simulator {
    desc: Arc<GameDescription>,
    kinds: Vec<Kind>,
    /// `pair_rules[a * n + b]`: rules whose actor selects kind `a` and collider kind `b`.
    pair_rules: Vec<Vec<u16>>,
    eos_rules: Vec<Vec<u16>>,
    rules: Vec<CompiledRule>,
    terminations: Vec<CompiledTermination>,
    resource_names: Vec<String>,
    resource_kinds: Vec<Option<usize>>,
    avatar_kind: u16,
    shooter_child: Option<u16>,
    use_resource: Option<usize>,
    mapping: Vec<Option<Vec<u16>>>,
}

fn default_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

impl Simulator {
    pub fn new(desc: Arc<GameDescription>) -> Simulator {
        let n = desc.sprites.len();
        assert!(n < u16::MAX as usize, "too many sprite kinds");
        let idx = |id: &str| desc.sprite_index(id).expect("validated sprite id") as u16;

        let resource_names: Vec<String> =
            desc.sprites.iter().filter(|s| s.behavior == Behavior::Resource).map(|s| s.id.clone()).collect();
        let res_idx = |id: &str| resource_names.iter().position(|r| r == id).expect("validated resource");
        let resource_kinds =
            desc.sprites.iter().map(|s| (s.behavior == Behavior::Resource).then(|| res_idx(&s.id))).collect();

        let kinds = desc
            .sprites
            .iter()
            .map(|s| {
                let (movement, default_dir) = match &s.behavior {
                    Behavior::RandomNpc => (Movement::Random, Direction::Down),
                    Behavior::Chaser => (Movement::Chase, Direction::Down),
                    Behavior::Fleeing => (Movement::Flee, Direction::Down),
                    Behavior::Missile { dir } => (Movement::Missile, *dir),
                    _ => (Movement::None, Direction::Down),
                };
                let lifetime = match &s.behavior {
                    Behavior::Flicker { lifetime } => Some(*lifetime),
                    _ => s.param("lifetime").map(|l| l as u32),
                };
                let spawner = match &s.behavior {
                    Behavior::Spawner { stype, period, cap } => {
                        Some((idx(stype), *period, *cap, s.param("prob").unwrap_or(1.0)))
                    }
                    _ => None,
                };
                Kind {
                    movement,
                    default_dir,
                    cooldown: s.param("cooldown").map_or(1, |c| (c as u16).max(1)),
                    lifetime,
                    spawner,
                    resource_limit: s.param("limit").map_or(i64::MAX, |l| l as i64),
                }
            })
            .collect();

        let mut pair_rules = vec![Vec::new(); n * n];
        let mut eos_rules = vec![Vec::new(); n];
        for (ri, r) in desc.interactions.iter().enumerate() {
            for a in 0..n {
                if !desc.selects(&r.actor, &desc.sprites[a].id) {
                    continue;
                }
                if r.collider == EOS {
                    eos_rules[a].push(ri as u16);
                    continue;
                }
                for b in 0..n {
                    if desc.selects(&r.collider, &desc.sprites[b].id) {
                        pair_rules[a * n + b].push(ri as u16);
                    }
                }
            }
        }

        let rules = desc
            .interactions
            .iter()
            .map(|r| CompiledRule {
                effect: match &r.effect {
                    Effect::KillSprite => CompiledEffect::KillSprite,
                    Effect::KillBoth => CompiledEffect::KillBoth,
                    Effect::StepBack => CompiledEffect::StepBack,
                    Effect::ReverseDirection => CompiledEffect::ReverseDirection,
                    Effect::CollectResource => CompiledEffect::CollectResource,
                    Effect::TransformTo { stype } => CompiledEffect::TransformTo(idx(stype)),
                    Effect::Spawn { stype } => CompiledEffect::Spawn(idx(stype)),
                    Effect::KillIfOtherHasMore { resource, limit } => {
                        CompiledEffect::KillIfOtherHasMore(res_idx(resource), *limit)
                    }
                    Effect::ChangeResource { resource, value } => {
                        CompiledEffect::ChangeResource(res_idx(resource), *value)
                    }
                    Effect::UndoAll => CompiledEffect::UndoAll,
                },
                score: r.score,
                condition: r.condition.as_ref().map(|c| (res_idx(&c.resource), c.cmp, c.count)),
                prob: r.prob,
            })
            .collect();

        let select_kinds = |sel: &str| -> Vec<u16> {
            (0..n).filter(|&k| desc.selects(sel, &desc.sprites[k].id)).map(|k| k as u16).collect()
        };
        let terminations = desc
            .terminations
            .iter()
            .map(|t| match &t.kind {
                TerminationKind::SpriteCounter { stype, limit, cmp } => {
                    CompiledTermination::Counter(select_kinds(stype), *cmp, *limit)
                }
                TerminationKind::MultiSpriteCounter { stypes, limit } => {
                    let mut ks: Vec<u16> = stypes.iter().flat_map(|s| select_kinds(s)).collect();
                    ks.sort_unstable();
                    ks.dedup();
                    CompiledTermination::Counter(ks, Comparator::Le, *limit)
                }
                TerminationKind::Timeout { ticks } => CompiledTermination::Timeout(*ticks),
            })
            .collect();

        let avatar = desc.avatar();
        let shooter_child = match &avatar.behavior {
            Behavior::AvatarShooter { stype } => Some(idx(stype)),
            _ => None,
        };
        let use_resource = avatar.use_resource.as_deref().map(res_idx);

        let mut mapping = vec![None; 128];
        for m in &desc.level_mapping {
            mapping[m.ch as usize] = Some(m.sprites.iter().map(|s| idx(s)).collect());
        }

        Simulator {
            avatar_kind: desc.avatar_index() as u16,
            desc,
            kinds,
            pair_rules,
            eos_rules,
            rules,
            terminations,
            resource_names,
            resource_kinds,
            shooter_child,
            use_resource,
            mapping,
        }
    }

    pub fn description(&self) -> &GameDescription {
        &self.desc
    }

    pub fn shared_description(&self) -> &Arc<GameDescription> {
        &self.desc
    }

    pub fn resource_names(&self) -> &[String] {
        &self.resource_names
    }

    pub fn resource(&self, state: &GameState, name: &str) -> i64 {
        self.resource_names.iter().position(|r| r == name).map_or(0, |i| state.resources[i])
    }

    pub fn kind_name(&self, kind: u16) -> &str {
        &self.desc.sprites[kind as usize].id
    }

    pub fn participant_name(&self, p: Participant) -> &str {
        match p {
            Participant::Sprite(k) => self.kind_name(k),
            Participant::Eos => EOS,
        }
    }

    pub fn avatar<'s>(&self, state: &'s GameState) -> Option<&'s SpriteInstance> {
        state.sprites.iter().find(|s| s.kind == self.avatar_kind)
    }

    /// Number of live sprites of the given kind.
    pub fn count_kind(&self, state: &GameState, kind: u16) -> usize {
        state.sprites.iter().filter(|s| s.kind == kind).count()
    }

    /// Instantiates a level: sprites in row-major order, stack order per tile.
    pub fn init_state(&self, level: &Level, seed: u64) -> Result<GameState, EngineError> {
        let d = &self.desc;
        if level.width() != d.width || level.height() != d.height {
            return Err(EngineError::LevelSize(level.width(), level.height(), d.width, d.height));
        }
        let mut state = GameState {
            tick: 0,
            score: 0,
            status: Status::Running,
            sprites: Vec::with_capacity(level.tiles().len() / 2),
            resources: vec![0; self.resource_names.len()],
            rng: default_rng(seed),
            next_uid: 0,
        };
        for y in 0..level.height() {
            for x in 0..level.width() {
                let ch = level.get(x, y);
                let stack = self
                    .mapping
                    .get(ch as usize)
                    .and_then(|m| m.as_ref())
                    .ok_or(EngineError::UnknownTile(ch as char))?;
                for &k in stack {
                    self.push_sprite(&mut state, k, x as i16, y as i16, None);
                }
            }
        }
        Ok(state)
    }

    fn push_sprite(&self, state: &mut GameState, kind: u16, x: i16, y: i16, orientation: Option<Direction>) {
        let k = &self.kinds[kind as usize];
        let orientation = match k.movement {
            Movement::Missile => k.default_dir,
            _ => orientation.unwrap_or(k.default_dir),
        };
        state.sprites.push(SpriteInstance {
            uid: state.next_uid,
            kind,
            x,
            y,
            prev: (x, y),
            orientation,
            cooldown: k.cooldown - 1,
            age: 0,
            spawned: 0,
            hit_eos: false,
            alive: true,
        });
        state.next_uid += 1;
    }

    fn in_bounds(&self, x: i16, y: i16) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.desc.width && (y as usize) < self.desc.height
    }

    fn try_move(&self, s: &mut SpriteInstance, dir: Direction) {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (s.x + dx, s.y + dy);
        if self.in_bounds(nx, ny) {
            s.x = nx;
            s.y = ny;
        } else {
            s.hit_eos = true;
        }
    }

    /// Advances `state` by one tick, returning the events it produced.
    pub fn step(&self, state: &mut GameState, action: Action) -> Vec<GameEvent> {
        let mut events = Vec::new();
        self.step_into(state, action, &mut events);
        events
    }

    /// Pure variant of [`Simulator::step`].
    pub fn advance(&self, state: &GameState, action: Action) -> (GameState, Vec<GameEvent>) {
        let mut next = state.clone();
        let events = self.step(&mut next, action);
        (next, events)
    }

    /// Like [`Simulator::step`] but appends events to a caller-owned buffer.
    ///
    /// Panics if the state has already terminated.
    pub fn step_into(&self, state: &mut GameState, action: Action, events: &mut Vec<GameEvent>) {
        assert!(state.is_running(), "step called on a terminated state");
        state.tick += 1;
        let tick = state.tick;
        for s in &mut state.sprites {
            s.prev = (s.x, s.y);
            s.hit_eos = false;
        }

        self.avatar_phase(state, action, events);
        self.movement_phase(state);
        self.spawn_phase(state);
        self.collision_phase(state, events);

        for (ti, t) in self.terminations.iter().enumerate() {
            let done = match t {
                CompiledTermination::Counter(kinds, cmp, limit) => {
                    let count = state.sprites.iter().filter(|s| kinds.contains(&s.kind)).count() as i64;
                    cmp.holds(count, *limit)
                }
                CompiledTermination::Timeout(ticks) => tick >= *ticks,
            };
            if done {
                let outcome = self.desc.terminations[ti].outcome;
                state.status = outcome.into();
                events.push(GameEvent {
                    tick,
                    kind: EventKind::Termination { rule: Some(ti), outcome },
                    participants: [None, None],
                });
                break;
            }
        }
    }

    fn avatar_phase(&self, state: &mut GameState, action: Action, events: &mut Vec<GameEvent>) {
        let Some(ai) = state.sprites.iter().position(|s| s.kind == self.avatar_kind) else {
            return;
        };
        match action {
            Action::Nil => {}
            Action::Use => {
                let with_resource = self.use_resource.map(|r| state.resources[r] >= 1);
                events.push(GameEvent {
                    tick: state.tick,
                    kind: EventKind::InputUse { with_resource },
                    participants: [Some(Participant::Sprite(self.avatar_kind)), None],
                });
                if let Some(child) = self.shooter_child {
                    let a = state.sprites[ai];
                    let (dx, dy) = a.orientation.delta();
                    if self.in_bounds(a.x + dx, a.y + dy) {
                        self.push_sprite(state, child, a.x + dx, a.y + dy, Some(a.orientation));
                    }
                }
            }
            dir_action => {
                let dir = dir_action.direction().expect("movement action");
                let mut a = state.sprites[ai];
                a.orientation = dir;
                if a.cooldown > 0 {
                    a.cooldown -= 1;
                } else {
                    self.try_move(&mut a, dir);
                    a.cooldown = self.kinds[a.kind as usize].cooldown - 1;
                }
                state.sprites[ai] = a;
            }
        }
    }

    fn movement_phase(&self, state: &mut GameState) {
        let avatar_pos = self.avatar(state).map(|a| a.pos());
        for i in 0..state.sprites.len() {
            let mut s = state.sprites[i];
            let kind = &self.kinds[s.kind as usize];
            if matches!(kind.movement, Movement::None) {
                continue;
            }
            if s.cooldown > 0 {
                s.cooldown -= 1;
                state.sprites[i] = s;
                continue;
            }
            s.cooldown = kind.cooldown - 1;
            match kind.movement {
                Movement::None => unreachable!(),
                Movement::Missile => {
                    let dir = s.orientation;
                    self.try_move(&mut s, dir);
                }
                Movement::Random => {
                    let dir = Direction::ALL[state.rng.random_range(0..4)];
                    s.orientation = dir;
                    self.try_move(&mut s, dir);
                }
                Movement::Chase | Movement::Flee => {
                    if let Some(target) = avatar_pos {
                        let chase = matches!(kind.movement, Movement::Chase);
                        if let Some(dir) = self.pursuit_direction(s.pos(), target, chase) {
                            s.orientation = dir;
                            self.try_move(&mut s, dir);
                        }
                    }
                }
            }
            state.sprites[i] = s;
        }
    }

    /// Direction that most reduces (chase) or increases (flee) the Manhattan
    /// distance to `target`; first in fixed order on ties, `None` if no move helps.
    fn pursuit_direction(&self, from: (i16, i16), target: (i16, i16), chase: bool) -> Option<Direction> {
        let dist = |(x, y): (i16, i16)| (x - target.0).abs() + (y - target.1).abs();
        let here = dist(from);
        let mut best: Option<(Direction, i16)> = None;
        for dir in Direction::ALL {
            let (dx, dy) = dir.delta();
            let next = (from.0 + dx, from.1 + dy);
            if !self.in_bounds(next.0, next.1) {
                continue;
            }
            let gain = if chase { here - dist(next) } else { dist(next) - here };
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((dir, gain));
            }
        }
        best.map(|(d, _)| d)
    }

    fn spawn_phase(&self, state: &mut GameState) {
        let n = state.sprites.len();
        let mut any_dead = false;
        for i in 0..n {
            let kind = &self.kinds[state.sprites[i].kind as usize];
            if let Some(lifetime) = kind.lifetime {
                if state.sprites[i].age >= lifetime {
                    state.sprites[i].alive = false;
                    any_dead = true;
                    continue;
                }
            }
            state.sprites[i].age += 1;
            if let Some((child, period, cap, prob)) = kind.spawner {
                let s = state.sprites[i];
                if !s.age.is_multiple_of(period) || cap.is_some_and(|c| s.spawned >= c) {
                    continue;
                }
                if prob < 1.0 && !state.rng.random_bool(prob) {
                    continue;
                }
                state.sprites[i].spawned += 1;
                self.push_sprite(state, child, s.x, s.y, Some(s.orientation));
            }
        }
        if any_dead {
            state.sprites.retain(|s| s.alive);
        }
    }

    fn collision_phase(&self, state: &mut GameState, events: &mut Vec<GameEvent>) {
        let n = state.sprites.len();
        let kinds = self.kinds.len();
        let width = self.desc.width as i32;
        let tile = |s: &SpriteInstance| s.y as i32 * width + s.x as i32;

        // (rule, actor index, collider index or usize::MAX for EOS); indices
        // follow uid order because sprites are only ever appended.
        let mut triggers: Vec<(u16, usize, usize)> = Vec::new();
        let mut order: Vec<(i32, usize)> = (0..n).map(|i| (tile(&state.sprites[i]), i)).collect();
        order.sort_unstable();
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && order[end].0 == order[start].0 {
                end += 1;
            }
            if end - start > 1 {
                for p in start..end {
                    for q in start..end {
                        if p == q {
                            continue;
                        }
                        let (a, b) = (order[p].1, order[q].1);
                        let (ka, kb) = (state.sprites[a].kind as usize, state.sprites[b].kind as usize);
                        for &r in &self.pair_rules[ka * kinds + kb] {
                            triggers.push((r, a, b));
                        }
                    }
                }
            }
            start = end;
        }
        for (i, s) in state.sprites.iter().enumerate() {
            if s.hit_eos {
                for &r in &self.eos_rules[s.kind as usize] {
                    triggers.push((r, i, usize::MAX));
                }
            }
        }
        if triggers.is_empty() {
            return;
        }
        triggers.sort_unstable();

        let mut any_dead = false;
        for (r, a, b) in triggers {
            let eos = b == usize::MAX;
            if !state.sprites[a].alive || (!eos && !state.sprites[b].alive) {
                continue;
            }
            let rule = &self.rules[r as usize];
            if let Some((res, cmp, count)) = rule.condition {
                if !cmp.holds(state.resources[res], count) {
                    continue;
                }
            }
            if rule.prob < 1.0 && !state.rng.random_bool(rule.prob) {
                continue;
            }
            let other_is_avatar = !eos && state.sprites[b].kind == self.avatar_kind;
            let involves_avatar = other_is_avatar || state.sprites[a].kind == self.avatar_kind;
            match rule.effect {
                CompiledEffect::KillSprite => {
                    state.sprites[a].alive = false;
                    any_dead = true;
                }
                CompiledEffect::KillBoth => {
                    state.sprites[a].alive = false;
                    if !eos {
                        state.sprites[b].alive = false;
                    }
                    any_dead = true;
                }
                CompiledEffect::StepBack => {
                    let s = &mut state.sprites[a];
                    (s.x, s.y) = s.prev;
                }
                CompiledEffect::ReverseDirection => {
                    let s = &mut state.sprites[a];
                    (s.x, s.y) = s.prev;
                    s.orientation = s.orientation.reversed();
                }
                CompiledEffect::CollectResource => {
                    let ka = state.sprites[a].kind as usize;
                    if let (Some(res), true) = (self.resource_kinds[ka], other_is_avatar) {
                        if state.resources[res] < self.kinds[ka].resource_limit {
                            state.resources[res] += 1;
                            state.sprites[a].alive = false;
                            any_dead = true;
                        }
                    }
                }
                CompiledEffect::TransformTo(target) => {
                    let s = state.sprites[a];
                    state.sprites[a].alive = false;
                    any_dead = true;
                    self.push_sprite(state, target, s.x, s.y, Some(s.orientation));
                }
                CompiledEffect::Spawn(child) => {
                    let s = state.sprites[a];
                    self.push_sprite(state, child, s.x, s.y, Some(s.orientation));
                }
                CompiledEffect::KillIfOtherHasMore(res, limit) => {
                    if other_is_avatar && state.resources[res] >= limit {
                        state.sprites[a].alive = false;
                        any_dead = true;
                    }
                }
                CompiledEffect::ChangeResource(res, value) => {
                    if involves_avatar {
                        let limit = self
                            .resource_kinds
                            .iter()
                            .position(|r| *r == Some(res))
                            .map_or(i64::MAX, |k| self.kinds[k].resource_limit);
                        state.resources[res] = (state.resources[res] + value).clamp(0, limit);
                    }
                }
                CompiledEffect::UndoAll => {
                    for s in &mut state.sprites {
                        (s.x, s.y) = s.prev;
                    }
                }
            }
            state.score += rule.score;
            let actor = Participant::Sprite(state.sprites[a].kind);
            let collider = if eos { Participant::Eos } else { Participant::Sprite(state.sprites[b].kind) };
            events.push(GameEvent {
                tick: state.tick,
                kind: EventKind::Collision { rule: r as usize },
                participants: [Some(actor), Some(collider)],
            });
        }
        if any_dead {
            state.sprites.retain(|s| s.alive);
        }
    }

    /// Closes an episode that ran out of ticks: loss unless a timeout rule
    /// already decided otherwise.
    fn finish_timeout(&self, state: &mut GameState, events: &mut Vec<GameEvent>) {
        state.status = Status::Loss;
        events.push(GameEvent {
            tick: state.tick,
            kind: EventKind::Termination { rule: None, outcome: Outcome::Loss },
            participants: [None, None],
        });
    }

    /// Plays one episode with `agent` choosing actions.
    pub fn run_episode(
        &self,
        level: &Level,
        agent: &mut dyn crate::agents::Agent,
        max_ticks: u32,
        seed: u64,
    ) -> Result<PlayTrace, EngineError> {
        assert!(max_ticks >= 1, "max_ticks must be at least 1");
        let mut state = self.init_state(level, seed)?;
        let mut events = Vec::new();
        let mut actions = Vec::new();
        while state.is_running() && state.tick < max_ticks {
            let action = agent.act(self, &state);
            actions.push(action);
            self.step_into(&mut state, action, &mut events);
        }
        let timed_out = state.is_running();
        if timed_out {
            self.finish_timeout(&mut state, &mut events);
        }
        Ok(PlayTrace {
            events,
            actions,
            final_status: state.status,
            final_tick: state.tick,
            score: state.score,
            timed_out,
            seed,
            max_ticks,
        })
    }

    /// Re-plays recorded actions. When all `max_ticks` actions were replayed
    /// and the game is still running, the episode is closed the same way
    /// [`Simulator::run_episode`] closes it.
    pub fn replay(
        &self,
        level: &Level,
        actions: &[Action],
        seed: u64,
        max_ticks: Option<u32>,
    ) -> Result<(GameState, PlayTrace), EngineError> {
        let mut state = self.init_state(level, seed)?;
        let mut events = Vec::new();
        let mut played = Vec::new();
        for &a in actions {
            if !state.is_running() {
                break;
            }
            played.push(a);
            self.step_into(&mut state, a, &mut events);
        }
        let timed_out = state.is_running() && max_ticks.is_some_and(|m| state.tick >= m);
        if timed_out {
            self.finish_timeout(&mut state, &mut events);
        }
        let trace = PlayTrace {
            events,
            actions: played,
            final_status: state.status,
            final_tick: state.tick,
            score: state.score,
            timed_out,
            seed,
            max_ticks: max_ticks.unwrap_or(state.tick),
        };
        Ok((state, trace))
    }

    /// One line per event: `tick<TAB>kind<TAB>rule<TAB>participants`.
    pub fn format_event(&self, e: &GameEvent) -> String {
        let (kind, rule) = match e.kind {
            EventKind::Collision { rule } => ("collision".to_string(), rule.to_string()),
            EventKind::InputUse { with_resource } => {
                let k = match (with_resource, self.use_resource) {
                    (Some(true), Some(r)) => format!("use-with-{}", self.resource_names[r]),
                    (Some(false), Some(r)) => format!("use-without-{}", self.resource_names[r]),
                    _ => "use".to_string(),
                };
                (k, "-".to_string())
            }
            EventKind::Termination { rule, outcome } => {
                (format!("termination-{}", outcome.name()), rule.map_or("-".to_string(), |r| r.to_string()))
            }
        };
        let parts: Vec<&str> = e.participants.iter().flatten().map(|p| self.participant_name(*p)).collect();
        let parts = if parts.is_empty() { "-".to_string() } else { parts.join(",") };
        format!("{}\t{}\t{}\t{}", e.tick, kind, rule, parts)
    }

    /// Full trace log, ending with a `final` summary line.
    pub fn format_trace(&self, trace: &PlayTrace) -> String {
        let mut out = String::new();
        for e in &trace.events {
            out.push_str(&self.format_event(e));
            out.push('\n');
        }
        out.push_str(&format!(
            "final\tstatus={}\ttick={}\tscore={}\n",
            trace.final_status.name(),
            trace.final_tick,
            trace.score
        ));
        out
    }

    /// ASCII rendering of the top sprite on each tile ('.' for empty).
    pub fn render(&self, state: &GameState) -> String {
        let (w, h) = (self.desc.width, self.desc.height);
        let mut grid = vec![self.desc.floor_char(); w * h];
        for s in &state.sprites {
            let ch = self
                .desc
                .level_mapping
                .iter()
                .find(|m| m.sprites.first().is_some_and(|id| id == self.kind_name(s.kind)))
                .map_or(b'?', |m| m.ch);
            grid[s.y as usize * w + s.x as usize] = ch;
        }
        let mut out = String::with_capacity((w + 1) * h);
        for row in grid.chunks(w) {
            out.push_str(&String::from_utf8_lossy(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::IdleAgent;
    use crate::gdl::{parse_game, parse_level};

    const ARENA: &str = "\
game arena
grid 7x3
SpriteSet:
wall immovable
gem resource limit=1
avatar avatar-shooter stype=blade use_resource=gem
blade flicker lifetime=1
hunter chaser
dart missile dir=right
InteractionSet:
avatar wall stepBack label=bump
avatar hunter killSprite label=caught
hunter blade killSprite score=5 label=slash
gem avatar collectResource score=1 label=pick
dart EOS killSprite label=fade
TerminationSet:
sprite-counter stype=avatar limit=0 loss
LevelMapping:
. =
w = wall
g = gem
A = avatar
h = hunter
d = dart
";

    fn sim() -> Simulator {
        Simulator::new(Arc::new(parse_game(ARENA).unwrap()))
    }

    fn level(s: &Simulator, text: &str) -> Level {
        parse_level(text, s.description()).unwrap()
    }

    #[test]
    fn init_places_sprites_in_reading_order() {
        let s = sim();
        let st = s.init_state(&level(&s, ".......\n.A...h.\n.......\n"), 1).unwrap();
        assert_eq!(st.sprites.len(), 2);
        assert_eq!(s.kind_name(st.sprites[0].kind), "avatar");
        assert_eq!(st.sprites[1].pos(), (5, 1));
        assert_eq!(st, s.init_state(&level(&s, ".......\n.A...h.\n.......\n"), 1).unwrap());
    }

    #[test]
    fn nil_step_on_static_level_only_advances_tick() {
        let s = sim();
        let st = s.init_state(&level(&s, "wwwwwww\nwA...gw\nwwwwwww\n"), 3).unwrap();
        let (next, events) = s.advance(&st, Action::Nil);
        assert!(events.is_empty());
        assert_eq!(next.tick, 1);
        let layout = |g: &GameState| g.sprites.iter().map(|x| (x.kind, x.pos(), x.alive)).collect::<Vec<_>>();
        assert_eq!(layout(&next), layout(&st));
        assert!(next.sprites.iter().all(|x| x.age == 1));
        assert_eq!(next.score, st.score);
    }

    #[test]
    fn walking_into_wall_steps_back() {
        let s = sim();
        let mut st = s.init_state(&level(&s, "wwwwwww\nwA....w\nwwwwwww\n"), 0).unwrap();
        let ev = s.step(&mut st, Action::Up);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::Collision { rule: 0 });
        assert_eq!(s.avatar(&st).unwrap().pos(), (1, 1));
    }

    #[test]
    fn use_event_flags_resource() {
        let s = sim();
        let mut st = s.init_state(&level(&s, ".......\n.Ag....\n.......\n"), 0).unwrap();
        let ev = s.step(&mut st, Action::Use);
        assert_eq!(ev[0].kind, EventKind::InputUse { with_resource: Some(false) });
        let ev = s.step(&mut st, Action::Right);
        assert!(ev.iter().any(|e| e.kind == EventKind::Collision { rule: 3 }));
        assert_eq!(s.resource(&st, "gem"), 1);
        let ev = s.step(&mut st, Action::Use);
        assert_eq!(ev[0].kind, EventKind::InputUse { with_resource: Some(true) });
    }

    #[test]
    fn blade_kills_hunter_in_front() {
        let s = sim();
        let mut fresh = s.init_state(&level(&s, ".......\n.A..h..\n.......\n"), 0).unwrap();
        fresh.sprites[0].orientation = Direction::Right;
        let ev = s.step(&mut fresh, Action::Nil); // hunter moves to x=3
        assert!(ev.is_empty());
        // the hunter walks onto the freshly spawned blade
        let ev = s.step(&mut fresh, Action::Use);
        assert!(ev.iter().any(|e| e.kind == EventKind::Collision { rule: 2 }));
        assert_eq!(fresh.score, 5);
        assert_eq!(fresh.sprites.len(), 2); // avatar + blade
        let ev = s.step(&mut fresh, Action::Nil);
        assert!(ev.is_empty());
        assert_eq!(fresh.sprites.len(), 1, "blade expires after one tick");
    }

    #[test]
    fn missile_leaving_grid_fires_eos_rule() {
        let s = sim();
        let mut st = s.init_state(&level(&s, ".......\nA.....d\n.......\n"), 0).unwrap();
        let ev = s.step(&mut st, Action::Nil);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].participants[1], Some(Participant::Eos));
        assert_eq!(st.sprites.len(), 1);
    }

    #[test]
    fn idle_avatar_caught_by_chaser() {
        // hunter three tiles away moves one tile per tick
        let s = sim();
        let lvl = level(&s, ".......\n.A..h..\n.......\n");
        let trace = s.run_episode(&lvl, &mut IdleAgent, 100, 9).unwrap();
        assert_eq!(trace.final_status, Status::Loss);
        assert_eq!(trace.final_tick, 3);
        assert!(!trace.timed_out);
        assert!(trace.events.iter().any(|e| e.kind == EventKind::Collision { rule: 1 }));
    }

    #[test]
    fn idle_timeout_is_a_loss_at_max_ticks() {
        let s = sim();
        let lvl = level(&s, "wwwwwww\nwA...gw\nwwwwwww\n");
        let trace = s.run_episode(&lvl, &mut IdleAgent, 100, 0).unwrap();
        assert_eq!(trace.final_status, Status::Loss);
        assert_eq!(trace.final_tick, 100);
        assert!(trace.timed_out);
        assert_eq!(trace.events.len(), 1);
        assert_eq!(trace.events[0].kind, EventKind::Termination { rule: None, outcome: Outcome::Loss });
    }

    #[test]
    #[should_panic(expected = "terminated")]
    fn stepping_terminated_state_panics() {
        let s = sim();
        let mut st = s.init_state(&level(&s, ".......\n.Ah....\n.......\n"), 0).unwrap();
        s.step(&mut st, Action::Nil);
        assert_eq!(st.status, Status::Loss);
        s.step(&mut st, Action::Nil);
    }

    #[test]
    fn clone_is_independent() {
        let s = sim();
        let st = s.init_state(&level(&s, ".......\n.A..h..\n.......\n"), 0).unwrap();
        let snapshot = st.clone();
        let mut copy = st.clone();
        s.step(&mut copy, Action::Right);
        assert_eq!(st, snapshot);
        assert_ne!(copy, snapshot);
    }

    #[test]
    fn trace_format_is_tab_separated() {
        let s = sim();
        let lvl = level(&s, ".......\n.A..h..\n.......\n");
        let trace = s.run_episode(&lvl, &mut IdleAgent, 10, 0).unwrap();
        let log = s.format_trace(&trace);
        assert!(log.contains("3\tcollision\t1\tavatar,hunter\n"));
        assert!(log.ends_with("final\tstatus=loss\ttick=3\tscore=0\n"));
    }
}
