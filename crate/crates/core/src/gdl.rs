//! Line-oriented game description language and level text format.
//!
//! A description file is a preamble (`game`, `grid`) followed by the sections
//! `SpriteSet:`, `InteractionSet:`, `TerminationSet:`, `LevelMapping:` and an
//! optional `LevelGenerator:`. Every declaration sits on its own line; named
//! arguments use `key=value`. Lines starting with `//` are comments.
//! See `docs/game-format.md` for the grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Identifier used as the collider of rules that fire at the screen boundary.
pub const EOS: &str = "EOS";

pub const DEFAULT_WIDTH: usize = 12;
pub const DEFAULT_HEIGHT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GdlError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: undeclared identifier `{name}`")]
    Undeclared { name: String, line: usize },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { name: String, line: usize },
    #[error("line {line}: duplicate mapping character `{ch}`")]
    DuplicateMapping { ch: char, line: usize },
    #[error("no avatar sprite declared")]
    MissingAvatar,
    #[error("line {line}: second avatar sprite `{name}`")]
    MultipleAvatars { name: String, line: usize },
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("level mapping has no floor character (a character mapped to no sprites)")]
    MissingFloor,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LevelError {
    #[error("level is empty")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}")]
    NonRectangular { row: usize, found: usize, expected: usize },
    #[error("level is {width}x{height}, game expects {expected_width}x{expected_height}")]
    WrongSize { width: usize, height: usize, expected_width: usize, expected_height: usize },
    #[error("unknown tile character `{ch}` at row {row}, column {col}")]
    UnknownChar { ch: char, row: usize, col: usize },
    #[error("level must contain exactly one avatar tile, found {found}")]
    AvatarCount { found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn delta(self) -> (i16, i16) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Behavior {
    Immovable,
    AvatarMover,
    /// `use` spawns `stype` on the tile the avatar faces.
    AvatarShooter {
        stype: String,
    },
    RandomNpc,
    Chaser,
    Fleeing,
    Missile {
        dir: Direction,
    },
    Spawner {
        stype: String,
        period: u32,
        cap: Option<u32>,
    },
    Flicker {
        lifetime: u32,
    },
    Resource,
    PortalGoal,
}

impl Behavior {
    pub fn keyword(&self) -> &'static str {
        match self {
            Behavior::Immovable => "immovable",
            Behavior::AvatarMover => "avatar-mover",
            Behavior::AvatarShooter { .. } => "avatar-shooter",
            Behavior::RandomNpc => "random-npc",
            Behavior::Chaser => "chaser",
            Behavior::Fleeing => "fleeing",
            Behavior::Missile { .. } => "missile",
            Behavior::Spawner { .. } => "spawner",
            Behavior::Flicker { .. } => "flicker",
            Behavior::Resource => "resource",
            Behavior::PortalGoal => "portal-goal",
        }
    }

    pub fn is_avatar(&self) -> bool {
        matches!(self, Behavior::AvatarMover | Behavior::AvatarShooter { .. })
    }
}

/// Scalar parameters accepted on sprite declarations.
pub const SPRITE_SCALAR_PARAMS: [&str; 4] = ["cooldown", "lifetime", "prob", "limit"];

#[derive(Clone, Debug, PartialEq)]
pub struct SpriteDef {
    pub id: String,
    pub behavior: Behavior,
    pub classes: Vec<String>,
    /// Avatar only: resource whose presence splits `use` presses in two.
    pub use_resource: Option<String>,
    pub params: BTreeMap<String, f64>,
}

impl SpriteDef {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Comparator::Lt => "lt",
            Comparator::Le => "le",
            Comparator::Eq => "eq",
            Comparator::Ge => "ge",
            Comparator::Gt => "gt",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }

    fn from_keyword(s: &str) -> Option<Comparator> {
        [Comparator::Lt, Comparator::Le, Comparator::Eq, Comparator::Ge, Comparator::Gt]
            .into_iter()
            .find(|c| c.keyword() == s)
    }
}

/// Predicate over the avatar's resource count, e.g. `key>=1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    pub resource: String,
    pub cmp: Comparator,
    pub count: i64,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.resource, self.cmp.symbol(), self.count)
    }
}

impl Condition {
    fn parse(s: &str) -> Option<Condition> {
        // longest operators first
        for (sym, cmp) in [
            ("<=", Comparator::Le),
            (">=", Comparator::Ge),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
            ("=", Comparator::Eq),
        ] {
            if let Some(pos) = s.find(sym) {
                let resource = s[..pos].trim();
                let count = s[pos + sym.len()..].trim().parse().ok()?;
                if resource.is_empty() {
                    return None;
                }
                return Some(Condition { resource: resource.to_string(), cmp, count });
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Effect {
    KillSprite,
    KillBoth,
    StepBack,
    /// Step back and flip orientation.
    ReverseDirection,
    CollectResource,
    TransformTo {
        stype: String,
    },
    Spawn {
        stype: String,
    },
    KillIfOtherHasMore {
        resource: String,
        limit: i64,
    },
    ChangeResource {
        resource: String,
        value: i64,
    },
    UndoAll,
}

impl Effect {
    pub fn keyword(&self) -> &'static str {
        match self {
            Effect::KillSprite => "killSprite",
            Effect::KillBoth => "killBoth",
            Effect::StepBack => "stepBack",
            Effect::ReverseDirection => "reverseDirection",
            Effect::CollectResource => "collectResource",
            Effect::TransformTo { .. } => "transformTo",
            Effect::Spawn { .. } => "spawn",
            Effect::KillIfOtherHasMore { .. } => "killIfOtherHasMore",
            Effect::ChangeResource { .. } => "changeResource",
            Effect::UndoAll => "undoAll",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRule {
    /// Sprite id or class name.
    pub actor: String,
    /// Sprite id, class name or [`EOS`].
    pub collider: String,
    pub effect: Effect,
    pub score: i64,
    pub condition: Option<Condition>,
    /// Probability that the rule fires on a matching pair.
    pub prob: f64,
    pub label: Option<String>,
    pub description: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Win,
    Loss,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Loss => "loss",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationKind {
    SpriteCounter { stype: String, limit: i64, cmp: Comparator },
    MultiSpriteCounter { stypes: Vec<String>, limit: i64 },
    Timeout { ticks: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminationRule {
    pub kind: TerminationKind,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileMapping {
    pub ch: u8,
    pub sprites: Vec<String>,
}

/// How the random level generator fills a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelTemplate {
    /// Character for the outer ring of tiles, if any.
    pub border: Option<u8>,
    /// Relative weights for interior non-avatar tiles.
    pub weights: Vec<(u8, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameDescription {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub sprites: Vec<SpriteDef>,
    pub interactions: Vec<InteractionRule>,
    pub terminations: Vec<TerminationRule>,
    pub level_mapping: Vec<TileMapping>,
    pub template: Option<LevelTemplate>,
}

impl GameDescription {
    pub fn sprite_index(&self, id: &str) -> Option<usize> {
        self.sprites.iter().position(|s| s.id == id)
    }

    pub fn sprite(&self, id: &str) -> Option<&SpriteDef> {
        self.sprites.iter().find(|s| s.id == id)
    }

    pub fn avatar_index(&self) -> usize {
        self.sprites.iter().position(|s| s.behavior.is_avatar()).expect("validated description has an avatar")
    }

    pub fn avatar(&self) -> &SpriteDef {
        &self.sprites[self.avatar_index()]
    }

    /// Mapping characters in declaration order.
    pub fn tile_alphabet(&self) -> Vec<u8> {
        self.level_mapping.iter().map(|m| m.ch).collect()
    }

    pub fn floor_char(&self) -> u8 {
        self.level_mapping
            .iter()
            .find(|m| m.sprites.is_empty())
            .map(|m| m.ch)
            .expect("validated description has a floor character")
    }

    /// The character whose stack contains the avatar.
    pub fn avatar_char(&self) -> u8 {
        let avatar = &self.avatar().id;
        self.level_mapping
            .iter()
            .find(|m| m.sprites.iter().any(|s| s == avatar))
            .map(|m| m.ch)
            .expect("validated description maps the avatar")
    }

    pub fn mapping(&self, ch: u8) -> Option<&[String]> {
        self.level_mapping.iter().find(|m| m.ch == ch).map(|m| m.sprites.as_slice())
    }

    /// Sprite ids that carry `class`, in declaration order.
    pub fn class_members(&self, class: &str) -> Vec<&str> {
        self.sprites.iter().filter(|s| s.classes.iter().any(|c| c == class)).map(|s| s.id.as_str()).collect()
    }

    pub fn is_class(&self, name: &str) -> bool {
        self.sprites.iter().any(|s| s.classes.iter().any(|c| c == name))
    }

    /// Whether `selector` (sprite id or class) covers the sprite `id`.
    pub fn selects(&self, selector: &str, id: &str) -> bool {
        if selector == id {
            return true;
        }
        self.sprite(id).is_some_and(|s| s.classes.iter().any(|c| c == selector))
    }

    /// Template used by the random generator; falls back to half floor and an
    /// even split of the remaining non-avatar characters.
    pub fn level_template(&self) -> LevelTemplate {
        if let Some(t) = &self.template {
            return t.clone();
        }
        let floor = self.floor_char();
        let avatar = self.avatar_char();
        let others: Vec<u8> = self.tile_alphabet().into_iter().filter(|&c| c != floor && c != avatar).collect();
        let mut weights = vec![(floor, 0.5)];
        let share = if others.is_empty() { 0.0 } else { 0.5 / others.len() as f64 };
        weights.extend(others.into_iter().map(|c| (c, share)));
        LevelTemplate { border: None, weights }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Preamble,
    Sprites,
    Interactions,
    Terminations,
    Mapping,
    Generator,
}

impl Section {
    fn header(s: &str) -> Option<Section> {
        match s {
            "SpriteSet:" => Some(Section::Sprites),
            "InteractionSet:" => Some(Section::Interactions),
            "TerminationSet:" => Some(Section::Terminations),
            "LevelMapping:" => Some(Section::Mapping),
            "LevelGenerator:" => Some(Section::Generator),
            _ => None,
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> GdlError {
    GdlError::Syntax { line, msg: msg.into() }
}

/// Splits on whitespace; a double-quoted run (possibly after `key=`) stays one token.
fn tokenize(text: &str, line: usize) -> Result<Vec<String>, GdlError> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => in_quotes = !in_quotes,
            '\\' if in_quotes => match chars.next() {
                Some(n) => cur.push(n),
                None => return Err(syntax(line, "dangling escape")),
            },
            c if c.is_whitespace() && !in_quotes => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if in_quotes {
        return Err(syntax(line, "unterminated string"));
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    Ok(tokens)
}

struct Args {
    line: usize,
    named: BTreeMap<String, String>,
    bare: Vec<String>,
}

impl Args {
    fn new(tokens: &[String], line: usize) -> Result<Args, GdlError> {
        let mut named = BTreeMap::new();
        let mut bare = Vec::new();
        for t in tokens {
            match t.split_once('=') {
                Some((k, v)) if !k.is_empty() && !k.contains(['<', '>']) => {
                    if named.insert(k.to_string(), v.to_string()).is_some() {
                        return Err(syntax(line, format!("argument `{k}` given twice")));
                    }
                }
                _ => bare.push(t.clone()),
            }
        }
        Ok(Args { line, named, bare })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.named.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String, GdlError> {
        self.take(key).ok_or_else(|| syntax(self.line, format!("missing argument `{key}=`")))
    }

    fn take_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, GdlError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => {
                v.parse().map(Some).map_err(|_| syntax(self.line, format!("`{key}` expects a number, got `{v}`")))
            }
        }
    }

    fn require_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, GdlError> {
        self.take_num(key)?.ok_or_else(|| syntax(self.line, format!("missing argument `{key}=`")))
    }

    fn finish(self) -> Result<(), GdlError> {
        if let Some(k) = self.named.keys().next() {
            return Err(syntax(self.line, format!("unknown argument `{k}`")));
        }
        if let Some(b) = self.bare.first() {
            return Err(syntax(self.line, format!("unexpected token `{b}`")));
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn ident(s: &str, line: usize) -> Result<String, GdlError> {
    if is_identifier(s) {
        Ok(s.to_string())
    } else {
        Err(syntax(line, format!("`{s}` is not a valid identifier")))
    }
}

fn parse_sprite(tokens: &[String], line: usize) -> Result<SpriteDef, GdlError> {
    if tokens.len() < 2 {
        return Err(syntax(line, "sprite declaration needs an id and a behavior"));
    }
    let id = ident(&tokens[0], line)?;
    if id == EOS {
        return Err(syntax(line, "`EOS` is reserved"));
    }
    let mut args = Args::new(&tokens[2..], line)?;
    let behavior = match tokens[1].as_str() {
        "immovable" => Behavior::Immovable,
        "avatar-mover" => Behavior::AvatarMover,
        "avatar-shooter" => Behavior::AvatarShooter { stype: ident(&args.require("stype")?, line)? },
        "random-npc" => Behavior::RandomNpc,
        "chaser" => Behavior::Chaser,
        "fleeing" => Behavior::Fleeing,
        "missile" => {
            let d = args.require("dir")?;
            let dir = Direction::parse(&d).ok_or_else(|| syntax(line, format!("unknown direction `{d}`")))?;
            Behavior::Missile { dir }
        }
        "spawner" => {
            let stype = ident(&args.require("stype")?, line)?;
            let period: u32 = args.require_num("period")?;
            if period == 0 {
                return Err(syntax(line, "spawner period must be at least 1"));
            }
            Behavior::Spawner { stype, period, cap: args.take_num("cap")? }
        }
        "flicker" => Behavior::Flicker { lifetime: args.require_num("lifetime")? },
        "resource" => Behavior::Resource,
        "portal-goal" => Behavior::PortalGoal,
        other => return Err(syntax(line, format!("unknown behavior `{other}`"))),
    };
    let classes = match args.take("class") {
        None => Vec::new(),
        Some(list) => list.split(',').map(|c| ident(c, line)).collect::<Result<_, _>>()?,
    };
    let use_resource = args.take("use_resource").map(|r| ident(&r, line)).transpose()?;
    if use_resource.is_some() && !behavior.is_avatar() {
        return Err(syntax(line, "`use_resource` is only valid on avatar sprites"));
    }
    let mut params = BTreeMap::new();
    for key in SPRITE_SCALAR_PARAMS {
        if let Some(v) = args.take_num::<f64>(key)? {
            if !(v.is_finite() && v >= 0.0) {
                return Err(syntax(line, format!("`{key}` must be a non-negative number")));
            }
            if key == "prob" && v > 1.0 {
                return Err(syntax(line, "`prob` must lie in [0, 1]"));
            }
            params.insert(key.to_string(), v);
        }
    }
    args.finish()?;
    Ok(SpriteDef { id, behavior, classes, use_resource, params })
}

fn parse_interaction(tokens: &[String], line: usize) -> Result<InteractionRule, GdlError> {
    if tokens.len() < 3 {
        return Err(syntax(line, "interaction needs actor, collider and effect"));
    }
    let actor = ident(&tokens[0], line)?;
    let collider = ident(&tokens[1], line)?;
    let mut args = Args::new(&tokens[3..], line)?;
    let effect = match tokens[2].as_str() {
        "killSprite" => Effect::KillSprite,
        "killBoth" => Effect::KillBoth,
        "stepBack" => Effect::StepBack,
        "reverseDirection" => Effect::ReverseDirection,
        "collectResource" => Effect::CollectResource,
        "transformTo" => Effect::TransformTo { stype: ident(&args.require("stype")?, line)? },
        "spawn" => Effect::Spawn { stype: ident(&args.require("stype")?, line)? },
        "killIfOtherHasMore" => Effect::KillIfOtherHasMore {
            resource: ident(&args.require("resource")?, line)?,
            limit: args.require_num("limit")?,
        },
        "changeResource" => Effect::ChangeResource {
            resource: ident(&args.require("resource")?, line)?,
            value: args.require_num("value")?,
        },
        "undoAll" => Effect::UndoAll,
        other => return Err(syntax(line, format!("unknown effect `{other}`"))),
    };
    let score = args.take_num("score")?.unwrap_or(0);
    let prob: f64 = args.take_num("prob")?.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&prob) {
        return Err(syntax(line, "`prob` must lie in [0, 1]"));
    }
    let condition = match args.take("if") {
        None => None,
        Some(c) => Some(Condition::parse(&c).ok_or_else(|| syntax(line, format!("bad condition `{c}`")))?),
    };
    let label = args.take("label").map(|l| ident(&l, line)).transpose()?;
    let description = args.take("desc");
    args.finish()?;
    Ok(InteractionRule { actor, collider, effect, score, condition, prob, label, description })
}

fn parse_termination(tokens: &[String], line: usize) -> Result<TerminationRule, GdlError> {
    if tokens.is_empty() {
        return Err(syntax(line, "empty termination"));
    }
    let mut args = Args::new(&tokens[1..], line)?;
    let outcome = match args.bare.as_slice() {
        [o] if o == "win" => Outcome::Win,
        [o] if o == "loss" => Outcome::Loss,
        _ => return Err(syntax(line, "termination needs exactly one of `win` or `loss`")),
    };
    args.bare.clear();
    let kind = match tokens[0].as_str() {
        "sprite-counter" => {
            let stype = ident(&args.require("stype")?, line)?;
            let limit = args.take_num("limit")?.unwrap_or(0);
            let cmp = match args.take("cmp") {
                None => Comparator::Le,
                Some(c) => {
                    Comparator::from_keyword(&c).ok_or_else(|| syntax(line, format!("unknown comparator `{c}`")))?
                }
            };
            TerminationKind::SpriteCounter { stype, limit, cmp }
        }
        "multi-sprite-counter" => {
            let stypes = args.require("stypes")?.split(',').map(|s| ident(s, line)).collect::<Result<Vec<_>, _>>()?;
            TerminationKind::MultiSpriteCounter { stypes, limit: args.take_num("limit")?.unwrap_or(0) }
        }
        "timeout" => TerminationKind::Timeout { ticks: args.require_num("ticks")? },
        other => return Err(syntax(line, format!("unknown termination `{other}`"))),
    };
    args.finish()?;
    Ok(TerminationRule { kind, outcome })
}

fn parse_mapping(tokens: &[String], line: usize) -> Result<TileMapping, GdlError> {
    if tokens.len() < 2 || tokens[1] != "=" {
        return Err(syntax(line, "mapping must look like `<char> = <sprite>...`"));
    }
    let ch = match tokens[0].as_bytes() {
        [c] if c.is_ascii_graphic() => *c,
        _ => return Err(syntax(line, format!("`{}` is not a single printable character", tokens[0]))),
    };
    let sprites = tokens[2..].iter().map(|t| ident(t, line)).collect::<Result<_, _>>()?;
    Ok(TileMapping { ch, sprites })
}

enum GenLine {
    Border(u8),
    Weight(u8, f64),
}

fn parse_generator(tokens: &[String], line: usize) -> Result<GenLine, GdlError> {
    let ch = |t: &str| match t.as_bytes() {
        [c] if c.is_ascii_graphic() => Ok(*c),
        _ => Err(syntax(line, format!("`{t}` is not a single printable character"))),
    };
    match tokens {
        [k, c] if k == "border" => Ok(GenLine::Border(ch(c)?)),
        [k, c, w] if k == "weight" => {
            let w: f64 = w.parse().map_err(|_| syntax(line, format!("bad weight `{w}`")))?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(syntax(line, "weights must be non-negative"));
            }
            Ok(GenLine::Weight(ch(c)?, w))
        }
        _ => Err(syntax(line, "expected `border <char>` or `weight <char> <w>`")),
    }
}

/// Parses and validates a game description.
pub fn parse_game(text: &str) -> Result<GameDescription, GdlError> {
    let mut name = None;
    let (mut width, mut height) = (DEFAULT_WIDTH, DEFAULT_HEIGHT);
    let mut section = Section::Preamble;
    let mut seen = BTreeSet::new();

    let mut sprites: Vec<(SpriteDef, usize)> = Vec::new();
    let mut interactions: Vec<(InteractionRule, usize)> = Vec::new();
    let mut terminations: Vec<(TerminationRule, usize)> = Vec::new();
    let mut mapping: Vec<(TileMapping, usize)> = Vec::new();
    let mut border = None;
    let mut weights: Vec<(u8, f64, usize)> = Vec::new();
    let mut has_generator = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        if let Some(s) = Section::header(trimmed) {
            if !seen.insert(trimmed.to_string()) {
                return Err(syntax(line, format!("section `{trimmed}` appears twice")));
            }
            has_generator |= s == Section::Generator;
            section = s;
            continue;
        }
        let tokens = tokenize(trimmed, line)?;
        match section {
            Section::Preamble => match tokens.as_slice() {
                [k, n] if k == "game" => name = Some(ident(n, line)?),
                [k, dims] if k == "grid" => {
                    let parsed = dims
                        .split_once('x')
                        .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)));
                    match parsed {
                        Some((w, h)) if w > 0 && h > 0 && w <= 255 && h <= 255 => (width, height) = (w, h),
                        _ => return Err(syntax(line, format!("bad grid size `{dims}`"))),
                    }
                }
                _ => return Err(syntax(line, "expected `game <name>`, `grid <W>x<H>` or a section header")),
            },
            Section::Sprites => sprites.push((parse_sprite(&tokens, line)?, line)),
            Section::Interactions => interactions.push((parse_interaction(&tokens, line)?, line)),
            Section::Terminations => terminations.push((parse_termination(&tokens, line)?, line)),
            Section::Mapping => mapping.push((parse_mapping(&tokens, line)?, line)),
            Section::Generator => match parse_generator(&tokens, line)? {
                GenLine::Border(c) => {
                    if border.replace(c).is_some() {
                        return Err(syntax(line, "border given twice"));
                    }
                }
                GenLine::Weight(c, w) => weights.push((c, w, line)),
            },
        }
    }

    for (header, what) in [
        ("SpriteSet:", "SpriteSet"),
        ("InteractionSet:", "InteractionSet"),
        ("TerminationSet:", "TerminationSet"),
        ("LevelMapping:", "LevelMapping"),
    ] {
        if !seen.contains(header) {
            return Err(GdlError::MissingSection(what));
        }
    }
    let name = name.ok_or_else(|| GdlError::Invalid("missing `game <name>` line".into()))?;

    validate(&sprites, &interactions, &terminations, &mapping)?;

    let level_mapping: Vec<TileMapping> = mapping.into_iter().map(|(m, _)| m).collect();
    let template = if has_generator {
        for &(c, _, line) in &weights {
            if !level_mapping.iter().any(|m| m.ch == c) {
                return Err(GdlError::Undeclared { name: (c as char).to_string(), line });
            }
        }
        Some(LevelTemplate { border, weights: weights.into_iter().map(|(c, w, _)| (c, w)).collect() })
    } else {
        None
    };

    let desc = GameDescription {
        name,
        width,
        height,
        sprites: sprites.into_iter().map(|(s, _)| s).collect(),
        interactions: interactions.into_iter().map(|(r, _)| r).collect(),
        terminations: terminations.into_iter().map(|(t, _)| t).collect(),
        level_mapping,
        template,
    };
    validate_template(&desc)?;
    Ok(desc)
}

fn validate(
    sprites: &[(SpriteDef, usize)],
    interactions: &[(InteractionRule, usize)],
    terminations: &[(TerminationRule, usize)],
    mapping: &[(TileMapping, usize)],
) -> Result<(), GdlError> {
    let mut ids = BTreeSet::new();
    for (s, line) in sprites {
        if !ids.insert(s.id.as_str()) {
            return Err(GdlError::Duplicate { name: s.id.clone(), line: *line });
        }
    }
    let classes: BTreeSet<&str> = sprites.iter().flat_map(|(s, _)| s.classes.iter().map(String::as_str)).collect();
    if let Some(clash) = classes.iter().find(|c| ids.contains(*c)) {
        let line = sprites.iter().find(|(s, _)| s.classes.iter().any(|c| c == clash)).map_or(0, |(_, l)| *l);
        return Err(GdlError::Duplicate { name: clash.to_string(), line });
    }
    let sprite_ok = |name: &str, line: usize| {
        if ids.contains(name) {
            Ok(())
        } else {
            Err(GdlError::Undeclared { name: name.to_string(), line })
        }
    };
    let selector_ok = |name: &str, line: usize| {
        if ids.contains(name) || classes.contains(name) {
            Ok(())
        } else {
            Err(GdlError::Undeclared { name: name.to_string(), line })
        }
    };
    let resource_ok = |name: &str, line: usize| match sprites.iter().find(|(s, _)| s.id == name) {
        Some((s, _)) if s.behavior == Behavior::Resource => Ok(()),
        Some(_) => Err(GdlError::Invalid(format!("line {line}: `{name}` is not a resource sprite"))),
        None => Err(GdlError::Undeclared { name: name.to_string(), line }),
    };

    let mut avatar: Option<&str> = None;
    for (s, line) in sprites {
        match &s.behavior {
            Behavior::AvatarShooter { stype } | Behavior::Spawner { stype, .. } => sprite_ok(stype, *line)?,
            _ => {}
        }
        if let Some(r) = &s.use_resource {
            resource_ok(r, *line)?;
        }
        if s.behavior.is_avatar() {
            if avatar.is_some() {
                return Err(GdlError::MultipleAvatars { name: s.id.clone(), line: *line });
            }
            avatar = Some(&s.id);
        }
    }
    let avatar = avatar.ok_or(GdlError::MissingAvatar)?;

    for (r, line) in interactions {
        selector_ok(&r.actor, *line)?;
        if r.collider != EOS {
            selector_ok(&r.collider, *line)?;
        }
        match &r.effect {
            Effect::TransformTo { stype } | Effect::Spawn { stype } => sprite_ok(stype, *line)?,
            Effect::KillIfOtherHasMore { resource, .. } | Effect::ChangeResource { resource, .. } => {
                resource_ok(resource, *line)?
            }
            _ => {}
        }
        if let Some(c) = &r.condition {
            resource_ok(&c.resource, *line)?;
        }
    }
    for (t, line) in terminations {
        match &t.kind {
            TerminationKind::SpriteCounter { stype, .. } => selector_ok(stype, *line)?,
            TerminationKind::MultiSpriteCounter { stypes, .. } => {
                for s in stypes {
                    selector_ok(s, *line)?;
                }
            }
            TerminationKind::Timeout { .. } => {}
        }
    }

    let mut chars = BTreeSet::new();
    let mut avatar_chars = 0;
    for (m, line) in mapping {
        if !chars.insert(m.ch) {
            return Err(GdlError::DuplicateMapping { ch: m.ch as char, line: *line });
        }
        for s in &m.sprites {
            sprite_ok(s, *line)?;
        }
        if m.sprites.iter().any(|s| s == avatar) {
            avatar_chars += 1;
        }
    }
    if !mapping.iter().any(|(m, _)| m.sprites.is_empty()) {
        return Err(GdlError::MissingFloor);
    }
    if mapping.iter().filter(|(m, _)| m.sprites.is_empty()).count() > 1 {
        return Err(GdlError::Invalid("more than one floor character".into()));
    }
    if avatar_chars != 1 {
        return Err(GdlError::Invalid(format!(
            "exactly one mapping character must place the avatar `{avatar}`, found {avatar_chars}"
        )));
    }
    Ok(())
}

fn validate_template(desc: &GameDescription) -> Result<(), GdlError> {
    let t = desc.level_template();
    let avatar = desc.avatar_char();
    if t.weights.iter().any(|&(c, _)| c == avatar) {
        return Err(GdlError::Invalid("the avatar character cannot carry a generator weight".into()));
    }
    if t.border == Some(avatar) {
        return Err(GdlError::Invalid("the avatar character cannot be the border".into()));
    }
    if let Some(b) = t.border {
        if desc.mapping(b).is_none() {
            return Err(GdlError::Invalid(format!("border character `{}` is not mapped", b as char)));
        }
        if desc.width < 3 || desc.height < 3 {
            return Err(GdlError::Invalid("a border needs a grid of at least 3x3".into()));
        }
    }
    let total: f64 = t.weights.iter().map(|&(_, w)| w).sum();
    let floor: f64 = t.weights.iter().filter(|&&(c, _)| c == desc.floor_char()).map(|&(_, w)| w).sum();
    if total <= 0.0 || floor / total < 0.5 {
        return Err(GdlError::Invalid("generator floor weight must be at least half of the total".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Writing

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for SpriteDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.id, self.behavior.keyword())?;
        match &self.behavior {
            Behavior::AvatarShooter { stype } => write!(f, " stype={stype}")?,
            Behavior::Missile { dir } => write!(f, " dir={}", dir.name())?,
            Behavior::Spawner { stype, period, cap } => {
                write!(f, " stype={stype} period={period}")?;
                if let Some(c) = cap {
                    write!(f, " cap={c}")?;
                }
            }
            Behavior::Flicker { lifetime } => write!(f, " lifetime={lifetime}")?,
            _ => {}
        }
        if let Some(r) = &self.use_resource {
            write!(f, " use_resource={r}")?;
        }
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        if !self.classes.is_empty() {
            write!(f, " class={}", self.classes.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for InteractionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.actor, self.collider, self.effect.keyword())?;
        match &self.effect {
            Effect::TransformTo { stype } | Effect::Spawn { stype } => write!(f, " stype={stype}")?,
            Effect::KillIfOtherHasMore { resource, limit } => write!(f, " resource={resource} limit={limit}")?,
            Effect::ChangeResource { resource, value } => write!(f, " resource={resource} value={value}")?,
            _ => {}
        }
        if self.score != 0 {
            write!(f, " score={}", self.score)?;
        }
        if let Some(c) = &self.condition {
            write!(f, " if={c}")?;
        }
        if self.prob != 1.0 {
            write!(f, " prob={}", self.prob)?;
        }
        if let Some(l) = &self.label {
            write!(f, " label={l}")?;
        }
        if let Some(d) = &self.description {
            write!(f, " desc={}", quote(d))?;
        }
        Ok(())
    }
}

impl fmt::Display for TerminationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TerminationKind::SpriteCounter { stype, limit, cmp } => {
                write!(f, "sprite-counter stype={stype} limit={limit}")?;
                if *cmp != Comparator::Le {
                    write!(f, " cmp={}", cmp.keyword())?;
                }
            }
            TerminationKind::MultiSpriteCounter { stypes, limit } => {
                write!(f, "multi-sprite-counter stypes={} limit={limit}", stypes.join(","))?
            }
            TerminationKind::Timeout { ticks } => write!(f, "timeout ticks={ticks}")?,
        }
        write!(f, " {}", self.outcome.name())
    }
}

impl fmt::Display for GameDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "game {}", self.name)?;
        writeln!(f, "grid {}x{}", self.width, self.height)?;
        writeln!(f, "SpriteSet:")?;
        for s in &self.sprites {
            writeln!(f, "{s}")?;
        }
        writeln!(f, "InteractionSet:")?;
        for r in &self.interactions {
            writeln!(f, "{r}")?;
        }
        writeln!(f, "TerminationSet:")?;
        for t in &self.terminations {
            writeln!(f, "{t}")?;
        }
        writeln!(f, "LevelMapping:")?;
        for m in &self.level_mapping {
            write!(f, "{} =", m.ch as char)?;
            for s in &m.sprites {
                write!(f, " {s}")?;
            }
            writeln!(f)?;
        }
        if let Some(t) = &self.template {
            writeln!(f, "LevelGenerator:")?;
            if let Some(b) = t.border {
                writeln!(f, "border {}", b as char)?;
            }
            for (c, w) in &t.weights {
                writeln!(f, "weight {} {w}", *c as char)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Levels

/// Row-major grid of tile characters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Level {
    width: usize,
    height: usize,
    tiles: Vec<u8>,
}

impl Level {
    /// Builds a grid without checking it against any game.
    pub fn from_tiles(width: usize, height: usize, tiles: Vec<u8>) -> Level {
        assert_eq!(tiles.len(), width * height, "tile count does not match dimensions");
        Level { width, height, tiles }
    }

    pub fn filled(width: usize, height: usize, ch: u8) -> Level {
        Level { width, height, tiles: vec![ch; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tiles(&self) -> &[u8] {
        &self.tiles
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.tiles[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, ch: u8) {
        self.tiles[y * self.width + x] = ch;
    }

    pub fn set_index(&mut self, idx: usize, ch: u8) {
        self.tiles[idx] = ch;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.tiles.chunks(self.width)
    }

    pub fn count(&self, ch: u8) -> usize {
        self.tiles.iter().filter(|&&c| c == ch).count()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            // tiles are ASCII by construction
            f.write_str(std::str::from_utf8(row).map_err(|_| fmt::Error)?)?;
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Checks a grid against the game's size, alphabet and single-avatar rule.
pub fn validate_level(level: &Level, desc: &GameDescription) -> Result<(), LevelError> {
    if level.width != desc.width || level.height != desc.height {
        return Err(LevelError::WrongSize {
            width: level.width,
            height: level.height,
            expected_width: desc.width,
            expected_height: desc.height,
        });
    }
    for (i, &c) in level.tiles.iter().enumerate() {
        if desc.mapping(c).is_none() {
            return Err(LevelError::UnknownChar { ch: c as char, row: i / level.width, col: i % level.width });
        }
    }
    let found = level.count(desc.avatar_char());
    if found != 1 {
        return Err(LevelError::AvatarCount { found });
    }
    Ok(())
}

pub fn parse_level(text: &str, desc: &GameDescription) -> Result<Level, LevelError> {
    let rows: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let rows = match rows.iter().rposition(|r| !r.is_empty()) {
        Some(last) => &rows[..=last],
        None => return Err(LevelError::Empty),
    };
    let width = rows[0].len();
    let mut tiles = Vec::with_capacity(width * rows.len());
    for (r, row) in rows.iter().enumerate() {
        for (c, ch) in row.chars().enumerate() {
            if !ch.is_ascii() || desc.mapping(ch as u8).is_none() {
                return Err(LevelError::UnknownChar { ch, row: r, col: c });
            }
        }
        if row.len() != width {
            return Err(LevelError::NonRectangular { row: r, found: row.len(), expected: width });
        }
        tiles.extend_from_slice(row.as_bytes());
    }
    let level = Level { width, height: rows.len(), tiles };
    validate_level(&level, desc)?;
    Ok(level)
}

pub fn serialize_level(level: &Level) -> String {
    level.to_string()
}
