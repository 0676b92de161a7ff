//! Quest catalog: the declarative curriculum of quests, tasks, verification
//! specs and reward parameters.
//!
//! Catalogs are written in TOML (see `assets/default_catalog.toml` for the
//! annotated default). [`load_catalog`] parses the text and validates every
//! invariant, reporting the path of the offending field. A loaded catalog is
//! immutable and can be shared freely between event handlers.

use std::collections::HashSet;
use std::fmt;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_CATALOG_TOML: &str = include_str!("../assets/default_catalog.toml");

/// Default pattern for [`Predicate::RequestsReview`] when the config gives none.
pub const DEFAULT_REVIEW_PATTERN: &str = r"\breview";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("catalog validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("unknown quest `{0}`")]
    UnknownQuest(String),
    #[error("unknown task `{task}` in quest `{quest}`")]
    UnknownTask { quest: String, task: String },
    #[error("task index {index} out of range for quest `{quest}` ({len} tasks)")]
    TaskIndexOutOfRange { quest: String, index: usize, len: usize },
}

impl CatalogError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        CatalogError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyTier {
    Exploration,
    Interaction,
    Contribution,
}

/// Repository event kinds the bot subscribes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IssueComment,
    IssueAssigned,
    PullRequestOpened,
    IssueClosed,
    ForkCreated,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::IssueComment,
        EventKind::IssueAssigned,
        EventKind::PullRequestOpened,
        EventKind::IssueClosed,
        EventKind::ForkCreated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::IssueComment => "issue_comment",
            EventKind::IssueAssigned => "issue_assigned",
            EventKind::PullRequestOpened => "pull_request_opened",
            EventKind::IssueClosed => "issue_closed",
            EventKind::ForkCreated => "fork_created",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether events of this kind happen on an issue (or pull request).
    pub fn has_issue(self) -> bool {
        !matches!(self, EventKind::ForkCreated)
    }

    /// Whether events of this kind carry free text.
    pub fn has_body(self) -> bool {
        matches!(self, EventKind::IssueComment | EventKind::PullRequestOpened)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A case-insensitive regular expression that remembers its source text.
#[derive(Clone)]
pub struct Pattern {
    source: String,
    regex: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Self, regex::Error> {
        let regex = RegexBuilder::new(source).case_insensitive(true).build()?;
        Ok(Pattern {
            source: source.to_string(),
            regex,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for Pattern {}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    AnswerPattern(Pattern),
    SelfAssignment,
    ContainsMention,
    LinksIssue,
    RequestsReview(Pattern),
    Always,
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::AnswerPattern(_) => "answer_pattern",
            Predicate::SelfAssignment => "self_assignment",
            Predicate::ContainsMention => "contains_mention",
            Predicate::LinksIssue => "links_issue",
            Predicate::RequestsReview(_) => "requests_review",
            Predicate::Always => "always",
        }
    }

    /// Whether this predicate can be evaluated on events of `kind`.
    pub fn supports(&self, kind: EventKind) -> bool {
        match self {
            Predicate::AnswerPattern(_) | Predicate::ContainsMention | Predicate::RequestsReview(_) => kind.has_body(),
            Predicate::SelfAssignment => kind == EventKind::IssueAssigned,
            Predicate::LinksIssue => kind == EventKind::PullRequestOpened,
            Predicate::Always => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationSpec {
    pub event_kind: EventKind,
    pub predicate: Predicate,
    pub quest_issue_scoped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadgeDef {
    pub id: String,
    pub name: String,
    pub icon: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub title: String,
    pub instructions: String,
    pub difficulty_tier: DifficultyTier,
    pub verification_spec: VerificationSpec,
    pub xp_reward: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quest {
    pub id: String,
    pub title: String,
    pub goal: String,
    pub tasks: Vec<Task>,
    pub completion_badge: BadgeDef,
}

impl Quest {
    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == task_id)
    }

    pub fn task_index(&self, task_id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == task_id)
    }
}

/// XP granted per difficulty tier when a task has no explicit `xp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierXp {
    pub exploration: u32,
    pub interaction: u32,
    pub contribution: u32,
}

impl TierXp {
    pub fn for_tier(&self, tier: DifficultyTier) -> u32 {
        match tier {
            DifficultyTier::Exploration => self.exploration,
            DifficultyTier::Interaction => self.interaction,
            DifficultyTier::Contribution => self.contribution,
        }
    }
}

impl Default for TierXp {
    fn default() -> Self {
        TierXp {
            exploration: 10,
            interaction: 20,
            contribution: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestCatalog {
    pub quests: Vec<Quest>,
    /// Cumulative XP needed for levels 1, 2, 3, ... (first entry is 0).
    pub level_thresholds: Vec<u32>,
    pub streak_length: u32,
    pub streak_bonus_xp: u32,
    pub streak_badge: BadgeDef,
    pub tier_xp: TierXp,
    /// Tasks inside a quest unlock one after another.
    pub sequential_tasks: bool,
}

impl QuestCatalog {
    pub fn quest(&self, quest_id: &str) -> Option<&Quest> {
        self.quests.iter().find(|q| q.id == quest_id)
    }

    pub fn quest_index(&self, quest_id: &str) -> Option<usize> {
        self.quests.iter().position(|q| q.id == quest_id)
    }

    pub fn task(&self, quest_id: &str, task_id: &str) -> Result<&Task, CatalogError> {
        let quest = self
            .quest(quest_id)
            .ok_or_else(|| CatalogError::UnknownQuest(quest_id.to_string()))?;
        quest.task(task_id).ok_or_else(|| CatalogError::UnknownTask {
            quest: quest_id.to_string(),
            task: task_id.to_string(),
        })
    }

    /// The task at an ordered position inside a quest.
    pub fn task_at(&self, quest_id: &str, index: usize) -> Result<&Task, CatalogError> {
        let quest = self
            .quest(quest_id)
            .ok_or_else(|| CatalogError::UnknownQuest(quest_id.to_string()))?;
        quest.tasks.get(index).ok_or_else(|| CatalogError::TaskIndexOutOfRange {
            quest: quest_id.to_string(),
            index,
            len: quest.tasks.len(),
        })
    }

    pub fn total_tasks(&self) -> usize {
        self.quests.iter().map(|q| q.tasks.len()).sum()
    }

    /// All tasks in catalog order, paired with their quest.
    pub fn iter_tasks(&self) -> impl Iterator<Item = (&Quest, &Task)> {
        self.quests.iter().flat_map(|q| q.tasks.iter().map(move |t| (q, t)))
    }

    /// Looks up a badge definition by id (quest badges and the streak badge).
    pub fn badge(&self, badge_id: &str) -> Option<&BadgeDef> {
        if self.streak_badge.id == badge_id {
            return Some(&self.streak_badge);
        }
        self.quests
            .iter()
            .map(|q| &q.completion_badge)
            .find(|b| b.id == badge_id)
    }

    /// Serializes the catalog back into its TOML config form.
    pub fn to_toml_string(&self) -> String {
        let raw = RawCatalog::from(self);
        toml::to_string(&raw).expect("catalog serializes to TOML")
    }
}

/// Parses and validates a catalog config.
pub fn load_catalog(config_text: &str) -> Result<QuestCatalog, CatalogError> {
    let raw: RawCatalog = toml::from_str(config_text).map_err(|e| CatalogError::Parse(e.to_string()))?;
    raw.validate()
}

/// The built-in three-quest curriculum.
pub fn default_catalog() -> QuestCatalog {
    load_catalog(DEFAULT_CATALOG_TOML).expect("shipped default catalog is valid")
}

/// Text of the shipped default config.
pub fn default_catalog_text() -> &'static str {
    DEFAULT_CATALOG_TOML
}

// ---------------------------------------------------------------------------
// Config file schema

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    #[serde(default = "default_true")]
    sequential_tasks: bool,
    rewards: RawRewards,
    #[serde(default, rename = "quest")]
    quests: Vec<RawQuest>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRewards {
    level_thresholds: Vec<u32>,
    streak_length: u32,
    streak_bonus_xp: u32,
    #[serde(default)]
    tier_xp: TierXp,
    streak_badge: BadgeDef,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuest {
    id: String,
    title: String,
    goal: String,
    badge: BadgeDef,
    #[serde(default, rename = "task")]
    tasks: Vec<RawTask>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    id: String,
    title: String,
    difficulty: DifficultyTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xp: Option<u32>,
    instructions: String,
    verify: RawVerify,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    event: String,
    predicate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    #[serde(default)]
    quest_issue_scoped: bool,
}

impl RawCatalog {
    fn validate(self) -> Result<QuestCatalog, CatalogError> {
        let rewards = self.rewards;
        let thresholds = rewards.level_thresholds;
        if thresholds.first() != Some(&0) {
            return Err(CatalogError::invalid(
                "rewards.level_thresholds",
                "first threshold must be 0",
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CatalogError::invalid(
                "rewards.level_thresholds",
                "thresholds must be strictly ascending",
            ));
        }
        if rewards.streak_length < 2 {
            return Err(CatalogError::invalid(
                "rewards.streak_length",
                "streak length must be at least 2",
            ));
        }
        for (tier, xp) in [
            ("exploration", rewards.tier_xp.exploration),
            ("interaction", rewards.tier_xp.interaction),
            ("contribution", rewards.tier_xp.contribution),
        ] {
            if xp == 0 {
                return Err(CatalogError::invalid(
                    format!("rewards.tier_xp.{tier}"),
                    "tier XP must be positive",
                ));
            }
        }
        if self.quests.is_empty() {
            return Err(CatalogError::invalid("quest", "at least one quest is required"));
        }

        let mut badge_ids = HashSet::new();
        check_badge(&rewards.streak_badge, "rewards.streak_badge", &mut badge_ids)?;

        let mut quest_ids = HashSet::new();
        let mut quests = Vec::with_capacity(self.quests.len());
        for (qi, rq) in self.quests.into_iter().enumerate() {
            let qpath = format!("quest[{qi}]");
            if rq.id.trim().is_empty() {
                return Err(CatalogError::invalid(format!("{qpath}.id"), "id must not be empty"));
            }
            if !quest_ids.insert(rq.id.clone()) {
                return Err(CatalogError::invalid(
                    format!("{qpath}.id"),
                    format!("duplicate quest id `{}`", rq.id),
                ));
            }
            check_badge(&rq.badge, &format!("{qpath}.badge"), &mut badge_ids)?;
            if rq.tasks.is_empty() {
                return Err(CatalogError::invalid(
                    format!("{qpath}.task"),
                    "a quest needs at least one task",
                ));
            }
            let mut task_ids = HashSet::new();
            let mut tasks = Vec::with_capacity(rq.tasks.len());
            for (ti, rt) in rq.tasks.into_iter().enumerate() {
                let tpath = format!("{qpath}.task[{ti}]");
                if rt.id.trim().is_empty() {
                    return Err(CatalogError::invalid(format!("{tpath}.id"), "id must not be empty"));
                }
                if !task_ids.insert(rt.id.clone()) {
                    return Err(CatalogError::invalid(
                        format!("{tpath}.id"),
                        format!("duplicate task id `{}`", rt.id),
                    ));
                }
                let xp_reward = rt.xp.unwrap_or_else(|| rewards.tier_xp.for_tier(rt.difficulty));
                if xp_reward == 0 {
                    return Err(CatalogError::invalid(format!("{tpath}.xp"), "xp must be positive"));
                }
                let verification_spec = rt.verify.validate(&format!("{tpath}.verify"))?;
                tasks.push(Task {
                    id: rt.id,
                    title: rt.title,
                    instructions: rt.instructions,
                    difficulty_tier: rt.difficulty,
                    verification_spec,
                    xp_reward,
                });
            }
            quests.push(Quest {
                id: rq.id,
                title: rq.title,
                goal: rq.goal,
                tasks,
                completion_badge: rq.badge,
            });
        }

        Ok(QuestCatalog {
            quests,
            level_thresholds: thresholds,
            streak_length: rewards.streak_length,
            streak_bonus_xp: rewards.streak_bonus_xp,
            streak_badge: rewards.streak_badge,
            tier_xp: rewards.tier_xp,
            sequential_tasks: self.sequential_tasks,
        })
    }
}

fn check_badge(badge: &BadgeDef, path: &str, seen: &mut HashSet<String>) -> Result<(), CatalogError> {
    if badge.id.trim().is_empty() {
        return Err(CatalogError::invalid(format!("{path}.id"), "id must not be empty"));
    }
    if !seen.insert(badge.id.clone()) {
        return Err(CatalogError::invalid(
            format!("{path}.id"),
            format!("duplicate badge id `{}`", badge.id),
        ));
    }
    Ok(())
}

impl RawVerify {
    fn validate(self, path: &str) -> Result<VerificationSpec, CatalogError> {
        let event_kind = EventKind::parse(&self.event).ok_or_else(|| {
            CatalogError::invalid(format!("{path}.event"), format!("unknown event kind `{}`", self.event))
        })?;
        let compile = |source: &str| {
            Pattern::new(source)
                .map_err(|e| CatalogError::invalid(format!("{path}.pattern"), format!("invalid regex: {e}")))
        };
        let predicate = match self.predicate.as_str() {
            "answer_pattern" => {
                let source = self.pattern.as_deref().ok_or_else(|| {
                    CatalogError::invalid(format!("{path}.pattern"), "answer_pattern requires a pattern")
                })?;
                Predicate::AnswerPattern(compile(source)?)
            }
            "requests_review" => {
                Predicate::RequestsReview(compile(self.pattern.as_deref().unwrap_or(DEFAULT_REVIEW_PATTERN))?)
            }
            other => {
                if self.pattern.is_some() {
                    return Err(CatalogError::invalid(
                        format!("{path}.pattern"),
                        format!("predicate `{other}` takes no pattern"),
                    ));
                }
                match other {
                    "self_assignment" => Predicate::SelfAssignment,
                    "contains_mention" => Predicate::ContainsMention,
                    "links_issue" => Predicate::LinksIssue,
                    "always" => Predicate::Always,
                    _ => {
                        return Err(CatalogError::invalid(
                            format!("{path}.predicate"),
                            format!("unknown predicate `{other}`"),
                        ))
                    }
                }
            }
        };
        if !predicate.supports(event_kind) {
            return Err(CatalogError::invalid(
                format!("{path}.predicate"),
                format!(
                    "predicate `{}` cannot be checked on `{}` events",
                    predicate.name(),
                    event_kind
                ),
            ));
        }
        if self.quest_issue_scoped && !event_kind.has_issue() {
            return Err(CatalogError::invalid(
                format!("{path}.quest_issue_scoped"),
                format!("`{event_kind}` events do not happen on an issue"),
            ));
        }
        Ok(VerificationSpec {
            event_kind,
            predicate,
            quest_issue_scoped: self.quest_issue_scoped,
        })
    }
}

impl From<&QuestCatalog> for RawCatalog {
    fn from(catalog: &QuestCatalog) -> Self {
        RawCatalog {
            sequential_tasks: catalog.sequential_tasks,
            rewards: RawRewards {
                level_thresholds: catalog.level_thresholds.clone(),
                streak_length: catalog.streak_length,
                streak_bonus_xp: catalog.streak_bonus_xp,
                tier_xp: catalog.tier_xp,
                streak_badge: catalog.streak_badge.clone(),
            },
            quests: catalog
                .quests
                .iter()
                .map(|q| RawQuest {
                    id: q.id.clone(),
                    title: q.title.clone(),
                    goal: q.goal.clone(),
                    badge: q.completion_badge.clone(),
                    tasks: q
                        .tasks
                        .iter()
                        .map(|t| {
                            let spec = &t.verification_spec;
                            let pattern = match &spec.predicate {
                                Predicate::AnswerPattern(p) | Predicate::RequestsReview(p) => {
                                    Some(p.as_str().to_string())
                                }
                                _ => None,
                            };
                            RawTask {
                                id: t.id.clone(),
                                title: t.title.clone(),
                                difficulty: t.difficulty_tier,
                                xp: Some(t.xp_reward),
                                instructions: t.instructions.clone(),
                                verify: RawVerify {
                                    event: spec.event_kind.as_str().to_string(),
                                    predicate: spec.predicate.name().to_string(),
                                    pattern,
                                    quest_issue_scoped: spec.quest_issue_scoped,
                                },
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
