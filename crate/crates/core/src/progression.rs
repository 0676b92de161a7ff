//! The game-state engine.
//!
//! Every operation takes the current [`ProgressState`] by reference and
//! returns a new one; nothing here touches storage or the network. Callers
//! must serialize operations for the same learner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{BadgeDef, CatalogError, QuestCatalog};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgressError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("task `{quest_id}/{task_id}` is already completed")]
    AlreadyCompleted { quest_id: String, task_id: String },
    #[error("task `{quest_id}/{task_id}` is locked")]
    TaskLocked { quest_id: String, task_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedTask {
    pub quest_id: String,
    pub task_id: String,
    pub at: DateTime<Utc>,
}

/// One learner's persistent game state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressState {
    pub user: String,
    pub completed: Vec<CompletedTask>,
    pub xp: u32,
    pub level: u32,
    pub badges: BTreeSet<String>,
    /// Consecutive successful verifications since the last rejection.
    pub streak_counter: u32,
    /// Verification attempts per quest and task, successful ones included.
    pub attempts: BTreeMap<String, BTreeMap<String, u32>>,
    pub unlocked_quests: BTreeSet<String>,
    /// Issue number of each quest's instructions issue in the sandbox repo.
    pub quest_issues: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwardKind {
    TaskXp,
    LevelUp,
    QuestBadge,
    StreakBonus,
    StreakBadge,
    QuestUnlocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Award {
    TaskXp { quest_id: String, task_id: String, xp: u32 },
    StreakBonus { xp: u32, streak: u32 },
    StreakBadge { badge: BadgeDef },
    QuestBadge { quest_id: String, badge: BadgeDef },
    QuestUnlocked { quest_id: String, title: String },
    LevelUp { level: u32 },
}

impl Award {
    pub fn kind(&self) -> AwardKind {
        match self {
            Award::TaskXp { .. } => AwardKind::TaskXp,
            Award::StreakBonus { .. } => AwardKind::StreakBonus,
            Award::StreakBadge { .. } => AwardKind::StreakBadge,
            Award::QuestBadge { .. } => AwardKind::QuestBadge,
            Award::QuestUnlocked { .. } => AwardKind::QuestUnlocked,
            Award::LevelUp { .. } => AwardKind::LevelUp,
        }
    }

    /// XP carried by the award, zero for non-XP kinds.
    pub fn xp(&self) -> u32 {
        match self {
            Award::TaskXp { xp, .. } | Award::StreakBonus { xp, .. } => *xp,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Objective {
    Task { quest_id: String, task_id: String },
    AllComplete,
}

/// Exact completed/total task ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: u32,
    pub denominator: u32,
}

impl Fraction {
    /// `round(self * scale)` with halves rounded up, computed exactly.
    pub fn scaled_round_half_up(self, scale: u32) -> u32 {
        if self.denominator == 0 {
            return 0;
        }
        let n = u64::from(self.numerator) * u64::from(scale);
        let d = u64::from(self.denominator);
        ((2 * n + d) / (2 * d)) as u32
    }

    pub fn percent(self) -> u32 {
        self.scaled_round_half_up(100)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub quests_completed: u32,
    pub total_xp: u32,
    pub level: u32,
    pub progress_fraction: Fraction,
    pub badges: Vec<String>,
}

/// The largest level whose threshold is at most `xp` (levels start at 1).
pub fn level_for_xp(xp: u32, thresholds: &[u32]) -> u32 {
    thresholds.iter().skip(1).filter(|&&t| t <= xp).count() as u32 + 1
}

impl ProgressState {
    /// Fresh state: nothing earned, only the first quest unlocked. Quest
    /// issues default to `1..=n` in catalog order.
    pub fn new(user: &str, catalog: &QuestCatalog) -> Self {
        let quest_issues = catalog
            .quests
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.clone(), i as u64 + 1))
            .collect();
        ProgressState {
            user: user.to_string(),
            completed: Vec::new(),
            xp: 0,
            level: level_for_xp(0, &catalog.level_thresholds),
            badges: BTreeSet::new(),
            streak_counter: 0,
            attempts: BTreeMap::new(),
            unlocked_quests: catalog.quests.first().map(|q| q.id.clone()).into_iter().collect(),
            quest_issues,
        }
    }

    pub fn is_completed(&self, quest_id: &str, task_id: &str) -> bool {
        self.completed
            .iter()
            .any(|c| c.quest_id == quest_id && c.task_id == task_id)
    }

    pub fn quest_issue(&self, quest_id: &str) -> Option<u64> {
        self.quest_issues.get(quest_id).copied()
    }

    pub fn attempts_for(&self, quest_id: &str, task_id: &str) -> u32 {
        self.attempts
            .get(quest_id)
            .and_then(|m| m.get(task_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_quest_complete(&self, catalog: &QuestCatalog, quest_id: &str) -> bool {
        catalog
            .quest(quest_id)
            .is_some_and(|q| q.tasks.iter().all(|t| self.is_completed(&q.id, &t.id)))
    }

    /// Whether the task can currently be attempted: its quest is unlocked
    /// and, for sequential catalogs, every earlier task in the quest is done.
    pub fn is_task_unlocked(
        &self,
        catalog: &QuestCatalog,
        quest_id: &str,
        task_id: &str,
    ) -> Result<bool, ProgressError> {
        catalog.task(quest_id, task_id)?;
        if !self.unlocked_quests.contains(quest_id) {
            return Ok(false);
        }
        if !catalog.sequential_tasks {
            return Ok(true);
        }
        let quest = catalog.quest(quest_id).expect("checked above");
        Ok(quest
            .tasks
            .iter()
            .take_while(|t| t.id != task_id)
            .all(|t| self.is_completed(quest_id, &t.id)))
    }

    fn ensure_unlocked(&self, catalog: &QuestCatalog, quest_id: &str, task_id: &str) -> Result<(), ProgressError> {
        if self.is_task_unlocked(catalog, quest_id, task_id)? {
            Ok(())
        } else {
            Err(ProgressError::TaskLocked {
                quest_id: quest_id.to_string(),
                task_id: task_id.to_string(),
            })
        }
    }

    fn bump_attempts(&mut self, quest_id: &str, task_id: &str) {
        *self
            .attempts
            .entry(quest_id.to_string())
            .or_default()
            .entry(task_id.to_string())
            .or_insert(0) += 1;
    }

    fn gain_xp(&mut self, xp: u32, catalog: &QuestCatalog, awards: &mut Vec<Award>) {
        let before = self.level;
        self.xp += xp;
        self.level = level_for_xp(self.xp, &catalog.level_thresholds);
        awards.extend((before + 1..=self.level).map(|level| Award::LevelUp { level }));
    }

    /// Records a verified completion and returns the new state with every
    /// award it triggered, in the order they were earned.
    pub fn apply_completion(
        &self,
        catalog: &QuestCatalog,
        quest_id: &str,
        task_id: &str,
        at: DateTime<Utc>,
    ) -> Result<(ProgressState, Vec<Award>), ProgressError> {
        let task = catalog.task(quest_id, task_id)?;
        if self.is_completed(quest_id, task_id) {
            return Err(ProgressError::AlreadyCompleted {
                quest_id: quest_id.to_string(),
                task_id: task_id.to_string(),
            });
        }
        self.ensure_unlocked(catalog, quest_id, task_id)?;

        let mut next = self.clone();
        let mut awards = Vec::new();
        next.bump_attempts(quest_id, task_id);
        next.completed.push(CompletedTask {
            quest_id: quest_id.to_string(),
            task_id: task_id.to_string(),
            at,
        });
        awards.push(Award::TaskXp {
            quest_id: quest_id.to_string(),
            task_id: task_id.to_string(),
            xp: task.xp_reward,
        });
        next.gain_xp(task.xp_reward, catalog, &mut awards);

        next.streak_counter += 1;
        if next.streak_counter.is_multiple_of(catalog.streak_length) {
            if catalog.streak_bonus_xp > 0 {
                awards.push(Award::StreakBonus {
                    xp: catalog.streak_bonus_xp,
                    streak: next.streak_counter,
                });
                next.gain_xp(catalog.streak_bonus_xp, catalog, &mut awards);
            }
            if next.badges.insert(catalog.streak_badge.id.clone()) {
                awards.push(Award::StreakBadge {
                    badge: catalog.streak_badge.clone(),
                });
            }
        }

        if next.is_quest_complete(catalog, quest_id) {
            let qi = catalog.quest_index(quest_id).expect("task lookup succeeded");
            let quest = &catalog.quests[qi];
            if next.badges.insert(quest.completion_badge.id.clone()) {
                awards.push(Award::QuestBadge {
                    quest_id: quest_id.to_string(),
                    badge: quest.completion_badge.clone(),
                });
            }
            if let Some(following) = catalog.quests.get(qi + 1) {
                if next.unlocked_quests.insert(following.id.clone()) {
                    awards.push(Award::QuestUnlocked {
                        quest_id: following.id.clone(),
                        title: following.title.clone(),
                    });
                }
            }
        }

        // level-ups reported last, highest level last
        awards.sort_by_key(|a| matches!(a, Award::LevelUp { .. }));
        Ok((next, awards))
    }

    /// Records a rejected attempt: the streak resets, XP is untouched.
    pub fn record_failure(
        &self,
        catalog: &QuestCatalog,
        quest_id: &str,
        task_id: &str,
    ) -> Result<ProgressState, ProgressError> {
        self.ensure_unlocked(catalog, quest_id, task_id)?;
        let mut next = self.clone();
        next.streak_counter = 0;
        next.bump_attempts(quest_id, task_id);
        Ok(next)
    }

    /// The first unlocked, uncompleted task in catalog order.
    pub fn current_objective(&self, catalog: &QuestCatalog) -> Objective {
        catalog
            .iter_tasks()
            .find(|(q, t)| {
                !self.is_completed(&q.id, &t.id) && self.is_task_unlocked(catalog, &q.id, &t.id).unwrap_or(false)
            })
            .map(|(q, t)| Objective::Task {
                quest_id: q.id.clone(),
                task_id: t.id.clone(),
            })
            .unwrap_or(Objective::AllComplete)
    }

    pub fn stats(&self, catalog: &QuestCatalog) -> Stats {
        let quests_completed = catalog
            .quests
            .iter()
            .filter(|q| self.is_quest_complete(catalog, &q.id))
            .count() as u32;
        Stats {
            quests_completed,
            total_xp: self.xp,
            level: self.level,
            progress_fraction: Fraction {
                numerator: self.completed.len() as u32,
                denominator: catalog.total_tasks() as u32,
            },
            badges: self.badges.iter().cloned().collect(),
        }
    }

    /// Checks every state invariant against `catalog`.
    pub fn check_invariants(&self, catalog: &QuestCatalog) -> Result<(), String> {
        if self.user.is_empty() {
            return Err("user is empty".into());
        }
        let expected_level = level_for_xp(self.xp, &catalog.level_thresholds);
        if self.level != expected_level {
            return Err(format!(
                "level {} does not match xp {} (expected {expected_level})",
                self.level, self.xp
            ));
        }
        let mut seen = BTreeSet::new();
        for c in &self.completed {
            catalog
                .task(&c.quest_id, &c.task_id)
                .map_err(|e| format!("completed entry: {e}"))?;
            if !seen.insert((c.quest_id.as_str(), c.task_id.as_str())) {
                return Err(format!("task `{}/{}` completed twice", c.quest_id, c.task_id));
            }
        }
        if self.streak_counter as usize > self.completed.len() {
            return Err("streak exceeds completed tasks".into());
        }
        for quest in &catalog.quests {
            let done = self.is_quest_complete(catalog, &quest.id);
            if done != self.badges.contains(&quest.completion_badge.id) {
                return Err(format!("badge for quest `{}` inconsistent with completions", quest.id));
            }
        }
        for badge in &self.badges {
            if catalog.badge(badge).is_none() {
                return Err(format!("unknown badge `{badge}`"));
            }
        }
        for quest_id in &self.unlocked_quests {
            if catalog.quest(quest_id).is_none() {
                return Err(format!("unknown unlocked quest `{quest_id}`"));
            }
        }
        Ok(())
    }
}
