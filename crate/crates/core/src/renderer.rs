//! Markdown output: the README dashboard and the bot's feedback comments.
//!
//! Both renderers are pure and byte-deterministic. Each dashboard section is
//! preceded by an `<!-- ossdoorway:<name> -->` anchor; the anchor names are a
//! stable contract.

use std::fmt::Write;

use crate::catalog::{Quest, QuestCatalog};
use crate::progression::{Award, Objective, ProgressState};
use crate::verification::VerificationOutcome;

pub const PROGRESS_BAR_WIDTH: u32 = 20;
pub const FILLED_CELL: char = '█';
pub const EMPTY_CELL: char = '░';
pub const MAP_DONE: &str = "✅";
pub const MAP_CURRENT: &str = "🔸";
pub const MAP_LOCKED: &str = "🔒";
pub const MAP_JOINER: &str = " ── ";

/// Section anchor names, in the order they appear in the dashboard.
pub const SECTIONS: [&str; 7] = ["header", "stats", "progress", "map", "quests", "badges", "streak"];

pub fn anchor(section: &str) -> String {
    format!("<!-- ossdoorway:{section} -->")
}

/// The text of one dashboard section, without its anchor line.
pub fn section<'a>(markdown: &'a str, name: &str) -> Option<&'a str> {
    let marker = anchor(name);
    let start = markdown.find(&marker)? + marker.len();
    let rest = &markdown[start..];
    let end = rest.find("<!-- ossdoorway:").unwrap_or(rest.len());
    Some(rest[..end].trim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QuestStatus {
    Done,
    Current,
    Locked,
}

impl QuestStatus {
    fn glyph(self) -> &'static str {
        match self {
            QuestStatus::Done => MAP_DONE,
            QuestStatus::Current => MAP_CURRENT,
            QuestStatus::Locked => MAP_LOCKED,
        }
    }
}

fn quest_status(state: &ProgressState, catalog: &QuestCatalog, quest_id: &str) -> QuestStatus {
    if state.is_quest_complete(catalog, quest_id) {
        QuestStatus::Done
    } else if state.unlocked_quests.contains(quest_id) {
        QuestStatus::Current
    } else {
        QuestStatus::Locked
    }
}

/// A fixed-width text progress bar followed by the rounded percentage.
pub fn progress_bar(fraction: crate::progression::Fraction) -> String {
    let filled = fraction.scaled_round_half_up(PROGRESS_BAR_WIDTH);
    let mut bar = String::new();
    bar.extend(std::iter::repeat_n(FILLED_CELL, filled as usize));
    bar.extend(std::iter::repeat_n(EMPTY_CELL, (PROGRESS_BAR_WIDTH - filled) as usize));
    format!("{bar} {}%", fraction.percent())
}

/// Renders the learner's README "home" page.
pub fn render_dashboard(state: &ProgressState, catalog: &QuestCatalog) -> String {
    let stats = state.stats(catalog);
    let mut md = String::new();

    // header
    writeln!(md, "{}", anchor("header")).unwrap();
    writeln!(md, "# 🚪 OSSDoorway\n").unwrap();
    writeln!(
        md,
        "Welcome, **{}**! Complete the quests below to make your first open-source contribution.\n",
        state.user
    )
    .unwrap();
    match state.current_objective(catalog) {
        Objective::Task { quest_id, task_id } => {
            let qi = catalog.quest_index(&quest_id).expect("objective quest exists");
            let quest = &catalog.quests[qi];
            let ti = quest.task_index(&task_id).expect("objective task exists");
            let issue = state
                .quest_issue(&quest_id)
                .map(|n| format!(" (see issue #{n})"))
                .unwrap_or_default();
            writeln!(
                md,
                "**Current task:** Quest {} · Task {}: {}{issue}\n",
                qi + 1,
                ti + 1,
                quest.tasks[ti].title
            )
            .unwrap();
        }
        Objective::AllComplete => {
            writeln!(md, "**All quests complete!** 🎉\n").unwrap();
        }
    }

    writeln!(md, "{}", anchor("stats")).unwrap();
    writeln!(md, "## 📊 Stats\n").unwrap();
    writeln!(md, "| Quests completed | Experience points | Level |").unwrap();
    writeln!(md, "|:---:|:---:|:---:|").unwrap();
    writeln!(
        md,
        "| {} / {} | {} XP | {} |\n",
        stats.quests_completed,
        catalog.quests.len(),
        stats.total_xp,
        stats.level
    )
    .unwrap();
    match catalog.level_thresholds.get(stats.level as usize) {
        Some(next) => writeln!(md, "Next level at {next} XP.\n").unwrap(),
        None => writeln!(md, "Maximum level reached.\n").unwrap(),
    }

    writeln!(md, "{}", anchor("progress")).unwrap();
    writeln!(md, "## 📈 Progress\n").unwrap();
    writeln!(
        md,
        "`{}` ({} tasks)\n",
        progress_bar(stats.progress_fraction),
        stats.progress_fraction
    )
    .unwrap();

    writeln!(md, "{}", anchor("map")).unwrap();
    writeln!(md, "## 🗺️ Map\n").unwrap();
    let nodes: Vec<String> = catalog
        .quests
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{} Quest {}", quest_status(state, catalog, &q.id).glyph(), i + 1))
        .collect();
    writeln!(md, "{}\n", nodes.join(MAP_JOINER)).unwrap();

    writeln!(md, "{}", anchor("quests")).unwrap();
    writeln!(md, "## 🎯 Quests\n").unwrap();
    for (qi, quest) in catalog.quests.iter().enumerate() {
        let status = quest_status(state, catalog, &quest.id);
        writeln!(md, "### {} Quest {}: {}\n", status.glyph(), qi + 1, quest.title).unwrap();
        writeln!(md, "_Goal: {}_\n", quest.goal).unwrap();
        if status == QuestStatus::Locked {
            let prev = qi.checked_sub(1).map(|p| p + 1).unwrap_or(1);
            writeln!(md, "Locked. Complete Quest {prev} to unlock.\n").unwrap();
            continue;
        }
        for (ti, task) in quest.tasks.iter().enumerate() {
            let mark = if state.is_completed(&quest.id, &task.id) {
                'x'
            } else {
                ' '
            };
            writeln!(
                md,
                "- [{mark}] Task {}: {} (+{} XP)",
                ti + 1,
                task.title,
                task.xp_reward
            )
            .unwrap();
        }
        writeln!(md).unwrap();
    }

    writeln!(md, "{}", anchor("badges")).unwrap();
    writeln!(md, "## 🏅 Badges\n").unwrap();
    let earned: Vec<_> = catalog
        .quests
        .iter()
        .map(|q| &q.completion_badge)
        .chain(std::iter::once(&catalog.streak_badge))
        .filter(|b| state.badges.contains(&b.id))
        .collect();
    if earned.is_empty() {
        writeln!(md, "_No badges yet. Finish a quest or keep a streak to earn one._\n").unwrap();
    } else {
        for badge in earned {
            writeln!(md, "- {} **{}**", badge.icon, badge.name).unwrap();
        }
        writeln!(md).unwrap();
    }

    writeln!(md, "{}", anchor("streak")).unwrap();
    writeln!(md, "## 🔥 Streak\n").unwrap();
    let len = catalog.streak_length;
    let to_next = len - state.streak_counter % len;
    writeln!(
        md,
        "{} in a row. {} more for a +{} XP streak bonus.",
        state.streak_counter, to_next, catalog.streak_bonus_xp
    )
    .unwrap();
    md
}

pub fn award_line(award: &Award) -> String {
    match award {
        Award::TaskXp { xp, .. } => format!("⭐ +{xp} XP for completing the task"),
        Award::StreakBonus { xp, streak } => format!("🔥 +{xp} XP streak bonus ({streak} in a row)"),
        Award::StreakBadge { badge } => format!("{} Badge earned: **{}**", badge.icon, badge.name),
        Award::QuestBadge { badge, .. } => format!("{} Badge earned: **{}**", badge.icon, badge.name),
        Award::QuestUnlocked { title, .. } => format!("🔓 New quest unlocked: **{title}**"),
        Award::LevelUp { level } => format!("🆙 Level up! You reached level {level}"),
    }
}

/// Title and body of the instructions issue opened for quest `index`
/// (0-based) at enrollment.
pub fn render_quest_issue(index: usize, quest: &Quest) -> (String, String) {
    let title = format!("Quest {}: {}", index + 1, quest.title);
    let mut body = format!("**Goal:** {}\n", quest.goal);
    for (ti, task) in quest.tasks.iter().enumerate() {
        write!(
            body,
            "\n### Task {}: {}\n\n{}\n",
            ti + 1,
            task.title,
            task.instructions.trim()
        )
        .unwrap();
    }
    (title, body)
}

/// Renders the bot comment posted after a verification. `next` is the title
/// of the learner's next task, `None` once everything is done.
pub fn render_feedback(outcome: &VerificationOutcome, awards: &[Award], next: Option<&str>) -> String {
    let mut md = String::new();
    match outcome {
        VerificationOutcome::Satisfied => {
            writeln!(md, "🎉 **Well done!** Task completed.\n").unwrap();
            for award in awards {
                writeln!(md, "- {}", award_line(award)).unwrap();
            }
            if !awards.is_empty() {
                writeln!(md).unwrap();
            }
            match next {
                Some(title) => writeln!(md, "➡️ Next task: **{title}**").unwrap(),
                None => writeln!(md, "🏁 You have completed every quest. Congratulations!").unwrap(),
            }
        }
        VerificationOutcome::Rejected(reason) => {
            writeln!(md, "🤔 **Not quite yet:** {reason}\n").unwrap();
            writeln!(
                md,
                "Mistakes are part of learning. Re-read the task instructions and try again."
            )
            .unwrap();
            if let Some(title) = next {
                writeln!(md, "\nCurrent task: **{title}**").unwrap();
            }
        }
        VerificationOutcome::NotApplicable => {
            writeln!(md, "ℹ️ This action does not count toward your current task.").unwrap();
            if let Some(title) = next {
                writeln!(md, "\nCurrent task: **{title}**").unwrap();
            }
        }
    }
    md
}
