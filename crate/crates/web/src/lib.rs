//! Browser bindings: play through the built-in curriculum with a string of
//! right and wrong answers, and run the two rank tests on pasted numbers.
//!
//! Everything is a plain function returning JSON, wrapped for JavaScript
//! by the `#[wasm_bindgen]` exports at the bottom.

use chrono::{DateTime, Duration, Utc};
use ossdoorway::analytics::{mann_whitney_u, wilcoxon_signed_rank, StatTestResult};
use ossdoorway::renderer::{award_line, render_dashboard};
use ossdoorway::{default_catalog, Objective, ProgressState};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Step {
    pub step: usize,
    pub quest: String,
    pub task: String,
    pub correct: bool,
    pub awards: Vec<String>,
    pub xp: u32,
    pub level: u32,
    pub streak: u32,
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct Playthrough {
    pub steps: Vec<Step>,
    pub finished: bool,
    pub dashboard: String,
}

/// Plays `pattern` against the built-in curriculum. Each `c` answers the
/// current task correctly, each `x` gets it wrong; whitespace is ignored.
/// Input past the last task is dropped.
pub fn play(pattern: &str) -> Result<Playthrough, String> {
    let catalog = default_catalog();
    let start = DateTime::<Utc>::from_timestamp(1_700_000_000, 0).expect("valid timestamp");
    let mut state = ProgressState::new("learner", &catalog);
    let mut steps = Vec::new();
    for (i, ch) in pattern.chars().filter(|c| !c.is_whitespace()).enumerate() {
        let correct = match ch.to_ascii_lowercase() {
            'c' => true,
            'x' => false,
            other => return Err(format!("unexpected `{other}` at position {}: use c or x", i + 1)),
        };
        let Objective::Task { quest_id, task_id } = state.current_objective(&catalog) else {
            break;
        };
        let (next, awards) = if correct {
            let at = start + Duration::minutes(i as i64);
            state
                .apply_completion(&catalog, &quest_id, &task_id, at)
                .map_err(|e| e.to_string())?
        } else {
            (
                state
                    .record_failure(&catalog, &quest_id, &task_id)
                    .map_err(|e| e.to_string())?,
                Vec::new(),
            )
        };
        state = next;
        let quest = catalog
            .quests
            .iter()
            .find(|q| q.id == quest_id)
            .expect("objective names a catalog quest");
        let task = quest
            .tasks
            .iter()
            .find(|t| t.id == task_id)
            .expect("objective names a catalog task");
        steps.push(Step {
            step: i + 1,
            quest: quest.title.clone(),
            task: task.title.clone(),
            correct,
            awards: awards.iter().map(award_line).collect(),
            xp: state.xp,
            level: state.level,
            streak: state.streak_counter,
            completed: state.completed.len(),
            total: catalog.total_tasks(),
        });
    }
    Ok(Playthrough {
        steps,
        finished: state.current_objective(&catalog) == Objective::AllComplete,
        dashboard: render_dashboard(&state, &catalog),
    })
}

/// Numbers separated by commas, semicolons or whitespace.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect()
}

pub fn wilcoxon_json(pre: &str, post: &str) -> Result<String, String> {
    let result = wilcoxon_signed_rank(&parse_numbers(pre)?, &parse_numbers(post)?).map_err(|e| e.to_string())?;
    to_json(&result)
}

pub fn mann_whitney_json(a: &str, b: &str) -> Result<String, String> {
    let result = mann_whitney_u(&parse_numbers(a)?, &parse_numbers(b)?).map_err(|e| e.to_string())?;
    to_json(&result)
}

fn to_json(result: &StatTestResult) -> Result<String, String> {
    serde_json::to_string(result).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = play)]
pub fn play_js(pattern: &str) -> Result<String, JsValue> {
    js(play(pattern).and_then(|p| serde_json::to_string(&p).map_err(|e| e.to_string())))
}

#[wasm_bindgen(js_name = wilcoxon)]
pub fn wilcoxon_js(pre: &str, post: &str) -> Result<String, JsValue> {
    js(wilcoxon_json(pre, post))
}

#[wasm_bindgen(js_name = mannWhitney)]
pub fn mann_whitney_js(a: &str, b: &str) -> Result<String, JsValue> {
    js(mann_whitney_json(a, b))
}
