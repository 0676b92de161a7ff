#![allow(dead_code)]

use std::sync::Arc;

use ossdoorway::gateway::{Normalized, RawDelivery, RetryPolicy, SimulatedHost, SANDBOX_CONTRIBUTORS};
use ossdoorway::service::{Engine, EngineSettings, ProcessingSummary};
use ossdoorway::store::ProgressStore;
use ossdoorway::{default_catalog, load_catalog, ActivityEvent, Objective, QuestCatalog};
use rand::Rng;

pub const USER: &str = "alice";
pub const REPO: &str = "alice/ossdoorway-sandbox";

/// A catalog of `quests` x `tasks_per` tasks, each completed by closing any
/// issue, so every attempt outcome can be chosen freely.
pub fn synthetic_catalog(quests: usize, tasks_per: usize, streak_length: u32, sequential: bool) -> QuestCatalog {
    let mut text = format!(
        "sequential_tasks = {sequential}\n[rewards]\nlevel_thresholds = [0, 100, 400]\nstreak_length = {streak_length}\nstreak_bonus_xp = 15\n[rewards.streak_badge]\nid = \"streak\"\nname = \"Streak\"\nicon = \"+\"\n"
    );
    for q in 0..quests {
        text.push_str(&format!(
            "\n[[quest]]\nid = \"q{q}\"\ntitle = \"Quest {q}\"\ngoal = \"g\"\n[quest.badge]\nid = \"b{q}\"\nname = \"Badge {q}\"\nicon = \"*\"\n"
        ));
        for t in 0..tasks_per {
            text.push_str(&format!(
                "[[quest.task]]\nid = \"t{t}\"\ntitle = \"Task {q}.{t}\"\ndifficulty = \"exploration\"\ninstructions = \"do it\"\n[quest.task.verify]\nevent = \"issue_closed\"\npredicate = \"always\"\n"
            ));
        }
    }
    load_catalog(&text).expect("synthetic catalog is valid")
}

pub fn event_of(d: &RawDelivery) -> ActivityEvent {
    match d.normalize().expect("simulated payload normalizes") {
        Normalized::Event(e) => e,
        other => panic!("unexpected {other:?}"),
    }
}

/// Fresh simulated host with the learner enrolled, and an engine over `store`.
/// Enrollment is skipped when the store already knows the learner.
pub fn engine_with(store: Arc<dyn ProgressStore>) -> (Engine, Arc<SimulatedHost>) {
    let catalog = Arc::new(default_catalog());
    let host = Arc::new(SimulatedHost::default());
    host.create_repo(REPO, &SANDBOX_CONTRIBUTORS).unwrap();
    let settings = EngineSettings {
        retry: RetryPolicy::immediate(),
        ..Default::default()
    };
    let engine = Engine::new(catalog, host.clone(), store, settings);
    engine.enroll(USER, REPO).unwrap();
    host.take_deliveries();
    (engine, host)
}

pub fn feed(engine: &Engine, deliveries: &[RawDelivery]) -> Vec<ProcessingSummary> {
    deliveries
        .iter()
        .map(|d| engine.handle_event(&event_of(d)).unwrap())
        .collect()
}

/// Performs the correct action for a default-catalog task.
pub fn correct_action(host: &SimulatedHost, task_id: &str) -> RawDelivery {
    let c = |issue, body: &str| host.comment_as(USER, REPO, issue, body).unwrap();
    match task_id {
        "explore-issue-tracker" => c(1, "https://github.com/alice/ossdoorway-sandbox/issues"),
        "explore-pull-request" => c(1, "https://github.com/alice/ossdoorway-sandbox/pulls"),
        "explore-fork" => c(1, "https://github.com/alice/ossdoorway-sandbox/forks"),
        "explore-readme" => c(1, "I read the README"),
        "explore-contributors" => c(1, "/graphs/contributors"),
        "choose-issue" => c(2, "I want to work on this"),
        "self-assign" => host.assign_as(USER, REPO, 2, USER).unwrap(),
        "introduce-yourself" => c(2, "Hello, I am Alice"),
        "mention-contributor" => c(2, "@maintainer-ana any hints?"),
        "submit-pull-request" => host.open_pr_as(USER, REPO, "Docs", "Closes #3").unwrap(),
        "request-review" => c(3, "Please review my pull request"),
        "close-issue" => host.close_issue_as(USER, REPO, 3).unwrap(),
        other => panic!("no scripted answer for {other}"),
    }
}

/// The twelve correct learner deliveries of a full session, in order.
pub fn full_session() -> Vec<RawDelivery> {
    let host = SimulatedHost::default();
    let catalog = default_catalog();
    host.provision_sandbox(USER, &catalog).unwrap();
    catalog
        .iter_tasks()
        .map(|(_, t)| correct_action(&host, &t.id))
        .collect()
}

/// A learner session of `len` deliveries mixing correct answers, wrong
/// answers and unrelated activity. A shadow engine tracks the current task
/// so correct answers are generated for the right one.
pub fn mixed_session(rng: &mut impl Rng, len: usize) -> Vec<RawDelivery> {
    let store = Arc::new(ossdoorway::store::MemoryStore::new(Arc::new(default_catalog())));
    let (engine, host) = engine_with(store.clone());
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let state = store.load_progress(USER).unwrap().unwrap();
        let d = match (rng.random_range(0..10), state.current_objective(engine.catalog())) {
            (0..=1, Objective::Task { task_id, .. }) => correct_action(&host, &task_id),
            (2..=5, _) => host
                .comment_as(USER, REPO, rng.random_range(1..=3), "hmm, not sure")
                .unwrap(),
            (6, _) => host
                .comment_as(USER, REPO, rng.random_range(1..=3), "/pulls and /issues")
                .unwrap(),
            (7, _) => host.fork_as(USER, REPO).unwrap(),
            (8, _) => host.assign_as(USER, REPO, rng.random_range(1..=3), "octo-dev").unwrap(),
            _ => host.comment_as(USER, REPO, 2, "hi @octo-dev").unwrap(),
        };
        engine.handle_event(&event_of(&d)).unwrap();
        // drop the bot's feedback deliveries
        host.take_deliveries();
        out.push(d);
    }
    out
}

/// Average ranks (1-based) with ties sharing the mean of their positions,
/// computed by direct counting.
pub fn naive_midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided signed-rank p by listing all 2^n sign assignments.
pub fn wilcoxon_oracle(pre: &[f64], post: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let ranks = naive_midranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let observed = plus.min(total - plus);
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w.min(total - w) <= observed + 1e-9 {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / (1u64 << n) as f64)
}

/// Two-sided rank-sum p by listing every way to pick group A's positions.
pub fn mann_whitney_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = naive_midranks(&pooled);
    let nm = (n * m) as f64;
    let u_of = |sum: f64| sum - (n * (n + 1)) as f64 / 2.0;
    let u_a = u_of(ranks[..n].iter().sum());
    let observed = u_a.min(nm - u_a);
    let (mut extreme, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << (n + m)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        all += 1;
        let u = u_of((0..n + m).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum());
        if u.min(nm - u) <= observed + 1e-9 {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / all as f64)
}

pub fn likert(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(1..=5) as f64).collect()
}
