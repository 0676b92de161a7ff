//! Dashboard snapshots. Regenerate with `UPDATE_GOLDEN=1 cargo test --test golden`.

use std::path::PathBuf;

use chrono::DateTime;
use ossdoorway::renderer::{render_dashboard, section};
use ossdoorway::{default_catalog, ProgressState, QuestCatalog};

fn after(n: usize, catalog: &QuestCatalog) -> ProgressState {
    let tasks: Vec<(String, String)> = catalog
        .iter_tasks()
        .take(n)
        .map(|(q, t)| (q.id.clone(), t.id.clone()))
        .collect();
    tasks.iter().fold(ProgressState::new("alice", catalog), |s, (q, t)| {
        s.apply_completion(catalog, q, t, DateTime::UNIX_EPOCH).unwrap().0
    })
}

fn check(name: &str, rendered: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.md"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, rendered).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(rendered, expected, "{name} dashboard drifted");
}

#[test]
fn fresh_dashboard() {
    let catalog = default_catalog();
    check("fresh", &render_dashboard(&after(0, &catalog), &catalog));
}

#[test]
fn quest_one_complete_dashboard() {
    let catalog = default_catalog();
    let md = render_dashboard(&after(5, &catalog), &catalog);
    check("mid", &md);
    assert!(section(&md, "progress").unwrap().contains("42%"));
}

#[test]
fn complete_dashboard() {
    let catalog = default_catalog();
    check("complete", &render_dashboard(&after(12, &catalog), &catalog));
}
