//! Prints the transcript of a session script: `cargo run --example replay -- <script.toml>`.
//! Without an argument the shipped full run is used.

use std::sync::Arc;

use ossdoorway::default_catalog;
use ossdoorway::service::{scripts, simulate_session, SessionScript};

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("read script"),
        None => scripts::FULL_RUN.to_string(),
    };
    let script = SessionScript::parse(&text).expect("valid script");
    let transcript = simulate_session(&script, Arc::new(default_catalog()), "ossdoorway-bot").expect("simulation runs");
    print!("{}", transcript.to_text());
}
