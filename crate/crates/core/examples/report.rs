//! Prints the questionnaire report for the shipped demo dataset.

use ossdoorway::analytics::{summarize, QuestionnaireDataset};

fn main() {
    let ds = QuestionnaireDataset::from_csv(include_str!("../assets/demo_dataset.csv"), "segment").expect("valid CSV");
    print!("{}", summarize(&ds).expect("paired data").to_markdown());
}
