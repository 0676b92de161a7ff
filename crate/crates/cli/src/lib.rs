//! Service binary support: the live hosting client, the HTTP front end and
//! the subcommand implementations behind `ossdoorway`.

pub mod commands;
pub mod github;
pub mod sandbox;
pub mod server;

pub use commands::CliError;
