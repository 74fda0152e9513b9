//! Command line front end and JSON session service.

pub mod providers;
pub mod server;
pub mod settings;
