pub mod config;
pub mod experiments;
