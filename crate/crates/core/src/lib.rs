pub mod config;
pub mod convex;
pub mod critical;
pub mod error;
pub mod flow;
pub mod lie;
pub mod linalg;
pub mod measure;
pub mod phase;
pub mod report;
pub mod runner;
