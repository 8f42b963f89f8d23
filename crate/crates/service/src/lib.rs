//! Two-arm pilot harness for the multi-level annotation scheme: experiment
//! setup and balanced assignment, task delivery, server-side validated
//! submission, reporting, plus the HTTP API and a seeded end-to-end
//! simulation.

pub mod config;
pub mod http;
pub mod service;
pub mod simulate;

pub use config::{ArmCapacity, ConfigError, ExperimentConfig, ExperimentFile, Seeds};
pub use service::{
    assign_annotator, stepping_clock, system_clock, AnnotatorProfile, ArmColumn, Clock, CommentSummary,
    ExperimentReport, Registration, Service, ServiceError, SubmitOutcome, Submission, Task, TaskComment,
};
