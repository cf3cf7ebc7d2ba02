//! Aggregate-only query gateway over a clinical dataset.

pub mod ctl;
pub mod exec;
pub mod gateway;
pub mod guard;
pub mod mql;
pub mod pipeline;
pub mod rbac;
pub mod registry;
pub mod relstore;
pub mod state;
pub mod synthgen;
pub mod xmlout;
