//! Classroom simulator for the mechanisms behind social-media feeds.
//!
//! Students browse a sandboxed image feed; every interaction becomes an
//! event in an append-only room log. The log is folded into engagement
//! scores, interest profiles, recommendations and social graphs, and is
//! streamed live to paired analytics devices and the teacher's dashboard.
//! The [`analytics`] module evaluates the pre/post questionnaires.

mod error;

pub mod analytics;
pub mod engagement;
pub mod gamekit;
pub mod model;
pub mod profiling;
pub mod recsys;
pub mod service;
pub mod sim;
pub mod socialgraph;

pub use error::{Error, PairingFailure, Result};
