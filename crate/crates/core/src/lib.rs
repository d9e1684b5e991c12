//! Batch engine that turns a feature film and its metadata into a finished
//! promotional trailer.
//!
//! The work is split into twelve numbered phases (0 through 11) driven by
//! [`pipeline`]. Every learned model sits behind the [`adapters`] protocol,
//! so the whole pipeline runs deterministically against the bundled mock
//! backends. Media is handled through an FFmpeg-compatible subprocess
//! ([`mediaio::Engine`]); shot detection, sequence matching, retrieval,
//! planning and mixing are implemented natively.

pub mod adapters;
pub mod assembly;
pub mod clips;
pub mod error;
pub mod evalkit;
pub mod fixtures;
pub mod mediaio;
pub mod pipeline;
pub mod project;
pub mod retrieval;
pub mod shotdetect;
pub mod sync;
pub mod textproc;

pub use error::{Error, Result};
