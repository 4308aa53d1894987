//! Event files, run configuration and report writers.

mod atomic;
pub mod config;
pub mod events;
pub mod report;

pub use atomic::{write_atomic, AtomicFile};
pub use config::RunConfig;
pub use events::{
    peek_kind, read_events, write_events, EventReader, EventRecord, EventWriter, FileFormat,
    RecordKind,
};
