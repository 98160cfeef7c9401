//! Configuration text, binary artifact persistence and CSV output.

pub mod artifacts;
pub mod config;
pub mod container;
pub mod csv;

pub use artifacts::{
    artifacts_path, load_artifacts, load_snapshots, save_artifacts, save_snapshots, snapshots_path, ARTIFACT_FILE,
    SNAPSHOT_FILE,
};
pub use config::{BoundsPolicy, FineScheme, InitialData, Problem, RbAlgorithm, StudyConfig};
pub use container::{write_atomic, FORMAT_VERSION};
