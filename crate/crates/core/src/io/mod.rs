//! File formats: XYZ point clouds, OFF meshes, `PUXP1` checkpoints,
//! key=value configs and CSV reports.

pub mod checkpoint;
pub mod config;
pub mod off;
pub mod report;
pub mod xyz;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::KvConfig;
pub use off::{parse_off, read_off, write_off};
pub use xyz::{format_xyz, parse_xyz, read_xyz, write_xyz};
