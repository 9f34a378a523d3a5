//! Host-side tooling for virtual lab twins: scenario files, packing,
//! mesh formats, forest files, session logs and the session server.

pub mod files;
pub mod forests;
pub mod log;
pub mod mesh_io;
pub mod pack;
pub mod service;

pub use twin_core as core;
