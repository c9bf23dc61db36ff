//! Barrier analysis over expert pairwise surveys: interpretive structural
//! modelling with MICMAC classification, followed by DEMATEL.
//!
//! The pipeline runs survey validation, then ISM, MICMAC and DEMATEL. Each
//! stage is also usable on its own through the module functions.

pub mod dematel;
pub mod dot;
pub mod error;
pub mod io;
pub mod ism;
mod linalg;
pub mod micmac;
pub mod model;
pub mod pipeline;
pub mod survey;

pub use error::{Error, ErrorKind, Result};
pub use model::{
    Barrier, BarrierRegistry, InfluenceMatrix, LevelPartition, LevelRecord, MatrixRole, Reach,
    ReachabilityMatrix, RelationSymbol, SsimMatrix,
};
