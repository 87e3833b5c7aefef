//! Analysis of information leakage in multi-agent systems modelled as
//! mass-action chemical reaction networks.

pub mod crn;
pub mod deterministic;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod models;
pub mod parser;
pub mod privacy;
pub mod sparse;
pub mod stochastic;
pub mod structure;
pub mod trees;

pub use crn::{
    Complex, Composition, Crn, CrnBuilder, PopulationVector, QueryGroup, QuerySpec, Reaction, State, StateId, TypeDecl,
};
pub use error::{Error, Result};
pub use parser::{parse_spec, serialize_spec, ModelFile, ParamValue};
