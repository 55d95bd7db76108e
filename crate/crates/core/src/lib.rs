//! Perfect sampling from the distribution of a Lovász local lemma instance, run inside
//! a simulated LOCAL network, together with an exact enumeration oracle.

pub mod augmentation;
pub mod corpus;
pub mod error;
pub mod format;
pub mod geometry;
pub mod graph;
pub mod instance;
pub mod oracle;
pub mod pipeline;
pub mod rational;
pub mod runtime;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::Geometry;
pub use graph::Graph;
pub use instance::{
    dependency_graph, event_occurs, Assignment, BadEvent, Distribution, EventId, InstanceBuilder, LLLInstance, Origin,
    PartialAssignment, Region, VarId, Variable,
};
pub use oracle::{ExactOracle, MarginalTable, WeightTable};
pub use rational::Rational;
