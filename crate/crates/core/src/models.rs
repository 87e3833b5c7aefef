//! Model files shipped with the crate.

/// Two robot types competing for a shared resource.
pub const MOTIVATIONAL: &str = include_str!("../models/motivational.model");
/// Collaboration DAG with eight complexes in four linkage classes.
pub const DAG: &str = include_str!("../models/dag.model");
/// Complex-balanced pairing network with a group-size query.
pub const PAIRING: &str = include_str!("../models/pairing.model");
/// Task-completion network with one-way completion reactions.
pub const TASKS: &str = include_str!("../models/tasks.model");
