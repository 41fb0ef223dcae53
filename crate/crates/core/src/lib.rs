//! Evolving behavior trees for autonomous cyber-defense.
//!
//! This crate holds the structure-learning half of the toolkit:
//!
//! - [`btengine`]: a small memoryless behavior-tree engine with a permissioned blackboard.
//! - [`graphgen`]: seeded connected Erdős–Rényi graphs.
//! - [`firefighter`]: the Cyber-Firefighter partially observable pursuit-evasion game.
//! - [`behaviors`]: the nine cyber behaviors bound to Cyber-Firefighter, plus reference trees.
//! - [`gp`]: genetic programming over string-encoded behavior trees.

pub mod behaviors;
pub mod btengine;
pub mod firefighter;
pub mod gp;
pub mod graphgen;
pub mod rng;
