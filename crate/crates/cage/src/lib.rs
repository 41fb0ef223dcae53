//! Network-defense simulator and the blue-side agents that play it.

pub mod agents;
pub mod netsim;
