pub mod attack;
pub mod detect;
pub mod engine;
pub mod error;
pub mod graph;
pub mod observer;
pub mod plant;
pub mod reference;
pub mod timefn;
pub mod trigger;

pub use engine::{run, RunOutput, Scenario, World};
pub use error::{Error, Result};
