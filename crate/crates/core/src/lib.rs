//! Batched, deterministic 6-DOF underwater vehicle simulation with
//! reinforcement-learning benchmark tasks.

pub mod batch;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod rl;
pub mod rng;
pub mod tasks;
pub mod thrusters;

// The guide in book/ is compiled and run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/thrusters.md")]
    mod thrusters {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/batch.md")]
    mod batch {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
