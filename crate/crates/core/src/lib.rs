//! Opinion dynamics with two polarizing leader parties on weighted digraphs.
//!
//! Followers average toward their out-neighbors; party-0 and party-1 leaders
//! hold opinions 0 and 1, either absolutely or through a stubbornness weight.
//! The crate computes steady states, random-walk analytics behind them, and
//! selects party-1 leaders that move the average opinion toward a target.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod numerics;
pub mod selector;
pub mod single_leader;
pub mod walks;

pub use dynamics::{steady_state, SteadyState};
pub use error::{Error, Result};
pub use graph::{LeaderConfig, Model, Stubbornness, WeightedDigraph};
pub use selector::{bound_search, SelectionProblem, SelectionResult};
pub use walks::WalkKernel;
