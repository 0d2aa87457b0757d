//! Nets-within-nets motion planning for heterogeneous robot teams.
//!
//! Robots and the mission are object nets held as tokens by a system net.
//! A synchronized step fires one mission transition together with moves of
//! one or more robots, licensed by the global enabling function ([`gef`]).
//! Plans are found by seeded random simulation ([`simulator`]) and checked
//! against exact search and an independent mission evaluator ([`verifier`]).

pub mod cli;
pub mod environment;
pub mod gef;
pub mod hlpn;
pub mod logic;
pub mod ltl;
pub mod multiset;
pub mod robot_net;
pub mod simulator;
pub mod spec_net;
pub mod verifier;

pub use environment::{Environment, EnvironmentDef};
pub use gef::{gef, Binding, Move};
pub use hlpn::{Hlpn, HlpnState};
pub use ltl::{compile_to_specopn, parse_formula, Formula};
pub use multiset::{Bag, Universe};
pub use robot_net::{build_robot_net, RobotDef, RobotOpn};
pub use simulator::{run_batch, run_once, Metric, Trace};
pub use spec_net::{SpecNet, SpecNetDef, SpecOpn};
pub use verifier::{bfs_optimum, eval_ltl, replay};
