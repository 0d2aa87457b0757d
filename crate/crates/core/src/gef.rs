//! The global enabling function: the guard deciding whether one mission
//! transition may fire together with a set of simultaneous robot moves.
//!
//! The decision is taken on the placement obtained by fictitiously firing
//! the moves (robots without a move stay put):
//!
//! 1. the per-cell occupancy of that placement must respect every capacity;
//! 2. a TRUE guard then licenses the binding immediately;
//! 3. otherwise every positive literal needs at least one robot in its
//!    region and every negated literal needs the region empty.

use thiserror::Error;

use crate::hlpn::{Hlpn, HlpnState};
use crate::multiset::Bag;

/// One robot firing one of its transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub robot: usize,
    pub transition: usize,
}

/// A mission transition plus the robot moves synchronized with it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binding {
    pub spec_transition: usize,
    pub moves: Vec<Move>,
}

impl Binding {
    pub fn arity(&self) -> usize {
        self.moves.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GefError {
    #[error("binding moves no robot")]
    NoMoves,
    #[error("binding moves {moves} robots but the team has {team}")]
    TooManyMoves { moves: usize, team: usize },
    #[error("unknown mission transition #{0}")]
    UnknownSpecTransition(usize),
    #[error("unknown robot #{0}")]
    UnknownRobot(usize),
    #[error("robot #{0} is bound twice")]
    RepeatedRobot(usize),
    #[error("robot #{robot} has no transition #{transition}")]
    UnknownMove { robot: usize, transition: usize },
    #[error("mission transition `{0}` is not marking-enabled")]
    SpecNotEnabled(String),
    #[error("robot `{robot}`: transition `{transition}` is not marking-enabled")]
    MoveNotEnabled { robot: String, transition: String },
}

/// Placement and occupancies after fictitiously firing a set of moves.
#[derive(Debug, Clone)]
pub struct SimulatedMoves {
    pub placement: Vec<usize>,
    /// Robots per cell.
    pub cell_occupancy: Bag,
    /// Robots per region proposition.
    pub prop_occupancy: Bag,
    pub within_capacity: bool,
}

/// Checks that `moves` is a well-formed, marking-enabled move set.
pub fn check_moves(state: &HlpnState, moves: &[Move]) -> Result<(), GefError> {
    if moves.is_empty() {
        return Err(GefError::NoMoves);
    }
    let team = state.robots.len();
    if moves.len() > team {
        return Err(GefError::TooManyMoves {
            moves: moves.len(),
            team,
        });
    }
    let mut seen = vec![false; team];
    for m in moves {
        let robot = state
            .robots
            .get(m.robot)
            .ok_or(GefError::UnknownRobot(m.robot))?;
        if std::mem::replace(&mut seen[m.robot], true) {
            return Err(GefError::RepeatedRobot(m.robot));
        }
        let t = robot
            .net()
            .transitions
            .get(m.transition)
            .ok_or(GefError::UnknownMove {
                robot: m.robot,
                transition: m.transition,
            })?;
        if !robot.is_enabled(m.transition) {
            return Err(GefError::MoveNotEnabled {
                robot: robot.robot_id().to_string(),
                transition: t.id.clone(),
            });
        }
    }
    Ok(())
}

/// Fictitious firing of `moves`; assumes [`check_moves`] passed.
pub fn simulate_moves(model: &Hlpn, state: &HlpnState, moves: &[Move]) -> SimulatedMoves {
    let env = model.env();
    let mut placement = state.placement();
    for m in moves {
        placement[m.robot] = state.robots[m.robot].net().target_cell(m.transition);
    }
    let cell_occupancy = env.cell_occupancy(&placement);
    let within_capacity = cell_occupancy
        .leq(env.capacity())
        .expect("cell occupancy and capacity share the cell universe");
    let prop_occupancy = env.prop_occupancy(&placement);
    SimulatedMoves {
        placement,
        cell_occupancy,
        prop_occupancy,
        within_capacity,
    }
}

/// Literal check against a simulated proposition occupancy.
pub fn guard_holds(guard: &[(usize, bool)], occupancy: &Bag) -> bool {
    guard.iter().all(|&(prop, positive)| {
        let count = occupancy.count_at(prop);
        if positive {
            count != 0
        } else {
            count < 1
        }
    })
}

/// Evaluates the global enabling function for `binding` in `state`.
///
/// `Ok(false)` means the binding is legal but not licensed; structural
/// problems with the binding itself are reported as errors.
pub fn gef(model: &Hlpn, state: &HlpnState, binding: &Binding) -> Result<bool, GefError> {
    let spec_net = state.spec.net();
    let t = spec_net
        .transitions
        .get(binding.spec_transition)
        .ok_or(GefError::UnknownSpecTransition(binding.spec_transition))?;
    if !state.spec.is_enabled(binding.spec_transition) {
        return Err(GefError::SpecNotEnabled(t.id.clone()));
    }
    check_moves(state, &binding.moves)?;

    let sim = simulate_moves(model, state, &binding.moves);
    if !sim.within_capacity {
        return Ok(false);
    }
    let guard = model.guard(binding.spec_transition);
    if guard.is_empty() {
        return Ok(true);
    }
    Ok(guard_holds(guard, &sim.prop_occupancy))
}
