mod support;

use hlpn_core::simulator::{run_batch, BatchConfig, SimConfig};
use hlpn_core::verifier::{bfs_optimum, observations, SearchResult, DEFAULT_STATE_BOUND};
use hlpn_core::{eval_ltl, parse_formula, replay, Metric};
use support::*;

fn optimum(m: &hlpn_core::Hlpn, metric: Metric) -> (u64, hlpn_core::Trace) {
    match bfs_optimum(m, metric, DEFAULT_STATE_BOUND).unwrap() {
        SearchResult::Optimal { optimum, witness } => (optimum, witness),
        SearchResult::Unreachable => panic!("mission unreachable"),
    }
}

#[test]
fn robots_start_in_free_space() {
    let m = case_study();
    let s = m.initial_state().unwrap();
    assert_eq!(s.occupancy.to_string(), "3'b4");
    assert!(!s.is_final());
}

#[test]
fn one_synchronized_step_suffices() {
    let m = case_study();
    let (steps, w) = optimum(&m, Metric::SyncSteps);
    assert_eq!(steps, 1);
    let (moves, w2) = optimum(&m, Metric::TotalMoves);
    assert_eq!(moves, 3);
    for w in [w, w2] {
        assert!(replay(&w, &m));
        let net = m.spec().net();
        let t = net.transition_index(&w.steps[0].spec_t).unwrap();
        assert_eq!(net.transitions[t].guard.to_string(), "b1 & b2 & b3");
    }
}

#[test]
fn smaller_team_needs_more_steps() {
    let (three, _) = optimum(&case_study(), Metric::SyncSteps);
    let m = two_robot_case_study();
    let (two, w) = optimum(&m, Metric::SyncSteps);
    assert!(two > three, "{two} vs {three}");
    assert_eq!(two, 2);
    assert!(replay(&w, &m));
}

#[test]
fn restricted_robot_never_enters_p2() {
    let m = case_study();
    let r = run_batch(
        &m,
        &BatchConfig {
            master_seed: 3,
            runs: 50,
            sim: SimConfig::default(),
            metric: Metric::TotalMoves,
            parallel: true,
        },
    );
    for t in &r.traces {
        for s in &t.steps {
            if let Some(tr) = s.moves.get("r3") {
                assert!(!tr.ends_with("_p2"), "{tr}");
            }
        }
    }
}

#[test]
fn successful_runs_satisfy_the_mission() {
    let m = case_study();
    let f = parse_formula(MISSION).unwrap();
    let r = run_batch(
        &m,
        &BatchConfig {
            master_seed: 99,
            runs: 100,
            sim: SimConfig::default(),
            metric: Metric::TotalMoves,
            parallel: true,
        },
    );
    let (opt, _) = optimum(&m, Metric::TotalMoves);
    for t in r.traces.iter().filter(|t| t.succeeded()) {
        assert!(replay(t, &m));
        assert!(eval_ltl(&f, m.env().props(), &observations(t, &m)));
        assert!(t.metric.total_moves >= opt);
    }
    assert_eq!(r.stats.best.as_ref().unwrap().total_moves, opt);
}
