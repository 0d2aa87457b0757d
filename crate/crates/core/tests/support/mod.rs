#![allow(dead_code)]

//! Shared fixtures: the bundled case study, a random instance generator and
//! a deliberately naive reference for the enabling function.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hlpn_core::environment::{Cell, EnvironmentDef, Region};
use hlpn_core::logic::{Literal, Observation};
use hlpn_core::ltl::{compile_with_initial, CompileOptions, Formula, Term};
use hlpn_core::verifier::SpecAcceptor;
use hlpn_core::spec_net::SpecTransitionDef;
use hlpn_core::verifier::ProductState;
use hlpn_core::{build_robot_net, Environment, Hlpn, HlpnState, RobotDef, SpecNet, SpecNetDef, SpecOpn};

pub const MISSION: &str = "F b3 & F b2 & F b1 & (!b3 U b1)";

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/case_study").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

pub fn model(env: &EnvironmentDef, robots: &[RobotDef], spec: &SpecNetDef) -> Hlpn {
    let env = Environment::new(env.clone()).unwrap();
    let robots = robots.iter().map(|r| build_robot_net(&env, r).unwrap()).collect();
    let spec = SpecNet::from_def(spec).unwrap();
    Hlpn::new(Arc::new(env), robots, SpecOpn::new(spec)).unwrap()
}

fn ltl_model(env_file: &str, robots_file: &str) -> Hlpn {
    let env = Environment::from_json(&read(env_file)).unwrap();
    let robots: Vec<RobotDef> = serde_json::from_str(&read(robots_file)).unwrap();
    let spec = hlpn_core::compile_to_specopn(&hlpn_core::parse_formula(MISSION).unwrap(), &env).unwrap();
    let robots = robots.iter().map(|r| build_robot_net(&env, r).unwrap()).collect();
    Hlpn::new(Arc::new(env), robots, SpecOpn::new(spec)).unwrap()
}

pub fn case_study() -> Hlpn {
    ltl_model("environment.json", "robots.json")
}

pub fn two_robot_case_study() -> Hlpn {
    ltl_model("environment_two_robots.json", "robots_two.json")
}

/// A random instance in named form.
#[derive(Debug, Clone)]
pub struct Instance {
    pub env: EnvironmentDef,
    pub robots: Vec<RobotDef>,
    pub spec: SpecNetDef,
}

/// At most 3 robots, 6 cells and 4 regions; random conjunctive guards.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_regions = rng.random_range(1..=4usize);
    let n_cells = rng.random_range(1..=6usize);
    let n_robots = rng.random_range(1..=3usize);
    let regions: Vec<Region> = (0..n_regions)
        .map(|i| Region {
            id: format!("y{i}"),
            prop: format!("b{i}"),
        })
        .collect();
    let mut cells = vec![Cell {
        id: "c0".into(),
        regions: vec!["y0".into()],
        capacity: n_robots as u32,
    }];
    // Without a second region every cell would be free space.
    let n_cells = if n_regions == 1 { 1 } else { n_cells };
    for i in 1..n_cells {
        let mut rs: Vec<String> = (1..n_regions)
            .filter(|_| rng.random_bool(0.4))
            .map(|r| format!("y{r}"))
            .collect();
        if rs.is_empty() {
            rs.push(format!("y{}", rng.random_range(1..n_regions)));
        }
        cells.push(Cell {
            id: format!("c{i}"),
            regions: rs,
            capacity: rng.random_range(1..=3),
        });
    }
    let mut adjacency = Vec::new();
    for a in 0..n_cells {
        for b in a + 1..n_cells {
            if rng.random_bool(0.5) {
                adjacency.push([format!("c{a}"), format!("c{b}")]);
            }
        }
    }
    let robots = (0..n_robots)
        .map(|r| {
            let mut allowed = vec!["c0".to_string()];
            allowed.extend((1..n_cells).filter(|_| rng.random_bool(0.7)).map(|c| format!("c{c}")));
            allowed.shuffle(&mut rng);
            RobotDef {
                id: format!("r{r}"),
                allowed_cells: allowed,
                initial_cell: "c0".into(),
            }
        })
        .collect();
    let n_places = rng.random_range(1..=3usize);
    let places: Vec<String> = (0..n_places).map(|p| format!("s{p}")).collect();
    let n_trans = rng.random_range(1..=5usize);
    let transitions = (0..n_trans)
        .map(|t| {
            let mut lits = Vec::new();
            for p in 0..n_regions {
                match rng.random_range(0..4) {
                    0 => lits.push(format!("b{p}")),
                    1 => lits.push(format!("!b{p}")),
                    _ => {}
                }
            }
            SpecTransitionDef {
                id: format!("t{t}"),
                from: places[rng.random_range(0..n_places)].clone(),
                to: places[rng.random_range(0..n_places)].clone(),
                guard: if lits.is_empty() { "1".into() } else { lits.join(" & ") },
            }
        })
        .collect();
    let finals = vec![places[n_places - 1].clone()];
    Instance {
        env: EnvironmentDef {
            regions,
            free_region: "y0".into(),
            cells,
            adjacency,
            team_size: n_robots as u32,
        },
        robots,
        spec: SpecNetDef {
            initial: places[0].clone(),
            places,
            finals,
            transitions,
        },
    }
}

/// A random reachable-looking state: random mission place, random allowed
/// cells within capacity (falls back to the initial state).
pub fn random_state(model: &Hlpn, inst: &Instance, rng: &mut impl Rng) -> HlpnState {
    for _ in 0..20 {
        let cells = inst
            .robots
            .iter()
            .map(|r| {
                let c = &r.allowed_cells[rng.random_range(0..r.allowed_cells.len())];
                model.env().cell_index(c).unwrap()
            })
            .collect();
        let key = ProductState {
            spec: rng.random_range(0..inst.spec.places.len()),
            cells,
        };
        if let Ok(s) = model.state_at(&key) {
            return s;
        }
    }
    model.initial_state().unwrap()
}

/// Named view of a binding: mission transition id and robot -> target cell.
pub type NamedBinding = (String, BTreeMap<String, String>);

fn parse_conjunction(text: &str) -> Vec<(String, bool)> {
    if text.trim() == "1" {
        return Vec::new();
    }
    text.split('&')
        .map(|l| {
            let l = l.trim();
            match l.strip_prefix('!') {
                Some(p) => (p.to_string(), false),
                None => (l.to_string(), true),
            }
        })
        .collect()
}

/// Reference enabling check on named data only: apply the moves, count
/// robots per cell and per region proposition, test every literal.
pub fn naive_gef(
    inst: &Instance,
    placement: &BTreeMap<String, String>,
    moves: &BTreeMap<String, String>,
    guard: &str,
) -> bool {
    let mut after = placement.clone();
    for (r, c) in moves {
        after.insert(r.clone(), c.clone());
    }
    for cell in &inst.env.cells {
        let n = after.values().filter(|c| **c == cell.id).count() as u32;
        if n > cell.capacity {
            return false;
        }
    }
    parse_conjunction(guard).iter().all(|(prop, positive)| {
        let region = inst.env.regions.iter().find(|r| &r.prop == prop).unwrap();
        let count = after
            .values()
            .filter(|c| {
                inst.env
                    .cells
                    .iter()
                    .find(|x| &x.id == *c)
                    .unwrap()
                    .regions
                    .contains(&region.id)
            })
            .count();
        if *positive {
            count > 0
        } else {
            count == 0
        }
    })
}

/// Every candidate step from `placement` with the mission token on
/// `spec_place`, licensed or not.
pub fn naive_candidates(
    inst: &Instance,
    spec_place: &str,
    placement: &BTreeMap<String, String>,
) -> Vec<(NamedBinding, bool)> {
    let adjacent = |a: &str, b: &str| {
        inst.env
            .adjacency
            .iter()
            .any(|[x, y]| (x == a && y == b) || (x == b && y == a))
    };
    let options: Vec<Vec<Option<String>>> = inst
        .robots
        .iter()
        .map(|r| {
            let here = &placement[&r.id];
            let mut o = vec![None];
            for c in &r.allowed_cells {
                if c != here && adjacent(here, c) {
                    o.push(Some(c.clone()));
                }
            }
            o
        })
        .collect();
    let mut combos: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for (r, opts) in inst.robots.iter().zip(&options) {
        let mut next = Vec::new();
        for base in &combos {
            for o in opts {
                let mut m = base.clone();
                if let Some(c) = o {
                    m.insert(r.id.clone(), c.clone());
                }
                next.push(m);
            }
        }
        combos = next;
    }
    let mut out = Vec::new();
    for t in &inst.spec.transitions {
        if t.from != spec_place {
            continue;
        }
        for m in combos.iter().filter(|m| !m.is_empty()) {
            let ok = naive_gef(inst, placement, m, &t.guard);
            out.push(((t.id.clone(), m.clone()), ok));
        }
    }
    out
}

pub fn named_placement(model: &Hlpn, state: &HlpnState) -> BTreeMap<String, String> {
    state
        .robots
        .iter()
        .map(|r| (r.robot_id().to_string(), model.env().cells().label(r.cell()).to_string()))
        .collect()
}

pub fn named_binding(model: &Hlpn, state: &HlpnState, b: &hlpn_core::Binding) -> NamedBinding {
    let t = state.spec.net().transitions[b.spec_transition].id.clone();
    let moves = b
        .moves
        .iter()
        .map(|m| {
            let r = &state.robots[m.robot];
            let cell = r.net().target_cell(m.transition);
            (r.robot_id().to_string(), model.env().cells().label(cell).to_string())
        })
        .collect();
    (t, moves)
}

/// Resolves a named candidate back into a library binding.
pub fn resolve_binding(model: &Hlpn, state: &HlpnState, nb: &NamedBinding) -> hlpn_core::Binding {
    let spec_transition = state.spec.net().transition_index(&nb.0).unwrap();
    let moves = nb
        .1
        .iter()
        .map(|(r, c)| {
            let robot = model.robot_index(r).unwrap();
            let opn = &state.robots[robot];
            let here = model.env().cells().label(opn.cell());
            let transition = opn.net().transition_index(&format!("t_{here}_{c}")).unwrap();
            hlpn_core::Move { robot, transition }
        })
        .collect();
    hlpn_core::Binding {
        spec_transition,
        moves,
    }
}

/// Compares library and naive judgement on one state. Returns the number
/// of candidates checked or a description of the first disagreement.
pub fn compare_gef(model: &Hlpn, inst: &Instance, state: &HlpnState) -> Result<usize, String> {
    let placement = named_placement(model, state);
    let candidates = naive_candidates(inst, state.spec.marked_place(), &placement);
    for (nb, expected) in &candidates {
        let b = resolve_binding(model, state, nb);
        let got = hlpn_core::gef(model, state, &b).map_err(|e| e.to_string())?;
        if got != *expected {
            return Err(format!("gef {got} vs naive {expected} on {nb:?} at {placement:?}"));
        }
    }
    let lib: Vec<NamedBinding> = model
        .enabled_bindings(state)
        .iter()
        .map(|b| named_binding(model, state, b))
        .collect();
    let lib_set: BTreeSet<_> = lib.iter().cloned().collect();
    let naive_set: BTreeSet<_> = candidates.into_iter().filter(|(_, ok)| *ok).map(|(nb, _)| nb).collect();
    if lib_set.len() != lib.len() {
        return Err("duplicate bindings".into());
    }
    if lib_set != naive_set {
        return Err(format!("binding sets differ: {lib_set:?} vs {naive_set:?}"));
    }
    Ok(lib.len())
}

/// One cell per proposition; the first proposition is free space.
pub fn prop_env(props: &[&str]) -> Environment {
    let regions = props
        .iter()
        .map(|p| Region {
            id: format!("y{p}"),
            prop: p.to_string(),
        })
        .collect();
    let cells = props
        .iter()
        .map(|p| Cell {
            id: format!("c{p}"),
            regions: vec![format!("y{p}")],
            capacity: 1,
        })
        .collect();
    Environment::new(EnvironmentDef {
        regions,
        free_region: format!("y{}", props[0]),
        cells,
        adjacency: Vec::new(),
        team_size: 1,
    })
    .unwrap()
}

#[allow(clippy::too_many_arguments)]
fn walk(
    acc: &SpecAcceptor,
    f: &Formula,
    env: &Environment,
    alphabet: &[Observation],
    max_len: usize,
    trace: &mut Vec<Observation>,
    set: Vec<bool>,
    checked: &mut u64,
) -> Result<(), String> {
    *checked += 1;
    if acc.accepting(&set) != hlpn_core::eval_ltl(f, env.props(), trace) {
        return Err(format!(
            "`{f}` disagrees on {:?}",
            trace.iter().map(|o| o.0).collect::<Vec<_>>()
        ));
    }
    if trace.len() == max_len {
        return Ok(());
    }
    for &o in alphabet {
        let next = acc.step(&set, o);
        trace.push(o);
        walk(acc, f, env, alphabet, max_len, trace, next, checked)?;
        trace.pop();
    }
    Ok(())
}

/// Compiles every conjunction of `1..=max_terms` fragment terms (as
/// multisets) over `props` for every first observation, and compares net
/// acceptance with the evaluator on every trace of length `1..=max_len`.
/// Returns (formulas, formula/trace pairs checked).
pub fn exhaustive_ltl_agreement(props: &[&str], max_terms: usize, max_len: usize) -> Result<(usize, u64), String> {
    let env = prop_env(props);
    let mut lits = Vec::new();
    for p in props {
        lits.push(Literal::pos(*p));
        lits.push(Literal::neg(*p));
    }
    let mut terms = Vec::new();
    for l in &lits {
        terms.push(Term::Eventually(l.clone()));
        terms.push(Term::Now(l.clone()));
        for r in &lits {
            terms.push(Term::Until(l.clone(), r.clone()));
        }
    }
    // Non-decreasing index tuples enumerate multisets.
    let mut formulas: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_terms {
        let mut next = Vec::new();
        for f in &frontier {
            let lo = f.last().copied().unwrap_or(0);
            for i in lo..terms.len() {
                let mut g = f.clone();
                g.push(i);
                next.push(g);
            }
        }
        formulas.extend(next.iter().cloned());
        frontier = next;
    }
    let alphabet: Vec<Observation> = (0..1u64 << props.len()).map(Observation).collect();
    let counts: Vec<Result<u64, String>> = formulas
        .par_iter()
        .map(|idx| {
            let f = Formula {
                terms: idx.iter().map(|&i| terms[i].clone()).collect(),
            };
            let mut checked = 0;
            for &o0 in &alphabet {
                let net = compile_with_initial(&f, &env, o0, CompileOptions::default())
                    .map_err(|e| e.to_string())?;
                let acc = SpecAcceptor::new(&net, env.props());
                let mut trace = vec![o0];
                walk(&acc, &f, &env, &alphabet, max_len, &mut trace, acc.initial(), &mut checked)?;
            }
            Ok(checked)
        })
        .collect();
    let mut pairs = 0;
    for c in counts {
        pairs += c?;
    }
    Ok((formulas.len(), pairs))
}
