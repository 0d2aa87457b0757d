//! Co-safe LTL front-end.
//!
//! The accepted fragment is a conjunction of terms, each one of
//! `F l`, `l U l'` or a bare literal `l`, where a literal is a proposition or
//! its negation. Formulas compile into mission nets: every term becomes a
//! small pending/discharged automaton, the product of those automata is
//! built explicitly, and each product edge becomes a transition guarded by
//! the minimal conjunction of literals it needs.
//!
//! Position 0 of a trace is the initial observation, so the compiled net's
//! initial place already accounts for it. Transitions fire on positions
//! 1, 2, ... .

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::environment::Environment;
use crate::logic::{Conjunction, Literal, Observation};
use crate::spec_net::SpecNet;

pub const DEFAULT_MAX_STATES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// `F l`
    Eventually(Literal),
    /// `l U l'`
    Until(Literal, Literal),
    /// A literal evaluated at position 0.
    Now(Literal),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Eventually(l) => write!(f, "F {l}"),
            Term::Until(a, b) => write!(f, "({a} U {b})"),
            Term::Now(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub terms: Vec<Term>,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl Formula {
    pub fn propositions(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().flat_map(|t| match t {
            Term::Eventually(l) | Term::Now(l) => vec![l.prop.as_str()],
            Term::Until(a, b) => vec![a.prop.as_str(), b.prop.as_str()],
        })
    }

    /// Rejects propositions that no region of `env` defines.
    pub fn check_propositions(&self, env: &Environment) -> Result<(), LtlError> {
        for p in self.propositions() {
            if env.props().index_of(p).is_none() {
                return Err(LtlError::UnknownProposition(p.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("operator `{op}` at offset {pos} is outside the supported co-safe fragment")]
    OutsideFragment { pos: usize, op: String },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("product automaton exceeds {limit} states")]
    TooManyStates { limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Eventually,
    Until,
    Not,
    And,
    LParen,
    RParen,
    Unsupported(String),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        let (pos, ch) = bytes[i];
        let next = bytes.get(i + 1).map(|&(_, c)| c);
        let tok = match ch {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' | '¬' | '~' => Tok::Not,
            '&' | '∧' => {
                if next == Some('&') {
                    i += 1;
                }
                Tok::And
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '◇' => Tok::Eventually,
            '□' => Tok::Unsupported("□".into()),
            '|' | '∨' => Tok::Unsupported("|".into()),
            '-' if next == Some('>') => {
                i += 1;
                Tok::Unsupported("->".into())
            }
            '<' if next == Some('>') => {
                i += 1;
                Tok::Eventually
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while let Some(&(_, c)) = bytes.get(i) {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                        word.push(c);
                        i += 1;
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "F" => Tok::Eventually,
                    "U" => Tok::Until,
                    "G" | "X" | "R" | "W" | "M" => Tok::Unsupported(word),
                    _ if word.starts_with(|c: char| c.is_ascii_digit()) => {
                        return Err(LtlError::Syntax {
                            pos,
                            message: format!("`{word}` is not a proposition"),
                        })
                    }
                    _ => Tok::Ident(word),
                };
                out.push((tok, pos));
                continue;
            }
            other => {
                return Err(LtlError::Syntax {
                    pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, pos));
        i += 1;
    }
    Ok(out)
}

#[derive(Debug)]
enum Node {
    Prop(String),
    Not(Box<Node>, usize),
    Eventually(Box<Node>, usize),
    Until(Box<Node>, Box<Node>, usize),
    And(Vec<Node>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|&(_, p)| p).unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> LtlError {
        if let Some((Tok::Unsupported(op), pos)) = self.toks.get(self.at) {
            return LtlError::OutsideFragment {
                pos: *pos,
                op: op.clone(),
            };
        }
        LtlError::Syntax {
            pos: self.pos(),
            message: message.into(),
        }
    }

    fn conjunction(&mut self) -> Result<Node, LtlError> {
        let mut parts = vec![self.binary()?];
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            parts.push(self.binary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Node::And(parts)
        })
    }

    fn binary(&mut self) -> Result<Node, LtlError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Until) {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.unary()?;
            return Ok(Node::Until(Box::new(lhs), Box::new(rhs), pos));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, LtlError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(Node::Not(Box::new(self.unary()?), pos))
            }
            Some(Tok::Eventually) => {
                self.at += 1;
                Ok(Node::Eventually(Box::new(self.unary()?), pos))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.conjunction()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                Ok(Node::Prop(name))
            }
            None => Err(self.error("unexpected end of input")),
            Some(_) => Err(self.error("expected a proposition, `!`, `F` or `(`")),
        }
    }
}

fn literal(node: Node, context: (&str, usize)) -> Result<Literal, LtlError> {
    match node {
        Node::Prop(p) => Ok(Literal::pos(p)),
        Node::Not(inner, pos) => literal(*inner, ("!", pos)).map(|l| l.negated()),
        _ => Err(LtlError::OutsideFragment {
            pos: context.1,
            op: context.0.to_string(),
        }),
    }
}

fn collect_terms(node: Node, out: &mut Vec<Term>) -> Result<(), LtlError> {
    match node {
        Node::And(parts) => {
            for p in parts {
                collect_terms(p, out)?;
            }
        }
        Node::Eventually(inner, pos) => out.push(Term::Eventually(literal(*inner, ("F", pos))?)),
        Node::Until(a, b, pos) => {
            out.push(Term::Until(literal(*a, ("U", pos))?, literal(*b, ("U", pos))?))
        }
        other => out.push(Term::Now(literal(other, ("!", 0))?)),
    }
    Ok(())
}

/// Parses formula text. Operators: `F` (or `<>`), `U`, `!`, `&`, parentheses.
pub fn parse_formula(text: &str) -> Result<Formula, LtlError> {
    let mut parser = Parser {
        toks: tokenize(text)?,
        at: 0,
        end: text.len(),
    };
    let root = parser.conjunction()?;
    if parser.at != parser.toks.len() {
        return Err(parser.error("expected `&` or end of input"));
    }
    let mut terms = Vec::new();
    collect_terms(root, &mut terms)?;
    Ok(Formula { terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Lit {
    prop: usize,
    positive: bool,
}

impl Lit {
    fn holds(self, obs: Observation) -> bool {
        obs.holds(self.prop) == self.positive
    }
}

#[derive(Debug, Clone, Copy)]
enum ResolvedTerm {
    Eventually(Lit),
    Until(Lit, Lit),
    Now(Lit),
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub max_states: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

/// Compiles assuming the whole team starts in free space.
pub fn compile_to_specopn(formula: &Formula, env: &Environment) -> Result<SpecNet, LtlError> {
    compile_with_initial(formula, env, env.free_observation(), CompileOptions::default())
}

/// Compiles for an explicit position-0 observation.
pub fn compile_with_initial(
    formula: &Formula,
    env: &Environment,
    initial: Observation,
    options: CompileOptions,
) -> Result<SpecNet, LtlError> {
    formula.check_propositions(env)?;
    let props = env.props();
    let resolve = |l: &Literal| Lit {
        prop: props.index_of(&l.prop).expect("checked"),
        positive: l.positive,
    };
    let terms: Vec<ResolvedTerm> = formula
        .terms
        .iter()
        .map(|t| match t {
            Term::Eventually(l) => ResolvedTerm::Eventually(resolve(l)),
            Term::Until(a, b) => ResolvedTerm::Until(resolve(a), resolve(b)),
            Term::Now(l) => ResolvedTerm::Now(resolve(l)),
        })
        .collect();
    if terms.len() > 63 {
        return Err(LtlError::TooManyStates {
            limit: options.max_states,
        });
    }
    let accept: u64 = (1u64 << terms.len()) - 1;
    let to_literal = |l: Lit| Literal {
        prop: props.label(l.prop).to_string(),
        positive: l.positive,
    };

    // Position 0: discharge eagerly, a discharged term never constrains later steps.
    let mut start = Some(0u64);
    for (i, t) in terms.iter().enumerate() {
        let done = match *t {
            ResolvedTerm::Eventually(l) => l.holds(initial),
            ResolvedTerm::Until(a, b) => {
                if b.holds(initial) {
                    true
                } else if a.holds(initial) {
                    false
                } else {
                    start = None;
                    false
                }
            }
            ResolvedTerm::Now(l) => {
                if !l.holds(initial) {
                    start = None;
                }
                true
            }
        };
        if done {
            start = start.map(|m| m | 1 << i);
        }
    }

    let Some(start) = start else {
        return Ok(SpecNet::from_parts(
            vec!["q0".into(), "q1".into()],
            "q0",
            &["q1".into()],
            Vec::new(),
        )
        .expect("well-formed"));
    };

    // Forward exploration of the product.
    let mut index: HashMap<u64, usize> = HashMap::from([(start, 0)]);
    let mut states = vec![start];
    let mut edges: Vec<(usize, usize, Conjunction)> = Vec::new();
    let mut queue = VecDeque::from([start]);
    while let Some(mask) = queue.pop_front() {
        if mask == accept {
            continue;
        }
        let src = index[&mask];
        let pending = accept & !mask;
        let mut candidates: Vec<(u64, Vec<Lit>)> = Vec::new();
        let mut sub = 0u64;
        loop {
            if let Some(guard) = edge_guard(&terms, pending, sub) {
                candidates.push((mask | sub, guard));
            }
            if sub == pending {
                break;
            }
            sub = (sub.wrapping_sub(pending)) & pending;
        }
        // An edge is dominated when another one discharges strictly more
        // under a weaker guard; more discharged terms never accept less.
        let dominated = |(m, g): &(u64, Vec<Lit>)| {
            candidates.iter().any(|(m2, g2)| {
                m2 != m && m2 & m == *m && g2.iter().all(|l| g.contains(l))
            })
        };
        let kept: Vec<(u64, Vec<Lit>)> = candidates.iter().filter(|c| !dominated(c)).cloned().collect();
        for (target, guard) in kept {
            let dst = match index.get(&target) {
                Some(&d) => d,
                None => {
                    if states.len() >= options.max_states {
                        return Err(LtlError::TooManyStates {
                            limit: options.max_states,
                        });
                    }
                    let d = states.len();
                    index.insert(target, d);
                    states.push(target);
                    queue.push_back(target);
                    d
                }
            };
            let guard = Conjunction::simplify(guard.into_iter().map(to_literal))
                .expect("edge guards are satisfiable");
            edges.push((src, dst, guard));
        }
    }
    let accept_idx = *index.entry(accept).or_insert_with(|| {
        states.push(accept);
        states.len() - 1
    });

    // Drop states that cannot reach acceptance.
    let mut alive = vec![false; states.len()];
    alive[accept_idx] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for &(s, d, _) in &edges {
            if alive[d] && !alive[s] {
                alive[s] = true;
                changed = true;
            }
        }
    }
    // The initial place survives even when acceptance is out of reach.
    alive[0] = true;
    let mut rename = vec![usize::MAX; states.len()];
    let mut places = Vec::new();
    for (i, &keep) in alive.iter().enumerate() {
        if keep {
            rename[i] = places.len();
            places.push(format!("q{}", places.len()));
        }
    }
    let transitions: Vec<_> = edges
        .into_iter()
        .filter(|&(s, d, _)| alive[s] && alive[d])
        .enumerate()
        .map(|(i, (s, d, g))| {
            (
                format!("t{i}"),
                places[rename[s]].clone(),
                places[rename[d]].clone(),
                g,
            )
        })
        .collect();
    let final_place = places[rename[accept_idx]].clone();
    Ok(SpecNet::from_parts(places.clone(), &places[0], &[final_place], transitions)
        .expect("compiled nets are well-formed"))
}

/// Guard for moving from pending set `pending` while discharging `sub`.
/// Literals come out in ascending proposition order; `None` if contradictory.
fn edge_guard(terms: &[ResolvedTerm], pending: u64, sub: u64) -> Option<Vec<Lit>> {
    let mut lits: Vec<Lit> = Vec::new();
    let push = |l: Lit, lits: &mut Vec<Lit>| -> bool {
        match lits.iter().find(|o| o.prop == l.prop) {
            Some(o) => o.positive == l.positive,
            None => {
                lits.push(l);
                true
            }
        }
    };
    for (i, t) in terms.iter().enumerate() {
        if pending & (1 << i) == 0 {
            continue;
        }
        let discharge = sub & (1 << i) != 0;
        let needed = match (*t, discharge) {
            (ResolvedTerm::Eventually(l), true) => Some(l),
            (ResolvedTerm::Eventually(_), false) => None,
            (ResolvedTerm::Until(_, b), true) => Some(b),
            (ResolvedTerm::Until(a, _), false) => Some(a),
            // Bare literals are settled at position 0 and never pending.
            (ResolvedTerm::Now(_), _) => unreachable!("pending position-0 literal"),
        };
        if let Some(l) = needed {
            if !push(l, &mut lits) {
                return None;
            }
        }
    }
    lits.sort_by_key(|l| l.prop);
    Some(lits)
}
