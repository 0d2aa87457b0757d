//! Boolean labels over atomic propositions: literals, conjunctions, and the
//! guard-expression parser used by mission files.
//!
//! Guard text accepts `&` or `,` for conjunction, `|` for disjunction, `!`
//! for negation, parentheses, and the constants `1`/`true` and `0`/`false`.
//! Unicode `∧`, `∨` and `¬` are accepted as aliases. Anything that is not a
//! plain conjunction is expanded into disjunctive normal form.

use std::fmt;

use thiserror::Error;

use crate::multiset::Universe;

/// Upper bound on the number of disjuncts produced when expanding a guard.
pub const DEFAULT_MAX_DISJUNCTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub prop: String,
    pub positive: bool,
}

impl Literal {
    pub fn pos(prop: impl Into<String>) -> Self {
        Literal {
            prop: prop.into(),
            positive: true,
        }
    }

    pub fn neg(prop: impl Into<String>) -> Self {
        Literal {
            prop: prop.into(),
            positive: false,
        }
    }

    pub fn negated(&self) -> Self {
        Literal {
            prop: self.prop.clone(),
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("!")?;
        }
        f.write_str(&self.prop)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("proposition `{0}` appears more than once in a conjunction")]
    RepeatedProposition(String),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("more than 64 propositions are not supported")]
    TooManyPropositions,
}

/// A conjunction of literals; the empty conjunction is `TRUE`.
///
/// No proposition occurs twice, so a conjunction is always satisfiable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Conjunction {
    literals: Vec<Literal>,
}

impl Conjunction {
    pub fn truth() -> Self {
        Conjunction::default()
    }

    pub fn new(literals: Vec<Literal>) -> Result<Self, LogicError> {
        for (i, l) in literals.iter().enumerate() {
            if literals[..i].iter().any(|o| o.prop == l.prop) {
                return Err(LogicError::RepeatedProposition(l.prop.clone()));
            }
        }
        Ok(Conjunction { literals })
    }

    /// Drops repeated literals; returns `None` when `p` and `!p` both occur.
    pub fn simplify(literals: impl IntoIterator<Item = Literal>) -> Option<Self> {
        let mut out: Vec<Literal> = Vec::new();
        for l in literals {
            match out.iter().find(|o| o.prop == l.prop) {
                Some(o) if o.positive == l.positive => {}
                Some(_) => return None,
                None => out.push(l),
            }
        }
        Some(Conjunction { literals: out })
    }

    pub fn positive<I, S>(props: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Conjunction::simplify(props.into_iter().map(Literal::pos)).expect("positive literals")
    }

    pub fn is_true(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// True iff every literal of `self` is also a literal of `other`.
    pub fn subsumes(&self, other: &Conjunction) -> bool {
        self.literals.iter().all(|l| other.literals.contains(l))
    }

    /// Reorders literals by the position of their proposition in `order`;
    /// unknown propositions go last in their original order.
    pub fn sorted_by(&self, order: &Universe) -> Conjunction {
        let mut literals = self.literals.clone();
        literals.sort_by_key(|l| order.index_of(&l.prop).unwrap_or(usize::MAX));
        Conjunction { literals }
    }

    pub fn resolve(&self, props: &Universe) -> Result<LiteralMask, LogicError> {
        if props.len() > 64 {
            return Err(LogicError::TooManyPropositions);
        }
        let mut mask = LiteralMask::default();
        for l in &self.literals {
            let idx = props
                .index_of(&l.prop)
                .ok_or_else(|| LogicError::UnknownProposition(l.prop.clone()))?;
            if l.positive {
                mask.positive |= 1 << idx;
            } else {
                mask.negative |= 1 << idx;
            }
        }
        Ok(mask)
    }
}

/// Canonical text: `1` for TRUE, otherwise literals joined by ` & `.
impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return f.write_str("1");
        }
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Set of propositions observed true at one instant, as a bitset over a
/// proposition universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Observation(pub u64);

impl Observation {
    pub fn holds(self, prop: usize) -> bool {
        self.0 & (1 << prop) != 0
    }

    pub fn with(self, prop: usize) -> Self {
        Observation(self.0 | (1 << prop))
    }
}

/// A conjunction resolved against a proposition universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LiteralMask {
    pub positive: u64,
    pub negative: u64,
}

impl LiteralMask {
    pub fn holds(&self, obs: Observation) -> bool {
        obs.0 & self.positive == self.positive && obs.0 & self.negative == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuardParseError {
    #[error("unexpected character `{ch}` at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected {found} at offset {pos}, expected {expected}")]
    Unexpected {
        found: String,
        expected: &'static str,
        pos: usize,
    },
    #[error("guard expands to more than {limit} disjuncts")]
    TooLarge { limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    And,
    Or,
    Not,
    LParen,
    RParen,
}

fn describe(t: Option<&(Tok, usize)>) -> String {
    match t {
        None => "end of input".into(),
        Some((Tok::Ident(s), _)) => format!("`{s}`"),
        Some((Tok::True, _)) => "`1`".into(),
        Some((Tok::False, _)) => "`0`".into(),
        Some((Tok::And, _)) => "`&`".into(),
        Some((Tok::Or, _)) => "`|`".into(),
        Some((Tok::Not, _)) => "`!`".into(),
        Some((Tok::LParen, _)) => "`(`".into(),
        Some((Tok::RParen, _)) => "`)`".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, GuardParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        let single = match ch {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '&' | ',' | '∧' => Some(Tok::And),
            '|' | '∨' => Some(Tok::Or),
            '!' | '¬' | '~' => Some(Tok::Not),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            // Accept doubled `&&` / `||`.
            if matches!(tok, Tok::And | Tok::Or) {
                if let Some(&(_, next)) = chars.peek() {
                    if next == ch && (ch == '&' || ch == '|') {
                        chars.next();
                    }
                }
            }
            out.push((tok, pos));
            continue;
        }
        if ch.is_ascii_alphanumeric() || ch == '_' {
            let mut word = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                    word.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            let tok = match word.as_str() {
                "1" | "true" | "True" | "TRUE" => Tok::True,
                "0" | "false" | "False" | "FALSE" => Tok::False,
                _ if word.starts_with(|c: char| c.is_ascii_digit()) => {
                    return Err(GuardParseError::UnexpectedChar { ch, pos })
                }
                _ => Tok::Ident(word),
            };
            out.push((tok, pos));
            continue;
        }
        return Err(GuardParseError::UnexpectedChar { ch, pos });
    }
    Ok(out)
}

/// Disjunctive normal form: a list of clauses, each a list of literals.
/// `[]` is FALSE, `[[]]` is TRUE.
type Clauses = Vec<Vec<Literal>>;

struct GuardParser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    limit: usize,
}

impl GuardParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn unexpected(&self, expected: &'static str) -> GuardParseError {
        GuardParseError::Unexpected {
            found: describe(self.toks.get(self.at)),
            expected,
            pos: self.pos(),
        }
    }

    fn check(&self, clauses: &Clauses) -> Result<(), GuardParseError> {
        if clauses.len() > self.limit {
            Err(GuardParseError::TooLarge { limit: self.limit })
        } else {
            Ok(())
        }
    }

    // `negate` pushes negation inward (De Morgan) while parsing.
    fn disjunction(&mut self, negate: bool) -> Result<Clauses, GuardParseError> {
        let mut parts = vec![self.conjunction(negate)?];
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            parts.push(self.conjunction(negate)?);
        }
        if negate {
            self.product(parts)
        } else {
            self.union(parts)
        }
    }

    fn conjunction(&mut self, negate: bool) -> Result<Clauses, GuardParseError> {
        let mut parts = vec![self.unary(negate)?];
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            parts.push(self.unary(negate)?);
        }
        if negate {
            self.union(parts)
        } else {
            self.product(parts)
        }
    }

    fn unary(&mut self, negate: bool) -> Result<Clauses, GuardParseError> {
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.at += 1;
                self.unary(!negate)
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.disjunction(negate)?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.unexpected("`)`"));
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::True) => {
                self.at += 1;
                Ok(if negate { vec![] } else { vec![vec![]] })
            }
            Some(Tok::False) => {
                self.at += 1;
                Ok(if negate { vec![vec![]] } else { vec![] })
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                Ok(vec![vec![Literal {
                    prop: name,
                    positive: !negate,
                }]])
            }
            _ => Err(self.unexpected("a proposition, constant, `!` or `(`")),
        }
    }

    fn union(&self, parts: Vec<Clauses>) -> Result<Clauses, GuardParseError> {
        let out: Clauses = parts.into_iter().flatten().collect();
        self.check(&out)?;
        Ok(out)
    }

    fn product(&self, parts: Vec<Clauses>) -> Result<Clauses, GuardParseError> {
        let mut acc: Clauses = vec![vec![]];
        for part in parts {
            let mut next = Vec::with_capacity(acc.len() * part.len());
            for a in &acc {
                for b in &part {
                    let mut c = a.clone();
                    c.extend(b.iter().cloned());
                    next.push(c);
                }
            }
            self.check(&next)?;
            acc = next;
        }
        Ok(acc)
    }
}

/// Parses guard text into a minimal list of satisfiable conjunctions whose
/// disjunction is equivalent to the input.
///
/// Contradictory clauses are dropped and clauses implied by a weaker clause
/// are absorbed. An empty result means the guard is unsatisfiable; a single
/// TRUE clause means the guard always holds.
pub fn parse_guard(text: &str, max_disjuncts: usize) -> Result<Vec<Conjunction>, GuardParseError> {
    let toks = tokenize(text)?;
    let mut parser = GuardParser {
        toks,
        at: 0,
        end: text.len(),
        limit: max_disjuncts,
    };
    let clauses = parser.disjunction(false)?;
    if parser.at != parser.toks.len() {
        return Err(parser.unexpected("`&`, `|` or end of input"));
    }
    let simplified: Vec<Conjunction> = clauses
        .into_iter()
        .filter_map(Conjunction::simplify)
        .collect();
    let mut kept: Vec<Conjunction> = Vec::new();
    for (i, c) in simplified.iter().enumerate() {
        let absorbed = simplified.iter().enumerate().any(|(j, o)| {
            j != i && o.subsumes(c) && (!c.subsumes(o) || j < i)
        });
        if !absorbed {
            kept.push(c.clone());
        }
    }
    Ok(kept)
}
