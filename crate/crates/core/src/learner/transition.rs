//! Arc-standard transition system.
//!
//! The stack starts as `[root]`, the buffer holds tokens `1..=n`. An arc from
//! the root may only be built once the buffer is empty and the stack holds
//! the root plus one word, so every terminal configuration encodes a tree
//! with exactly one root.

use std::fmt;

use crate::conllu::Sentence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    /// `s1 <- s0`: the second stack item becomes a dependent of the top.
    LeftArc(String),
    /// `s1 -> s0`: the top becomes a dependent of the second item.
    RightArc(String),
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Shift => write!(f, "SH"),
            Transition::LeftArc(l) => write!(f, "LA({})", l),
            Transition::RightArc(l) => write!(f, "RA({})", l),
        }
    }
}

/// Parser configuration. Token positions are 1-based, 0 is the root.
#[derive(Clone, Debug)]
pub(crate) struct State {
    pub(crate) n: usize,
    pub(crate) stack: Vec<usize>,
    /// Next buffer position; the buffer is `next..=n`.
    pub(crate) next: usize,
    pub(crate) heads: Vec<usize>,
    /// Label index per position, `usize::MAX` when unattached.
    pub(crate) labels: Vec<usize>,
    pub(crate) leftmost: Vec<usize>,
    pub(crate) rightmost: Vec<usize>,
    pub(crate) left_count: Vec<u8>,
    pub(crate) right_count: Vec<u8>,
}

pub(crate) const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Move {
    Shift,
    Left(usize),
    Right(usize),
}

impl State {
    pub(crate) fn new(n: usize) -> Self {
        State {
            n,
            stack: vec![0],
            next: 1,
            heads: vec![NONE; n + 1],
            labels: vec![NONE; n + 1],
            leftmost: vec![NONE; n + 1],
            rightmost: vec![NONE; n + 1],
            left_count: vec![0; n + 1],
            right_count: vec![0; n + 1],
        }
    }

    pub(crate) fn buffer_empty(&self) -> bool {
        self.next > self.n
    }

    pub(crate) fn is_terminal(&self) -> bool {
        self.buffer_empty() && self.stack.len() == 1
    }

    pub(crate) fn s(&self, k: usize) -> Option<usize> {
        let len = self.stack.len();
        (k < len).then(|| self.stack[len - 1 - k])
    }

    pub(crate) fn b(&self, k: usize) -> Option<usize> {
        let pos = self.next + k;
        (pos <= self.n).then_some(pos)
    }

    pub(crate) fn can_shift(&self) -> bool {
        !self.buffer_empty()
    }

    pub(crate) fn can_left(&self) -> bool {
        self.stack.len() >= 3
    }

    pub(crate) fn can_right(&self) -> bool {
        match self.stack.len() {
            0 | 1 => false,
            2 => self.buffer_empty(),
            _ => true,
        }
    }

    /// Whether a right arc would attach to the root.
    pub(crate) fn right_attaches_root(&self) -> bool {
        self.stack.len() == 2
    }

    fn attach(&mut self, head: usize, dep: usize, label: usize) {
        self.heads[dep] = head;
        self.labels[dep] = label;
        if dep < head {
            if self.leftmost[head] == NONE || dep < self.leftmost[head] {
                self.leftmost[head] = dep;
            }
            self.left_count[head] = self.left_count[head].saturating_add(1);
        } else {
            if self.rightmost[head] == NONE || dep > self.rightmost[head] {
                self.rightmost[head] = dep;
            }
            self.right_count[head] = self.right_count[head].saturating_add(1);
        }
    }

    pub(crate) fn apply(&mut self, mv: Move) {
        match mv {
            Move::Shift => {
                debug_assert!(self.can_shift());
                self.stack.push(self.next);
                self.next += 1;
            }
            Move::Left(label) => {
                debug_assert!(self.can_left());
                let s0 = self.stack.pop().expect("stack");
                let s1 = self.stack.pop().expect("stack");
                self.attach(s0, s1, label);
                self.stack.push(s0);
            }
            Move::Right(label) => {
                debug_assert!(self.can_right());
                let s0 = self.stack.pop().expect("stack");
                let s1 = *self.stack.last().expect("stack");
                self.attach(s1, s0, label);
            }
        }
    }
}

/// Whether no two arcs cross, counting the arc from the artificial root.
pub fn is_projective(heads: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(k, &h)| (h.min(k + 1), h.max(k + 1)))
        .collect();
    for (i, &(a1, b1)) in arcs.iter().enumerate() {
        for &(a2, b2) in &arcs[i + 1..] {
            if (a1 < a2 && a2 < b1 && b1 < b2) || (a2 < a1 && a1 < b2 && b2 < b1) {
                return false;
            }
        }
    }
    true
}

/// Gold move sequence for a projective tree, as label strings.
pub fn static_oracle(tree: &Sentence) -> Result<Vec<Transition>> {
    let labels: Vec<&str> = tree.tokens.iter().map(|t| t.deprel.as_str()).collect();
    let moves = oracle_moves(&tree.heads())?;
    Ok(moves
        .into_iter()
        .map(|m| match m {
            Move::Shift => Transition::Shift,
            Move::Left(dep) => Transition::LeftArc(labels[dep - 1].to_string()),
            Move::Right(dep) => Transition::RightArc(labels[dep - 1].to_string()),
        })
        .collect())
}

/// Oracle over a head vector. The payload of arc moves is the dependent's
/// position, which callers map to a label.
pub(crate) fn oracle_moves(heads: &[usize]) -> Result<Vec<Move>> {
    crate::conllu::check_heads(heads).map_err(|m| Error::validation(0, m))?;
    if !is_projective(heads) {
        return Err(Error::validation(0, "tree is not projective"));
    }
    let n = heads.len();
    let head_of = |pos: usize| heads[pos - 1];
    let mut gold_children = vec![0usize; n + 1];
    for &h in heads {
        gold_children[h] += 1;
    }
    let mut attached_children = vec![0usize; n + 1];
    let mut state = State::new(n);
    let mut moves = Vec::with_capacity(2 * n);
    while !state.is_terminal() {
        let mv = match (state.s(0), state.s(1)) {
            (Some(s0), Some(s1)) if s1 != 0 && head_of(s1) == s0 => Move::Left(s1),
            (Some(s0), Some(s1))
                if head_of(s0) == s1
                    && attached_children[s0] == gold_children[s0]
                    && (s1 != 0 || state.buffer_empty()) =>
            {
                Move::Right(s0)
            }
            _ if state.can_shift() => Move::Shift,
            _ => return Err(Error::validation(0, "oracle stuck; tree is not arc-standard derivable")),
        };
        if let Move::Left(dep) | Move::Right(dep) = mv {
            attached_children[head_of(dep)] += 1;
        }
        // arc payloads hold the dependent, which doubles as a label slot here
        state.apply(mv);
        moves.push(mv);
    }
    Ok(moves)
}

/// Runs a transition sequence over `n` tokens and returns `(head, label)`
/// per token.
pub fn replay(n: usize, transitions: &[Transition]) -> Result<Vec<(usize, String)>> {
    let mut state = State::new(n);
    let mut labels: Vec<String> = Vec::new();
    for (k, t) in transitions.iter().enumerate() {
        let illegal = || Error::validation(0, format!("transition {} ({}) is not legal here", k, t));
        let mv = match t {
            Transition::Shift if state.can_shift() => Move::Shift,
            Transition::LeftArc(l) if state.can_left() => {
                labels.push(l.clone());
                Move::Left(labels.len() - 1)
            }
            Transition::RightArc(l) if state.can_right() => {
                labels.push(l.clone());
                Move::Right(labels.len() - 1)
            }
            _ => return Err(illegal()),
        };
        state.apply(mv);
    }
    if !state.is_terminal() {
        return Err(Error::validation(0, "transition sequence does not end in a terminal state"));
    }
    Ok((1..=n)
        .map(|pos| (state.heads[pos], labels[state.labels[pos]].clone()))
        .collect())
}
