//! Agent processes and their guarded transitions.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{agents_of, ActionSym, AgentId, EnsembleSignature, Formula};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProcessError {
    #[error("recursion variable `{0}` occurs unguarded; every occurrence must sit below an action prefix")]
    Unguarded(String),
    #[error("free process variable `{0}`")]
    Free(String),
    #[error("more than {0} reachable process terms")]
    TooManyStates(usize),
}

/// A process term.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Nil,
    Prefix(ActionSym, Arc<Process>),
    Guard(Formula, Arc<Process>),
    Choice(Arc<Process>, Arc<Process>),
    Rec(String, Arc<Process>),
    Var(String),
}

/// `P --guard : action--> target`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessTransition {
    pub guard: Formula,
    pub action: ActionSym,
    pub target: Process,
}

impl Process {
    pub fn prefix(sym: impl Into<ActionSym>, p: Process) -> Process {
        Process::Prefix(sym.into(), Arc::new(p))
    }

    pub fn guard(f: Formula, p: Process) -> Process {
        Process::Guard(f, Arc::new(p))
    }

    pub fn choice(p: Process, q: Process) -> Process {
        Process::Choice(Arc::new(p), Arc::new(q))
    }

    pub fn rec(var: impl Into<String>, p: Process) -> Process {
        Process::Rec(var.into(), Arc::new(p))
    }

    pub fn var(var: impl Into<String>) -> Process {
        Process::Var(var.into())
    }

    /// Replaces free occurrences of `var` by `q`, which must be closed.
    pub fn substitute(&self, var: &str, q: &Process) -> Process {
        match self {
            Process::Nil => Process::Nil,
            Process::Var(x) if x == var => q.clone(),
            Process::Var(_) => self.clone(),
            Process::Prefix(n, p) => Process::Prefix(n.clone(), Arc::new(p.substitute(var, q))),
            Process::Guard(f, p) => Process::Guard(f.clone(), Arc::new(p.substitute(var, q))),
            Process::Choice(p, r) => Process::Choice(
                Arc::new(p.substitute(var, q)),
                Arc::new(r.substitute(var, q)),
            ),
            Process::Rec(x, _) if x == var => self.clone(),
            Process::Rec(x, p) => Process::Rec(x.clone(), Arc::new(p.substitute(var, q))),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Process::Nil => BTreeSet::new(),
            Process::Var(x) => BTreeSet::from([x.clone()]),
            Process::Prefix(_, p) | Process::Guard(_, p) => p.free_vars(),
            Process::Choice(p, q) => {
                let mut s = p.free_vars();
                s.extend(q.free_vars());
                s
            }
            Process::Rec(x, p) => {
                let mut s = p.free_vars();
                s.remove(x);
                s
            }
        }
    }

    /// Closed and every recursion variable occurs below a prefix.
    pub fn check_well_formed(&self) -> Result<(), ProcessError> {
        if let Some(x) = self.free_vars().into_iter().next() {
            return Err(ProcessError::Free(x));
        }
        self.check_guarded(&mut Vec::new())
    }

    fn check_guarded(&self, unguarded: &mut Vec<String>) -> Result<(), ProcessError> {
        match self {
            Process::Nil => Ok(()),
            Process::Var(x) => {
                if unguarded.contains(x) {
                    Err(ProcessError::Unguarded(x.clone()))
                } else {
                    Ok(())
                }
            }
            Process::Prefix(_, p) => p.check_guarded(&mut Vec::new()),
            Process::Guard(_, p) => p.check_guarded(unguarded),
            Process::Choice(p, q) => {
                p.check_guarded(unguarded)?;
                q.check_guarded(unguarded)
            }
            Process::Rec(x, p) => {
                unguarded.push(x.clone());
                let r = p.check_guarded(unguarded);
                unguarded.pop();
                r
            }
        }
    }

    /// All guarded transitions. The term must be closed and guarded.
    pub fn derivatives(&self) -> Result<Vec<ProcessTransition>, ProcessError> {
        self.check_well_formed()?;
        let mut out = BTreeSet::new();
        for (guard, action, target) in self.derive() {
            out.insert(ProcessTransition {
                guard: guard.unwrap_or(Formula::Top),
                action,
                target,
            });
        }
        Ok(out.into_iter().collect())
    }

    /// Transitions with `None` standing for the empty guard of a bare prefix.
    /// A guard rule conjoins its formula in front of the derived guard, so
    /// nested guards come out right-nested with the outermost first.
    fn derive(&self) -> Vec<(Option<Formula>, ActionSym, Process)> {
        match self {
            Process::Nil | Process::Var(_) => Vec::new(),
            Process::Prefix(n, p) => vec![(None, n.clone(), (**p).clone())],
            Process::Guard(f, p) => p
                .derive()
                .into_iter()
                .map(|(g, n, t)| {
                    let joined = match g {
                        None => f.clone(),
                        Some(g) => Formula::and(f.clone(), g),
                    };
                    (Some(joined), n, t)
                })
                .collect(),
            Process::Choice(p, q) => {
                let mut v = p.derive();
                v.extend(q.derive());
                v
            }
            Process::Rec(x, p) => p.substitute(x, self).derive(),
        }
    }

    /// Every term reachable through transitions, including `self`.
    pub fn reachable(&self, limit: usize) -> Result<BTreeSet<Process>, ProcessError> {
        let mut seen = BTreeSet::from([self.clone()]);
        let mut queue = VecDeque::from([self.clone()]);
        while let Some(p) = queue.pop_front() {
            for t in p.derivatives()? {
                if seen.insert(t.target.clone()) {
                    if seen.len() > limit {
                        return Err(ProcessError::TooManyStates(limit));
                    }
                    queue.push_back(t.target);
                }
            }
        }
        Ok(seen)
    }

    pub fn actions(&self) -> BTreeSet<ActionSym> {
        match self {
            Process::Nil | Process::Var(_) => BTreeSet::new(),
            Process::Prefix(n, p) => {
                let mut s = p.actions();
                s.insert(n.clone());
                s
            }
            Process::Guard(_, p) | Process::Rec(_, p) => p.actions(),
            Process::Choice(p, q) => {
                let mut s = p.actions();
                s.extend(q.actions());
                s
            }
        }
    }

    /// Guards occurring syntactically in the term.
    pub fn guards(&self) -> Vec<Formula> {
        match self {
            Process::Nil | Process::Var(_) => Vec::new(),
            Process::Prefix(_, p) | Process::Rec(_, p) => p.guards(),
            Process::Guard(f, p) => {
                let mut v = vec![f.clone()];
                v.extend(p.guards());
                v
            }
            Process::Choice(p, q) => {
                let mut v = p.guards();
                v.extend(q.guards());
                v
            }
        }
    }

    fn level(&self) -> u8 {
        match self {
            Process::Rec(..) => 0,
            Process::Choice(..) => 1,
            _ => 2,
        }
    }

    fn write_at(&self, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Nil => f.write_str("nil"),
            Process::Var(x) => f.write_str(x),
            Process::Prefix(n, p) => {
                write!(f, "{n} . ")?;
                p.write_at(2, f)
            }
            Process::Guard(g, p) => {
                write!(f, "[{g}] ")?;
                p.write_at(2, f)
            }
            Process::Choice(p, q) => {
                p.write_at(1, f)?;
                f.write_str(" + ")?;
                q.write_at(2, f)
            }
            Process::Rec(x, p) => {
                write!(f, "mu {x} . ")?;
                p.write_at(1, f)
            }
        }
    }
}

impl fmt::Debug for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Agents allowed to run the process: everyone for `nil` and variables, the
/// owner of each prefix, and the possible agents of each guard.
pub fn agents_of_process(p: &Process, sig: &EnsembleSignature) -> BTreeSet<AgentId> {
    match p {
        Process::Nil | Process::Var(_) => sig.agents().clone(),
        Process::Prefix(n, q) => {
            let rest = agents_of_process(q, sig);
            match sig.owner(n) {
                Some(owner) if rest.contains(owner) => BTreeSet::from([owner.clone()]),
                _ => BTreeSet::new(),
            }
        }
        Process::Guard(f, q) => agents_of(f, sig.agents())
            .intersection(&agents_of_process(q, sig))
            .cloned()
            .collect(),
        Process::Choice(q, r) => agents_of_process(q, sig)
            .intersection(&agents_of_process(r, sig))
            .cloned()
            .collect(),
        Process::Rec(_, q) => agents_of_process(q, sig),
    }
}
