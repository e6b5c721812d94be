//! Ensembles: one process per agent, composed in parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{ActionSym, AgentId, CompoundAction, EnsembleSignature, Formula};
use crate::process::{agents_of_process, Process, ProcessError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("no process given for agent `{0}`")]
    MissingAgent(AgentId),
    #[error("process given for unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("agent `{agent}` is not allowed to run `{process}`")]
    NotAllowed { agent: AgentId, process: Process },
    #[error("process of `{agent}`: {source}")]
    Process {
        agent: AgentId,
        #[source]
        source: ProcessError,
    },
}

/// A total map from agents to processes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ensemble {
    family: BTreeMap<AgentId, Process>,
}

/// `E --guard : action--> target`, performed by `agent`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EnsembleTransition {
    pub agent: AgentId,
    pub guard: Formula,
    pub action: ActionSym,
    pub target: Ensemble,
}

impl Ensemble {
    /// Checks totality, closedness and guardedness, and that every agent may
    /// run its process.
    pub fn new(
        family: BTreeMap<AgentId, Process>,
        sig: &EnsembleSignature,
    ) -> Result<Ensemble, EnsembleError> {
        for a in sig.agents() {
            if !family.contains_key(a) {
                return Err(EnsembleError::MissingAgent(a.clone()));
            }
        }
        for (a, p) in &family {
            if !sig.agents().contains(a) {
                return Err(EnsembleError::UnknownAgent(a.clone()));
            }
            p.check_well_formed()
                .map_err(|source| EnsembleError::Process { agent: a.clone(), source })?;
            if !agents_of_process(p, sig).contains(a) {
                return Err(EnsembleError::NotAllowed { agent: a.clone(), process: p.clone() });
            }
        }
        Ok(Ensemble { family })
    }

    pub fn process(&self, agent: &AgentId) -> Option<&Process> {
        self.family.get(agent)
    }

    pub fn family(&self) -> &BTreeMap<AgentId, Process> {
        &self.family
    }

    /// Every agent's transitions, each replacing only that agent's process.
    pub fn derivatives(&self) -> Vec<EnsembleTransition> {
        let mut out = BTreeSet::new();
        for (agent, p) in &self.family {
            let ts = p.derivatives().expect("ensemble processes are checked at construction");
            for t in ts {
                let mut family = self.family.clone();
                family.insert(agent.clone(), t.target);
                out.insert(EnsembleTransition {
                    agent: agent.clone(),
                    guard: t.guard,
                    action: t.action,
                    target: Ensemble { family },
                });
            }
        }
        out.into_iter().collect()
    }

    /// Guards occurring in any process.
    pub fn guards(&self) -> Vec<Formula> {
        self.family.values().flat_map(|p| p.guards()).collect()
    }

    /// Witnesses of `action` whose step sequences contain at most `depth`
    /// action steps. Each pass through a star body must perform at least one
    /// action step; without that restriction the set would be infinite.
    pub fn witnesses(&self, action: &CompoundAction, depth: usize) -> BTreeSet<Witness> {
        match action {
            CompoundAction::Atom(n) => {
                if depth == 0 {
                    return BTreeSet::new();
                }
                self.derivatives()
                    .into_iter()
                    .filter(|t| &t.action == n)
                    .map(|t| Witness {
                        steps: vec![GuardedStep { guard: t.guard, action: Some(t.action) }],
                        target: t.target,
                    })
                    .collect()
            }
            CompoundAction::Test(f) => BTreeSet::from([Witness {
                steps: vec![GuardedStep { guard: f.clone(), action: None }],
                target: self.clone(),
            }]),
            CompoundAction::Choice(a, b) => {
                let mut s = self.witnesses(a, depth);
                s.extend(self.witnesses(b, depth));
                s
            }
            CompoundAction::Seq(a, b) => {
                let mut out = BTreeSet::new();
                for w1 in self.witnesses(a, depth) {
                    let used = w1.action_steps();
                    for w2 in w1.target.witnesses(b, depth - used) {
                        out.insert(w1.concat(&w2));
                    }
                }
                out
            }
            CompoundAction::Star(body) => {
                let mut out = BTreeSet::from([Witness {
                    steps: vec![GuardedStep { guard: Formula::Top, action: None }],
                    target: self.clone(),
                }]);
                for w1 in self.witnesses(body, depth) {
                    let used = w1.action_steps();
                    if used == 0 {
                        continue;
                    }
                    for w2 in w1.target.witnesses(action, depth - used) {
                        out.insert(w1.concat(&w2));
                    }
                }
                out
            }
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, p) in &self.family {
            if !first {
                f.write_str(" || ")?;
            }
            first = false;
            write!(f, "{a} : ")?;
            match p {
                Process::Choice(..) | Process::Rec(..) => write!(f, "({p})")?,
                _ => write!(f, "{p}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A guard paired with an action symbol or with the empty action.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuardedStep {
    pub guard: Formula,
    /// `None` is the empty action produced by tests and star.
    pub action: Option<ActionSym>,
}

impl fmt::Display for GuardedStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Some(n) => write!(f, "{} : {n}", self.guard),
            None => write!(f, "{} : eps", self.guard),
        }
    }
}

/// A step sequence and the ensemble it leads to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Witness {
    pub steps: Vec<GuardedStep>,
    pub target: Ensemble,
}

impl Witness {
    pub fn action_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.action.is_some()).count()
    }

    fn concat(&self, next: &Witness) -> Witness {
        let mut steps = self.steps.clone();
        steps.extend(next.steps.iter().cloned());
        Witness { steps, target: next.target.clone() }
    }
}
