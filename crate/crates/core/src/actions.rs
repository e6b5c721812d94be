//! Action models, pointed epistemic actions, choice actions and their
//! interpretation of agent action symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::formula::{agents_of, ActionSym, AgentId, EnsembleSignature, Formula};
use crate::relation::Relation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("action model `{0}` has no events")]
    NoEvents(String),
    #[error("event `{event}` declared twice in `{model}`")]
    DuplicateEvent { model: String, event: String },
    #[error("event index {0} out of range")]
    BadPoint(usize),
    #[error("unknown event `{event}` in `{model}`")]
    UnknownEvent { model: String, event: String },
    #[error("relation of `{agent}` in `{model}` is not an equivalence")]
    NotEquivalence { model: String, agent: AgentId },
    #[error("relation of `{agent}` in `{model}` has the wrong size")]
    SizeMismatch { model: String, agent: AgentId },
    #[error("group member `{0}` is not an agent")]
    UnknownGroupMember(AgentId),
    #[error("`{formula}` is not a formula of agent `{agent}`; its possible agents are {{{}}}", join(.possible))]
    NotAgentFormula {
        agent: AgentId,
        formula: Formula,
        possible: BTreeSet<AgentId>,
    },
    #[error("a choice action needs at least one alternative")]
    EmptyChoice,
}

fn join(s: &BTreeSet<AgentId>) -> String {
    s.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ")
}

/// Events with per-agent indistinguishability and preconditions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionModel {
    name: String,
    events: Vec<String>,
    access: BTreeMap<AgentId, Relation>,
    pre: Vec<Formula>,
}

impl ActionModel {
    /// Relations must be equivalences over the events.
    pub fn new(
        name: impl Into<String>,
        events: Vec<(String, Formula)>,
        access: BTreeMap<AgentId, Relation>,
    ) -> Result<ActionModel, ActionError> {
        let name = name.into();
        if events.is_empty() {
            return Err(ActionError::NoEvents(name));
        }
        let mut seen = BTreeSet::new();
        for (e, _) in &events {
            if !seen.insert(e.clone()) {
                return Err(ActionError::DuplicateEvent { model: name, event: e.clone() });
            }
        }
        for (agent, rel) in &access {
            if rel.len() != events.len() {
                return Err(ActionError::SizeMismatch { model: name, agent: agent.clone() });
            }
            if !rel.is_equivalence() {
                return Err(ActionError::NotEquivalence { model: name, agent: agent.clone() });
            }
        }
        let (events, pre) = events.into_iter().unzip();
        Ok(ActionModel { name, events, access, pre })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn event_name(&self, e: usize) -> &str {
        &self.events[e]
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.events.iter().position(|e| e == name)
    }

    pub fn pre(&self, e: usize) -> &Formula {
        &self.pre[e]
    }

    pub fn relations(&self) -> &BTreeMap<AgentId, Relation> {
        &self.access
    }

    pub fn relation(&self, agent: &AgentId) -> Option<&Relation> {
        self.access.get(agent)
    }
}

/// An action model with a designated actual event.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EpistemicAction {
    model: Arc<ActionModel>,
    point: usize,
}

impl EpistemicAction {
    pub fn new(model: Arc<ActionModel>, point: usize) -> Result<EpistemicAction, ActionError> {
        if point >= model.event_count() {
            return Err(ActionError::BadPoint(point));
        }
        Ok(EpistemicAction { model, point })
    }

    pub fn at(model: Arc<ActionModel>, event: &str) -> Result<EpistemicAction, ActionError> {
        let point = model.event_index(event).ok_or_else(|| ActionError::UnknownEvent {
            model: model.name().to_string(),
            event: event.to_string(),
        })?;
        Ok(EpistemicAction { model, point })
    }

    pub fn model(&self) -> &ActionModel {
        &self.model
    }

    pub fn shared_model(&self) -> &Arc<ActionModel> {
        &self.model
    }

    pub fn point(&self) -> usize {
        self.point
    }

    pub fn pre(&self) -> &Formula {
        self.model.pre(self.point)
    }

    /// The same model pointed at another event.
    pub fn repoint(&self, event: usize) -> EpistemicAction {
        assert!(event < self.model.event_count());
        EpistemicAction { model: self.model.clone(), point: event }
    }

    pub fn event_name(&self) -> &str {
        self.model.event_name(self.point)
    }
}

impl fmt::Display for EpistemicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.model.name(), self.event_name())
    }
}

impl fmt::Debug for EpistemicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A non-empty set of alternatives; the environment picks one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceAction {
    alternatives: Vec<EpistemicAction>,
}

impl ChoiceAction {
    pub fn new(
        alternatives: impl IntoIterator<Item = EpistemicAction>,
    ) -> Result<ChoiceAction, ActionError> {
        let set: BTreeSet<EpistemicAction> = alternatives.into_iter().collect();
        if set.is_empty() {
            return Err(ActionError::EmptyChoice);
        }
        Ok(ChoiceAction { alternatives: set.into_iter().collect() })
    }

    pub fn single(action: EpistemicAction) -> ChoiceAction {
        ChoiceAction { alternatives: vec![action] }
    }

    pub fn alternatives(&self) -> &[EpistemicAction] {
        &self.alternatives
    }
}

/// Agents that may perform the action: the possible agents of its precondition.
pub fn agents_of_action(action: &EpistemicAction, agents: &BTreeSet<AgentId>) -> BTreeSet<AgentId> {
    agents_of(action.pre(), agents)
}

/// Intersection of the possible agents of all alternatives.
pub fn agents_of_choice(choice: &ChoiceAction, agents: &BTreeSet<AgentId>) -> BTreeSet<AgentId> {
    let mut it = choice.alternatives.iter();
    let first = agents_of_action(it.next().expect("choice is non-empty"), agents);
    it.fold(first, |acc, a| acc.intersection(&agents_of_action(a, agents)).cloned().collect())
}

/// Two events: `ek` with precondition `phi` and `en` with precondition `true`.
/// Agents in `group` tell them apart, everyone else confuses them.
pub fn group_announcement(
    name: impl Into<String>,
    agents: &BTreeSet<AgentId>,
    group: &BTreeSet<AgentId>,
    phi: Formula,
) -> Result<ActionModel, ActionError> {
    if let Some(a) = group.iter().find(|a| !agents.contains(*a)) {
        return Err(ActionError::UnknownGroupMember(a.clone()));
    }
    let access = agents
        .iter()
        .map(|a| {
            let rel = if group.contains(a) { Relation::identity(2) } else { Relation::universal(2) };
            (a.clone(), rel)
        })
        .collect();
    ActionModel::new(
        name,
        vec![("ek".to_string(), phi), ("en".to_string(), Formula::Top)],
        access,
    )
}

fn require_agent_formula(
    sender: &AgentId,
    phi: &Formula,
    agents: &BTreeSet<AgentId>,
) -> Result<(), ActionError> {
    let possible = agents_of(phi, agents);
    if possible.contains(sender) {
        Ok(())
    } else {
        Err(ActionError::NotAgentFormula {
            agent: sender.clone(),
            formula: phi.clone(),
            possible,
        })
    }
}

/// `sender` tells `receiver` that `phi`, but the message may be lost: the
/// receiver learns `phi` or nothing, and the sender cannot tell which.
pub fn lossy_send(
    name: impl Into<String>,
    agents: &BTreeSet<AgentId>,
    sender: &AgentId,
    receiver: &AgentId,
    phi: Formula,
) -> Result<ChoiceAction, ActionError> {
    require_agent_formula(sender, &phi, agents)?;
    let model = Arc::new(group_announcement(
        name,
        agents,
        &BTreeSet::from([receiver.clone()]),
        phi,
    )?);
    ChoiceAction::new([EpistemicAction::new(model.clone(), 0)?, EpistemicAction::new(model, 1)?])
}

/// `sender` tells `receiver` that `phi` and both know the message arrived.
pub fn reliable_send(
    name: impl Into<String>,
    agents: &BTreeSet<AgentId>,
    sender: &AgentId,
    receiver: &AgentId,
    phi: Formula,
) -> Result<ChoiceAction, ActionError> {
    require_agent_formula(sender, &phi, agents)?;
    let model = Arc::new(group_announcement(
        name,
        agents,
        &BTreeSet::from([sender.clone(), receiver.clone()]),
        phi,
    )?);
    Ok(ChoiceAction::single(EpistemicAction::new(model, 0)?))
}

/// Maps every agent action symbol to a choice action.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActionInterpretation {
    map: BTreeMap<ActionSym, ChoiceAction>,
}

impl ActionInterpretation {
    pub fn new(map: BTreeMap<ActionSym, ChoiceAction>) -> ActionInterpretation {
        ActionInterpretation { map }
    }

    pub fn insert(&mut self, sym: ActionSym, action: ChoiceAction) {
        self.map.insert(sym, action);
    }

    pub fn get(&self, sym: &ActionSym) -> Option<&ChoiceAction> {
        self.map.get(sym)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ActionSym, &ChoiceAction)> {
        self.map.iter()
    }

    /// Every pointed action occurring as an alternative, without repeats.
    pub fn pointed_actions(&self) -> BTreeSet<EpistemicAction> {
        self.map.values().flat_map(|c| c.alternatives.iter().cloned()).collect()
    }
}

/// A problem with an action interpretation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterpretationDiagnostic {
    /// A signature symbol with no interpretation.
    Missing { sym: ActionSym },
    /// An interpreted symbol absent from the signature.
    Unknown { sym: ActionSym },
    /// The owner of the symbol is not among the possible agents of the action.
    AgentMismatch {
        sym: ActionSym,
        owner: AgentId,
        possible: BTreeSet<AgentId>,
    },
    /// An action model whose agents differ from the signature's.
    AgentSet { sym: ActionSym, model: String },
}

impl fmt::Display for InterpretationDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterpretationDiagnostic::Missing { sym } => {
                write!(f, "action symbol `{sym}` has no interpretation")
            }
            InterpretationDiagnostic::Unknown { sym } => {
                write!(f, "`{sym}` is interpreted but not declared in the signature")
            }
            InterpretationDiagnostic::AgentMismatch { sym, owner, possible } => write!(
                f,
                "`{sym}` belongs to `{owner}` but its action may only be performed by {{{}}}",
                join(possible)
            ),
            InterpretationDiagnostic::AgentSet { sym, model } => write!(
                f,
                "model `{model}` used by `{sym}` does not have relations for exactly the signature's agents"
            ),
        }
    }
}

/// Checks totality and that each symbol's owner may perform its action.
pub fn validate_interpretation(
    interp: &ActionInterpretation,
    sig: &EnsembleSignature,
) -> Vec<InterpretationDiagnostic> {
    let mut out = Vec::new();
    for sym in sig.all_actions() {
        match interp.get(sym) {
            None => out.push(InterpretationDiagnostic::Missing { sym: sym.clone() }),
            Some(choice) => {
                let owner = sig.owner(sym).expect("declared symbols have owners");
                for alt in choice.alternatives() {
                    let model_agents: BTreeSet<AgentId> =
                        alt.model().relations().keys().cloned().collect();
                    if &model_agents != sig.agents() {
                        out.push(InterpretationDiagnostic::AgentSet {
                            sym: sym.clone(),
                            model: alt.model().name().to_string(),
                        });
                        break;
                    }
                }
                let possible = agents_of_choice(choice, sig.agents());
                if !possible.contains(owner) {
                    out.push(InterpretationDiagnostic::AgentMismatch {
                        sym: sym.clone(),
                        owner: owner.clone(),
                        possible,
                    });
                }
            }
        }
    }
    for (sym, _) in interp.iter() {
        if sig.owner(sym).is_none() {
            out.push(InterpretationDiagnostic::Unknown { sym: sym.clone() });
        }
    }
    out
}
