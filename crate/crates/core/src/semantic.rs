//! Execution over classes of pointed Kripke structures.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::actions::{ActionInterpretation, ChoiceAction, EpistemicAction};
use crate::engine::{Config, Environment};
use crate::formula::{ActionSym, Formula};
use crate::kripke::{KripkeError, PointedKripke};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticError {
    #[error("a state class must not be empty")]
    EmptyClass,
    #[error("action symbol `{0}` has no interpretation")]
    Uninterpreted(ActionSym),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
}

/// A finite non-empty set of states, each kept minimized and canonically
/// named so that equal classes compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateClass(BTreeSet<PointedKripke>);

impl StateClass {
    pub fn new(states: impl IntoIterator<Item = PointedKripke>) -> Result<StateClass, SemanticError> {
        let set: BTreeSet<PointedKripke> = states.into_iter().map(|s| s.minimize()).collect();
        if set.is_empty() {
            return Err(SemanticError::EmptyClass);
        }
        Ok(StateClass(set))
    }

    pub fn singleton(state: PointedKripke) -> StateClass {
        StateClass(BTreeSet::from([state.minimize()]))
    }

    pub fn members(&self) -> impl Iterator<Item = &PointedKripke> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every member satisfies `f`.
    pub fn satisfies(&self, f: &Formula) -> Result<bool, KripkeError> {
        for s in &self.0 {
            if !s.satisfies(f)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Member-wise update; `None` unless every member satisfies the
    /// precondition.
    pub fn update(&self, action: &EpistemicAction) -> Result<Option<StateClass>, KripkeError> {
        if !self.satisfies(action.pre())? {
            return Ok(None);
        }
        let mut out = BTreeSet::new();
        for s in &self.0 {
            let next = s.product_update(action)?.expect("precondition checked for every member");
            out.insert(next.minimize());
        }
        Ok(Some(StateClass(out)))
    }
}

impl fmt::Debug for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateClass({} states)", self.0.len())
    }
}

pub fn class_satisfies(class: &StateClass, f: &Formula) -> Result<bool, KripkeError> {
    class.satisfies(f)
}

/// One successor class per enabled alternative.
pub fn choice_step(class: &StateClass, choice: &ChoiceAction) -> Result<Vec<StateClass>, KripkeError> {
    let mut out = BTreeSet::new();
    for alt in choice.alternatives() {
        if let Some(next) = class.update(alt)? {
            out.insert(next);
        }
    }
    Ok(out.into_iter().collect())
}

/// Configurations over state classes.
pub type Configuration = Config<StateClass>;

/// Guards are evaluated on the whole class and actions act member-wise.
#[derive(Clone, Debug)]
pub struct SemanticEnv<'a> {
    pub interpretation: &'a ActionInterpretation,
}

impl<'a> SemanticEnv<'a> {
    pub fn new(interpretation: &'a ActionInterpretation) -> SemanticEnv<'a> {
        SemanticEnv { interpretation }
    }
}

impl Environment for SemanticEnv<'_> {
    type State = StateClass;
    type Error = SemanticError;

    fn holds(&self, state: &StateClass, guard: &Formula) -> Result<bool, SemanticError> {
        Ok(state.satisfies(guard)?)
    }

    fn successors(&self, state: &StateClass, action: &ActionSym) -> Result<Vec<StateClass>, SemanticError> {
        let choice = self
            .interpretation
            .get(action)
            .ok_or_else(|| SemanticError::Uninterpreted(action.clone()))?;
        Ok(choice_step(state, choice)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::lossy_send;
    use crate::formula::AgentId;
    use crate::kripke::KripkeBuilder;

    fn est0() -> PointedKripke {
        KripkeBuilder::new(["a1", "a2"])
            .world("w0", ["x1"])
            .world("w1", Vec::<&str>::new())
            .block("a2", &["w0", "w1"])
            .build_pointed("w0")
            .unwrap()
    }

    fn est0_flipped() -> PointedKripke {
        KripkeBuilder::new(["a1", "a2"])
            .world("w0", ["x1"])
            .world("w1", Vec::<&str>::new())
            .block("a2", &["w0", "w1"])
            .build_pointed("w1")
            .unwrap()
    }

    #[test]
    fn empty_class_is_rejected() {
        assert_eq!(StateClass::new([]), Err(SemanticError::EmptyClass));
    }

    #[test]
    fn mixed_class_does_not_know() {
        let k1x1 = Formula::knows("a1", Formula::prop("x1"));
        let mixed = StateClass::new([est0(), est0_flipped()]).unwrap();
        assert!(!mixed.satisfies(&k1x1).unwrap());
        assert!(mixed.satisfies(&Formula::Top).unwrap());
        assert!(StateClass::singleton(est0()).satisfies(&k1x1).unwrap());
    }

    #[test]
    fn lossy_send_gives_two_successors() {
        let agents = BTreeSet::from([AgentId::new("a1"), AgentId::new("a2")]);
        let send = lossy_send(
            "tell",
            &agents,
            &AgentId::new("a1"),
            &AgentId::new("a2"),
            Formula::knows("a1", Formula::prop("x1")),
        )
        .unwrap();
        let next = choice_step(&StateClass::singleton(est0()), &send).unwrap();
        assert_eq!(next.len(), 2);
        assert!(next.iter().all(|c| c.len() == 1));
        let none = choice_step(&StateClass::singleton(est0_flipped()), &send).unwrap();
        assert_eq!(none.len(), 1, "only the lost branch is enabled without K[a1] x1");
    }
}
