//! Checkers relating class semantics to member-wise semantics.

use epens::actions::{ChoiceAction, EpistemicAction};
use epens::engine::{compound_relation, evaluate, explore, Config, Truth};
use epens::ensemble::Ensemble;
use epens::formula::{CompoundAction, EnsembleFormula};
use epens::kripke::PointedKripke;
use epens::semantic::{choice_step, SemanticEnv, StateClass};

/// Every alternative of the model behind `action`.
pub fn all_events(action: &EpistemicAction) -> ChoiceAction {
    ChoiceAction::new((0..action.model().event_count()).map(|e| action.repoint(e))).unwrap()
}

fn singleton_steps(est: &PointedKripke, choice: &ChoiceAction) -> Vec<StateClass> {
    choice_step(&StateClass::singleton(est.clone()), choice).unwrap()
}

/// Every member of every class successor comes from a member step.
pub fn zag_violations(class: &StateClass, choice: &ChoiceAction) -> Vec<String> {
    let mut out = Vec::new();
    for next in choice_step(class, choice).unwrap() {
        for target in next.members() {
            let found = class.members().any(|est| {
                singleton_steps(est, choice).iter().any(|s| s.members().next() == Some(target))
            });
            if !found {
                out.push(format!("member of a successor of a {}-state class has no origin", class.len()));
            }
        }
    }
    out
}

/// Every member step extends to a class step containing its result.
pub fn zig_violations(class: &StateClass, choice: &ChoiceAction) -> Vec<String> {
    let successors = choice_step(class, choice).unwrap();
    let mut out = Vec::new();
    for est in class.members() {
        for single in singleton_steps(est, choice) {
            let target = single.members().next().unwrap();
            if !successors.iter().any(|s| s.members().any(|m| m == target)) {
                out.push(format!(
                    "a member of a {}-state class steps alone but the class has no matching successor",
                    class.len()
                ));
            }
        }
    }
    out
}

pub struct CompoundOutcome {
    pub zig: usize,
    pub zag: usize,
    pub edges: usize,
}

fn targets(
    env: &SemanticEnv<'_>,
    ensemble: &Ensemble,
    class: StateClass,
    action: &CompoundAction,
    max_nodes: usize,
) -> Option<Vec<Config<StateClass>>> {
    let g = explore(env, Config { ensemble: ensemble.clone(), state: class }, max_nodes).unwrap();
    if !g.is_closed() {
        return None;
    }
    let rel = compound_relation(env, &g, action).unwrap();
    Some(rel.succ[0].iter().map(|&v| g.nodes[v].clone()).collect())
}

/// Projects the compound-action edges out of `(ensemble, class)` onto the
/// members and back. `None` when some graph does not close within `max_nodes`.
pub fn compound_zigzag(
    env: &SemanticEnv<'_>,
    ensemble: &Ensemble,
    class: &StateClass,
    action: &CompoundAction,
    max_nodes: usize,
) -> Option<CompoundOutcome> {
    let class_targets = targets(env, ensemble, class.clone(), action, max_nodes)?;
    let mut member_targets = Vec::new();
    for est in class.members() {
        member_targets.push(targets(env, ensemble, StateClass::singleton(est.clone()), action, max_nodes)?);
    }
    let mut out = CompoundOutcome { zig: 0, zag: 0, edges: class_targets.len() };
    for t in &class_targets {
        for target in t.state.members() {
            let from_member = member_targets.iter().any(|ts| {
                ts.iter().any(|s| s.ensemble == t.ensemble && s.state.members().next() == Some(target))
            });
            if !from_member {
                out.zag += 1;
            }
        }
    }
    for ts in &member_targets {
        for s in ts {
            let target = s.state.members().next().unwrap();
            if !class_targets.iter().any(|t| t.ensemble == s.ensemble && t.state.members().any(|m| m == target)) {
                out.zig += 1;
            }
        }
    }
    Some(out)
}

/// Whether the class verdict equals the conjunction of the member verdicts;
/// `None` when a verdict is unknown.
pub fn decomposes(
    env: &SemanticEnv<'_>,
    ensemble: &Ensemble,
    class: &StateClass,
    psi: &EnsembleFormula,
    max_nodes: usize,
) -> Option<bool> {
    let verdict = |c: StateClass| {
        let g = explore(env, Config { ensemble: ensemble.clone(), state: c }, max_nodes).unwrap();
        match evaluate(env, &g, psi).unwrap()[0] {
            Truth::True => Some(true),
            Truth::False => Some(false),
            Truth::Unknown => None,
        }
    };
    let whole = verdict(class.clone())?;
    let mut all = true;
    for est in class.members() {
        all &= verdict(StateClass::singleton(est.clone()))?;
    }
    Some(whole == all)
}
