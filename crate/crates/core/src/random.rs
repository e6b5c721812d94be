//! Seeded generators of random instances for testing and fuzzing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::actions::{ActionModel, EpistemicAction};
use crate::formula::{ActionSym, AgentId, CompoundAction, EnsembleFormula, FocusSet, Formula, Prop};
use crate::kripke::{KripkeStructure, PointedKripke};
use crate::relation::Relation;

/// An epistemic formula of modal depth and connective nesting at most `depth`.
pub fn formula<R: Rng>(rng: &mut R, agents: &[AgentId], props: &[Prop], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return if props.is_empty() || rng.gen_bool(0.1) {
            Formula::Top
        } else {
            Formula::Prop(props.choose(rng).expect("non-empty").clone())
        };
    }
    match rng.gen_range(0..3) {
        0 => Formula::not(formula(rng, agents, props, depth - 1)),
        1 => Formula::and(formula(rng, agents, props, depth - 1), formula(rng, agents, props, depth - 1)),
        _ => Formula::knows(
            agents.choose(rng).expect("agents must not be empty").clone(),
            formula(rng, agents, props, depth - 1),
        ),
    }
}

/// A random partition of `0..n` as an equivalence relation.
pub fn partition<R: Rng>(rng: &mut R, n: usize) -> Relation {
    let blocks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut by_block: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, b) in blocks.into_iter().enumerate() {
        by_block.entry(b).or_default().push(i);
    }
    Relation::from_blocks(n, by_block.into_values())
}

/// A pointed S5 structure with between 1 and `max_worlds` worlds.
pub fn kripke<R: Rng>(rng: &mut R, agents: &[AgentId], props: &[Prop], max_worlds: usize) -> PointedKripke {
    let n = rng.gen_range(1..=max_worlds.max(1));
    let worlds = (0..n)
        .map(|i| {
            let label: BTreeSet<Prop> = props.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            (format!("w{i}"), label)
        })
        .collect();
    let access = agents.iter().map(|a| (a.clone(), partition(rng, n))).collect();
    let s = KripkeStructure::new(worlds, access).expect("generated structure is well formed");
    let point = rng.gen_range(0..n);
    PointedKripke::new(s, point).expect("point is in range")
}

/// A pointed action model with between 1 and `max_events` events whose
/// preconditions have depth at most `pre_depth`.
pub fn action<R: Rng>(
    rng: &mut R,
    agents: &[AgentId],
    props: &[Prop],
    max_events: usize,
    pre_depth: usize,
) -> EpistemicAction {
    let n = rng.gen_range(1..=max_events.max(1));
    let events = (0..n)
        .map(|i| (format!("e{i}"), formula(rng, agents, props, pre_depth)))
        .collect();
    let access = agents.iter().map(|a| (a.clone(), partition(rng, n))).collect();
    let model = ActionModel::new("random", events, access).expect("generated model is well formed");
    let point = rng.gen_range(0..n);
    EpistemicAction::new(Arc::new(model), point).expect("point is in range")
}

/// A member of the Boolean closure of `focus` with connective nesting at most
/// `depth`.
pub fn closure_formula<R: Rng>(rng: &mut R, focus: &FocusSet, depth: usize) -> Formula {
    let items: Vec<&Formula> = focus.iter().collect();
    if depth == 0 || rng.gen_bool(0.3) {
        return if items.is_empty() || rng.gen_bool(0.1) {
            Formula::Top
        } else {
            (*items.choose(rng).expect("non-empty")).clone()
        };
    }
    if rng.gen_bool(0.4) {
        Formula::not(closure_formula(rng, focus, depth - 1))
    } else {
        Formula::and(closure_formula(rng, focus, depth - 1), closure_formula(rng, focus, depth - 1))
    }
}

/// A compound action over `atoms` whose tests lie in the closure of `focus`.
pub fn compound<R: Rng>(rng: &mut R, atoms: &[ActionSym], focus: &FocusSet, depth: usize) -> CompoundAction {
    if depth == 0 || rng.gen_bool(0.3) {
        return if atoms.is_empty() || rng.gen_bool(0.15) {
            CompoundAction::test(closure_formula(rng, focus, 1))
        } else {
            CompoundAction::Atom(atoms.choose(rng).expect("non-empty").clone())
        };
    }
    match rng.gen_range(0..3) {
        0 => CompoundAction::choice(compound(rng, atoms, focus, depth - 1), compound(rng, atoms, focus, depth - 1)),
        1 => CompoundAction::seq(compound(rng, atoms, focus, depth - 1), compound(rng, atoms, focus, depth - 1)),
        _ => CompoundAction::star(compound(rng, atoms, focus, depth - 1)),
    }
}

/// A dynamic formula with at most `box_depth` nested boxes whose epistemic
/// parts lie in the closure of `focus`.
pub fn ensemble_formula<R: Rng>(
    rng: &mut R,
    atoms: &[ActionSym],
    focus: &FocusSet,
    box_depth: usize,
) -> EnsembleFormula {
    let leaf = |rng: &mut R| EnsembleFormula::Epi(closure_formula(rng, focus, 2));
    if rng.gen_bool(0.2) {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => EnsembleFormula::not(ensemble_formula(rng, atoms, focus, box_depth)),
        1 => EnsembleFormula::and(
            ensemble_formula(rng, atoms, focus, box_depth.saturating_sub(1)),
            ensemble_formula(rng, atoms, focus, box_depth.saturating_sub(1)),
        ),
        _ if box_depth > 0 => EnsembleFormula::boxed(
            compound(rng, atoms, focus, 2),
            ensemble_formula(rng, atoms, focus, box_depth - 1),
        ),
        _ => leaf(rng),
    }
}
