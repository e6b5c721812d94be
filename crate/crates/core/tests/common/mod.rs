#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use epens::dsl::{self, ProblemSpec};
use epens::formula::{AgentId, Formula, Prop};
use epens::kripke::{KripkeStructure, PointedKripke};
use epens::relation::Relation;
use epens::symbolic::{verify_table, RepresentativeTable};
use epens::prover::Prover;

pub mod member_wise;

pub const BUNDLED: &str = include_str!("../../data/bit_transmission.eens");

pub fn bundled() -> ProblemSpec {
    dsl::parse(BUNDLED).unwrap_or_else(|e| panic!("bundled spec: {e}"))
}

pub fn verified_table(spec: &ProblemSpec) -> RepresentativeTable {
    let mut table = spec.repr.clone().expect("bundled spec has a table");
    let prover = Prover::with_agents(spec.signature.agents().clone());
    let diags = verify_table(&mut table, &spec.actions, spec.focus.as_ref().unwrap(), &prover).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    table
}

pub fn agents(names: &[&str]) -> Vec<AgentId> {
    names.iter().map(|n| AgentId::new(*n)).collect()
}

pub fn props(names: &[&str]) -> Vec<Prop> {
    names.iter().map(|n| Prop::new(*n)).collect()
}

pub fn f(text: &str) -> Formula {
    dsl::parse_formula(text).unwrap_or_else(|e| panic!("`{text}`: {e}"))
}

/// Every set partition of `0..n` as restricted growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        let max = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=max {
            cur.push(b);
            go(i + 1, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

fn blocks_to_relation(blocks: &[usize]) -> Relation {
    Relation::from_pairs(
        blocks.len(),
        (0..blocks.len()).flat_map(|u| (0..blocks.len()).filter(move |&v| blocks[u] == blocks[v]).map(move |v| (u, v))),
    )
}

/// All S5 structures with at most `max_worlds` worlds, without symmetry
/// reduction.
pub fn all_s5_structures(agents: &[AgentId], props: &[Prop], max_worlds: usize) -> Vec<KripkeStructure> {
    let mut out = Vec::new();
    for n in 1..=max_worlds {
        let parts = partitions(n);
        let label_count = 1usize << (props.len() * n);
        for labels in 0..label_count {
            let worlds: Vec<(String, BTreeSet<Prop>)> = (0..n)
                .map(|w| {
                    let set = props
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| labels >> (w * props.len() + i) & 1 == 1)
                        .map(|(_, p)| p.clone())
                        .collect();
                    (format!("w{w}"), set)
                })
                .collect();
            let mut choice = vec![0usize; agents.len()];
            loop {
                let access: BTreeMap<AgentId, Relation> = agents
                    .iter()
                    .zip(&choice)
                    .map(|(a, &c)| (a.clone(), blocks_to_relation(&parts[c])))
                    .collect();
                out.push(KripkeStructure::new(worlds.clone(), access).unwrap());
                let mut i = 0;
                while i < choice.len() {
                    choice[i] += 1;
                    if choice[i] < parts.len() {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
                if i == choice.len() {
                    break;
                }
            }
        }
    }
    out
}

/// A pointed model of `f` among `structures`, by exhaustive search.
pub fn brute_force_model(structures: &[KripkeStructure], f: &Formula) -> Option<PointedKripke> {
    for s in structures {
        let truth = s.truth_set(f).unwrap();
        if let Some(w) = truth.iter().position(|&b| b) {
            return Some(PointedKripke::new(s.clone(), w).unwrap());
        }
    }
    None
}

/// Independent reading of the update: keep the pairs of worlds and events
/// whose precondition holds, relate pairs related on both sides.
pub fn update_oracle(est: &PointedKripke, action: &epens::actions::EpistemicAction) -> Option<PointedKripke> {
    let m = &est.structure;
    let model = action.model();
    let mut pairs = Vec::new();
    for w in 0..m.world_count() {
        for e in 0..model.event_count() {
            if m.satisfies(w, model.pre(e)).unwrap() {
                pairs.push((w, e));
            }
        }
    }
    let point = pairs.iter().position(|&p| p == (est.point, action.point()))?;
    let worlds = pairs
        .iter()
        .map(|&(w, e)| (format!("{}|{}", m.name(w), model.event_name(e)), m.label(w).clone()))
        .collect();
    let access = m
        .relations()
        .iter()
        .map(|(a, r)| {
            let n = pairs.len();
            let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| {
                let (w, e) = pairs[i];
                let (v, d) = pairs[j];
                r.contains(w, v) && model.relation(a).is_none_or(|ra| ra.contains(e, d))
            });
            (a.clone(), Relation::from_pairs(n, edges))
        })
        .collect();
    Some(PointedKripke::new(KripkeStructure::new(worlds, access).unwrap(), point).unwrap())
}

/// A state bisimilar to `base` with respect to the propositions of `base`:
/// every world is copied once or twice and each copy gets a random value for
/// `extra`. Classes of such copies agree on every formula that avoids `extra`.
pub fn decorate<R: rand::Rng>(rng: &mut R, base: &PointedKripke, extra: &Prop) -> PointedKripke {
    let m = &base.structure;
    let mut copies = Vec::new();
    for w in 0..m.world_count() {
        for i in 0..rng.gen_range(1..=2) {
            copies.push((w, i));
        }
    }
    let worlds = copies
        .iter()
        .map(|&(w, i)| {
            let mut label = m.label(w).clone();
            if rng.gen_bool(0.5) {
                label.insert(extra.clone());
            }
            (format!("{}_{i}", m.name(w)), label)
        })
        .collect();
    let n = copies.len();
    let copies = &copies;
    let access = m
        .relations()
        .iter()
        .map(|(a, r)| {
            let edges = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| r.contains(copies[i].0, copies[j].0));
            (a.clone(), Relation::from_pairs(n, edges))
        })
        .collect();
    let points: Vec<usize> = (0..n).filter(|&i| copies[i].0 == base.point).collect();
    let point = points[rng.gen_range(0..points.len())];
    PointedKripke::new(KripkeStructure::new(worlds, access).unwrap(), point).unwrap()
}

/// `true` or `K[a] _` combined by negation and conjunction, for an agent
/// drawn from `agents` at every modality.
pub fn agent_guard<R: rand::Rng>(rng: &mut R, agents: &[AgentId], props: &[Prop], depth: usize) -> Formula {
    use rand::seq::SliceRandom;
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.15) {
            Formula::Top
        } else {
            let a = agents.choose(rng).unwrap().clone();
            Formula::knows(a, epens::random::formula(rng, agents, props, 1))
        };
    }
    if rng.gen_bool(0.4) {
        Formula::not(agent_guard(rng, agents, props, depth - 1))
    } else {
        Formula::and(agent_guard(rng, agents, props, depth - 1), agent_guard(rng, agents, props, depth - 1))
    }
}

/// A closed guarded process term over `actions`. Variables only occur under
/// a prefix inside their binder.
pub fn random_process<R: rand::Rng>(
    rng: &mut R,
    actions: &[epens::formula::ActionSym],
    agents: &[AgentId],
    props: &[Prop],
    depth: usize,
) -> epens::process::Process {
    use epens::process::Process;
    use rand::seq::SliceRandom;
    fn go<R: rand::Rng>(
        rng: &mut R,
        actions: &[epens::formula::ActionSym],
        agents: &[AgentId],
        props: &[Prop],
        depth: usize,
        usable: &[String],
        pending: &[String],
    ) -> Process {
        if depth == 0 || rng.gen_bool(0.2) {
            return match usable.choose(rng) {
                Some(x) if rng.gen_bool(0.5) => Process::var(x.clone()),
                _ => Process::Nil,
            };
        }
        match rng.gen_range(0..4) {
            0 => {
                let mut now: Vec<String> = usable.to_vec();
                now.extend(pending.iter().cloned());
                let n = actions.choose(rng).unwrap().clone();
                Process::prefix(n, go(rng, actions, agents, props, depth - 1, &now, &[]))
            }
            1 => Process::guard(
                agent_guard(rng, agents, props, 2),
                go(rng, actions, agents, props, depth - 1, usable, pending),
            ),
            2 => Process::choice(
                go(rng, actions, agents, props, depth - 1, usable, pending),
                go(rng, actions, agents, props, depth - 1, usable, pending),
            ),
            _ => {
                let x = format!("X{depth}");
                let mut p: Vec<String> = pending.to_vec();
                p.push(x.clone());
                let u: Vec<String> = usable.iter().filter(|v| **v != x).cloned().collect();
                Process::rec(x, go(rng, actions, agents, props, depth - 1, &u, &p))
            }
        }
    }
    go(rng, actions, agents, props, depth, &[], &[])
}
