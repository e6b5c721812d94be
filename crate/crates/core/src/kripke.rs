//! Finite Kripke structures, satisfaction, product update and minimization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::EpistemicAction;
use crate::formula::{AgentId, EnsembleSignature, Formula, Prop, SignatureError};
use crate::relation::{Relation, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KripkeError {
    #[error("formula mentions agent `{0}`, which has no accessibility relation in this structure")]
    UnknownAgent(AgentId),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("world `{0}` declared twice")]
    DuplicateWorld(String),
    #[error("structure has no worlds")]
    NoWorlds,
    #[error("relation for `{agent}` has {found} elements, expected {expected}")]
    SizeMismatch {
        agent: AgentId,
        expected: usize,
        found: usize,
    },
    #[error("structure and action disagree on agents: {state:?} vs {action:?}")]
    AgentMismatch {
        state: BTreeSet<AgentId>,
        action: BTreeSet<AgentId>,
    },
    #[error("accessibility relations are not equivalences: {}", format_violations(.0))]
    NotS5(Vec<S5Violation>),
    #[error("{0}")]
    Signature(#[from] SignatureError),
    #[error("malformed JSON structure: {0}")]
    Json(String),
}

fn format_violations(v: &[S5Violation]) -> String {
    let shown: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
    let more = if v.len() > 5 { format!(" (and {} more)", v.len() - 5) } else { String::new() };
    format!("{}{}", shown.join("; "), more)
}

/// A violation of the equivalence requirement, with world names resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct S5Violation {
    pub agent: AgentId,
    pub detail: String,
    #[serde(skip)]
    pub raw: Violation,
}

impl std::fmt::Display for S5Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.agent, self.detail)
    }
}

/// A finite Kripke structure. Worlds are indices `0..n` with display names.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KripkeStructure {
    names: Vec<String>,
    labels: Vec<BTreeSet<Prop>>,
    access: BTreeMap<AgentId, Relation>,
}

/// A Kripke structure with a designated actual world.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointedKripke {
    pub structure: KripkeStructure,
    pub point: usize,
}

impl KripkeStructure {
    pub fn new(
        worlds: Vec<(String, BTreeSet<Prop>)>,
        access: BTreeMap<AgentId, Relation>,
    ) -> Result<KripkeStructure, KripkeError> {
        if worlds.is_empty() {
            return Err(KripkeError::NoWorlds);
        }
        let mut seen = BTreeSet::new();
        for (name, _) in &worlds {
            if !seen.insert(name.clone()) {
                return Err(KripkeError::DuplicateWorld(name.clone()));
            }
        }
        let n = worlds.len();
        for (agent, rel) in &access {
            if rel.len() != n {
                return Err(KripkeError::SizeMismatch {
                    agent: agent.clone(),
                    expected: n,
                    found: rel.len(),
                });
            }
        }
        let (names, labels) = worlds.into_iter().unzip();
        Ok(KripkeStructure { names, labels, access })
    }

    pub fn world_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, w: usize) -> &str {
        &self.names[w]
    }

    pub fn world_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, w: usize) -> &BTreeSet<Prop> {
        &self.labels[w]
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.access.keys().cloned().collect()
    }

    pub fn relation(&self, agent: &AgentId) -> Option<&Relation> {
        self.access.get(agent)
    }

    pub fn relations(&self) -> &BTreeMap<AgentId, Relation> {
        &self.access
    }

    /// Truth value of `f` at every world.
    pub fn truth_set(&self, f: &Formula) -> Result<Vec<bool>, KripkeError> {
        let n = self.world_count();
        Ok(match f {
            Formula::Top => vec![true; n],
            Formula::Prop(p) => self.labels.iter().map(|l| l.contains(p)).collect(),
            Formula::Not(g) => self.truth_set(g)?.into_iter().map(|b| !b).collect(),
            Formula::And(a, b) => {
                let ta = self.truth_set(a)?;
                if !ta.iter().any(|&x| x) {
                    return Ok(ta);
                }
                let tb = self.truth_set(b)?;
                ta.into_iter().zip(tb).map(|(x, y)| x && y).collect()
            }
            Formula::Knows(agent, g) => {
                let rel = self
                    .access
                    .get(agent)
                    .ok_or_else(|| KripkeError::UnknownAgent(agent.clone()))?;
                let tg = self.truth_set(g)?;
                (0..n)
                    .map(|w| rel.successors(w).iter().all(|&v| tg[v]))
                    .collect()
            }
        })
    }

    pub fn satisfies(&self, w: usize, f: &Formula) -> Result<bool, KripkeError> {
        if w >= self.world_count() {
            return Err(KripkeError::UnknownWorld(format!("#{w}")));
        }
        Ok(self.truth_set(f)?[w])
    }

    /// Every reason some relation is not an equivalence; empty when S5.
    pub fn validate_s5(&self) -> Vec<S5Violation> {
        let mut out = Vec::new();
        for (agent, rel) in &self.access {
            for v in rel.violations() {
                let detail = match &v {
                    Violation::Reflexivity { at } => {
                        format!("reflexivity fails at {}", self.names[*at])
                    }
                    Violation::Symmetry { from, to } => format!(
                        "symmetry fails: ({}, {}) without ({}, {})",
                        self.names[*from], self.names[*to], self.names[*to], self.names[*from]
                    ),
                    Violation::Transitivity { first, middle, last } => format!(
                        "transitivity fails: ({}, {}) and ({}, {}) without ({}, {})",
                        self.names[*first],
                        self.names[*middle],
                        self.names[*middle],
                        self.names[*last],
                        self.names[*first],
                        self.names[*last]
                    ),
                };
                out.push(S5Violation { agent: agent.clone(), detail, raw: v });
            }
        }
        out
    }

    /// Replaces every relation by its reflexive-symmetric-transitive closure.
    pub fn auto_close(&self) -> KripkeStructure {
        KripkeStructure {
            names: self.names.clone(),
            labels: self.labels.clone(),
            access: self
                .access
                .iter()
                .map(|(a, r)| (a.clone(), r.equivalence_closure()))
                .collect(),
        }
    }

    /// Checks that every agent and proposition used by the structure belongs
    /// to the signature and that every signature agent has a relation.
    pub fn check_signature(&self, sig: &EnsembleSignature) -> Result<(), KripkeError> {
        for a in sig.agents() {
            if !self.access.contains_key(a) {
                return Err(KripkeError::UnknownAgent(a.clone()));
            }
        }
        for a in self.access.keys() {
            if !sig.agents().contains(a) {
                return Err(SignatureError::UnknownAgent(a.clone()).into());
            }
        }
        for label in &self.labels {
            if let Some(p) = label.iter().find(|p| !sig.props().contains(*p)) {
                return Err(SignatureError::UnknownProp(p.clone()).into());
            }
        }
        Ok(())
    }

    /// Indices of worlds reachable from `from` via any agent's relation.
    fn reachable(&self, from: usize) -> Vec<usize> {
        let mut seen = vec![false; self.world_count()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for rel in self.access.values() {
                for &v in rel.successors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        (0..self.world_count()).filter(|&w| seen[w]).collect()
    }
}

/// Builder for equivalence-based structures given as partition blocks.
#[derive(Clone, Debug, Default)]
pub struct KripkeBuilder {
    agents: BTreeSet<AgentId>,
    worlds: Vec<(String, BTreeSet<Prop>)>,
    blocks: BTreeMap<AgentId, Vec<Vec<String>>>,
}

impl KripkeBuilder {
    pub fn new<A: Into<AgentId>>(agents: impl IntoIterator<Item = A>) -> KripkeBuilder {
        KripkeBuilder {
            agents: agents.into_iter().map(Into::into).collect(),
            ..KripkeBuilder::default()
        }
    }

    pub fn world<P: Into<Prop>>(
        mut self,
        name: &str,
        props: impl IntoIterator<Item = P>,
    ) -> KripkeBuilder {
        self.worlds
            .push((name.to_string(), props.into_iter().map(Into::into).collect()));
        self
    }

    /// Declares that `agent` cannot distinguish the listed worlds.
    pub fn block(mut self, agent: &str, worlds: &[&str]) -> KripkeBuilder {
        self.blocks
            .entry(AgentId::new(agent))
            .or_default()
            .push(worlds.iter().map(|w| w.to_string()).collect());
        self
    }

    pub fn build(self) -> Result<KripkeStructure, KripkeError> {
        let n = self.worlds.len();
        let index = |name: &str| -> Result<usize, KripkeError> {
            self.worlds
                .iter()
                .position(|(w, _)| w == name)
                .ok_or_else(|| KripkeError::UnknownWorld(name.to_string()))
        };
        let mut access = BTreeMap::new();
        for agent in &self.agents {
            let mut blocks = Vec::new();
            for block in self.blocks.get(agent).into_iter().flatten() {
                blocks.push(block.iter().map(|w| index(w)).collect::<Result<Vec<_>, _>>()?);
            }
            access.insert(agent.clone(), Relation::from_blocks(n, blocks));
        }
        if let Some(a) = self.blocks.keys().find(|a| !self.agents.contains(*a)) {
            return Err(KripkeError::UnknownAgent(a.clone()));
        }
        KripkeStructure::new(self.worlds, access)
    }

    pub fn build_pointed(self, point: &str) -> Result<PointedKripke, KripkeError> {
        let m = self.build()?;
        PointedKripke::at(m, point)
    }
}

impl PointedKripke {
    pub fn new(structure: KripkeStructure, point: usize) -> Result<PointedKripke, KripkeError> {
        if point >= structure.world_count() {
            return Err(KripkeError::UnknownWorld(format!("#{point}")));
        }
        Ok(PointedKripke { structure, point })
    }

    pub fn at(structure: KripkeStructure, point: &str) -> Result<PointedKripke, KripkeError> {
        let w = structure
            .world_index(point)
            .ok_or_else(|| KripkeError::UnknownWorld(point.to_string()))?;
        Ok(PointedKripke { structure, point: w })
    }

    pub fn satisfies(&self, f: &Formula) -> Result<bool, KripkeError> {
        self.structure.satisfies(self.point, f)
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.structure.agents()
    }

    /// Product update with a pointed action model; `None` when the
    /// precondition of the actual event fails at the actual world.
    pub fn product_update(
        &self,
        action: &EpistemicAction,
    ) -> Result<Option<PointedKripke>, KripkeError> {
        let m = &self.structure;
        let model = action.model();
        let state_agents = m.agents();
        let action_agents: BTreeSet<AgentId> = model.relations().keys().cloned().collect();
        if state_agents != action_agents {
            return Err(KripkeError::AgentMismatch { state: state_agents, action: action_agents });
        }
        let pre_sets: Vec<Vec<bool>> = (0..model.event_count())
            .map(|e| m.truth_set(model.pre(e)))
            .collect::<Result<_, _>>()?;
        if !pre_sets[action.point()][self.point] {
            return Ok(None);
        }
        let mut pairs = Vec::new();
        let mut index = BTreeMap::new();
        for w in 0..m.world_count() {
            for (e, pre) in pre_sets.iter().enumerate() {
                if pre[w] {
                    index.insert((w, e), pairs.len());
                    pairs.push((w, e));
                }
            }
        }
        let n = pairs.len();
        let mut access = BTreeMap::new();
        for (agent, wrel) in m.relations() {
            let erel = &model.relations()[agent];
            let mut edges = Vec::new();
            for (i, &(w, e)) in pairs.iter().enumerate() {
                for &w2 in wrel.successors(w) {
                    for &e2 in erel.successors(e) {
                        if let Some(&j) = index.get(&(w2, e2)) {
                            edges.push((i, j));
                        }
                    }
                }
            }
            access.insert(agent.clone(), Relation::from_pairs(n, edges));
        }
        let worlds = pairs
            .iter()
            .map(|&(w, e)| {
                (
                    format!("({},{})", m.name(w), model.event_name(e)),
                    m.label(w).clone(),
                )
            })
            .collect();
        let structure = KripkeStructure::new(worlds, access)?;
        let point = index[&(self.point, action.point())];
        Ok(Some(PointedKripke { structure, point }))
    }

    /// Canonical bisimulation quotient of the point-generated substructure.
    ///
    /// Worlds are numbered by the final colour of a label-seeded colour
    /// refinement, and colours are ranked by their signatures rather than by
    /// world indices, so bisimilar inputs yield identical outputs.
    pub fn minimize(&self) -> PointedKripke {
        let full = &self.structure;
        let keep = full.reachable(self.point);
        let n = keep.len();
        let point = keep.iter().position(|&w| w == self.point).expect("point is reachable");
        let labels: Vec<BTreeSet<Prop>> = keep.iter().map(|&w| full.labels[w].clone()).collect();
        let rels: Vec<(AgentId, Relation)> = full
            .access
            .iter()
            .map(|(a, r)| (a.clone(), r.restrict(&keep)))
            .collect();

        let distinct: BTreeSet<&BTreeSet<Prop>> = labels.iter().collect();
        let ranks: BTreeMap<&BTreeSet<Prop>, usize> =
            distinct.into_iter().enumerate().map(|(i, l)| (l, i)).collect();
        let mut color: Vec<usize> = labels.iter().map(|l| ranks[l]).collect();
        let mut count = ranks.len();
        loop {
            let sigs: Vec<(usize, Vec<BTreeSet<usize>>)> = (0..n)
                .map(|w| {
                    let succ = rels
                        .iter()
                        .map(|(_, r)| r.successors(w).iter().map(|&v| color[v]).collect())
                        .collect();
                    (color[w], succ)
                })
                .collect();
            let distinct: BTreeSet<&(usize, Vec<BTreeSet<usize>>)> = sigs.iter().collect();
            let ranks: BTreeMap<&(usize, Vec<BTreeSet<usize>>), usize> =
                distinct.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
            let next: Vec<usize> = sigs.iter().map(|s| ranks[s]).collect();
            let next_count = ranks.len();
            color = next;
            if next_count == count {
                break;
            }
            count = next_count;
        }

        let mut rep = vec![usize::MAX; count];
        for w in 0..n {
            if rep[color[w]] == usize::MAX {
                rep[color[w]] = w;
            }
        }
        let worlds = (0..count).map(|c| (format!("w{c}"), labels[rep[c]].clone())).collect();
        let access = rels
            .iter()
            .map(|(a, r)| {
                let edges: BTreeSet<(usize, usize)> =
                    r.pairs().map(|(u, v)| (color[u], color[v])).collect();
                (a.clone(), Relation::from_pairs(count, edges))
            })
            .collect();
        let structure = KripkeStructure::new(worlds, access).expect("quotient is well formed");
        PointedKripke { structure, point: color[point] }
    }

    /// Graphviz rendering; the actual world is drawn with a double circle and
    /// self-loops are left implicit.
    pub fn to_dot(&self) -> String {
        let m = &self.structure;
        let mut out = String::from("graph kripke {\n  node [shape=circle];\n");
        for w in 0..m.world_count() {
            let props: Vec<&str> = m.label(w).iter().map(|p| p.as_str()).collect();
            let shape = if w == self.point { ", shape=doublecircle" } else { "" };
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\\n{{{}}}\"{}];",
                escape(m.name(w)),
                escape(m.name(w)),
                props.join(","),
                shape
            );
        }
        let mut edges: BTreeMap<(usize, usize), Vec<&str>> = BTreeMap::new();
        for (agent, rel) in m.relations() {
            for (u, v) in rel.pairs() {
                if u < v || (u > v && !rel.contains(v, u)) {
                    edges.entry((u.min(v), u.max(v))).or_default().push(agent.as_str());
                }
            }
        }
        for ((u, v), agents) in edges {
            let mut agents = agents;
            agents.dedup();
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [label=\"{}\"];",
                escape(m.name(u)),
                escape(m.name(v)),
                agents.join(",")
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> KripkeJson {
        let m = &self.structure;
        KripkeJson {
            schema: Some(KRIPKE_SCHEMA.to_string()),
            worlds: m.names.clone(),
            access: m
                .relations()
                .iter()
                .map(|(a, r)| {
                    (
                        a.clone(),
                        r.pairs()
                            .map(|(u, v)| (m.names[u].clone(), m.names[v].clone()))
                            .collect(),
                    )
                })
                .collect(),
            label: (0..m.world_count())
                .map(|w| (m.names[w].clone(), m.labels[w].iter().cloned().collect()))
                .collect(),
            point: m.names[self.point].clone(),
        }
    }

    /// Reads a structure from its JSON form. Relations must be equivalences
    /// unless `auto_close` is set, in which case they are closed first.
    pub fn from_json(json: &KripkeJson, auto_close: bool) -> Result<PointedKripke, KripkeError> {
        let n = json.worlds.len();
        let index = |name: &str| -> Result<usize, KripkeError> {
            json.worlds
                .iter()
                .position(|w| w == name)
                .ok_or_else(|| KripkeError::UnknownWorld(name.to_string()))
        };
        for name in json.label.keys() {
            index(name)?;
        }
        let worlds = json
            .worlds
            .iter()
            .map(|w| (w.clone(), json.label.get(w).cloned().unwrap_or_default().into_iter().collect()))
            .collect();
        let mut access = BTreeMap::new();
        for (agent, pairs) in &json.access {
            let idx = pairs
                .iter()
                .map(|(u, v)| Ok((index(u)?, index(v)?)))
                .collect::<Result<Vec<_>, KripkeError>>()?;
            access.insert(agent.clone(), Relation::from_pairs(n, idx));
        }
        let mut structure = KripkeStructure::new(worlds, access)?;
        if auto_close {
            structure = structure.auto_close();
        }
        let violations = structure.validate_s5();
        if !violations.is_empty() {
            return Err(KripkeError::NotS5(violations));
        }
        PointedKripke::at(structure, &json.point)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub const KRIPKE_SCHEMA: &str = "epens/kripke/v1";

/// JSON form of a pointed structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KripkeJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub worlds: Vec<String>,
    pub access: BTreeMap<AgentId, Vec<(String, String)>>,
    #[serde(default)]
    pub label: BTreeMap<String, Vec<Prop>>,
    pub point: String,
}
