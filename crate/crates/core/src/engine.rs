//! Exploration and model checking of ensemble configurations, generic over
//! the environment that interprets guards and actions.
//!
//! Compound actions are evaluated as relations over the explored graph. A
//! graph explored only partially still yields sound verdicts: formulas are
//! evaluated in three-valued logic, and a box whose relation reaches an
//! unexpanded node is `Unknown` unless some known successor already refutes it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::ensemble::Ensemble;
use crate::formula::{ActionSym, CompoundAction, EnsembleFormula, Formula};

/// Interprets guards and action symbols over some kind of state.
pub trait Environment {
    type State: Clone + Ord + fmt::Debug;
    type Error: std::error::Error;

    fn holds(&self, state: &Self::State, guard: &Formula) -> Result<bool, Self::Error>;

    /// The possible results of performing `action`; empty when disabled.
    fn successors(
        &self,
        state: &Self::State,
        action: &ActionSym,
    ) -> Result<Vec<Self::State>, Self::Error>;
}

/// An ensemble together with the state of its environment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Config<S> {
    pub ensemble: Ensemble,
    pub state: S,
}

/// One labelled step out of a configuration.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Step<S> {
    pub guard: Formula,
    pub action: ActionSym,
    pub target: Config<S>,
}

/// Syntactic transitions whose guard holds, paired with every successor state.
pub fn config_step<E: Environment>(
    env: &E,
    config: &Config<E::State>,
) -> Result<Vec<Step<E::State>>, E::Error> {
    let mut out = BTreeSet::new();
    for t in config.ensemble.derivatives() {
        if !env.holds(&config.state, &t.guard)? {
            continue;
        }
        for state in env.successors(&config.state, &t.action)? {
            out.insert(Step {
                guard: t.guard.clone(),
                action: t.action.clone(),
                target: Config { ensemble: t.target.clone(), state },
            });
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub from: usize,
    pub guard: Formula,
    pub action: ActionSym,
    pub to: usize,
}

/// The reachable fragment of the transition system, explored breadth-first.
#[derive(Clone, Debug)]
pub struct ConfigGraph<S> {
    pub nodes: Vec<Config<S>>,
    pub edges: Vec<Edge>,
    /// Whether each node's successors have been computed.
    pub expanded: Vec<bool>,
    index: BTreeMap<Config<S>, usize>,
    out: Vec<Vec<usize>>,
}

impl<S: Clone + Ord> ConfigGraph<S> {
    pub fn is_closed(&self) -> bool {
        self.expanded.iter().all(|&e| e)
    }

    pub fn frontier(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.expanded[i]).collect()
    }

    pub fn node_index(&self, c: &Config<S>) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Edges leaving node `u`.
    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = &Edge> {
        self.out[u].iter().map(move |&e| &self.edges[e])
    }

    /// Graphviz rendering with `guard : action` edge labels.
    pub fn to_dot(&self, describe: impl Fn(&Config<S>) -> String) -> String {
        let mut out = String::from("digraph ensemble {\n  node [shape=box];\n");
        for (i, c) in self.nodes.iter().enumerate() {
            let style = if i == 0 { ", penwidth=2" } else { "" };
            let open = if self.expanded[i] { "" } else { ", style=dashed" };
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\"{style}{open}];",
                dot_escape(&describe(c))
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}\"];",
                e.from,
                e.to,
                dot_escape(&format!("{} : {}", e.guard, e.action))
            );
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

/// Breadth-first exploration from `root`. A node whose unseen successors
/// would exceed `max_nodes` is left unexpanded.
pub fn explore<E: Environment>(
    env: &E,
    root: Config<E::State>,
    max_nodes: usize,
) -> Result<ConfigGraph<E::State>, E::Error> {
    let mut g = ConfigGraph {
        nodes: vec![root.clone()],
        edges: Vec::new(),
        expanded: vec![false],
        index: BTreeMap::from([(root, 0)]),
        out: vec![Vec::new()],
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let steps = config_step(env, &g.nodes[u])?;
        let fresh: BTreeSet<&Config<E::State>> = steps
            .iter()
            .map(|s| &s.target)
            .filter(|c| !g.index.contains_key(*c))
            .collect();
        if g.nodes.len() + fresh.len() > max_nodes.max(1) {
            continue;
        }
        for s in steps {
            let to = match g.index.get(&s.target) {
                Some(&i) => i,
                None => {
                    let i = g.nodes.len();
                    g.index.insert(s.target.clone(), i);
                    g.nodes.push(s.target);
                    g.expanded.push(false);
                    g.out.push(Vec::new());
                    queue.push_back(i);
                    i
                }
            };
            g.out[u].push(g.edges.len());
            g.edges.push(Edge { from: u, guard: s.guard, action: s.action, to });
        }
        g.expanded[u] = true;
    }
    Ok(g)
}

/// A relation over graph nodes. `incomplete[u]` records that `succ[u]` may
/// be missing targets because an unexpanded node was involved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRelation {
    pub succ: Vec<BTreeSet<usize>>,
    pub incomplete: Vec<bool>,
}

impl NodeRelation {
    fn identity_on(n: usize, keep: impl Fn(usize) -> bool) -> NodeRelation {
        NodeRelation {
            succ: (0..n)
                .map(|u| if keep(u) { BTreeSet::from([u]) } else { BTreeSet::new() })
                .collect(),
            incomplete: vec![false; n],
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }
}

#[derive(Debug, Error)]
pub enum CheckError<E: std::error::Error> {
    #[error(transparent)]
    Env(E),
    #[error("the verdict depends on configurations beyond the exploration bound ({nodes} nodes explored, {frontier} unexpanded)")]
    Unknown { nodes: usize, frontier: usize },
    #[error("graph is not closed; {0} nodes remain unexpanded")]
    OpenGraph(usize),
}

/// Relational meaning of a compound action over a closed graph.
pub fn compound_relation<E: Environment>(
    env: &E,
    g: &ConfigGraph<E::State>,
    action: &CompoundAction,
) -> Result<NodeRelation, CheckError<E::Error>> {
    if !g.is_closed() {
        return Err(CheckError::OpenGraph(g.frontier().len()));
    }
    let mut memo = HashMap::new();
    relation(env, g, action, &mut memo).map_err(CheckError::Env)
}

fn relation<E: Environment>(
    env: &E,
    g: &ConfigGraph<E::State>,
    action: &CompoundAction,
    memo: &mut HashMap<CompoundAction, NodeRelation>,
) -> Result<NodeRelation, E::Error> {
    if let Some(r) = memo.get(action) {
        return Ok(r.clone());
    }
    let n = g.nodes.len();
    let r = match action {
        CompoundAction::Atom(sym) => NodeRelation {
            succ: (0..n)
                .map(|u| g.out_edges(u).filter(|e| &e.action == sym).map(|e| e.to).collect())
                .collect(),
            incomplete: g.expanded.iter().map(|&e| !e).collect(),
        },
        CompoundAction::Test(f) => {
            let holds: Vec<bool> = g
                .nodes
                .iter()
                .map(|c| env.holds(&c.state, f))
                .collect::<Result<_, _>>()?;
            NodeRelation::identity_on(n, |u| holds[u])
        }
        CompoundAction::Choice(a, b) => {
            let ra = relation(env, g, a, memo)?;
            let rb = relation(env, g, b, memo)?;
            NodeRelation {
                succ: ra.succ.iter().zip(&rb.succ).map(|(x, y)| x | y).collect(),
                incomplete: ra.incomplete.iter().zip(&rb.incomplete).map(|(x, y)| *x || *y).collect(),
            }
        }
        CompoundAction::Seq(a, b) => {
            let ra = relation(env, g, a, memo)?;
            let rb = relation(env, g, b, memo)?;
            let mut succ = vec![BTreeSet::new(); n];
            let mut incomplete = ra.incomplete.clone();
            for u in 0..n {
                for &v in &ra.succ[u] {
                    succ[u].extend(rb.succ[v].iter().copied());
                    incomplete[u] |= rb.incomplete[v];
                }
            }
            NodeRelation { succ, incomplete }
        }
        CompoundAction::Star(a) => {
            let ra = relation(env, g, a, memo)?;
            let mut succ = Vec::with_capacity(n);
            let mut incomplete = Vec::with_capacity(n);
            for u in 0..n {
                let mut seen = BTreeSet::from([u]);
                let mut stack = vec![u];
                let mut inc = false;
                while let Some(v) = stack.pop() {
                    inc |= ra.incomplete[v];
                    for &w in &ra.succ[v] {
                        if seen.insert(w) {
                            stack.push(w);
                        }
                    }
                }
                succ.push(seen);
                incomplete.push(inc);
            }
            NodeRelation { succ, incomplete }
        }
    };
    memo.insert(action.clone(), r.clone());
    Ok(r)
}

/// Kleene truth value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Unknown => "unknown",
        })
    }
}

/// Truth value of `formula` at every node of a possibly open graph.
pub fn evaluate<E: Environment>(
    env: &E,
    g: &ConfigGraph<E::State>,
    formula: &EnsembleFormula,
) -> Result<Vec<Truth>, E::Error> {
    let mut memo = HashMap::new();
    eval(env, g, formula, &mut memo)
}

fn eval<E: Environment>(
    env: &E,
    g: &ConfigGraph<E::State>,
    formula: &EnsembleFormula,
    memo: &mut HashMap<CompoundAction, NodeRelation>,
) -> Result<Vec<Truth>, E::Error> {
    let n = g.nodes.len();
    Ok(match formula {
        EnsembleFormula::Top => vec![Truth::True; n],
        EnsembleFormula::Epi(f) => g
            .nodes
            .iter()
            .map(|c| env.holds(&c.state, f).map(Truth::from_bool))
            .collect::<Result<_, _>>()?,
        EnsembleFormula::Not(p) => eval(env, g, p, memo)?.into_iter().map(Truth::not).collect(),
        EnsembleFormula::And(a, b) => {
            let x = eval(env, g, a, memo)?;
            let y = eval(env, g, b, memo)?;
            x.into_iter().zip(y).map(|(p, q)| p.and(q)).collect()
        }
        EnsembleFormula::Box(_, p)
            if matches!(&**p, EnsembleFormula::Top | EnsembleFormula::Epi(Formula::Top)) =>
        {
            vec![Truth::True; n]
        }
        EnsembleFormula::Box(action, p) => {
            let rel = relation(env, g, action, memo)?;
            let inner = eval(env, g, p, memo)?;
            (0..n)
                .map(|u| {
                    let mut value = if rel.incomplete[u] { Truth::Unknown } else { Truth::True };
                    for &v in &rel.succ[u] {
                        value = value.and(inner[v]);
                    }
                    value
                })
                .collect()
        }
    })
}

/// Explores from `root` and decides `formula` there. An undecided verdict is
/// reported as [`CheckError::Unknown`].
pub fn model_check<E: Environment>(
    env: &E,
    root: Config<E::State>,
    formula: &EnsembleFormula,
    max_nodes: usize,
) -> Result<bool, CheckError<E::Error>> {
    let g = explore(env, root, max_nodes).map_err(CheckError::Env)?;
    check_on_graph(env, &g, formula)
}

/// Decides `formula` at node 0 of an explored graph.
pub fn check_on_graph<E: Environment>(
    env: &E,
    g: &ConfigGraph<E::State>,
    formula: &EnsembleFormula,
) -> Result<bool, CheckError<E::Error>> {
    match evaluate(env, g, formula).map_err(CheckError::Env)?[0] {
        Truth::True => Ok(true),
        Truth::False => Ok(false),
        Truth::Unknown => Err(CheckError::Unknown {
            nodes: g.nodes.len(),
            frontier: g.frontier().len(),
        }),
    }
}

/// Environment that accepts every guard and leaves the state unchanged; its
/// exploration is the bare guarded transition system of the ensemble.
#[derive(Clone, Copy, Debug, Default)]
pub struct SyntacticEnv;

impl Environment for SyntacticEnv {
    type State = ();
    type Error = std::convert::Infallible;

    fn holds(&self, _: &(), _: &Formula) -> Result<bool, Self::Error> {
        Ok(true)
    }

    fn successors(&self, _: &(), _: &ActionSym) -> Result<Vec<()>, Self::Error> {
        Ok(vec![()])
    }
}

/// JSON form of an explored graph.
#[derive(Clone, Debug, Serialize)]
pub struct GraphJson {
    pub schema: &'static str,
    pub closed: bool,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeJson {
    pub id: usize,
    pub ensemble: String,
    pub state: serde_json::Value,
    pub expanded: bool,
}

pub const GRAPH_SCHEMA: &str = "epens/graph/v1";

impl<S: Clone + Ord> ConfigGraph<S> {
    pub fn to_json(&self, state: impl Fn(&S) -> serde_json::Value) -> GraphJson {
        GraphJson {
            schema: GRAPH_SCHEMA,
            closed: self.is_closed(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, c)| NodeJson {
                    id,
                    ensemble: c.ensemble.to_string(),
                    state: state(&c.state),
                    expanded: self.expanded[id],
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}
