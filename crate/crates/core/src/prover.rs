//! Decision procedure for multi-agent S5.
//!
//! The formula is compiled into a hash-consed DAG. Its primitives are the
//! propositions and the knowledge subformulas. An atom is an assignment to the
//! primitives that respects `K[a] f -> f`. Two atoms are `a`-related when they
//! agree on every `K[a] _` primitive. Atoms whose `~K[a] f` obligations have no
//! witness among their `a`-related atoms are removed until nothing changes; the
//! survivors form a model in which every surviving atom is realized, and every
//! atom realizable in some S5 model survives.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{AgentId, Formula, Prop};
use crate::kripke::{KripkeStructure, PointedKripke};
use crate::relation::Relation;

const MAX_PRIMITIVES: usize = 128;
const MAX_ROOTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProverError {
    #[error("prover inconclusive: {0}")]
    Inconclusive(String),
    #[error("internal prover error: {0}")]
    Internal(String),
}

#[derive(Clone, Debug)]
pub struct ProverConfig {
    /// Upper bound on enumerated atoms before giving up.
    pub max_atoms: usize,
    /// Agents that must appear in witness models, besides those in the formula.
    pub agents: BTreeSet<AgentId>,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig { max_atoms: 1 << 21, agents: BTreeSet::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Clone, Debug)]
pub struct ProofResult {
    pub verdict: Verdict,
    /// A minimized model of the formula; present exactly when satisfiable.
    pub witness: Option<PointedKripke>,
}

/// The valuations of a list of formulas realized at some world of some model.
#[derive(Clone, Debug)]
pub struct TypeSpace {
    pub formulas: Vec<Formula>,
    pub realized: BTreeSet<Vec<bool>>,
}

impl TypeSpace {
    /// Whether `formulas[i]` holds at every world of every model.
    pub fn valid(&self, i: usize) -> bool {
        self.realized.iter().all(|v| v[i])
    }

    /// Whether `formulas[i]` and `formulas[j]` agree everywhere.
    pub fn equivalent(&self, i: usize, j: usize) -> bool {
        self.realized.iter().all(|v| v[i] == v[j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Top,
    Prop(usize),
    Not(usize),
    And(usize, usize),
    Knows(usize, usize),
}

struct Dag {
    nodes: Vec<Node>,
    /// Primitive index of each node, for propositions and knowledge nodes.
    prim_of: Vec<Option<usize>>,
    prim_nodes: Vec<usize>,
    props: Vec<Prop>,
    agents: Vec<AgentId>,
    roots: Vec<usize>,
}

struct DagBuilder {
    dag: Dag,
    memo: HashMap<Node, usize>,
    prop_ids: HashMap<Prop, usize>,
    agent_ids: HashMap<AgentId, usize>,
    formula_ids: HashMap<*const Formula, usize>,
}

impl DagBuilder {
    fn new(agents: &BTreeSet<AgentId>) -> DagBuilder {
        let mut b = DagBuilder {
            dag: Dag {
                nodes: Vec::new(),
                prim_of: Vec::new(),
                prim_nodes: Vec::new(),
                props: Vec::new(),
                agents: Vec::new(),
                roots: Vec::new(),
            },
            memo: HashMap::new(),
            prop_ids: HashMap::new(),
            agent_ids: HashMap::new(),
            formula_ids: HashMap::new(),
        };
        for a in agents {
            b.agent(a);
        }
        b
    }

    fn agent(&mut self, a: &AgentId) -> usize {
        if let Some(&i) = self.agent_ids.get(a) {
            return i;
        }
        let i = self.dag.agents.len();
        self.dag.agents.push(a.clone());
        self.agent_ids.insert(a.clone(), i);
        i
    }

    fn intern(&mut self, node: Node) -> usize {
        if let Some(&i) = self.memo.get(&node) {
            return i;
        }
        let i = self.dag.nodes.len();
        self.dag.nodes.push(node);
        let prim = match node {
            Node::Prop(_) | Node::Knows(..) => {
                self.dag.prim_nodes.push(i);
                Some(self.dag.prim_nodes.len() - 1)
            }
            _ => None,
        };
        self.dag.prim_of.push(prim);
        self.memo.insert(node, i);
        i
    }

    fn compile(&mut self, f: &Formula) -> usize {
        // Shared subterms are compiled once thanks to pointer memoization;
        // structurally equal but distinct subterms meet in `intern`.
        let key = f as *const Formula;
        if let Some(&i) = self.formula_ids.get(&key) {
            return i;
        }
        let node = match f {
            Formula::Top => Node::Top,
            Formula::Prop(p) => {
                let next = self.prop_ids.len();
                let id = *self.prop_ids.entry(p.clone()).or_insert(next);
                if id == self.dag.props.len() {
                    self.dag.props.push(p.clone());
                }
                Node::Prop(id)
            }
            Formula::Not(g) => {
                let c = self.compile(g);
                // Double negations are transparent.
                if let Node::Not(inner) = self.dag.nodes[c] {
                    self.formula_ids.insert(key, inner);
                    return inner;
                }
                Node::Not(c)
            }
            Formula::And(a, b) => {
                let x = self.compile(a);
                let y = self.compile(b);
                Node::And(x.min(y), x.max(y))
            }
            Formula::Knows(a, g) => {
                let c = self.compile(g);
                let ag = self.agent(a);
                Node::Knows(ag, c)
            }
        };
        let id = self.intern(node);
        self.formula_ids.insert(key, id);
        id
    }
}

/// One T-consistent assignment.
#[derive(Clone, Copy, Debug)]
struct Atom {
    prims: u128,
    /// Knowledge primitives whose argument is false here.
    child_false: u128,
    outputs: u64,
}

struct Space {
    dag: Dag,
    atoms: Vec<Atom>,
    alive: Vec<bool>,
    agent_masks: Vec<u128>,
}

impl Space {
    fn build(formulas: &[&Formula], agents: &BTreeSet<AgentId>, max_atoms: usize) -> Result<Space, ProverError> {
        if formulas.len() > MAX_ROOTS {
            return Err(ProverError::Inconclusive(format!(
                "at most {MAX_ROOTS} formulas can be analysed together, got {}",
                formulas.len()
            )));
        }
        let mut b = DagBuilder::new(agents);
        let roots: Vec<usize> = formulas.iter().map(|f| b.compile(f)).collect();
        b.dag.roots = roots;
        let dag = b.dag;
        if dag.prim_nodes.len() > MAX_PRIMITIVES {
            return Err(ProverError::Inconclusive(format!(
                "{} primitive subformulas exceed the limit of {MAX_PRIMITIVES}",
                dag.prim_nodes.len()
            )));
        }
        let mut agent_masks = vec![0u128; dag.agents.len()];
        for (p, &n) in dag.prim_nodes.iter().enumerate() {
            if let Node::Knows(a, _) = dag.nodes[n] {
                agent_masks[a] |= 1u128 << p;
            }
        }
        let atoms = enumerate_atoms(&dag, max_atoms)?;
        let alive = vec![true; atoms.len()];
        let mut space = Space { dag, atoms, alive, agent_masks };
        space.eliminate();
        Ok(space)
    }

    fn eliminate(&mut self) {
        loop {
            let mut changed = false;
            for &mask in &self.agent_masks {
                if mask == 0 {
                    continue;
                }
                let mut avail: HashMap<u128, u128> = HashMap::new();
                for (atom, _) in self.atoms.iter().zip(&self.alive).filter(|(_, &a)| a) {
                    *avail.entry(atom.prims & mask).or_insert(0) |= atom.child_false;
                }
                for (atom, alive) in self.atoms.iter().zip(self.alive.iter_mut()) {
                    if !*alive {
                        continue;
                    }
                    let required = mask & !atom.prims;
                    if required & !avail[&(atom.prims & mask)] != 0 {
                        *alive = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn alive_atoms(&self) -> impl Iterator<Item = (usize, &Atom)> {
        self.atoms
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.alive[*i])
    }

    /// A small model rooted at atom `root`, built from witnesses of the
    /// root's obligations and, transitively, of theirs.
    fn witness(&self, root: usize, extra_agents: &BTreeSet<AgentId>) -> PointedKripke {
        let mut groups: Vec<HashMap<u128, Vec<usize>>> = vec![HashMap::new(); self.agent_masks.len()];
        for (i, atom) in self.alive_atoms() {
            for (a, &mask) in self.agent_masks.iter().enumerate() {
                groups[a].entry(atom.prims & mask).or_default().push(i);
            }
        }
        let mut chosen = vec![root];
        let mut index: BTreeMap<usize, usize> = BTreeMap::from([(root, 0)]);
        let mut next = 0;
        while next < chosen.len() {
            let atom = self.atoms[chosen[next]];
            next += 1;
            for (a, &mask) in self.agent_masks.iter().enumerate() {
                let mut required = mask & !atom.prims;
                let group = &groups[a][&(atom.prims & mask)];
                while required != 0 {
                    let bit = required.trailing_zeros();
                    required &= required - 1;
                    let pick = *group
                        .iter()
                        .find(|&&j| self.atoms[j].child_false >> bit & 1 == 1)
                        .expect("surviving atoms have witnesses");
                    if let std::collections::btree_map::Entry::Vacant(e) = index.entry(pick) {
                        e.insert(chosen.len());
                        chosen.push(pick);
                    }
                }
            }
        }
        let n = chosen.len();
        let worlds = chosen
            .iter()
            .enumerate()
            .map(|(w, &i)| {
                let prims = self.atoms[i].prims;
                let label = self
                    .dag
                    .prim_nodes
                    .iter()
                    .enumerate()
                    .filter_map(|(p, &node)| match self.dag.nodes[node] {
                        Node::Prop(id) if prims >> p & 1 == 1 => Some(self.dag.props[id].clone()),
                        _ => None,
                    })
                    .collect();
                (format!("w{w}"), label)
            })
            .collect();
        let mut access = BTreeMap::new();
        for (a, &mask) in self.agent_masks.iter().enumerate() {
            let keys: Vec<u128> = chosen.iter().map(|&i| self.atoms[i].prims & mask).collect();
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if keys[u] == keys[v] {
                        pairs.push((u, v));
                    }
                }
            }
            access.insert(self.dag.agents[a].clone(), Relation::from_pairs(n, pairs));
        }
        for a in extra_agents {
            access.entry(a.clone()).or_insert_with(|| Relation::universal(n));
        }
        let structure = KripkeStructure::new(worlds, access).expect("witness is well formed");
        PointedKripke::new(structure, 0).expect("root is world 0")
    }
}

fn enumerate_atoms(dag: &Dag, max_atoms: usize) -> Result<Vec<Atom>, ProverError> {
    struct Walk<'a> {
        dag: &'a Dag,
        values: Vec<bool>,
        atoms: Vec<Atom>,
        max_atoms: usize,
    }

    impl Walk<'_> {
        fn run(&mut self, from: usize, prims: u128) -> Result<(), ProverError> {
            let mut i = from;
            while i < self.dag.nodes.len() {
                let v = match self.dag.nodes[i] {
                    Node::Top => true,
                    Node::Not(c) => !self.values[c],
                    Node::And(x, y) => self.values[x] && self.values[y],
                    Node::Knows(_, c) if !self.values[c] => false,
                    Node::Prop(_) | Node::Knows(..) => {
                        let bit = 1u128 << self.dag.prim_of[i].expect("primitive");
                        self.values[i] = false;
                        self.run(i + 1, prims)?;
                        self.values[i] = true;
                        return self.run(i + 1, prims | bit);
                    }
                };
                self.values[i] = v;
                i += 1;
            }
            if self.atoms.len() >= self.max_atoms {
                return Err(ProverError::Inconclusive(format!(
                    "the atom limit of {} was reached",
                    self.max_atoms
                )));
            }
            let mut child_false = 0u128;
            for (p, &n) in self.dag.prim_nodes.iter().enumerate() {
                if let Node::Knows(_, c) = self.dag.nodes[n] {
                    if !self.values[c] {
                        child_false |= 1u128 << p;
                    }
                }
            }
            let mut outputs = 0u64;
            for (r, &n) in self.dag.roots.iter().enumerate() {
                if self.values[n] {
                    outputs |= 1u64 << r;
                }
            }
            self.atoms.push(Atom { prims, child_false, outputs });
            Ok(())
        }
    }

    let mut walk = Walk {
        dag,
        values: vec![false; dag.nodes.len()],
        atoms: Vec::new(),
        max_atoms,
    };
    walk.run(0, 0)?;
    Ok(walk.atoms)
}

/// S5n satisfiability, validity and equivalence.
#[derive(Clone, Debug, Default)]
pub struct Prover {
    pub config: ProverConfig,
}

impl Prover {
    pub fn new(config: ProverConfig) -> Prover {
        Prover { config }
    }

    pub fn with_agents(agents: BTreeSet<AgentId>) -> Prover {
        Prover::new(ProverConfig { agents, ..ProverConfig::default() })
    }

    pub fn is_satisfiable(&self, f: &Formula) -> Result<ProofResult, ProverError> {
        let space = Space::build(&[f], &self.config.agents, self.config.max_atoms)?;
        let Some((root, _)) = space.alive_atoms().find(|(_, a)| a.outputs & 1 == 1) else {
            return Ok(ProofResult { verdict: Verdict::Unsat, witness: None });
        };
        let model = space.witness(root, &self.config.agents);
        match model.satisfies(f) {
            Ok(true) => {}
            other => {
                return Err(ProverError::Internal(format!(
                    "witness for `{f}` fails its self-check ({other:?})"
                )))
            }
        }
        let min = model.minimize();
        if min.satisfies(f) != Ok(true) {
            return Err(ProverError::Internal(format!("minimized witness for `{f}` fails")));
        }
        Ok(ProofResult { verdict: Verdict::Sat, witness: Some(min) })
    }

    pub fn is_valid(&self, f: &Formula) -> Result<bool, ProverError> {
        Ok(self.type_space(std::slice::from_ref(f))?.valid(0))
    }

    pub fn equivalent(&self, f: &Formula, g: &Formula) -> Result<bool, ProverError> {
        if f == g {
            return Ok(true);
        }
        Ok(self.type_space(&[f.clone(), g.clone()])?.equivalent(0, 1))
    }

    /// All joint valuations of `formulas` realized somewhere, from a single
    /// elimination run.
    pub fn type_space(&self, formulas: &[Formula]) -> Result<TypeSpace, ProverError> {
        let refs: Vec<&Formula> = formulas.iter().collect();
        let space = Space::build(&refs, &self.config.agents, self.config.max_atoms)?;
        let realized = space
            .alive_atoms()
            .map(|(_, a)| (0..formulas.len()).map(|r| a.outputs >> r & 1 == 1).collect())
            .collect();
        Ok(TypeSpace { formulas: formulas.to_vec(), realized })
    }
}
