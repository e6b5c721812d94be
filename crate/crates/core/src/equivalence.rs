//! Agreement between the semantic and the symbolic engine: F-equivalence of
//! states, mutual simulation of configurations and differential model
//! checking.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{
    compound_relation, config_step, evaluate, explore, CheckError, Config, ConfigGraph, Truth,
};
use crate::formula::{CompoundAction, EnsembleFormula, FocusSet, Formula};
use crate::kripke::KripkeError;
use crate::semantic::{SemanticEnv, SemanticError, StateClass};
use crate::symbolic::{check_formula, sym_satisfies, SymbolicEnv, SymbolicError, SymbolicState};

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error("semantic engine: {0}")]
    Semantic(#[from] SemanticError),
    #[error("symbolic engine: {0}")]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
    #[error("{engine} graph is not closed after {nodes} nodes")]
    OpenGraph { engine: &'static str, nodes: usize },
}

impl From<CheckError<SemanticError>> for EquivalenceError {
    fn from(e: CheckError<SemanticError>) -> Self {
        match e {
            CheckError::Env(e) => EquivalenceError::Semantic(e),
            CheckError::Unknown { nodes, .. } | CheckError::OpenGraph(nodes) => {
                EquivalenceError::OpenGraph { engine: "semantic", nodes }
            }
        }
    }
}

impl From<CheckError<SymbolicError>> for EquivalenceError {
    fn from(e: CheckError<SymbolicError>) -> Self {
        match e {
            CheckError::Env(e) => EquivalenceError::Symbolic(e),
            CheckError::Unknown { nodes, .. } | CheckError::OpenGraph(nodes) => {
                EquivalenceError::OpenGraph { engine: "symbolic", nodes }
            }
        }
    }
}

/// Which side lacked a counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// A semantic step or value with no symbolic match.
    SemanticToSymbolic,
    /// A symbolic step or value with no semantic match.
    SymbolicToSemantic,
    /// The two sides disagree on a value.
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivalenceViolation {
    pub semantic: String,
    pub symbolic: String,
    /// The formula or action at fault.
    pub subject: String,
    pub direction: Direction,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub subject: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub pairs_checked: usize,
    pub violations: Vec<EquivalenceViolation>,
    /// Checks that could not be decided, e.g. unknown verdicts.
    pub skipped: Vec<Skipped>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: EquivalenceReport) {
        self.pairs_checked += other.pairs_checked;
        self.violations.extend(other.violations);
        self.skipped.extend(other.skipped);
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} pairs checked, {} violations, {} skipped",
            self.pairs_checked,
            self.violations.len(),
            self.skipped.len()
        )?;
        for v in &self.violations {
            writeln!(f, "  {:?} on {}: {}", v.direction, v.subject, v.detail)?;
            writeln!(f, "    semantic: {}", v.semantic)?;
            writeln!(f, "    symbolic: {}", v.symbolic)?;
        }
        for s in &self.skipped {
            writeln!(f, "  skipped {}: {}", s.subject, s.reason)?;
        }
        Ok(())
    }
}

/// Every member of the class satisfies exactly the focus formulas in `s`.
pub fn f_equivalent(class: &StateClass, s: &SymbolicState, focus: &FocusSet) -> Result<bool, KripkeError> {
    for est in class.members() {
        for f in focus.iter() {
            if est.satisfies(f)? != s.contains(f) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn describe_class(c: &Config<StateClass>) -> String {
    format!("{} with {} states", c.ensemble, c.state.len())
}

fn describe_sym(c: &Config<SymbolicState>) -> String {
    format!("{} with {}", c.ensemble, c.state)
}

/// Compares Kripke satisfaction in every member with symbolic satisfaction
/// for each sample of the Boolean closure.
pub fn check_bcl_agreement(
    class: &StateClass,
    s: &SymbolicState,
    focus: &FocusSet,
    samples: &[Formula],
) -> Result<EquivalenceReport, KripkeError> {
    let mut report = EquivalenceReport::default();
    let sem = format!("class of {} states", class.len());
    for beta in samples {
        report.pairs_checked += 1;
        let symbolic = match sym_satisfies(s, beta, focus) {
            Ok(b) => b,
            Err(e) => {
                report.violations.push(EquivalenceViolation {
                    semantic: sem.clone(),
                    symbolic: s.to_string(),
                    subject: beta.to_string(),
                    direction: Direction::Both,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        for (i, est) in class.members().enumerate() {
            let semantic = est.satisfies(beta)?;
            if semantic != symbolic {
                report.violations.push(EquivalenceViolation {
                    semantic: format!("member {i} of {sem}"),
                    symbolic: s.to_string(),
                    subject: beta.to_string(),
                    direction: Direction::Both,
                    detail: format!("semantic {semantic}, symbolic {symbolic}"),
                });
            }
        }
    }
    Ok(report)
}

/// Co-explores both engines from the two roots, breadth first, up to `depth`
/// steps (`None` runs to closure). Every step on one side must be matched on
/// the other by the same action symbol leading to the same ensemble with
/// F-equivalent states.
pub fn check_simulation(
    sem_env: &SemanticEnv<'_>,
    sym_env: &SymbolicEnv<'_>,
    c_sem: Config<StateClass>,
    c_sym: Config<SymbolicState>,
    depth: Option<usize>,
) -> Result<EquivalenceReport, EquivalenceError> {
    let focus = sym_env.focus;
    let mut report = EquivalenceReport::default();
    let root_ok = c_sem.ensemble == c_sym.ensemble && f_equivalent(&c_sem.state, &c_sym.state, focus)?;
    if !root_ok {
        report.violations.push(EquivalenceViolation {
            semantic: describe_class(&c_sem),
            symbolic: describe_sym(&c_sym),
            subject: "root".into(),
            direction: Direction::Both,
            detail: "roots are not F-equivalent".into(),
        });
        return Ok(report);
    }
    let mut seen = BTreeSet::from([(c_sem.clone(), c_sym.clone())]);
    let mut queue = VecDeque::from([(c_sem, c_sym, 0usize)]);
    while let Some((a, b, d)) = queue.pop_front() {
        report.pairs_checked += 1;
        if depth.is_some_and(|limit| d >= limit) {
            continue;
        }
        let sem_steps = config_step(sem_env, &a)?;
        let sym_steps = config_step(sym_env, &b)?;
        let mut next = Vec::new();
        for s in &sem_steps {
            let mut found = None;
            for t in &sym_steps {
                if s.action == t.action
                    && s.target.ensemble == t.target.ensemble
                    && f_equivalent(&s.target.state, &t.target.state, focus)?
                {
                    found = Some(t.target.clone());
                    break;
                }
            }
            match found {
                Some(t) => next.push((s.target.clone(), t)),
                None => report.violations.push(EquivalenceViolation {
                    semantic: describe_class(&a),
                    symbolic: describe_sym(&b),
                    subject: s.action.to_string(),
                    direction: Direction::SemanticToSymbolic,
                    detail: format!("no matching symbolic step to {}", describe_class(&s.target)),
                }),
            }
        }
        for t in &sym_steps {
            let mut found = None;
            for s in &sem_steps {
                if s.action == t.action
                    && s.target.ensemble == t.target.ensemble
                    && f_equivalent(&s.target.state, &t.target.state, focus)?
                {
                    found = Some(s.target.clone());
                    break;
                }
            }
            match found {
                Some(s) => next.push((s, t.target.clone())),
                None => report.violations.push(EquivalenceViolation {
                    semantic: describe_class(&a),
                    symbolic: describe_sym(&b),
                    subject: t.action.to_string(),
                    direction: Direction::SymbolicToSemantic,
                    detail: format!("no matching semantic step to {}", describe_sym(&t.target)),
                }),
            }
        }
        for pair in next {
            if seen.insert(pair.clone()) {
                queue.push_back((pair.0, pair.1, d + 1));
            }
        }
    }
    Ok(report)
}

/// Relational check for compound actions on closed graphs: for every pair of
/// F-equivalent nodes and every edge of the action relation on one side,
/// some edge on the other side leads to an F-equivalent pair again.
pub fn check_compound_simulation(
    sem_env: &SemanticEnv<'_>,
    sym_env: &SymbolicEnv<'_>,
    g_sem: &ConfigGraph<StateClass>,
    g_sym: &ConfigGraph<SymbolicState>,
    actions: &[CompoundAction],
) -> Result<EquivalenceReport, EquivalenceError> {
    let focus = sym_env.focus;
    let mut matched = vec![vec![false; g_sym.nodes.len()]; g_sem.nodes.len()];
    for (u, a) in g_sem.nodes.iter().enumerate() {
        for (v, b) in g_sym.nodes.iter().enumerate() {
            matched[u][v] = a.ensemble == b.ensemble && f_equivalent(&a.state, &b.state, focus)?;
        }
    }
    let mut report = EquivalenceReport::default();
    for action in actions {
        let r_sem = compound_relation(sem_env, g_sem, action)?;
        let r_sym = compound_relation(sym_env, g_sym, action)?;
        for u in 0..g_sem.nodes.len() {
            for v in 0..g_sym.nodes.len() {
                if !matched[u][v] {
                    continue;
                }
                report.pairs_checked += 1;
                for &u2 in &r_sem.succ[u] {
                    if !r_sym.succ[v].iter().any(|&v2| matched[u2][v2]) {
                        report.violations.push(EquivalenceViolation {
                            semantic: describe_class(&g_sem.nodes[u]),
                            symbolic: describe_sym(&g_sym.nodes[v]),
                            subject: action.to_string(),
                            direction: Direction::SemanticToSymbolic,
                            detail: format!("no symbolic match for the edge to {}", describe_class(&g_sem.nodes[u2])),
                        });
                    }
                }
                for &v2 in &r_sym.succ[v] {
                    if !r_sem.succ[u].iter().any(|&u2| matched[u2][v2]) {
                        report.violations.push(EquivalenceViolation {
                            semantic: describe_class(&g_sem.nodes[u]),
                            symbolic: describe_sym(&g_sym.nodes[v]),
                            subject: action.to_string(),
                            direction: Direction::SymbolicToSemantic,
                            detail: format!("no semantic match for the edge to {}", describe_sym(&g_sym.nodes[v2])),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Model-checks every formula in both engines from the given roots and
/// records disagreements. Unknown verdicts are listed as skipped.
pub fn differential_check(
    sem_env: &SemanticEnv<'_>,
    sym_env: &SymbolicEnv<'_>,
    c_sem: Config<StateClass>,
    c_sym: Config<SymbolicState>,
    formulas: &[EnsembleFormula],
    max_nodes: usize,
) -> Result<EquivalenceReport, EquivalenceError> {
    for psi in formulas {
        check_formula(psi, sym_env.focus)?;
    }
    let sem_desc = describe_class(&c_sem);
    let sym_desc = describe_sym(&c_sym);
    let g_sem = explore(sem_env, c_sem, max_nodes)?;
    let g_sym = explore(sym_env, c_sym, max_nodes)?;
    let mut report = EquivalenceReport::default();
    for psi in formulas {
        let a = evaluate(sem_env, &g_sem, psi)?[0];
        let b = evaluate(sym_env, &g_sym, psi)?[0];
        if a == Truth::Unknown || b == Truth::Unknown {
            report.skipped.push(Skipped {
                subject: psi.to_string(),
                reason: format!("semantic {a}, symbolic {b}"),
            });
            continue;
        }
        report.pairs_checked += 1;
        if a != b {
            report.violations.push(EquivalenceViolation {
                semantic: sem_desc.clone(),
                symbolic: sym_desc.clone(),
                subject: psi.to_string(),
                direction: Direction::Both,
                detail: format!("semantic {a}, symbolic {b}"),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::KripkeBuilder;

    #[test]
    fn top_focus_is_always_matched() {
        let focus = FocusSet::new([Formula::Top]);
        let s = SymbolicState::new([Formula::Top], &focus).unwrap();
        let est = KripkeBuilder::new(["a1"]).world("w", ["p"]).build_pointed("w").unwrap();
        assert!(f_equivalent(&StateClass::singleton(est), &s, &focus).unwrap());
    }

    #[test]
    fn missing_known_fact_breaks_equivalence() {
        let k1x1 = Formula::knows("a1", Formula::prop("x1"));
        let focus = FocusSet::new([k1x1.clone()]);
        let est = KripkeBuilder::new(["a1", "a2"])
            .world("w0", ["x1"])
            .world("w1", Vec::<&str>::new())
            .block("a2", &["w0", "w1"])
            .build_pointed("w0")
            .unwrap();
        let class = StateClass::singleton(est);
        let empty = SymbolicState::new([], &focus).unwrap();
        assert!(!f_equivalent(&class, &empty, &focus).unwrap());
        let full = SymbolicState::new([k1x1.clone()], &focus).unwrap();
        assert!(f_equivalent(&class, &full, &focus).unwrap());
        let report = check_bcl_agreement(&class, &full.toggled(&k1x1), &focus, &[Formula::not(k1x1)]).unwrap();
        assert!(!report.passed());
    }
}
