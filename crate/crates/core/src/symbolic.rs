//! Execution over symbolic knowledge bases: finite subsets of a focus set,
//! updated through weakest liberal preconditions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::actions::{ActionInterpretation, ChoiceAction, EpistemicAction};
use crate::engine::{Config, Environment};
use crate::ensemble::Ensemble;
use crate::formula::{outside_closure, ActionSym, EnsembleFormula, FocusSet, Formula};
use crate::prover::{Prover, ProverError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("`{0}` is not in the Boolean closure of the focus set")]
    OutsideFocus(Formula),
    #[error("`{0}` is not a member of the focus set")]
    NotInFocus(Formula),
    #[error("guard `{guard}` leaves the Boolean closure of the focus set at {}", list(.offending))]
    GuardOutsideFocus { guard: Formula, offending: Vec<Formula> },
    #[error("representative table has not been verified")]
    Unverified,
    #[error("representative table has no entry for {action} and `{formula}`")]
    MissingWlp { action: String, formula: Formula },
    #[error("representative table has no precondition entry for {0}")]
    MissingPre(String),
    #[error("action symbol `{0}` has no interpretation")]
    Uninterpreted(ActionSym),
}

fn list(fs: &[Formula]) -> String {
    fs.iter().map(|f| format!("`{f}`")).collect::<Vec<_>>().join(", ")
}

/// A subset of the focus set, closed under `true` when `true` is in focus.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolicState(BTreeSet<Formula>);

impl SymbolicState {
    pub fn new(
        members: impl IntoIterator<Item = Formula>,
        focus: &FocusSet,
    ) -> Result<SymbolicState, SymbolicError> {
        let mut set = BTreeSet::new();
        for f in members {
            if !focus.contains(&f) {
                return Err(SymbolicError::NotInFocus(f));
            }
            set.insert(f);
        }
        if focus.contains(&Formula::Top) {
            set.insert(Formula::Top);
        }
        Ok(SymbolicState(set))
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.0.contains(f)
    }

    pub fn members(&self) -> &BTreeSet<Formula> {
        &self.0
    }

    /// Membership of `f` flipped; used for perturbation tests.
    pub fn toggled(&self, f: &Formula) -> SymbolicState {
        let mut s = self.0.clone();
        if !s.remove(f) {
            s.insert(f.clone());
        }
        SymbolicState(s)
    }
}

impl fmt::Display for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Symbolic satisfaction: focus members by membership, everything else by
/// decomposition through `~` and `&`.
pub fn sym_satisfies(
    state: &SymbolicState,
    f: &Formula,
    focus: &FocusSet,
) -> Result<bool, SymbolicError> {
    if focus.contains(f) {
        return Ok(state.contains(f));
    }
    match f {
        Formula::Top => Ok(true),
        Formula::Not(g) => Ok(!sym_satisfies(state, g, focus)?),
        Formula::And(a, b) => {
            Ok(sym_satisfies(state, a, focus)? && sym_satisfies(state, b, focus)?)
        }
        _ => Err(SymbolicError::OutsideFocus(f.clone())),
    }
}

fn s_not(f: Formula) -> Formula {
    match f {
        Formula::Not(g) => (*g).clone(),
        other => Formula::not(other),
    }
}

fn is_bot(f: &Formula) -> bool {
    matches!(f, Formula::Not(g) if **g == Formula::Top)
}

fn s_and(a: Formula, b: Formula) -> Formula {
    if a == Formula::Top || is_bot(&b) {
        b
    } else if b == Formula::Top || is_bot(&a) || a == b {
        a
    } else {
        Formula::and(a, b)
    }
}

fn s_implies(a: Formula, b: Formula) -> Formula {
    s_not(s_and(a, s_not(b)))
}

fn s_knows(agent: &crate::formula::AgentId, f: Formula) -> Formula {
    if f == Formula::Top {
        Formula::Top
    } else {
        Formula::Knows(agent.clone(), std::sync::Arc::new(f))
    }
}

/// Weakest liberal precondition of `f` under `action`: the formula true in
/// a state exactly when the update, if defined, satisfies `f`.
pub fn wlp(action: &EpistemicAction, f: &Formula) -> Formula {
    let mut memo = HashMap::new();
    wlp_at(action, action.point(), f, &mut memo)
}

fn wlp_at(
    action: &EpistemicAction,
    event: usize,
    f: &Formula,
    memo: &mut HashMap<(usize, Formula), Formula>,
) -> Formula {
    let key = (event, f.clone());
    if let Some(r) = memo.get(&key) {
        return r.clone();
    }
    let model = action.model();
    let pre = model.pre(event).clone();
    let r = match f {
        Formula::Top => Formula::Top,
        Formula::Prop(_) => s_implies(pre, f.clone()),
        Formula::Not(g) => s_implies(pre, s_not(wlp_at(action, event, g, memo))),
        Formula::And(a, b) => {
            let x = wlp_at(action, event, a, memo);
            let y = wlp_at(action, event, b, memo);
            s_and(x, y)
        }
        Formula::Knows(agent, g) => {
            let alternatives: Vec<usize> = match model.relation(agent) {
                Some(rel) => rel.successors(event).to_vec(),
                // An agent without a relation in the model is treated as
                // observing nothing, i.e. confusing all events.
                None => (0..model.event_count()).collect(),
            };
            let mut conj = Formula::Top;
            for e in alternatives {
                let inner = wlp_at(action, e, g, memo);
                conj = s_and(conj, s_knows(agent, inner));
            }
            s_implies(pre, conj)
        }
    };
    memo.insert(key, r.clone());
    r
}

/// Representatives of preconditions and of weakest preconditions of focus
/// formulas, within the Boolean closure of the focus set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepresentativeTable {
    pre: BTreeMap<EpistemicAction, Formula>,
    wlp: BTreeMap<(EpistemicAction, Formula), Formula>,
    verified: bool,
}

impl RepresentativeTable {
    pub fn set_pre(&mut self, action: EpistemicAction, repr: Formula) {
        self.pre.insert(action, repr);
        self.verified = false;
    }

    pub fn set_wlp(&mut self, action: EpistemicAction, focus_formula: Formula, repr: Formula) {
        self.wlp.insert((action, focus_formula), repr);
        self.verified = false;
    }

    pub fn pre(&self, action: &EpistemicAction) -> Option<&Formula> {
        self.pre.get(action)
    }

    pub fn wlp(&self, action: &EpistemicAction, f: &Formula) -> Option<&Formula> {
        self.wlp.get(&(action.clone(), f.clone()))
    }

    pub fn pre_entries(&self) -> impl Iterator<Item = (&EpistemicAction, &Formula)> {
        self.pre.iter()
    }

    pub fn wlp_entries(&self) -> impl Iterator<Item = (&EpistemicAction, &Formula, &Formula)> {
        self.wlp.iter().map(|((a, f), r)| (a, f, r))
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn actions(&self) -> BTreeSet<EpistemicAction> {
        self.pre
            .keys()
            .cloned()
            .chain(self.wlp.keys().map(|(a, _)| a.clone()))
            .collect()
    }

    /// Exchanges two stored wlp representatives; used by perturbation tests.
    pub fn swap_wlp(
        &mut self,
        a: &(EpistemicAction, Formula),
        b: &(EpistemicAction, Formula),
    ) -> bool {
        let (Some(x), Some(y)) = (self.wlp.get(a).cloned(), self.wlp.get(b).cloned()) else {
            return false;
        };
        self.wlp.insert(a.clone(), y);
        self.wlp.insert(b.clone(), x);
        self.verified = false;
        true
    }
}

/// What is wrong with one table cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableProblem {
    Missing,
    OutsideClosure { representative: Formula, offending: Vec<Formula> },
    NotEquivalent { representative: Formula, computed: Formula },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableDiagnostic {
    pub action: String,
    /// The focus formula of the cell; `None` for the precondition cell.
    pub formula: Option<Formula>,
    pub problem: TableProblem,
}

impl fmt::Display for TableDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = match &self.formula {
            Some(g) => format!("{} / {g}", self.action),
            None => format!("{} / pre", self.action),
        };
        match &self.problem {
            TableProblem::Missing => write!(f, "{cell}: no representative given"),
            TableProblem::OutsideClosure { representative, offending } => write!(
                f,
                "{cell}: representative `{representative}` is outside the Boolean closure of the focus set ({})",
                list(offending)
            ),
            TableProblem::NotEquivalent { representative, computed } => write!(
                f,
                "{cell}: representative `{representative}` is not equivalent to the computed `{computed}`"
            ),
        }
    }
}

/// Checks every precondition and wlp cell needed by the interpretation
/// against the prover and marks the table verified when nothing is wrong.
pub fn verify_table(
    table: &mut RepresentativeTable,
    interp: &ActionInterpretation,
    focus: &FocusSet,
    prover: &Prover,
) -> Result<Vec<TableDiagnostic>, ProverError> {
    let mut out = Vec::new();
    for action in interp.pointed_actions() {
        let name = action.to_string();
        let mut check = |formula: Option<&Formula>, computed: Formula, repr: Option<&Formula>| {
            let problem = match repr {
                None => Some(TableProblem::Missing),
                Some(r) if !focus.in_boolean_closure(r) => Some(TableProblem::OutsideClosure {
                    representative: r.clone(),
                    offending: outside_closure(r, focus),
                }),
                Some(r) => {
                    if prover.equivalent(&computed, r)? {
                        None
                    } else {
                        Some(TableProblem::NotEquivalent { representative: r.clone(), computed })
                    }
                }
            };
            if let Some(problem) = problem {
                out.push(TableDiagnostic { action: name.clone(), formula: formula.cloned(), problem });
            }
            Ok::<(), ProverError>(())
        };
        check(None, action.pre().clone(), table.pre(&action))?;
        for f in focus.iter() {
            check(Some(f), wlp(&action, f), table.wlp(&action, f))?;
        }
    }
    table.verified = out.is_empty();
    Ok(out)
}

/// A formula in the Boolean closure of `focus` equivalent to `target`, in
/// minimal disjunctive normal form over focus literals, or `None` when no
/// such formula exists or the smallest one has more than `max_disjuncts`
/// disjuncts.
///
/// The prover computes which valuations of the focus formulas and the target
/// occur together. A representative exists exactly when no realized focus
/// valuation occurs with both target values; unrealized valuations are free.
pub fn search_equivalent(
    target: &Formula,
    focus: &FocusSet,
    max_disjuncts: usize,
    prover: &Prover,
) -> Result<Option<Formula>, ProverError> {
    let lits: Vec<Formula> = focus.iter().cloned().collect();
    if lits.len() > 16 {
        return Err(ProverError::Inconclusive(format!(
            "representative search supports at most 16 focus formulas, got {}",
            lits.len()
        )));
    }
    let mut roots = lits.clone();
    roots.push(target.clone());
    let space = prover.type_space(&roots)?;
    let k = lits.len();
    let mut on = BTreeSet::new();
    let mut off = BTreeSet::new();
    for v in &space.realized {
        let m: u32 = (0..k).filter(|&i| v[i]).map(|i| 1 << i).sum();
        if v[k] {
            on.insert(m);
        } else {
            off.insert(m);
        }
    }
    if !on.is_disjoint(&off) {
        return Ok(None);
    }
    let Some(cover) = minimal_cover(k, &on, &off, max_disjuncts) else {
        return Ok(None);
    };
    let disjuncts: Vec<Formula> = cover
        .iter()
        .map(|cube| {
            Formula::conjunction((0..k).filter(|&i| cube.mask >> i & 1 == 1).map(|i| {
                if cube.value >> i & 1 == 1 {
                    lits[i].clone()
                } else {
                    Formula::not(lits[i].clone())
                }
            }))
        })
        .collect();
    let repr = Formula::disjunction(disjuncts);
    if !prover.equivalent(target, &repr)? {
        return Err(ProverError::Internal(format!(
            "representative `{repr}` for `{target}` failed re-verification"
        )));
    }
    Ok(Some(repr))
}

/// `search_equivalent` applied to the weakest precondition of `f`.
pub fn search_representative(
    action: &EpistemicAction,
    f: &Formula,
    focus: &FocusSet,
    max_disjuncts: usize,
    prover: &Prover,
) -> Result<Option<Formula>, ProverError> {
    search_equivalent(&wlp(action, f), focus, max_disjuncts, prover)
}

/// A product term: variables in `mask` fixed to the bits of `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Cube {
    mask: u32,
    value: u32,
}

impl Cube {
    fn covers(&self, m: u32) -> bool {
        m & self.mask == self.value
    }
}

/// Smallest set of prime implicants covering `on` and avoiding `off`, with at
/// most `bound` cubes. Minterms in neither set are don't-cares.
fn minimal_cover(k: usize, on: &BTreeSet<u32>, off: &BTreeSet<u32>, bound: usize) -> Option<Vec<Cube>> {
    if on.is_empty() {
        return Some(Vec::new());
    }
    let full: u32 = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    // Quine-McCluskey merging over everything that is not off.
    let mut level: BTreeSet<Cube> = (0..=full)
        .filter(|m| !off.contains(m))
        .map(|m| Cube { mask: full, value: m })
        .collect();
    let mut primes = BTreeSet::new();
    while !level.is_empty() {
        let mut next = BTreeSet::new();
        let mut merged = BTreeSet::new();
        let items: Vec<Cube> = level.iter().copied().collect();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                if a.mask != b.mask {
                    continue;
                }
                let diff = a.value ^ b.value;
                if diff.count_ones() == 1 {
                    next.insert(Cube { mask: a.mask & !diff, value: a.value & !diff });
                    merged.insert(*a);
                    merged.insert(*b);
                }
            }
        }
        primes.extend(level.difference(&merged).copied());
        level = next;
    }
    let primes: Vec<Cube> = primes
        .into_iter()
        .filter(|c| on.iter().any(|&m| c.covers(m)))
        .collect();
    // Exhaustive search by increasing size; both sets are tiny in practice.
    for size in 1..=bound.min(primes.len()) {
        let mut pick = Vec::with_capacity(size);
        if choose(&primes, 0, size, &mut pick, on) {
            let mut out: Vec<Cube> = pick.into_iter().map(|i| primes[i]).collect();
            out.sort_by_key(|c| (c.mask.count_ones(), c.mask, c.value));
            return Some(out);
        }
    }
    None
}

fn choose(primes: &[Cube], start: usize, left: usize, pick: &mut Vec<usize>, on: &BTreeSet<u32>) -> bool {
    if left == 0 {
        return on.iter().all(|&m| pick.iter().any(|&i| primes[i].covers(m)));
    }
    for i in start..primes.len() {
        if primes.len() - i < left {
            break;
        }
        pick.push(i);
        if choose(primes, i + 1, left - 1, pick, on) {
            return true;
        }
        pick.pop();
    }
    false
}

/// Update through the table: keep the focus formulas whose representative
/// holds now.
pub fn sym_update(
    state: &SymbolicState,
    action: &EpistemicAction,
    table: &RepresentativeTable,
    focus: &FocusSet,
) -> Result<SymbolicState, SymbolicError> {
    if !table.is_verified() {
        return Err(SymbolicError::Unverified);
    }
    let mut out = BTreeSet::new();
    for f in focus.iter() {
        let repr = table.wlp(action, f).ok_or_else(|| SymbolicError::MissingWlp {
            action: action.to_string(),
            formula: f.clone(),
        })?;
        if sym_satisfies(state, repr, focus)? {
            out.insert(f.clone());
        }
    }
    Ok(SymbolicState(out))
}

/// One successor per alternative whose precondition representative holds.
pub fn sym_choice_step(
    state: &SymbolicState,
    choice: &ChoiceAction,
    table: &RepresentativeTable,
    focus: &FocusSet,
) -> Result<Vec<SymbolicState>, SymbolicError> {
    if !table.is_verified() {
        return Err(SymbolicError::Unverified);
    }
    let mut out = BTreeSet::new();
    for alt in choice.alternatives() {
        let pre = table
            .pre(alt)
            .ok_or_else(|| SymbolicError::MissingPre(alt.to_string()))?;
        if sym_satisfies(state, pre, focus)? {
            out.insert(sym_update(state, alt, table, focus)?);
        }
    }
    Ok(out.into_iter().collect())
}

/// Fails when a guard of the ensemble leaves the Boolean closure.
pub fn check_guards(ensemble: &Ensemble, focus: &FocusSet) -> Result<(), SymbolicError> {
    for g in ensemble.guards() {
        if !focus.in_boolean_closure(&g) {
            return Err(SymbolicError::GuardOutsideFocus {
                offending: outside_closure(&g, focus),
                guard: g,
            });
        }
    }
    Ok(())
}

/// Fails when an epistemic part of the formula, including tests, leaves the
/// Boolean closure.
pub fn check_formula(formula: &EnsembleFormula, focus: &FocusSet) -> Result<(), SymbolicError> {
    for f in formula.epistemic_parts() {
        if !focus.in_boolean_closure(&f) {
            return Err(SymbolicError::OutsideFocus(f));
        }
    }
    Ok(())
}

pub type SymbolicConfiguration = Config<SymbolicState>;

/// Symbolic environment backed by a verified representative table.
#[derive(Clone, Debug)]
pub struct SymbolicEnv<'a> {
    pub focus: &'a FocusSet,
    pub table: &'a RepresentativeTable,
    pub interpretation: &'a ActionInterpretation,
}

impl<'a> SymbolicEnv<'a> {
    pub fn new(
        focus: &'a FocusSet,
        table: &'a RepresentativeTable,
        interpretation: &'a ActionInterpretation,
    ) -> Result<SymbolicEnv<'a>, SymbolicError> {
        if !table.is_verified() {
            return Err(SymbolicError::Unverified);
        }
        Ok(SymbolicEnv { focus, table, interpretation })
    }

    /// A configuration whose guards lie in the Boolean closure.
    pub fn configuration(
        &self,
        ensemble: Ensemble,
        state: SymbolicState,
    ) -> Result<SymbolicConfiguration, SymbolicError> {
        check_guards(&ensemble, self.focus)?;
        Ok(Config { ensemble, state })
    }
}

impl Environment for SymbolicEnv<'_> {
    type State = SymbolicState;
    type Error = SymbolicError;

    fn holds(&self, state: &SymbolicState, guard: &Formula) -> Result<bool, SymbolicError> {
        sym_satisfies(state, guard, self.focus)
    }

    fn successors(&self, state: &SymbolicState, action: &ActionSym) -> Result<Vec<SymbolicState>, SymbolicError> {
        let choice = self
            .interpretation
            .get(action)
            .ok_or_else(|| SymbolicError::Uninterpreted(action.clone()))?;
        sym_choice_step(state, choice, self.table, self.focus)
    }
}
