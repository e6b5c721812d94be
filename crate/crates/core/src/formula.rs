//! Epistemic formulas, ensemble formulas, and compound ensemble actions.
//!
//! Every formula is stored in its core form: propositions, `true`, negation,
//! conjunction and the knowledge modality. The usual connectives (`|`, `->`,
//! `false`, `M[a]`, `Kw[a]`) are constructors over that core; [`Surface`] keeps
//! them around for the parser and [`desugar`] maps them away.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                $name(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

name_type!(
    /// An agent name.
    AgentId
);
name_type!(
    /// An atomic proposition.
    Prop
);
name_type!(
    /// An agent action symbol such as `tell12_x1`.
    ActionSym
);

/// Core epistemic formula.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Prop(Prop),
    Top,
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Knows(AgentId, Arc<Formula>),
}

impl Formula {
    pub fn prop(p: impl Into<String>) -> Formula {
        Formula::Prop(Prop::new(p))
    }

    pub fn top() -> Formula {
        Formula::Top
    }

    pub fn bot() -> Formula {
        Formula::not(Formula::Top)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Arc::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    /// `a | b` as `~(~a & ~b)`.
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    /// `a -> b` as `~(a & ~b)`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and(a, Formula::not(b)))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a))
    }

    pub fn knows(agent: impl Into<AgentId>, f: Formula) -> Formula {
        Formula::Knows(agent.into(), Arc::new(f))
    }

    /// `M[a] f` as `~K[a] ~f`.
    pub fn possible(agent: impl Into<AgentId>, f: Formula) -> Formula {
        Formula::not(Formula::knows(agent, Formula::not(f)))
    }

    /// `Kw[a] f`: the agent knows whether `f`, i.e. `K[a] f | K[a] ~f`.
    pub fn knows_whether(agent: impl Into<AgentId>, f: Formula) -> Formula {
        let agent = agent.into();
        Formula::or(
            Formula::knows(agent.clone(), f.clone()),
            Formula::knows(agent, Formula::not(f)),
        )
    }

    /// Conjunction of all formulas; `true` for an empty iterator.
    pub fn conjunction(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut iter = items.into_iter();
        match iter.next() {
            None => Formula::Top,
            Some(first) => iter.fold(first, Formula::and),
        }
    }

    /// Disjunction of all formulas; `false` for an empty iterator.
    pub fn disjunction(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut iter = items.into_iter();
        match iter.next() {
            None => Formula::bot(),
            Some(first) => iter.fold(first, Formula::or),
        }
    }

    /// Nesting depth of knowledge operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Prop(_) | Formula::Top => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(a, b) => a.modal_depth().max(b.modal_depth()),
            Formula::Knows(_, f) => 1 + f.modal_depth(),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::Prop(_) | Formula::Top => 1,
            Formula::Not(f) | Formula::Knows(_, f) => 1 + f.size(),
            Formula::And(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Knows(a, _) = f {
                out.insert(a.clone());
            }
        });
        out
    }

    pub fn props(&self) -> BTreeSet<Prop> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Prop(p) = f {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Pre-order traversal over all subformulas, including `self`.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::Prop(_) | Formula::Top => {}
            Formula::Not(g) | Formula::Knows(_, g) => g.visit(f),
            Formula::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Splits a right- or left-nested conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// Printing re-applies the sugar so output stays readable. Every sugar pattern
// desugars back to exactly the matched core shape, so parsing the printed text
// returns the original AST.
const LEVEL_IMPLIES: u8 = 1;
const LEVEL_OR: u8 = 2;
const LEVEL_AND: u8 = 3;
const LEVEL_PREFIX: u8 = 4;

enum Sugar<'a> {
    Atom(String),
    Not(&'a Formula),
    And(&'a Formula, &'a Formula),
    Or(&'a Formula, &'a Formula),
    Implies(&'a Formula, &'a Formula),
    Knows(&'a AgentId, &'a Formula),
    Possible(&'a AgentId, &'a Formula),
    KnowsWhether(&'a AgentId, &'a Formula),
}

fn view(f: &Formula) -> Sugar<'_> {
    match f {
        Formula::Prop(p) => Sugar::Atom(p.to_string()),
        Formula::Top => Sugar::Atom("true".into()),
        Formula::Knows(a, g) => Sugar::Knows(a, g),
        Formula::And(a, b) => Sugar::And(a, b),
        Formula::Not(inner) => match &**inner {
            Formula::Top => Sugar::Atom("false".into()),
            Formula::Knows(a, g) => match &**g {
                Formula::Not(h) if matches!(view(g), Sugar::Not(_)) => Sugar::Possible(a, h),
                _ => Sugar::Not(inner),
            },
            Formula::And(l, r) => match (&**l, &**r) {
                (Formula::Not(x), Formula::Not(y)) => {
                    if let (Formula::Knows(a1, p1), Formula::Knows(a2, p2)) = (&**x, &**y) {
                        if a1 == a2 && **p2 == Formula::Not(p1.clone()) {
                            return Sugar::KnowsWhether(a1, p1);
                        }
                    }
                    // A left operand that prints as sugar itself (Kw, M, false)
                    // reads better as the premise of an implication.
                    if matches!(view(l), Sugar::Not(_)) {
                        Sugar::Or(x, y)
                    } else {
                        Sugar::Implies(l, y)
                    }
                }
                (x, Formula::Not(y)) => Sugar::Implies(x, y),
                _ => Sugar::Not(inner),
            },
            _ => Sugar::Not(inner),
        },
    }
}

fn level(f: &Formula) -> u8 {
    match view(f) {
        Sugar::Implies(..) => LEVEL_IMPLIES,
        Sugar::Or(..) => LEVEL_OR,
        Sugar::And(..) => LEVEL_AND,
        _ => LEVEL_PREFIX,
    }
}

fn write_at(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(f) < min {
        out.write_str("(")?;
        write_formula(f, out)?;
        out.write_str(")")
    } else {
        write_formula(f, out)
    }
}

fn write_formula(f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match view(f) {
        Sugar::Atom(s) => out.write_str(&s),
        Sugar::Not(g) => {
            out.write_str("~")?;
            write_at(g, LEVEL_PREFIX, out)
        }
        Sugar::Knows(a, g) => {
            write!(out, "K[{a}] ")?;
            write_at(g, LEVEL_PREFIX, out)
        }
        Sugar::Possible(a, g) => {
            write!(out, "M[{a}] ")?;
            write_at(g, LEVEL_PREFIX, out)
        }
        Sugar::KnowsWhether(a, g) => {
            write!(out, "Kw[{a}] ")?;
            write_at(g, LEVEL_PREFIX, out)
        }
        Sugar::And(a, b) => {
            write_at(a, LEVEL_AND, out)?;
            out.write_str(" & ")?;
            write_at(b, LEVEL_PREFIX, out)
        }
        Sugar::Or(a, b) => {
            write_at(a, LEVEL_OR, out)?;
            out.write_str(" | ")?;
            write_at(b, LEVEL_AND, out)
        }
        Sugar::Implies(a, b) => {
            write_at(a, LEVEL_OR, out)?;
            out.write_str(" -> ")?;
            write_at(b, LEVEL_IMPLIES, out)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self, f)
    }
}

/// Surface syntax with all derived connectives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Surface {
    Prop(Prop),
    Top,
    Bot,
    Not(Box<Surface>),
    And(Box<Surface>, Box<Surface>),
    Or(Box<Surface>, Box<Surface>),
    Implies(Box<Surface>, Box<Surface>),
    Knows(AgentId, Box<Surface>),
    Possible(AgentId, Box<Surface>),
    KnowsWhether(AgentId, Box<Surface>),
}

/// Expands derived connectives into the core grammar.
pub fn desugar(s: &Surface) -> Formula {
    match s {
        Surface::Prop(p) => Formula::Prop(p.clone()),
        Surface::Top => Formula::Top,
        Surface::Bot => Formula::bot(),
        Surface::Not(a) => Formula::not(desugar(a)),
        Surface::And(a, b) => Formula::and(desugar(a), desugar(b)),
        Surface::Or(a, b) => Formula::or(desugar(a), desugar(b)),
        Surface::Implies(a, b) => Formula::implies(desugar(a), desugar(b)),
        Surface::Knows(ag, a) => Formula::knows(ag.clone(), desugar(a)),
        Surface::Possible(ag, a) => Formula::possible(ag.clone(), desugar(a)),
        Surface::KnowsWhether(ag, a) => Formula::knows_whether(ag.clone(), desugar(a)),
    }
}

impl From<&Formula> for Surface {
    fn from(f: &Formula) -> Surface {
        match f {
            Formula::Prop(p) => Surface::Prop(p.clone()),
            Formula::Top => Surface::Top,
            Formula::Not(a) => Surface::Not(Box::new(Surface::from(&**a))),
            Formula::And(a, b) => {
                Surface::And(Box::new(Surface::from(&**a)), Box::new(Surface::from(&**b)))
            }
            Formula::Knows(ag, a) => Surface::Knows(ag.clone(), Box::new(Surface::from(&**a))),
        }
    }
}

/// Possible agents of a formula: those `a` for which the formula is an
/// `a`-formula, i.e. built from `true` and `K[a] _` by negation and conjunction.
///
/// Bare propositions belong to no agent's fragment and yield the empty set.
pub fn agents_of(f: &Formula, agents: &BTreeSet<AgentId>) -> BTreeSet<AgentId> {
    match f {
        Formula::Top => agents.clone(),
        Formula::Prop(_) => BTreeSet::new(),
        Formula::Knows(a, _) => {
            if agents.contains(a) {
                BTreeSet::from([a.clone()])
            } else {
                BTreeSet::new()
            }
        }
        Formula::Not(g) => agents_of(g, agents),
        Formula::And(a, b) => agents_of(a, agents)
            .intersection(&agents_of(b, agents))
            .cloned()
            .collect(),
    }
}

/// Finite set of formulas tracked by the symbolic semantics.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FocusSet(BTreeSet<Formula>);

impl FocusSet {
    pub fn new(items: impl IntoIterator<Item = Formula>) -> FocusSet {
        FocusSet(items.into_iter().collect())
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.0.contains(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_set(&self) -> &BTreeSet<Formula> {
        &self.0
    }

    /// Membership in the Boolean closure: focus members and `true`, closed
    /// under negation and conjunction. Decided structurally.
    pub fn in_boolean_closure(&self, f: &Formula) -> bool {
        in_boolean_closure(f, self)
    }
}

impl FromIterator<Formula> for FocusSet {
    fn from_iter<T: IntoIterator<Item = Formula>>(iter: T) -> Self {
        FocusSet::new(iter)
    }
}

pub fn in_boolean_closure(f: &Formula, focus: &FocusSet) -> bool {
    if focus.contains(f) {
        return true;
    }
    match f {
        Formula::Top => true,
        Formula::Not(g) => in_boolean_closure(g, focus),
        Formula::And(a, b) => in_boolean_closure(a, focus) && in_boolean_closure(b, focus),
        Formula::Prop(_) | Formula::Knows(..) => false,
    }
}

/// Subformulas of `f` that fall outside the Boolean closure and are maximal
/// with that property.
pub fn outside_closure(f: &Formula, focus: &FocusSet) -> Vec<Formula> {
    let mut out = Vec::new();
    fn go(f: &Formula, focus: &FocusSet, out: &mut Vec<Formula>) {
        if focus.contains(f) {
            return;
        }
        match f {
            Formula::Top => {}
            Formula::Not(g) => go(g, focus, out),
            Formula::And(a, b) => {
                go(a, focus, out);
                go(b, focus, out);
            }
            other => out.push(other.clone()),
        }
    }
    go(f, focus, &mut out);
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("action symbol `{sym}` declared for both `{first}` and `{second}`; action sets must be pairwise disjoint")]
    OverlappingActions {
        sym: ActionSym,
        first: AgentId,
        second: AgentId,
    },
    #[error("action set declared for unknown agent `{0}`")]
    UnknownOwner(AgentId),
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("unknown proposition `{0}`")]
    UnknownProp(Prop),
    #[error("unknown action symbol `{0}`")]
    UnknownAction(ActionSym),
}

/// Propositions, agents and per-agent action symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleSignature {
    props: BTreeSet<Prop>,
    agents: BTreeSet<AgentId>,
    act_syms: BTreeMap<AgentId, BTreeSet<ActionSym>>,
    owner: BTreeMap<ActionSym, AgentId>,
}

impl EnsembleSignature {
    pub fn new(
        props: impl IntoIterator<Item = Prop>,
        agents: impl IntoIterator<Item = AgentId>,
        act_syms: impl IntoIterator<Item = (AgentId, BTreeSet<ActionSym>)>,
    ) -> Result<EnsembleSignature, SignatureError> {
        let agents: BTreeSet<AgentId> = agents.into_iter().collect();
        let mut by_agent: BTreeMap<AgentId, BTreeSet<ActionSym>> =
            agents.iter().map(|a| (a.clone(), BTreeSet::new())).collect();
        let mut owner: BTreeMap<ActionSym, AgentId> = BTreeMap::new();
        for (agent, syms) in act_syms {
            if !agents.contains(&agent) {
                return Err(SignatureError::UnknownOwner(agent));
            }
            for sym in syms {
                if let Some(first) = owner.get(&sym) {
                    if *first != agent {
                        return Err(SignatureError::OverlappingActions {
                            sym,
                            first: first.clone(),
                            second: agent,
                        });
                    }
                }
                owner.insert(sym.clone(), agent.clone());
                by_agent.entry(agent.clone()).or_default().insert(sym);
            }
        }
        Ok(EnsembleSignature {
            props: props.into_iter().collect(),
            agents,
            act_syms: by_agent,
            owner,
        })
    }

    pub fn props(&self) -> &BTreeSet<Prop> {
        &self.props
    }

    pub fn agents(&self) -> &BTreeSet<AgentId> {
        &self.agents
    }

    pub fn actions_of(&self, agent: &AgentId) -> Option<&BTreeSet<ActionSym>> {
        self.act_syms.get(agent)
    }

    /// All action symbols of all agents.
    pub fn all_actions(&self) -> impl Iterator<Item = &ActionSym> {
        self.owner.keys()
    }

    /// The unique agent owning an action symbol.
    pub fn owner(&self, sym: &ActionSym) -> Option<&AgentId> {
        self.owner.get(sym)
    }

    pub fn check_formula(&self, f: &Formula) -> Result<(), SignatureError> {
        if let Some(a) = f.agents().into_iter().find(|a| !self.agents.contains(a)) {
            return Err(SignatureError::UnknownAgent(a));
        }
        if let Some(p) = f.props().into_iter().find(|p| !self.props.contains(p)) {
            return Err(SignatureError::UnknownProp(p));
        }
        Ok(())
    }

    pub fn agents_of(&self, f: &Formula) -> BTreeSet<AgentId> {
        agents_of(f, &self.agents)
    }
}

/// Regular expressions over agent actions with tests.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompoundAction {
    Atom(ActionSym),
    Test(Formula),
    Choice(Arc<CompoundAction>, Arc<CompoundAction>),
    Seq(Arc<CompoundAction>, Arc<CompoundAction>),
    Star(Arc<CompoundAction>),
}

impl CompoundAction {
    pub fn atom(sym: impl Into<ActionSym>) -> CompoundAction {
        CompoundAction::Atom(sym.into())
    }

    pub fn test(f: Formula) -> CompoundAction {
        CompoundAction::Test(f)
    }

    pub fn choice(a: CompoundAction, b: CompoundAction) -> CompoundAction {
        CompoundAction::Choice(Arc::new(a), Arc::new(b))
    }

    pub fn seq(a: CompoundAction, b: CompoundAction) -> CompoundAction {
        CompoundAction::Seq(Arc::new(a), Arc::new(b))
    }

    pub fn star(a: CompoundAction) -> CompoundAction {
        CompoundAction::Star(Arc::new(a))
    }

    /// Left-nested choice over the given symbols. Panics on an empty list.
    pub fn any_of<S: Into<ActionSym>>(syms: impl IntoIterator<Item = S>) -> CompoundAction {
        syms.into_iter()
            .map(|s| CompoundAction::atom(s))
            .reduce(CompoundAction::choice)
            .expect("any_of needs at least one symbol")
    }

    pub fn atoms(&self) -> BTreeSet<ActionSym> {
        let mut out = BTreeSet::new();
        self.visit_parts(&mut |a| {
            if let CompoundAction::Atom(s) = a {
                out.insert(s.clone());
            }
        });
        out
    }

    /// Formulas appearing in tests.
    pub fn tests(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        self.visit_parts(&mut |a| {
            if let CompoundAction::Test(f) = a {
                out.push(f.clone());
            }
        });
        out
    }

    fn visit_parts(&self, f: &mut impl FnMut(&CompoundAction)) {
        f(self);
        match self {
            CompoundAction::Atom(_) | CompoundAction::Test(_) => {}
            CompoundAction::Choice(a, b) | CompoundAction::Seq(a, b) => {
                a.visit_parts(f);
                b.visit_parts(f);
            }
            CompoundAction::Star(a) => a.visit_parts(f),
        }
    }

    fn level(&self) -> u8 {
        match self {
            CompoundAction::Choice(..) => 1,
            CompoundAction::Seq(..) => 2,
            _ => 3,
        }
    }

    fn write_at(&self, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level() < min {
            write!(out, "({self})")
        } else {
            write!(out, "{self}")
        }
    }
}

impl fmt::Display for CompoundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompoundAction::Atom(s) => write!(f, "{s}"),
            CompoundAction::Test(g) => write!(f, "({g})?"),
            CompoundAction::Choice(a, b) => {
                a.write_at(1, f)?;
                f.write_str(" + ")?;
                b.write_at(2, f)
            }
            CompoundAction::Seq(a, b) => {
                a.write_at(2, f)?;
                f.write_str("; ")?;
                b.write_at(3, f)
            }
            CompoundAction::Star(a) => {
                a.write_at(3, f)?;
                f.write_str("*")
            }
        }
    }
}

impl fmt::Debug for CompoundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Dynamic formulas over compound actions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnsembleFormula {
    Top,
    Epi(Formula),
    Not(Arc<EnsembleFormula>),
    And(Arc<EnsembleFormula>, Arc<EnsembleFormula>),
    Box(CompoundAction, Arc<EnsembleFormula>),
}

impl EnsembleFormula {
    pub fn epi(f: Formula) -> EnsembleFormula {
        EnsembleFormula::Epi(f)
    }

    pub fn not(f: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::Not(Arc::new(f))
    }

    pub fn and(a: EnsembleFormula, b: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::And(Arc::new(a), Arc::new(b))
    }

    pub fn or(a: EnsembleFormula, b: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::not(EnsembleFormula::and(
            EnsembleFormula::not(a),
            EnsembleFormula::not(b),
        ))
    }

    pub fn implies(a: EnsembleFormula, b: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::not(EnsembleFormula::and(a, EnsembleFormula::not(b)))
    }

    pub fn boxed(action: CompoundAction, f: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::Box(action, Arc::new(f))
    }

    /// `<action> f` as `~[action] ~f`.
    pub fn diamond(action: CompoundAction, f: EnsembleFormula) -> EnsembleFormula {
        EnsembleFormula::not(EnsembleFormula::boxed(action, EnsembleFormula::not(f)))
    }

    /// All epistemic formulas occurring in the formula, including tests inside
    /// compound actions.
    pub fn epistemic_parts(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        fn go(f: &EnsembleFormula, out: &mut Vec<Formula>) {
            match f {
                EnsembleFormula::Top => {}
                EnsembleFormula::Epi(g) => out.push(g.clone()),
                EnsembleFormula::Not(g) => go(g, out),
                EnsembleFormula::And(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                EnsembleFormula::Box(act, g) => {
                    out.extend(act.tests());
                    go(g, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn box_depth(&self) -> usize {
        match self {
            EnsembleFormula::Top | EnsembleFormula::Epi(_) => 0,
            EnsembleFormula::Not(g) => g.box_depth(),
            EnsembleFormula::And(a, b) => a.box_depth().max(b.box_depth()),
            EnsembleFormula::Box(_, g) => 1 + g.box_depth(),
        }
    }

    /// Normal form used by the text syntax: `true` becomes `Epi(true)` and
    /// conjunctions of purely epistemic parts are merged into one epistemic
    /// formula. Negations are kept, since over a class of states `!p` (not
    /// every state satisfies `p`) differs from `~p` (every state satisfies
    /// `~p`).
    pub fn normalized(&self) -> EnsembleFormula {
        match self {
            EnsembleFormula::Top => EnsembleFormula::Epi(Formula::Top),
            EnsembleFormula::Epi(f) => EnsembleFormula::Epi(f.clone()),
            EnsembleFormula::Not(g) => EnsembleFormula::not(g.normalized()),
            EnsembleFormula::And(a, b) => match (a.normalized(), b.normalized()) {
                (EnsembleFormula::Epi(x), EnsembleFormula::Epi(y)) => {
                    EnsembleFormula::Epi(Formula::and(x, y))
                }
                (x, y) => EnsembleFormula::and(x, y),
            },
            EnsembleFormula::Box(act, g) => EnsembleFormula::boxed(act.clone(), g.normalized()),
        }
    }
}

enum DynSugar<'a> {
    Leaf(&'a Formula),
    Top,
    Not(&'a EnsembleFormula),
    /// Negation of a formula that reparses as epistemic.
    Lift(&'a EnsembleFormula),
    And(&'a EnsembleFormula, &'a EnsembleFormula),
    Or(&'a EnsembleFormula, &'a EnsembleFormula),
    Implies(&'a EnsembleFormula, &'a EnsembleFormula),
    Box(&'a CompoundAction, &'a EnsembleFormula),
    Diamond(&'a CompoundAction, &'a EnsembleFormula),
    DiamondEpi(&'a CompoundAction, &'a Formula),
}

/// Whether the text form of `f` parses back to a single epistemic formula.
fn epi_like(f: &EnsembleFormula) -> bool {
    match f {
        EnsembleFormula::Top | EnsembleFormula::Epi(_) => true,
        EnsembleFormula::And(a, b) => epi_like(a) && epi_like(b),
        _ => false,
    }
}

fn dyn_view(f: &EnsembleFormula) -> DynSugar<'_> {
    match f {
        EnsembleFormula::Top => DynSugar::Top,
        EnsembleFormula::Epi(g) => DynSugar::Leaf(g),
        EnsembleFormula::And(a, b) => DynSugar::And(a, b),
        EnsembleFormula::Box(act, g) => DynSugar::Box(act, g),
        EnsembleFormula::Not(inner) if epi_like(inner) => DynSugar::Lift(inner),
        EnsembleFormula::Not(inner) => match &**inner {
            EnsembleFormula::Box(act, g) => match &**g {
                EnsembleFormula::Not(h) if !epi_like(h) => DynSugar::Diamond(act, h),
                EnsembleFormula::Epi(Formula::Not(h)) => DynSugar::DiamondEpi(act, h),
                _ => DynSugar::Not(inner),
            },
            EnsembleFormula::And(l, r) => match (&**l, &**r) {
                (EnsembleFormula::Not(x), EnsembleFormula::Not(y)) if !epi_like(x) && !epi_like(y) => {
                    DynSugar::Or(x, y)
                }
                (x, EnsembleFormula::Not(y)) if !epi_like(y) => DynSugar::Implies(x, y),
                _ => DynSugar::Not(inner),
            },
            _ => DynSugar::Not(inner),
        },
    }
}

fn dyn_level(f: &EnsembleFormula) -> u8 {
    match dyn_view(f) {
        DynSugar::Implies(..) => LEVEL_IMPLIES,
        DynSugar::Or(..) => LEVEL_OR,
        DynSugar::And(..) => LEVEL_AND,
        DynSugar::Leaf(g) => level(g),
        _ => LEVEL_PREFIX,
    }
}

fn dyn_write_at(f: &EnsembleFormula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if dyn_level(f) < min {
        write!(out, "({f})")
    } else {
        write!(out, "{f}")
    }
}

impl fmt::Display for EnsembleFormula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match dyn_view(self) {
            DynSugar::Leaf(g) => write!(out, "{g}"),
            DynSugar::Top => out.write_str("true"),
            DynSugar::Not(g) => {
                out.write_str("~")?;
                dyn_write_at(g, LEVEL_PREFIX, out)
            }
            DynSugar::Lift(g) => {
                out.write_str("!")?;
                dyn_write_at(g, LEVEL_PREFIX, out)
            }
            DynSugar::And(a, b) => {
                dyn_write_at(a, LEVEL_AND, out)?;
                out.write_str(" & ")?;
                dyn_write_at(b, LEVEL_PREFIX, out)
            }
            DynSugar::Or(a, b) => {
                dyn_write_at(a, LEVEL_OR, out)?;
                out.write_str(" | ")?;
                dyn_write_at(b, LEVEL_AND, out)
            }
            DynSugar::Implies(a, b) => {
                dyn_write_at(a, LEVEL_OR, out)?;
                out.write_str(" -> ")?;
                dyn_write_at(b, LEVEL_IMPLIES, out)
            }
            DynSugar::Box(act, g) => {
                write!(out, "[{act}] ")?;
                dyn_write_at(g, LEVEL_PREFIX, out)
            }
            DynSugar::Diamond(act, g) => {
                write!(out, "<{act}> ")?;
                dyn_write_at(g, LEVEL_PREFIX, out)
            }
            DynSugar::DiamondEpi(act, g) => {
                write!(out, "<{act}> ")?;
                write_at(g, LEVEL_PREFIX, out)
            }
        }
    }
}

impl fmt::Debug for EnsembleFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ag2() -> BTreeSet<AgentId> {
        BTreeSet::from([AgentId::new("a1"), AgentId::new("a2")])
    }

    fn x1() -> Formula {
        Formula::prop("x1")
    }

    #[test]
    fn agents_of_top_is_everyone() {
        assert_eq!(agents_of(&Formula::Top, &ag2()), ag2());
    }

    #[test]
    fn agents_of_knowledge_formulas() {
        let k1x1 = Formula::knows("a1", x1());
        assert_eq!(agents_of(&k1x1, &ag2()), BTreeSet::from([AgentId::new("a1")]));
        let f = Formula::not(Formula::knows("a1", Formula::knows_whether("a2", x1())));
        assert_eq!(agents_of(&f, &ag2()), BTreeSet::from([AgentId::new("a1")]));
        assert_eq!(
            agents_of(&Formula::knows_whether("a2", x1()), &ag2()),
            BTreeSet::from([AgentId::new("a2")])
        );
    }

    #[test]
    fn agents_of_mixed_and_propositional() {
        assert!(agents_of(&x1(), &ag2()).is_empty());
        let mixed = Formula::and(Formula::knows("a1", x1()), Formula::knows("a2", x1()));
        assert!(agents_of(&mixed, &ag2()).is_empty());
        let bool_only = Formula::and(Formula::Top, Formula::not(Formula::Top));
        assert_eq!(agents_of(&bool_only, &ag2()), ag2());
    }

    #[test]
    fn boolean_closure_membership() {
        let k1 = Formula::knows("a1", x1());
        let k2 = Formula::knows("a2", x1());
        let empty = FocusSet::default();
        assert!(empty.in_boolean_closure(&Formula::Top));
        let focus = FocusSet::new([k1.clone(), k2.clone()]);
        assert!(focus.in_boolean_closure(&Formula::and(Formula::not(k1.clone()), k2.clone())));
        assert!(!focus.in_boolean_closure(&Formula::knows("a1", Formula::possible("a2", x1()))));
        assert!(!focus.in_boolean_closure(&x1()));
    }

    #[test]
    fn desugar_examples() {
        let m = Surface::Possible("a2".into(), Box::new(Surface::Prop("x1".into())));
        assert_eq!(
            desugar(&m),
            Formula::not(Formula::knows("a2", Formula::not(x1())))
        );
        assert_eq!(desugar(&Surface::Bot), Formula::not(Formula::Top));
        let kw = Surface::KnowsWhether("a2".into(), Box::new(Surface::Prop("x1".into())));
        let expected = Formula::not(Formula::and(
            Formula::not(Formula::knows("a2", x1())),
            Formula::not(Formula::knows("a2", Formula::not(x1()))),
        ));
        assert_eq!(desugar(&kw), expected);
    }

    #[test]
    fn display_uses_sugar() {
        let f = Formula::implies(
            Formula::knows_whether("a2", x1()),
            Formula::knows("a1", Formula::possible("a2", x1())),
        );
        assert_eq!(f.to_string(), "Kw[a2] x1 -> K[a1] M[a2] x1");
        assert_eq!(Formula::bot().to_string(), "false");
        let g = Formula::and(Formula::not(Formula::knows("a1", Formula::knows_whether("a2", x1()))), Formula::knows("a1", x1()));
        assert_eq!(g.to_string(), "~K[a1] Kw[a2] x1 & K[a1] x1");
    }

    #[test]
    fn overlapping_action_sets_are_rejected() {
        let err = EnsembleSignature::new(
            [Prop::new("x1")],
            ag2(),
            [
                (AgentId::new("a1"), BTreeSet::from([ActionSym::new("go")])),
                (AgentId::new("a2"), BTreeSet::from([ActionSym::new("go")])),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, SignatureError::OverlappingActions { .. }));
    }

    #[test]
    fn ensemble_formula_normalization_merges_epistemic_parts() {
        let f = EnsembleFormula::not(EnsembleFormula::and(
            EnsembleFormula::epi(x1()),
            EnsembleFormula::Top,
        ));
        assert_eq!(
            f.normalized(),
            EnsembleFormula::not(EnsembleFormula::Epi(Formula::and(x1(), Formula::Top)))
        );
        assert_eq!(f.to_string(), "!(x1 & true)");
    }
}
