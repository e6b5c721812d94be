//! Text format for complete problem descriptions (`.eens` files).
//!
//! A file is a sequence of `;`-terminated declarations. `#` starts a line
//! comment. Names are `[A-Za-z][A-Za-z0-9_]*`. Declarations may only refer to
//! names declared above them, and the signature (`agents`, `props`,
//! `actions`) comes first. See `docs/dsl.md` for the full grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::actions::{
    group_announcement, validate_interpretation, ActionInterpretation, ActionModel, ChoiceAction,
    EpistemicAction,
};
use crate::ensemble::Ensemble;
use crate::formula::{
    ActionSym, AgentId, CompoundAction, EnsembleFormula, EnsembleSignature, FocusSet, Formula, Prop,
};
use crate::kripke::{KripkeStructure, PointedKripke};
use crate::process::Process;
use crate::relation::Relation;
use crate::semantic::StateClass;
use crate::symbolic::{RepresentativeTable, SymbolicState};

/// A located error; `production` names the construct being parsed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {message} (in {production})")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub production: &'static str,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

const KEYWORDS: &[&str] = &[
    "agents", "props", "actions", "action", "model", "event", "proc", "ensemble", "state", "world",
    "point", "initial", "semantic", "symbolic", "focus", "repr", "pre", "compound", "formula",
    "true", "false", "nil", "mu", "lossy", "reliable", "announce", "K", "M", "Kw",
];

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "<->", "||", "!", "->", "=>", ";", ",", ":", "{", "}", "(", ")", "[", "]", "~", "&", "|", "+", ".", "*",
    "?", "@", "<", ">", "=",
];

fn lex(text: &str) -> PResult<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line, col });
            col += i - start;
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let s: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&s)
        });
        match sym {
            Some(s) => {
                out.push(Token { tok: Tok::Sym(s), line, col });
                i += s.len();
                col += s.len();
            }
            None => {
                return Err(ParseError {
                    line,
                    col,
                    production: "token",
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// A parsed problem description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpec {
    pub signature: EnsembleSignature,
    pub models: BTreeMap<String, Arc<ActionModel>>,
    pub actions: ActionInterpretation,
    pub processes: BTreeMap<String, Process>,
    pub ensemble_name: String,
    pub ensemble: Ensemble,
    /// The unnamed focus set.
    pub focus: Option<FocusSet>,
    pub focus_sets: BTreeMap<String, FocusSet>,
    pub repr: Option<RepresentativeTable>,
    pub states: BTreeMap<String, PointedKripke>,
    /// Names of the states forming the initial class.
    pub initial_semantic: Option<Vec<String>>,
    pub initial_symbolic: Option<SymbolicState>,
    pub compounds: BTreeMap<String, CompoundAction>,
    pub formulas: Vec<(String, EnsembleFormula)>,
}

impl ProblemSpec {
    pub fn initial_class(&self) -> Option<StateClass> {
        let names = self.initial_semantic.as_ref()?;
        StateClass::new(names.iter().map(|n| self.states[n].clone())).ok()
    }

    pub fn formula(&self, name: &str) -> Option<&EnsembleFormula> {
        self.formulas.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    /// The unnamed focus set when `name` is `None`, otherwise a named one.
    pub fn focus_set(&self, name: Option<&str>) -> Option<&FocusSet> {
        match name {
            None => self.focus.as_ref(),
            Some(n) => self.focus_sets.get(n),
        }
    }

    /// Resolves `model@event`.
    pub fn pointed_action(&self, text: &str) -> Option<EpistemicAction> {
        let (m, e) = text.split_once('@')?;
        EpistemicAction::at(self.models.get(m.trim())?.clone(), e.trim()).ok()
    }

    /// Parses a formula against this spec's signature.
    pub fn parse_formula(&self, text: &str) -> PResult<Formula> {
        let mut p = Parser::for_spec(text, self)?;
        let f = p.formula("formula")?;
        p.expect_eof()?;
        Ok(f)
    }

    /// Parses a dynamic formula against this spec's signature and compound
    /// action names.
    pub fn parse_ensemble_formula(&self, text: &str) -> PResult<EnsembleFormula> {
        let mut p = Parser::for_spec(text, self)?;
        let f = p.dyn_iff()?;
        p.expect_eof()?;
        Ok(f)
    }
}

/// Parses a complete problem description.
pub fn parse(text: &str) -> PResult<ProblemSpec> {
    let mut p = Parser::new(text, true)?;
    p.spec()
}

/// Parses a single epistemic formula with no signature checks.
pub fn parse_formula(text: &str) -> PResult<Formula> {
    let mut p = Parser::new(text, false)?;
    let f = p.formula("formula")?;
    p.expect_eof()?;
    Ok(f)
}

/// Parses a dynamic formula with no signature checks. The result is in the
/// form produced by [`EnsembleFormula::normalized`].
pub fn parse_ensemble_formula(text: &str) -> PResult<EnsembleFormula> {
    let mut p = Parser::new(text, false)?;
    let f = p.dyn_iff()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_compound(text: &str) -> PResult<CompoundAction> {
    let mut p = Parser::new(text, false)?;
    let a = p.comp_choice()?;
    p.expect_eof()?;
    Ok(a)
}

/// Parses a process term; free identifiers become variables.
pub fn parse_process(text: &str) -> PResult<Process> {
    let mut p = Parser::new(text, false)?;
    let a = p.proc_choice()?;
    p.expect_eof()?;
    Ok(a)
}

fn ep_not(f: EnsembleFormula) -> EnsembleFormula {
    match f {
        EnsembleFormula::Epi(g) => EnsembleFormula::Epi(Formula::not(g)),
        other => EnsembleFormula::not(other),
    }
}

fn ep_and(a: EnsembleFormula, b: EnsembleFormula) -> EnsembleFormula {
    match (a, b) {
        (EnsembleFormula::Epi(x), EnsembleFormula::Epi(y)) => EnsembleFormula::Epi(Formula::and(x, y)),
        (x, y) => EnsembleFormula::and(x, y),
    }
}

#[derive(Default)]
struct State {
    agents: BTreeSet<AgentId>,
    props: BTreeSet<Prop>,
    owners: BTreeMap<AgentId, BTreeSet<ActionSym>>,
    sig: Option<EnsembleSignature>,
    models: BTreeMap<String, Arc<ActionModel>>,
    actions: ActionInterpretation,
    processes: BTreeMap<String, Process>,
    ensemble: Option<(String, Ensemble)>,
    focus: Option<FocusSet>,
    focus_sets: BTreeMap<String, FocusSet>,
    repr: Option<RepresentativeTable>,
    states: BTreeMap<String, PointedKripke>,
    initial_semantic: Option<Vec<String>>,
    initial_symbolic: Option<(Vec<Formula>, Token)>,
    compounds: BTreeMap<String, CompoundAction>,
    formulas: Vec<(String, EnsembleFormula)>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    strict: bool,
    bound: Vec<String>,
    st: State,
}

impl Parser {
    fn new(text: &str, strict: bool) -> PResult<Parser> {
        Ok(Parser { toks: lex(text)?, pos: 0, strict, bound: Vec::new(), st: State::default() })
    }

    fn for_spec(text: &str, spec: &ProblemSpec) -> PResult<Parser> {
        let mut p = Parser::new(text, true)?;
        p.st.agents = spec.signature.agents().clone();
        p.st.props = spec.signature.props().clone();
        p.st.sig = Some(spec.signature.clone());
        p.st.compounds = spec.compounds.clone();
        Ok(p)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> Token {
        self.toks[self.pos].clone()
    }

    fn err_at<T>(&self, at: &Token, production: &'static str, message: impl Into<String>) -> PResult<T> {
        Err(ParseError { line: at.line, col: at.col, production, message: message.into() })
    }

    fn err<T>(&self, production: &'static str, message: impl Into<String>) -> PResult<T> {
        self.err_at(&self.here(), production, message)
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str, production: &'static str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(production, format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, s: &str, production: &'static str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.err(production, format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err("input", format!("unexpected {} after the end", self.describe()))
        }
    }

    /// Any identifier, keywords included.
    fn word(&mut self, production: &'static str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(production, format!("expected a name, found {}", self.describe())),
        }
    }

    /// A user-chosen name; keywords are rejected.
    fn name(&mut self, production: &'static str) -> PResult<String> {
        if let Tok::Ident(s) = self.peek() {
            if KEYWORDS.contains(&s.as_str()) {
                return self.err(production, format!("`{s}` is a keyword and cannot be used as a name"));
            }
        }
        self.word(production)
    }

    fn names(&mut self, production: &'static str) -> PResult<Vec<String>> {
        let mut out = vec![self.name(production)?];
        while self.eat(",") {
            out.push(self.name(production)?);
        }
        Ok(out)
    }

    fn agent(&mut self, production: &'static str) -> PResult<AgentId> {
        let at = self.here();
        let a = AgentId::new(self.name(production)?);
        if self.strict && !self.st.agents.contains(&a) {
            return self.err_at(&at, production, format!("unknown agent `{a}`"));
        }
        Ok(a)
    }

    // ---- formulas ----

    /// An epistemic formula; dynamic operators are rejected.
    fn formula(&mut self, production: &'static str) -> PResult<Formula> {
        let at = self.here();
        match self.dyn_iff()? {
            EnsembleFormula::Epi(f) => Ok(f),
            other => self.err_at(&at, production, format!("expected an epistemic formula, found `{other}`")),
        }
    }

    fn dyn_iff(&mut self) -> PResult<EnsembleFormula> {
        let l = self.dyn_implies()?;
        if self.eat("<->") {
            let r = self.dyn_implies()?;
            let there = ep_not(ep_and(l.clone(), ep_not(r.clone())));
            let back = ep_not(ep_and(r, ep_not(l)));
            return Ok(ep_and(there, back));
        }
        Ok(l)
    }

    fn dyn_implies(&mut self) -> PResult<EnsembleFormula> {
        let l = self.dyn_or()?;
        if self.eat("->") {
            let r = self.dyn_implies()?;
            return Ok(ep_not(ep_and(l, ep_not(r))));
        }
        Ok(l)
    }

    fn dyn_or(&mut self) -> PResult<EnsembleFormula> {
        let mut l = self.dyn_and()?;
        while self.eat("|") {
            let r = self.dyn_and()?;
            l = ep_not(ep_and(ep_not(l), ep_not(r)));
        }
        Ok(l)
    }

    fn dyn_and(&mut self) -> PResult<EnsembleFormula> {
        let mut l = self.dyn_prefix()?;
        while self.eat("&") {
            let r = self.dyn_prefix()?;
            l = ep_and(l, r);
        }
        Ok(l)
    }

    fn dyn_prefix(&mut self) -> PResult<EnsembleFormula> {
        let at = self.here();
        if self.eat("~") {
            return Ok(ep_not(self.dyn_prefix()?));
        }
        if self.eat("!") {
            return Ok(EnsembleFormula::not(self.dyn_prefix()?));
        }
        if self.eat("[") {
            let act = self.comp_choice()?;
            self.expect("]", "box")?;
            let body = self.dyn_prefix()?;
            return Ok(EnsembleFormula::boxed(act, body));
        }
        if self.eat("<") {
            let act = self.comp_choice()?;
            self.expect(">", "diamond")?;
            let body = self.dyn_prefix()?;
            return Ok(ep_not(EnsembleFormula::boxed(act, ep_not(body))));
        }
        if self.eat("(") {
            let f = self.dyn_iff()?;
            self.expect(")", "formula")?;
            return Ok(f);
        }
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.err("formula", format!("expected a formula, found {}", self.describe())),
        };
        let modal = matches!(word.as_str(), "K" | "M" | "Kw") && *self.peek_at(1) == Tok::Sym("[");
        self.pos += 1;
        if modal {
            self.expect("[", "modality")?;
            let a = self.agent("modality")?;
            self.expect("]", "modality")?;
            let body_at = self.here();
            let body = match self.dyn_prefix()? {
                EnsembleFormula::Epi(f) => f,
                other => {
                    return self.err_at(&body_at, "modality", format!("`{other}` is not an epistemic formula"))
                }
            };
            return Ok(EnsembleFormula::Epi(match word.as_str() {
                "K" => Formula::knows(a, body),
                "M" => Formula::possible(a, body),
                _ => Formula::knows_whether(a, body),
            }));
        }
        match word.as_str() {
            "true" => Ok(EnsembleFormula::Epi(Formula::Top)),
            "false" => Ok(EnsembleFormula::Epi(Formula::bot())),
            w if KEYWORDS.contains(&w) => {
                self.err_at(&at, "formula", format!("keyword `{w}` cannot be used as a proposition"))
            }
            w => {
                let p = Prop::new(w);
                if self.strict && !self.st.props.contains(&p) {
                    return self.err_at(&at, "formula", format!("unknown proposition `{w}`"));
                }
                Ok(EnsembleFormula::Epi(Formula::Prop(p)))
            }
        }
    }

    // ---- compound actions ----

    fn comp_choice(&mut self) -> PResult<CompoundAction> {
        let mut l = self.comp_seq(true)?;
        while self.eat("+") {
            let r = self.comp_seq(true)?;
            l = CompoundAction::choice(l, r);
        }
        Ok(l)
    }

    /// A choice whose top level may not use `;`, for declaration right-hand
    /// sides where `;` ends the declaration.
    fn comp_choice_no_seq(&mut self) -> PResult<CompoundAction> {
        let mut l = self.comp_seq(false)?;
        while self.eat("+") {
            let r = self.comp_seq(false)?;
            l = CompoundAction::choice(l, r);
        }
        Ok(l)
    }

    fn comp_seq(&mut self, allow_seq: bool) -> PResult<CompoundAction> {
        let mut l = self.comp_star()?;
        while allow_seq && self.eat(";") {
            let r = self.comp_star()?;
            l = CompoundAction::seq(l, r);
        }
        Ok(l)
    }

    fn comp_star(&mut self) -> PResult<CompoundAction> {
        let mut a = self.comp_atom()?;
        while self.eat("*") {
            a = CompoundAction::star(a);
        }
        Ok(a)
    }

    fn comp_atom(&mut self) -> PResult<CompoundAction> {
        let at = self.here();
        if self.eat("(") {
            let save = self.pos;
            if let Ok(a) = self.comp_choice() {
                if self.eat(")") && !self.is_sym("?") {
                    return Ok(a);
                }
            }
            self.pos = save;
            let f = self.formula("test")?;
            self.expect(")", "test")?;
            self.expect("?", "test")?;
            return Ok(CompoundAction::test(f));
        }
        let name = self.name("compound action")?;
        if let Some(c) = self.st.compounds.get(&name) {
            return Ok(c.clone());
        }
        let sym = ActionSym::new(name.as_str());
        if self.strict {
            let known = self.st.sig.as_ref().is_some_and(|s| s.owner(&sym).is_some());
            if !known {
                return self.err_at(&at, "compound action", format!("unknown action symbol `{name}`"));
            }
        }
        Ok(CompoundAction::Atom(sym))
    }

    // ---- processes ----

    fn proc_choice(&mut self) -> PResult<Process> {
        let mut l = self.proc_unary()?;
        while self.eat("+") {
            let r = self.proc_unary()?;
            l = Process::choice(l, r);
        }
        Ok(l)
    }

    fn proc_unary(&mut self) -> PResult<Process> {
        let at = self.here();
        if self.eat("(") {
            let p = self.proc_choice()?;
            self.expect(")", "process")?;
            return Ok(p);
        }
        if self.eat("[") {
            let g = self.formula("guard")?;
            self.expect("]", "guard")?;
            let p = self.proc_unary()?;
            return Ok(Process::guard(g, p));
        }
        if self.eat_kw("nil") {
            return Ok(Process::Nil);
        }
        if self.eat_kw("mu") {
            let x = self.name("recursion")?;
            self.expect(".", "recursion")?;
            self.bound.push(x.clone());
            let body = self.proc_choice();
            self.bound.pop();
            return Ok(Process::rec(x, body?));
        }
        let name = self.name("process")?;
        if self.eat(".") {
            let sym = ActionSym::new(name.as_str());
            if self.strict {
                let known = self.st.sig.as_ref().is_some_and(|s| s.owner(&sym).is_some());
                if !known {
                    return self.err_at(&at, "action prefix", format!("unknown action symbol `{name}`"));
                }
            }
            let p = self.proc_unary()?;
            return Ok(Process::prefix(sym, p));
        }
        if self.bound.contains(&name) {
            return Ok(Process::var(name));
        }
        if let Some(p) = self.st.processes.get(&name) {
            return Ok(p.clone());
        }
        if self.strict {
            return self.err_at(&at, "process", format!("`{name}` is neither a bound variable nor a declared process"));
        }
        Ok(Process::var(name))
    }

    // ---- declarations ----

    fn sig(&mut self, at: &Token, production: &'static str) -> PResult<EnsembleSignature> {
        if let Some(s) = &self.st.sig {
            return Ok(s.clone());
        }
        if self.st.agents.is_empty() {
            return self.err_at(at, production, "declare `agents` before anything else");
        }
        let sig = EnsembleSignature::new(
            self.st.props.iter().cloned(),
            self.st.agents.iter().cloned(),
            self.st.owners.clone(),
        )
        .or_else(|e| self.err_at(at, production, e.to_string()))?;
        self.st.sig = Some(sig.clone());
        Ok(sig)
    }

    fn signature_open(&self, at: &Token, production: &'static str) -> PResult<()> {
        if self.st.sig.is_some() {
            return self.err_at(at, production, "signature declarations must precede all other declarations");
        }
        Ok(())
    }

    fn spec(&mut self) -> PResult<ProblemSpec> {
        if *self.peek() == Tok::Eof {
            return self.err("specification", "empty input; expected a declaration");
        }
        while *self.peek() != Tok::Eof {
            self.declaration()?;
        }
        let end = self.here();
        let sig = self.sig(&end, "specification")?;
        let Some((ensemble_name, ensemble)) = self.st.ensemble.take() else {
            return self.err_at(&end, "specification", "no `ensemble` declared");
        };
        if self.st.initial_semantic.is_none() && self.st.initial_symbolic.is_none() {
            return self.err_at(&end, "specification", "no `initial` state declared");
        }
        let diags = validate_interpretation(&self.st.actions, &sig);
        if let Some(d) = diags.first() {
            return self.err_at(&end, "specification", d.to_string());
        }
        let initial_symbolic = match self.st.initial_symbolic.take() {
            None => None,
            Some((members, at)) => {
                let Some(focus) = &self.st.focus else {
                    return self.err_at(&at, "initial", "a symbolic initial state needs an unnamed `focus` set");
                };
                Some(SymbolicState::new(members, focus).or_else(|e| self.err_at(&at, "initial", e.to_string()))?)
            }
        };
        let st = std::mem::take(&mut self.st);
        Ok(ProblemSpec {
            signature: sig,
            models: st.models,
            actions: st.actions,
            processes: st.processes,
            ensemble_name,
            ensemble,
            focus: st.focus,
            focus_sets: st.focus_sets,
            repr: st.repr,
            states: st.states,
            initial_semantic: st.initial_semantic,
            initial_symbolic,
            compounds: st.compounds,
            formulas: st.formulas,
        })
    }

    fn declaration(&mut self) -> PResult<()> {
        let at = self.here();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.err("declaration", format!("expected a declaration, found {}", self.describe())),
        };
        self.pos += 1;
        match kw.as_str() {
            "agents" => {
                self.signature_open(&at, "agents")?;
                for n in self.names("agents")? {
                    self.st.agents.insert(AgentId::new(n));
                }
            }
            "props" => {
                self.signature_open(&at, "props")?;
                for n in self.names("props")? {
                    self.st.props.insert(Prop::new(n));
                }
            }
            "actions" => {
                self.signature_open(&at, "actions")?;
                let a = self.agent("actions")?;
                self.expect(":", "actions")?;
                let sym_at = self.here();
                for n in self.names("actions")? {
                    let sym = ActionSym::new(n.as_str());
                    if let Some((other, _)) = self.st.owners.iter().find(|(o, s)| **o != a && s.contains(&sym)) {
                        return self.err_at(
                            &sym_at,
                            "actions",
                            format!(
                                "action symbol `{n}` already belongs to agent `{other}`; action sets of distinct agents must be disjoint"
                            ),
                        );
                    }
                    self.st.owners.entry(a.clone()).or_default().insert(sym);
                }
            }
            "model" => self.model_decl(&at)?,
            "action" => self.action_decl(&at)?,
            "proc" => {
                self.sig(&at, "proc")?;
                let name = self.name("proc")?;
                self.expect("=", "proc")?;
                let p = self.proc_choice()?;
                if let Err(e) = p.check_well_formed() {
                    return self.err_at(&at, "proc", format!("process `{name}`: {e}"));
                }
                if self.st.processes.insert(name.clone(), p).is_some() {
                    return self.err_at(&at, "proc", format!("process `{name}` declared twice"));
                }
            }
            "ensemble" => {
                let sig = self.sig(&at, "ensemble")?;
                let name = self.name("ensemble")?;
                self.expect("=", "ensemble")?;
                let mut family = BTreeMap::new();
                loop {
                    let a_at = self.here();
                    let a = self.agent("ensemble")?;
                    self.expect(":", "ensemble")?;
                    let p = self.proc_choice()?;
                    if family.insert(a.clone(), p).is_some() {
                        return self.err_at(&a_at, "ensemble", format!("agent `{a}` given twice"));
                    }
                    if !self.eat("||") {
                        break;
                    }
                }
                if self.st.ensemble.is_some() {
                    return self.err_at(&at, "ensemble", "only one ensemble may be declared");
                }
                let e = Ensemble::new(family, &sig).or_else(|e| self.err_at(&at, "ensemble", e.to_string()))?;
                self.st.ensemble = Some((name, e));
            }
            "state" => self.state_decl(&at)?,
            "initial" => {
                self.sig(&at, "initial")?;
                if self.eat_kw("semantic") {
                    self.expect("{", "initial")?;
                    let mut names = Vec::new();
                    loop {
                        let n_at = self.here();
                        let n = self.name("initial")?;
                        if !self.st.states.contains_key(&n) {
                            return self.err_at(&n_at, "initial", format!("unknown state `{n}`"));
                        }
                        names.push(n);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect("}", "initial")?;
                    if self.st.initial_semantic.replace(names).is_some() {
                        return self.err_at(&at, "initial", "semantic initial class given twice");
                    }
                } else if self.eat_kw("symbolic") {
                    let members = self.formula_block("initial")?;
                    if self.st.initial_symbolic.replace((members, at.clone())).is_some() {
                        return self.err_at(&at, "initial", "symbolic initial state given twice");
                    }
                } else {
                    return self.err("initial", format!("expected `semantic` or `symbolic`, found {}", self.describe()));
                }
            }
            "focus" => {
                self.sig(&at, "focus")?;
                let name = if self.is_sym("{") { None } else { Some(self.name("focus")?) };
                let items = FocusSet::new(self.formula_block("focus")?);
                let dup = match name {
                    None => self.st.focus.replace(items).is_some(),
                    Some(n) => self.st.focus_sets.insert(n, items).is_some(),
                };
                if dup {
                    return self.err_at(&at, "focus", "focus set declared twice");
                }
            }
            "repr" => self.repr_decl()?,
            "compound" => {
                self.sig(&at, "compound")?;
                let name = self.name("compound")?;
                if self.st.sig.as_ref().is_some_and(|s| s.owner(&ActionSym::new(name.as_str())).is_some()) {
                    return self.err_at(&at, "compound", format!("`{name}` is already an action symbol"));
                }
                self.expect("=", "compound")?;
                let a = self.comp_choice_no_seq()?;
                if self.st.compounds.insert(name.clone(), a).is_some() {
                    return self.err_at(&at, "compound", format!("compound action `{name}` declared twice"));
                }
            }
            "formula" => {
                self.sig(&at, "formula")?;
                let name = self.name("formula")?;
                self.expect("=", "formula")?;
                let f = self.dyn_iff()?;
                if self.st.formulas.iter().any(|(n, _)| *n == name) {
                    return self.err_at(&at, "formula", format!("formula `{name}` declared twice"));
                }
                self.st.formulas.push((name, f));
            }
            other => return self.err_at(&at, "declaration", format!("unknown declaration `{other}`")),
        }
        if matches!(kw.as_str(), "model" | "state" | "repr") {
            self.eat(";");
        } else {
            self.expect(";", "declaration")?;
        }
        Ok(())
    }

    fn formula_block(&mut self, production: &'static str) -> PResult<Vec<Formula>> {
        self.expect("{", production)?;
        let mut out = Vec::new();
        while !self.eat("}") {
            out.push(self.formula(production)?);
            self.expect(";", production)?;
        }
        Ok(out)
    }

    /// `{x, y} {z}` blocks of names, resolved to indices.
    fn blocks(&mut self, index: &BTreeMap<String, usize>, production: &'static str) -> PResult<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        while self.eat("{") {
            let mut block = Vec::new();
            if !self.is_sym("}") {
                loop {
                    let at = self.here();
                    let n = self.name(production)?;
                    match index.get(&n) {
                        Some(&i) => block.push(i),
                        None => return self.err_at(&at, production, format!("unknown name `{n}` in block")),
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("}", production)?;
            out.push(block);
        }
        Ok(out)
    }

    fn model_decl(&mut self, at: &Token) -> PResult<()> {
        self.sig(at, "model")?;
        let name = self.name("model")?;
        self.expect("{", "model")?;
        let mut events: Vec<(String, Formula)> = Vec::new();
        let mut blocks: BTreeMap<AgentId, Vec<Vec<usize>>> = BTreeMap::new();
        while !self.eat("}") {
            let line_at = self.here();
            if self.eat_kw("event") {
                let e = self.name("event")?;
                self.expect(":", "event")?;
                let pre = self.formula("event")?;
                if events.iter().any(|(n, _)| *n == e) {
                    return self.err_at(&line_at, "event", format!("event `{e}` declared twice"));
                }
                events.push((e, pre));
            } else {
                let a = self.agent("model")?;
                self.expect(":", "model")?;
                let index: BTreeMap<String, usize> =
                    events.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
                let b = self.blocks(&index, "model")?;
                blocks.entry(a).or_default().extend(b);
            }
            self.expect(";", "model")?;
        }
        let n = events.len();
        let access = self
            .st
            .agents
            .iter()
            .map(|a| {
                let rel = match blocks.remove(a) {
                    Some(b) => Relation::from_blocks(n, b),
                    None => Relation::identity(n),
                };
                (a.clone(), rel)
            })
            .collect();
        let model = ActionModel::new(name.clone(), events, access).or_else(|e| self.err_at(at, "model", e.to_string()))?;
        self.add_model(at, model)?;
        Ok(())
    }

    fn add_model(&mut self, at: &Token, model: ActionModel) -> PResult<Arc<ActionModel>> {
        let name = model.name().to_string();
        let model = Arc::new(model);
        if self.st.models.insert(name.clone(), model.clone()).is_some() {
            return self.err_at(at, "model", format!("action model `{name}` declared twice"));
        }
        Ok(model)
    }

    fn pointed(&mut self, production: &'static str) -> PResult<EpistemicAction> {
        let at = self.here();
        let m = self.name(production)?;
        self.expect("@", production)?;
        let e = self.name(production)?;
        let Some(model) = self.st.models.get(&m) else {
            return self.err_at(&at, production, format!("unknown action model `{m}`"));
        };
        EpistemicAction::at(model.clone(), &e).or_else(|err| self.err_at(&at, production, err.to_string()))
    }

    fn action_decl(&mut self, at: &Token) -> PResult<()> {
        let sig = self.sig(at, "action")?;
        let sym_at = self.here();
        let name = self.name("action")?;
        let sym = ActionSym::new(name.as_str());
        if sig.owner(&sym).is_none() {
            return self.err_at(&sym_at, "action", format!("`{name}` is not a declared action symbol"));
        }
        if self.st.actions.get(&sym).is_some() {
            return self.err_at(&sym_at, "action", format!("action `{name}` interpreted twice"));
        }
        self.expect("=", "action")?;
        let choice = if self.is_kw("lossy") || self.is_kw("reliable") {
            let lossy = self.eat_kw("lossy");
            if !lossy {
                self.expect_kw("reliable", "action")?;
            }
            let sender = self.agent("action")?;
            self.expect("->", "action")?;
            let receiver = self.agent("action")?;
            self.expect(":", "action")?;
            let phi = self.formula("action")?;
            let owner = sig.owner(&sym).expect("checked above");
            if *owner != sender {
                return self.err_at(at, "action", format!("`{name}` belongs to `{owner}`, not to the sender `{sender}`"));
            }
            let built = if lossy {
                crate::actions::lossy_send(name.as_str(), sig.agents(), &sender, &receiver, phi)
            } else {
                crate::actions::reliable_send(name.as_str(), sig.agents(), &sender, &receiver, phi)
            };
            let choice = built.or_else(|e| self.err_at(at, "action", e.to_string()))?;
            let model = choice.alternatives()[0].shared_model().clone();
            if self.st.models.insert(name.clone(), model).is_some() {
                return self.err_at(at, "action", format!("action model `{name}` declared twice"));
            }
            choice
        } else if self.eat_kw("announce") {
            self.expect("{", "action")?;
            let mut group = BTreeSet::new();
            if !self.is_sym("}") {
                loop {
                    group.insert(self.agent("action")?);
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("}", "action")?;
            self.expect(":", "action")?;
            let phi = self.formula("action")?;
            self.expect("@", "action")?;
            let mut events = Vec::new();
            if self.eat("{") {
                loop {
                    events.push(self.name("action")?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}", "action")?;
            } else {
                events.push(self.name("action")?);
            }
            let model = group_announcement(name.as_str(), sig.agents(), &group, phi)
                .or_else(|e| self.err_at(at, "action", e.to_string()))?;
            let model = self.add_model(at, model)?;
            let mut alts = Vec::new();
            for e in events {
                alts.push(EpistemicAction::at(model.clone(), &e).or_else(|err| self.err_at(at, "action", err.to_string()))?);
            }
            ChoiceAction::new(alts).or_else(|e| self.err_at(at, "action", e.to_string()))?
        } else {
            let mut alts = vec![self.pointed("action")?];
            while self.eat("|") {
                alts.push(self.pointed("action")?);
            }
            ChoiceAction::new(alts).or_else(|e| self.err_at(at, "action", e.to_string()))?
        };
        self.st.actions.insert(sym, choice);
        Ok(())
    }

    fn state_decl(&mut self, at: &Token) -> PResult<()> {
        self.sig(at, "state")?;
        let name = self.name("state")?;
        self.expect("{", "state")?;
        let mut worlds: Vec<(String, BTreeSet<Prop>)> = Vec::new();
        let mut blocks: BTreeMap<AgentId, Vec<Vec<usize>>> = BTreeMap::new();
        let mut point: Option<(String, Token)> = None;
        while !self.eat("}") {
            let line_at = self.here();
            if self.eat_kw("world") {
                let w = self.name("world")?;
                let mut label = BTreeSet::new();
                if self.eat(":") {
                    loop {
                        let p_at = self.here();
                        let p = Prop::new(self.name("world")?);
                        if !self.st.props.contains(&p) {
                            return self.err_at(&p_at, "world", format!("unknown proposition `{p}`"));
                        }
                        label.insert(p);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                if worlds.iter().any(|(n, _)| *n == w) {
                    return self.err_at(&line_at, "world", format!("world `{w}` declared twice"));
                }
                worlds.push((w, label));
            } else if self.eat_kw("point") {
                let w = self.name("point")?;
                if point.replace((w, line_at.clone())).is_some() {
                    return self.err_at(&line_at, "point", "point given twice");
                }
            } else {
                let a = self.agent("state")?;
                self.expect(":", "state")?;
                let index: BTreeMap<String, usize> =
                    worlds.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
                let b = self.blocks(&index, "state")?;
                blocks.entry(a).or_default().extend(b);
            }
            self.expect(";", "state")?;
        }
        let n = worlds.len();
        let access = self
            .st
            .agents
            .iter()
            .map(|a| {
                let rel = match blocks.remove(a) {
                    Some(b) => Relation::from_blocks(n, b),
                    None => Relation::identity(n),
                };
                (a.clone(), rel)
            })
            .collect();
        let structure = KripkeStructure::new(worlds, access).or_else(|e| self.err_at(at, "state", e.to_string()))?;
        let Some((point, point_at)) = point else {
            return self.err_at(at, "state", format!("state `{name}` has no `point`"));
        };
        let pk = PointedKripke::at(structure, &point).or_else(|e| self.err_at(&point_at, "point", e.to_string()))?;
        if self.st.states.insert(name.clone(), pk).is_some() {
            return self.err_at(at, "state", format!("state `{name}` declared twice"));
        }
        Ok(())
    }

    fn repr_decl(&mut self) -> PResult<()> {
        let action = self.pointed("repr")?;
        self.expect("{", "repr")?;
        let mut entries = Vec::new();
        while !self.is_sym("}") {
            let at = self.here();
            if self.eat_kw("pre") {
                self.expect("=>", "repr")?;
                entries.push((at, None, self.formula("repr")?));
            } else {
                let f = self.formula("repr")?;
                self.expect("=>", "repr")?;
                entries.push((at, Some(f), self.formula("repr")?));
            }
            self.expect(";", "repr")?;
        }
        self.expect("}", "repr")?;
        let mut table = self.st.repr.take().unwrap_or_default();
        let mut seen = BTreeSet::new();
        for (at, key, repr) in entries {
            if !seen.insert(key.clone()) {
                return self.err_at(&at, "repr", "cell given twice");
            }
            match key {
                None => {
                    if table.pre(&action).is_some() {
                        return self.err_at(&at, "repr", format!("precondition of {action} given twice"));
                    }
                    table.set_pre(action.clone(), repr);
                }
                Some(f) => {
                    if table.wlp(&action, &f).is_some() {
                        return self.err_at(&at, "repr", format!("cell {action} / {f} given twice"));
                    }
                    table.set_wlp(action.clone(), f, repr);
                }
            }
        }
        self.st.repr = Some(table);
        Ok(())
    }
}

fn write_blocks(out: &mut String, rel: &Relation, names: impl Fn(usize) -> String) {
    for class in rel.classes() {
        let items: Vec<String> = class.iter().map(|&i| names(i)).collect();
        let _ = write!(out, " {{{}}}", items.join(", "));
    }
}

fn comma<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Prints a spec in the text format; parsing the output yields an equal spec.
impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = &self.signature;
        let mut out = String::new();
        let _ = writeln!(out, "agents {};", comma(sig.agents()));
        if !sig.props().is_empty() {
            let _ = writeln!(out, "props {};", comma(sig.props()));
        }
        for a in sig.agents() {
            let syms = sig.actions_of(a).cloned().unwrap_or_default();
            if !syms.is_empty() {
                let _ = writeln!(out, "actions {a} : {};", comma(&syms));
            }
        }
        for (name, m) in &self.models {
            let _ = writeln!(out, "\nmodel {name} {{");
            for e in 0..m.event_count() {
                let _ = writeln!(out, "  event {} : {};", m.event_name(e), m.pre(e));
            }
            for (a, rel) in m.relations() {
                let _ = write!(out, "  {a} :");
                write_blocks(&mut out, rel, |i| m.event_name(i).to_string());
                out.push_str(";\n");
            }
            out.push_str("}\n");
        }
        out.push('\n');
        for (sym, choice) in self.actions.iter() {
            let alts: Vec<String> = choice.alternatives().iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "action {sym} = {};", alts.join(" | "));
        }
        for (name, s) in &self.states {
            let k = &s.structure;
            let _ = writeln!(out, "\nstate {name} {{");
            for w in 0..k.world_count() {
                if k.label(w).is_empty() {
                    let _ = writeln!(out, "  world {};", k.name(w));
                } else {
                    let _ = writeln!(out, "  world {} : {};", k.name(w), comma(k.label(w)));
                }
            }
            for (a, rel) in k.relations() {
                let _ = write!(out, "  {a} :");
                write_blocks(&mut out, rel, |i| k.name(i).to_string());
                out.push_str(";\n");
            }
            let _ = writeln!(out, "  point {};", k.name(s.point));
            out.push_str("}\n");
        }
        out.push('\n');
        let write_focus = |out: &mut String, name: Option<&str>, fs: &FocusSet| {
            let _ = writeln!(out, "focus {}{{", name.map(|n| format!("{n} ")).unwrap_or_default());
            for g in fs.iter() {
                let _ = writeln!(out, "  {g};");
            }
            out.push_str("};\n");
        };
        if let Some(fs) = &self.focus {
            write_focus(&mut out, None, fs);
        }
        for (n, fs) in &self.focus_sets {
            write_focus(&mut out, Some(n), fs);
        }
        if let Some(names) = &self.initial_semantic {
            let _ = writeln!(out, "initial semantic {{{}}};", names.join(", "));
        }
        if let Some(s) = &self.initial_symbolic {
            out.push_str("initial symbolic {\n");
            for g in s.members() {
                let _ = writeln!(out, "  {g};");
            }
            out.push_str("};\n");
        }
        if let Some(t) = &self.repr {
            for action in t.actions() {
                let _ = writeln!(out, "\nrepr {action} {{");
                if let Some(p) = t.pre(&action) {
                    let _ = writeln!(out, "  pre => {p};");
                }
                for (a, g, r) in t.wlp_entries() {
                    if *a == action {
                        let _ = writeln!(out, "  {g} => {r};");
                    }
                }
                out.push_str("}\n");
            }
        }
        out.push('\n');
        for (name, p) in &self.processes {
            let _ = writeln!(out, "proc {name} = {p};");
        }
        let _ = writeln!(out, "ensemble {} = {};", self.ensemble_name, self.ensemble);
        for (name, c) in &self.compounds {
            match c {
                CompoundAction::Seq(..) => {
                    let _ = writeln!(out, "compound {name} = ({c});");
                }
                _ => {
                    let _ = writeln!(out, "compound {name} = {c};");
                }
            }
        }
        for (name, g) in &self.formulas {
            let _ = writeln!(out, "formula {name} = {g};");
        }
        f.write_str(&out)
    }
}
