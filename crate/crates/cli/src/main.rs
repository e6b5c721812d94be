//! `epens`: explore, model-check and cross-check epistemic ensembles.
//!
//! Exit status: 0 success or property true, 1 property false, 2 unknown
//! within the exploration bound, 3 input error, 4 prover inconclusive.

use std::fs;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use epens::actions::EpistemicAction;
use epens::dsl::{self, ProblemSpec};
use epens::engine::{evaluate, explore, Config, ConfigGraph, Environment, SyntacticEnv, Truth};
use epens::equivalence::{check_bcl_agreement, check_simulation, differential_check, f_equivalent};
use epens::formula::{AgentId, EnsembleFormula, FocusSet, Formula};
use epens::kripke::{KripkeJson, PointedKripke};
use epens::prover::{Prover, ProverConfig, ProverError, Verdict};
use epens::semantic::{SemanticEnv, StateClass};
use epens::symbolic::{
    search_representative, verify_table, wlp, RepresentativeTable, SymbolicEnv, SymbolicState,
};

#[derive(Parser)]
#[command(name = "epens", version, about = "Epistemic ensembles: exploration, model checking, wlp and S5 proving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    Semantic,
    Symbolic,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Explore the configuration graph from the initial state.
    Explore {
        spec: PathBuf,
        /// Guards are not evaluated and actions do not change any state.
        #[arg(long, conflicts_with_all = ["symbolic"])]
        syntactic: bool,
        /// Run over the symbolic initial state instead of the semantic class.
        #[arg(long)]
        symbolic: bool,
        /// Accepted for symmetry; semantic exploration is the default.
        #[arg(long, conflicts_with_all = ["syntactic", "symbolic"])]
        semantic: bool,
        #[arg(long, default_value_t = 10_000)]
        max_nodes: usize,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
        /// Named focus set for symbolic runs.
        #[arg(long)]
        focus: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Model-check a named or inline dynamic formula at the initial state.
    Check {
        spec: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long, value_enum, default_value_t = Engine::Semantic)]
        engine: Engine,
        #[arg(long, default_value_t = 10_000)]
        max_nodes: usize,
        #[arg(long)]
        focus: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print the weakest liberal precondition of a formula.
    Wlp {
        spec: PathBuf,
        /// Pointed action as `model@event`.
        #[arg(long)]
        action: String,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        json: bool,
    },
    /// Check every representative against the prover.
    VerifyTable {
        spec: PathBuf,
        #[arg(long)]
        focus: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Search a representative of a wlp in the Boolean closure of the focus set.
    SearchRepr {
        spec: PathBuf,
        #[arg(long)]
        action: String,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        focus: Option<String>,
        #[arg(long, default_value_t = 4)]
        max_disjuncts: usize,
        #[arg(long)]
        json: bool,
    },
    /// Cross-check the semantic and the symbolic engine.
    Equiv {
        spec: PathBuf,
        /// JSON array of Kripke states replacing the semantic initial class.
        #[arg(long)]
        semantic: Option<PathBuf>,
        /// JSON array of focus formulas replacing the symbolic initial state.
        #[arg(long)]
        symbolic: Option<PathBuf>,
        #[arg(long)]
        focus: Option<String>,
        /// Simulation depth; unbounded when omitted.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        max_nodes: usize,
    },
    /// Decide satisfiability or validity of an epistemic formula.
    Prove {
        #[arg(long)]
        formula: String,
        /// Take agents and propositions from a spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated agents in addition to those of the formula.
        #[arg(long, value_delimiter = ',')]
        agents: Vec<String>,
        #[arg(long)]
        valid: bool,
        #[arg(long)]
        max_atoms: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Render a named state, optionally after a sequence of updates.
    ExportDot {
        spec: PathBuf,
        #[arg(long)]
        state: String,
        /// Pointed action `model@event`; repeatable, applied in order.
        #[arg(long)]
        update: Vec<String>,
        #[arg(long)]
        minimize: bool,
        #[arg(long)]
        json: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

fn prover_failure(e: ProverError) -> Failure {
    match e {
        ProverError::Inconclusive(_) => Failure { code: 4, message: e.to_string() },
        _ => Failure { code: 3, message: e.to_string() },
    }
}

type Run = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let result = run(cli.command, &mut out);
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<ProblemSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    dsl::parse(&text).map_err(|e| input(format!("{}:{e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str, out: &mut String) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            out.push_str(text);
            Ok(())
        }
    }
}

fn print_json(out: &mut String, v: &Value) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn focus<'a>(spec: &'a ProblemSpec, name: Option<&str>) -> Result<&'a FocusSet, Failure> {
    spec.focus_set(name).ok_or_else(|| match name {
        Some(n) => input(format!("no focus set named `{n}`")),
        None => input("the spec declares no unnamed focus set"),
    })
}

fn pointed(spec: &ProblemSpec, text: &str) -> Result<EpistemicAction, Failure> {
    spec.pointed_action(text)
        .ok_or_else(|| input(format!("`{text}` does not name a pointed action `model@event`")))
}

fn prover_for(spec: &ProblemSpec) -> Prover {
    Prover::with_agents(spec.signature.agents().clone())
}

/// A verified copy of the spec's table, or the diagnostics as an input error.
fn verified_table(spec: &ProblemSpec, focus: &FocusSet) -> Result<RepresentativeTable, Failure> {
    let mut table = spec.repr.clone().ok_or_else(|| input("the spec has no `repr` table"))?;
    let diags = verify_table(&mut table, &spec.actions, focus, &prover_for(spec)).map_err(prover_failure)?;
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(input(format!("representative table does not verify:\n  {}", lines.join("\n  "))));
    }
    Ok(table)
}

fn semantic_root(spec: &ProblemSpec) -> Result<Config<StateClass>, Failure> {
    let state = spec.initial_class().ok_or_else(|| input("the spec has no semantic initial class"))?;
    Ok(Config { ensemble: spec.ensemble.clone(), state })
}

fn symbolic_root(spec: &ProblemSpec) -> Result<Config<SymbolicState>, Failure> {
    let state = spec
        .initial_symbolic
        .clone()
        .ok_or_else(|| input("the spec has no symbolic initial state"))?;
    Ok(Config { ensemble: spec.ensemble.clone(), state })
}

fn class_json(c: &StateClass) -> Value {
    Value::Array(c.members().map(|k| serde_json::to_value(k.to_json()).expect("serializable")).collect())
}

fn sym_json(s: &SymbolicState) -> Value {
    Value::Array(s.members().iter().map(|f| Value::String(f.to_string())).collect())
}

fn render<S: Clone + Ord>(
    g: &ConfigGraph<S>,
    format: Format,
    describe: impl Fn(&Config<S>) -> String,
    state: impl Fn(&S) -> Value,
) -> String {
    match format {
        Format::Dot => g.to_dot(describe),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&g.to_json(state)).expect("serializable");
            s.push('\n');
            s
        }
    }
}

fn ensemble_formula(spec: &ProblemSpec, text: &str) -> Result<(String, EnsembleFormula), Failure> {
    if let Some(f) = spec.formula(text) {
        return Ok((text.to_string(), f.clone()));
    }
    let f = spec
        .parse_ensemble_formula(text)
        .map_err(|e| input(format!("`{text}` is not a declared formula and does not parse: {e}")))?;
    Ok((f.to_string(), f))
}

fn truth_json(t: Option<Truth>) -> Value {
    match t {
        Some(t) => Value::String(t.to_string()),
        None => Value::Null,
    }
}

fn check_with<E: Environment>(
    env: &E,
    root: Config<E::State>,
    f: &EnsembleFormula,
    max_nodes: usize,
) -> Result<(Truth, usize), Failure>
where
    E::Error: std::fmt::Display,
{
    let g = explore(env, root, max_nodes).map_err(|e| input(e.to_string()))?;
    let t = evaluate(env, &g, f).map_err(|e| input(e.to_string()))?[0];
    Ok((t, g.nodes.len()))
}

/// Runs one command, appending its standard output to `out`.
fn run(command: Command, out: &mut String) -> Run {
    match command {
        Command::Explore { spec, syntactic, symbolic, semantic: _, max_nodes, format, focus: focus_name, out: out_path } => {
            let spec = load(&spec)?;
            let text = if syntactic {
                let g = explore(&SyntacticEnv, Config { ensemble: spec.ensemble.clone(), state: () }, max_nodes)
                    .map_err(|e| input(e.to_string()))?;
                render(&g, format, |c| c.ensemble.to_string(), |_| Value::Null)
            } else if symbolic {
                let fs = focus(&spec, focus_name.as_deref())?;
                let table = verified_table(&spec, fs)?;
                let env = SymbolicEnv::new(fs, &table, &spec.actions).map_err(|e| input(e.to_string()))?;
                let root = symbolic_root(&spec)?;
                let root = env.configuration(root.ensemble, root.state).map_err(|e| input(e.to_string()))?;
                let g = explore(&env, root, max_nodes).map_err(|e| input(e.to_string()))?;
                render(&g, format, |c| format!("{}\n{}", c.ensemble, c.state), sym_json)
            } else {
                let env = SemanticEnv::new(&spec.actions);
                let g = explore(&env, semantic_root(&spec)?, max_nodes).map_err(|e| input(e.to_string()))?;
                render(&g, format, |c| format!("{}\n{} states", c.ensemble, c.state.len()), class_json)
            };
            emit(out_path.as_deref(), &text, out)?;
            Ok(0)
        }
        Command::Check { spec, formula, engine, max_nodes, focus: focus_name, json } => {
            let spec = load(&spec)?;
            let (label, f) = ensemble_formula(&spec, &formula)?;
            let mut sem = None;
            let mut sym = None;
            if matches!(engine, Engine::Semantic | Engine::Both) {
                sem = Some(check_with(&SemanticEnv::new(&spec.actions), semantic_root(&spec)?, &f, max_nodes)?);
            }
            if matches!(engine, Engine::Symbolic | Engine::Both) {
                let fs = focus(&spec, focus_name.as_deref())?;
                epens::symbolic::check_formula(&f, fs).map_err(|e| input(e.to_string()))?;
                let table = verified_table(&spec, fs)?;
                let env = SymbolicEnv::new(fs, &table, &spec.actions).map_err(|e| input(e.to_string()))?;
                let root = symbolic_root(&spec)?;
                let root = env.configuration(root.ensemble, root.state).map_err(|e| input(e.to_string()))?;
                sym = Some(check_with(&env, root, &f, max_nodes)?);
            }
            let verdicts: Vec<Truth> = [sem, sym].iter().flatten().map(|(t, _)| *t).collect();
            let code = if verdicts.contains(&Truth::Unknown) {
                2
            } else if verdicts.windows(2).any(|w| w[0] != w[1]) || verdicts.contains(&Truth::False) {
                1
            } else {
                0
            };
            if json {
                print_json(out, &json!({
                    "formula": label,
                    "text": f.to_string(),
                    "semantic": truth_json(sem.map(|s| s.0)),
                    "symbolic": truth_json(sym.map(|s| s.0)),
                    "semantic_nodes": sem.map(|s| s.1),
                    "symbolic_nodes": sym.map(|s| s.1),
                }));
            } else {
                if let Some((t, n)) = sem {
                    let _ = writeln!(out, "{label}: {t} (semantic, {n} configurations)");
                }
                if let Some((t, n)) = sym {
                    let _ = writeln!(out, "{label}: {t} (symbolic, {n} configurations)");
                }
                if verdicts.windows(2).any(|w| w[0] != w[1]) {
                    let _ = writeln!(out, "the engines disagree");
                }
            }
            Ok(code)
        }
        Command::Wlp { spec, action, formula, json } => {
            let spec = load(&spec)?;
            let a = pointed(&spec, &action)?;
            let f = spec.parse_formula(&formula).map_err(|e| input(e.to_string()))?;
            let w = wlp(&a, &f);
            if json {
                print_json(out, &json!({ "action": a.to_string(), "formula": f.to_string(), "wlp": w.to_string(), "size": w.size() }));
            } else {
                let _ = writeln!(out, "{w}");
            }
            Ok(0)
        }
        Command::VerifyTable { spec, focus: focus_name, json } => {
            let spec = load(&spec)?;
            let fs = focus(&spec, focus_name.as_deref())?;
            let mut table = spec.repr.clone().ok_or_else(|| input("the spec has no `repr` table"))?;
            let diags = verify_table(&mut table, &spec.actions, fs, &prover_for(&spec)).map_err(prover_failure)?;
            let cells = spec.actions.pointed_actions().len() * (fs.len() + 1);
            if json {
                print_json(out, &json!({ "cells": cells, "verified": diags.is_empty(), "diagnostics": diags }));
            } else {
                for d in &diags {
                    let _ = writeln!(out, "{d}");
                }
                let _ = writeln!(out, "{} of {cells} cells verified", cells - diags.len());
            }
            Ok(if diags.is_empty() { 0 } else { 1 })
        }
        Command::SearchRepr { spec, action, formula, focus: focus_name, max_disjuncts, json } => {
            let spec = load(&spec)?;
            let fs = focus(&spec, focus_name.as_deref())?;
            let a = pointed(&spec, &action)?;
            let f = spec.parse_formula(&formula).map_err(|e| input(e.to_string()))?;
            let r = search_representative(&a, &f, fs, max_disjuncts, &prover_for(&spec)).map_err(prover_failure)?;
            if json {
                print_json(out, &json!({
                    "action": a.to_string(),
                    "formula": f.to_string(),
                    "representative": r.as_ref().map(|r| r.to_string()),
                }));
            } else {
                let _ = match &r {
                    Some(r) => writeln!(out, "{r}"),
                    None => writeln!(out, "no representative with at most {max_disjuncts} disjuncts"),
                };
            }
            Ok(if r.is_some() { 0 } else { 1 })
        }
        Command::Equiv { spec, semantic, symbolic, focus: focus_name, depth, max_nodes } => {
            let spec = load(&spec)?;
            let fs = focus(&spec, focus_name.as_deref())?;
            let c_sem = match semantic {
                None => semantic_root(&spec)?,
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                    let states: Vec<KripkeJson> =
                        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", p.display())))?;
                    let states = states
                        .iter()
                        .map(|k| PointedKripke::from_json(k, false))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| input(format!("{}: {e}", p.display())))?;
                    let class = StateClass::new(states).map_err(|e| input(e.to_string()))?;
                    Config { ensemble: spec.ensemble.clone(), state: class }
                }
            };
            let c_sym = match symbolic {
                None => symbolic_root(&spec)?,
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                    let items: Vec<String> =
                        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", p.display())))?;
                    let members = items
                        .iter()
                        .map(|s| spec.parse_formula(s))
                        .collect::<Result<Vec<Formula>, _>>()
                        .map_err(|e| input(e.to_string()))?;
                    let state = SymbolicState::new(members, fs).map_err(|e| input(e.to_string()))?;
                    Config { ensemble: spec.ensemble.clone(), state }
                }
            };
            let rooted = f_equivalent(&c_sem.state, &c_sym.state, fs).map_err(|e| input(e.to_string()))?;
            let table = verified_table(&spec, fs)?;
            let env_sym = SymbolicEnv::new(fs, &table, &spec.actions).map_err(|e| input(e.to_string()))?;
            let env_sem = SemanticEnv::new(&spec.actions);
            let c_sym = env_sym.configuration(c_sym.ensemble, c_sym.state).map_err(|e| input(e.to_string()))?;
            let samples: Vec<Formula> = fs
                .iter()
                .flat_map(|f| [f.clone(), Formula::not(f.clone())])
                .chain([Formula::Top])
                .collect();
            let bcl = check_bcl_agreement(&c_sem.state, &c_sym.state, fs, &samples).map_err(|e| input(e.to_string()))?;
            let sim = check_simulation(&env_sem, &env_sym, c_sem.clone(), c_sym.clone(), depth)
                .map_err(|e| input(e.to_string()))?;
            let formulas: Vec<EnsembleFormula> = spec.formulas.iter().map(|(_, f)| f.clone()).collect();
            let diff = differential_check(&env_sem, &env_sym, c_sem, c_sym, &formulas, max_nodes)
                .map_err(|e| input(e.to_string()))?;
            let ok = rooted && bcl.passed() && sim.passed() && diff.passed();
            print_json(out, &json!({
                "schema": "epens/equiv/v1",
                "roots_equivalent": rooted,
                "passed": ok,
                "bcl": bcl,
                "simulation": sim,
                "differential": diff,
            }));
            Ok(if ok { 0 } else { 1 })
        }
        Command::Prove { formula, spec, agents, valid, max_atoms, json } => {
            let (f, mut all_agents) = match spec {
                Some(p) => {
                    let spec = load(&p)?;
                    let f = spec.parse_formula(&formula).map_err(|e| input(e.to_string()))?;
                    (f, spec.signature.agents().clone())
                }
                None => {
                    let f = dsl::parse_formula(&formula).map_err(|e| input(e.to_string()))?;
                    (f, Default::default())
                }
            };
            all_agents.extend(agents.into_iter().map(AgentId::new));
            all_agents.extend(f.agents());
            let mut config = ProverConfig { agents: all_agents, ..ProverConfig::default() };
            if let Some(m) = max_atoms {
                config.max_atoms = m;
            }
            let prover = Prover::new(config);
            let target = if valid { Formula::not(f.clone()) } else { f.clone() };
            let res = prover.is_satisfiable(&target).map_err(prover_failure)?;
            let sat = res.verdict == Verdict::Sat;
            let holds = if valid { !sat } else { sat };
            let word = match (valid, holds) {
                (false, true) => "satisfiable",
                (false, false) => "unsatisfiable",
                (true, true) => "valid",
                (true, false) => "not valid",
            };
            if json {
                print_json(out, &json!({
                    "formula": f.to_string(),
                    "result": word,
                    // A model of the formula, or a countermodel when validity fails.
                    "witness": res.witness.as_ref().map(|w| serde_json::to_value(w.to_json()).expect("serializable")),
                }));
            } else {
                let _ = writeln!(out, "{word}");
                if let Some(w) = &res.witness {
                    let _ = write!(out, "{}", w.to_dot());
                }
            }
            Ok(if holds { 0 } else { 1 })
        }
        Command::ExportDot { spec, state, update, minimize, json } => {
            let spec = load(&spec)?;
            let mut k = spec
                .states
                .get(&state)
                .cloned()
                .ok_or_else(|| input(format!("no state named `{state}`")))?;
            for u in &update {
                let a = pointed(&spec, u)?;
                k = match k.product_update(&a).map_err(|e| input(e.to_string()))? {
                    Some(next) => next,
                    None => {
                        eprintln!("the precondition of {a} fails");
                        return Ok(1);
                    }
                };
            }
            if minimize {
                k = k.minimize();
            }
            if json {
                print_json(out, &serde_json::to_value(k.to_json()).expect("serializable"));
            } else {
                let _ = write!(out, "{}", k.to_dot());
            }
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/bit_transmission.eens");

    fn call(args: &[&str]) -> (Result<u8, u8>, String) {
        let cli = Cli::try_parse_from(std::iter::once("epens").chain(args.iter().copied())).expect("arguments parse");
        let mut out = String::new();
        let code = run(cli.command, &mut out).map_err(|f| f.code);
        (code, out)
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        for args in [
            &["explore", SPEC][..],
            &["explore", SPEC, "--syntactic"],
            &["explore", SPEC, "--symbolic", "--format", "json"],
            &["explore", SPEC, "--format", "json"],
            &["check", SPEC, "--formula", "reachability", "--engine", "both", "--json"],
            &["verify-table", SPEC, "--focus", "preliminary", "--json"],
            &["equiv", SPEC],
            &["prove", "--formula", "M[a] p & M[a] ~p & K[b] q"],
        ] {
            let (c1, a) = call(args);
            let (c2, b) = call(args);
            assert_eq!(c1, c2, "{args:?}");
            assert_eq!(a, b, "{args:?}");
            assert!(!a.is_empty(), "{args:?}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["check", SPEC, "--formula", "liveness"]).0, Ok(0));
        assert_eq!(call(&["check", SPEC, "--formula", "Kw[a2] x1", "--engine", "both"]).0, Ok(1));
        assert_eq!(call(&["check", SPEC, "--formula", "liveness", "--max-nodes", "2"]).0, Ok(2));
        assert_eq!(call(&["check", "missing.eens", "--formula", "liveness"]).0, Err(3));
        assert_eq!(call(&["check", SPEC, "--formula", "[nosuch] true"]).0, Err(3));
        assert_eq!(call(&["check", SPEC, "--formula", "liveness", "--engine", "symbolic", "--focus", "preliminary"]).0, Err(3));
        assert_eq!(call(&["prove", "--formula", "K[a] p & K[b] q & ~r", "--max-atoms", "1"]).0, Err(4));
        assert_eq!(call(&["verify-table", SPEC, "--focus", "preliminary"]).0, Ok(1));
        assert_eq!(call(&["export-dot", SPEC, "--state", "est0_w1", "--update", "tell12_x1@ek"]).0, Ok(1));
    }

    #[test]
    fn explore_reports_the_syntactic_system() {
        let (code, text) = call(&["explore", SPEC, "--syntactic", "--format", "json"]);
        assert_eq!(code, Ok(0));
        let g: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(g["schema"], "epens/graph/v1");
        assert_eq!(g["closed"], true);
        assert_eq!(g["nodes"].as_array().unwrap().len(), 4);
        assert_eq!(g["edges"].as_array().unwrap().len(), 8);
        let (_, dot) = call(&["explore", SPEC, "--syntactic"]);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches(" -> ").count(), 8);
    }

    #[test]
    fn table_and_representatives() {
        let (code, text) = call(&["verify-table", SPEC]);
        assert_eq!((code, text.as_str()), (Ok(0), "42 of 42 cells verified\n"));
        let (code, text) = call(&["search-repr", SPEC, "--action", "ack21_x1@ek", "--formula", "K[a1] x1"]);
        assert_eq!(code, Ok(0));
        let found = dsl::parse_formula(text.trim()).unwrap();
        let expected = dsl::parse_formula("Kw[a2] x1 -> K[a1] M[a2] x1").unwrap();
        assert!(Prover::with_agents(found.agents()).equivalent(&found, &expected).unwrap());
        let args = ["search-repr", SPEC, "--action", "ack21_x1@ek", "--formula", "K[a1] x1", "--focus", "preliminary"];
        assert_eq!(call(&args).0, Ok(1));
    }

    #[test]
    fn wlp_prove_and_export() {
        let (code, text) = call(&["wlp", SPEC, "--action", "tell12_x1@ek", "--formula", "Kw[a2] x1", "--json"]);
        assert_eq!(code, Ok(0));
        let v: Value = serde_json::from_str(&text).unwrap();
        let w = dsl::parse_formula(v["wlp"].as_str().unwrap()).unwrap();
        assert!(Prover::with_agents(w.agents()).is_valid(&w).unwrap());

        assert_eq!(call(&["prove", "--formula", "K[a] p -> p", "--valid"]), (Ok(0), "valid\n".to_string()));
        let (code, text) = call(&["prove", "--formula", "p -> K[a] p", "--valid", "--json"]);
        assert_eq!(code, Ok(1));
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["result"], "not valid");
        let counter: KripkeJson = serde_json::from_value(v["witness"].clone()).unwrap();
        let counter = PointedKripke::from_json(&counter, false).unwrap();
        assert!(!counter.satisfies(&dsl::parse_formula("p -> K[a] p").unwrap()).unwrap());

        let (code, text) = call(&["export-dot", SPEC, "--state", "est0", "--update", "tell12_x1@ek", "--minimize", "--json"]);
        assert_eq!(code, Ok(0));
        let k: KripkeJson = serde_json::from_str(&text).unwrap();
        let k = PointedKripke::from_json(&k, false).unwrap();
        assert!(k.satisfies(&dsl::parse_formula("K[a2] x1").unwrap()).unwrap());
    }

    #[test]
    fn equiv_passes_on_the_bundled_roots() {
        let (code, text) = call(&["equiv", SPEC]);
        assert_eq!(code, Ok(0));
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], "epens/equiv/v1");
        assert_eq!(v["roots_equivalent"], true);
        assert_eq!(v["passed"], true);
    }
}
