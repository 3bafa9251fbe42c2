//! Command-line front end: file loading, the subcommands, and a batch
//! manifest runner for CI.
//!
//! Exit codes are a stable contract: 0 means the verdict was true or the
//! value was computed, 1 means a false verdict (or failed checks), 2 a
//! usage or parse error, 3 a capability or budget error.

mod text;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::labels::{Extended, LabelStructure, SyncOp};
use crate::model::{self, Formalism, SpecDocument, System};
use crate::ops;
use crate::quant::{self, TraceMetric};
use crate::refine;
use crate::{Error, Result};

pub use text::{parse_spec, serialize_text};

/// Serialization targets for [`serialize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DocFormat {
    Text,
    Json,
}

/// Serializes a document; the inverse of [`parse_spec`] / [`parse_json`].
pub fn serialize(doc: &SpecDocument, format: DocFormat) -> String {
    match format {
        DocFormat::Text => serialize_text(doc),
        DocFormat::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("document serialization cannot fail");
            s.push('\n');
            s
        }
    }
}

/// Parses the JSON mirror of the text format.
pub fn parse_json(text: &str) -> Result<SpecDocument> {
    let doc: SpecDocument = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), col: e.column(), message: e.to_string() })?;
    for (name, sys) in &doc.systems {
        let report = model::validate(sys, &doc.structure);
        if let Some(v) = report.violations.first() {
            return Err(Error::invalid(format!("system `{name}`"), v.to_string()));
        }
    }
    Ok(doc)
}

fn load_file(path: &Path) -> Result<SpecDocument> {
    let body = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_json(&body)
    } else {
        parse_spec(&body)
    }
}

/// Loads and merges one or more files. All files must declare the same
/// label structure and use distinct system names.
fn load_documents(paths: &[PathBuf]) -> Result<SpecDocument> {
    if paths.is_empty() {
        return Err(Error::invalid("usage", "at least one specification file is required"));
    }
    let mut merged = load_file(&paths[0])?;
    for path in &paths[1..] {
        let doc = load_file(path)?;
        if doc.structure != merged.structure {
            return Err(Error::StructureMismatch(format!(
                "{} declares a different label structure",
                path.display()
            )));
        }
        for (name, sys) in doc.systems {
            if merged.systems.insert(name.clone(), sys).is_some() {
                return Err(Error::invalid("merge", format!("system `{name}` defined in more than one file")));
            }
        }
    }
    Ok(merged)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Discrete,
    Pointwise,
    Discounting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SyncArg {
    Csp,
    Plus,
    Max,
    Cap,
}

impl From<SyncArg> for SyncOp {
    fn from(s: SyncArg) -> SyncOp {
        match s {
            SyncArg::Csp => SyncOp::Csp,
            SyncArg::Plus => SyncOp::Plus,
            SyncArg::Max => SyncOp::Max,
            SyncArg::Cap => SyncOp::Cap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormalismArg {
    Lts,
    Dmts,
    Aa,
    Nu,
}

impl From<FormalismArg> for Formalism {
    fn from(f: FormalismArg) -> Formalism {
        match f {
            FormalismArg::Lts => Formalism::Lts,
            FormalismArg::Dmts => Formalism::Dmts,
            FormalismArg::Aa => Formalism::Aa,
            FormalismArg::Nu => Formalism::Nu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "qspec",
    version,
    about = "Quantitative specification theory: refinement, distances, composition and quotient over structured labels"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Specification files (.qs text or .qs.json); multiple files merge
    /// when they declare the same structure.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
}

#[derive(clap::Args, Debug)]
struct MetricOpts {
    /// Trace distance to use.
    #[arg(long, value_enum, default_value_t = MetricArg::Pointwise)]
    metric: MetricArg,
    /// Discount factor in [0,1); only for the discounting metric.
    #[arg(long)]
    lambda: Option<f64>,
    /// Convergence tolerance for iterated distances.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl MetricOpts {
    fn build(&self) -> Result<TraceMetric> {
        match self.metric {
            MetricArg::Discrete => Ok(TraceMetric::discrete()),
            MetricArg::Pointwise => Ok(TraceMetric::pointwise()),
            MetricArg::Discounting => TraceMetric::discounting(self.lambda.unwrap_or(0.9)),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check well-formedness of every system in the files.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Modal refinement: does --left refine --right?
    Refine {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Refinement distance from --left to --right.
    Distance {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[command(flatten)]
        metric: MetricOpts,
        /// Also print the full distance table as JSON.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Model checking: does the implementation satisfy the normal-form
    /// expression?
    Mc {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Relaxed membership: is --left within --alpha of --right?
    Member {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Relaxation threshold (a nonnegative number or `inf`).
        #[arg(long)]
        alpha: String,
        #[command(flatten)]
        metric: MetricOpts,
        #[command(flatten)]
        common: Common,
    },
    /// Structural composition of two specifications (as acceptance
    /// automata).
    Compose {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Override the structure's synchronization operator.
        #[arg(long, value_enum)]
        sync: Option<SyncArg>,
        /// Name of the result system.
        #[arg(long, default_value = "composition")]
        name: String,
        /// Write the result document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// State budget (also via QSPEC_BUDGET).
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Quotient: the most permissive specification composing with
    /// --divisor into --dividend.
    Quotient {
        #[arg(long)]
        dividend: String,
        #[arg(long)]
        divisor: String,
        #[arg(long, value_enum)]
        sync: Option<SyncArg>,
        /// Skip the divisor-splitting preprocessing pass.
        #[arg(long)]
        no_split: bool,
        /// Prune inconsistent states from the result.
        #[arg(long)]
        prune: bool,
        #[arg(long, default_value = "quotient")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Conjunction of two DMTS.
    Conjoin {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, default_value = "conjunction")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Disjunction of two DMTS.
    Disjoin {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, default_value = "disjunction")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Translate a system to another formalism.
    Translate {
        #[arg(long)]
        system: String,
        /// Expected source formalism (checked when given).
        #[arg(long, value_enum)]
        from: Option<FormalismArg>,
        #[arg(long, value_enum)]
        to: FormalismArg,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Remove inconsistent states from an acceptance automaton.
    Prune {
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "pruned")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a JSON manifest of checks.
    Check {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
}

/// Runs one command line (without the program name) and returns the exit
/// code.
pub fn run_command<I>(args: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("qspec"))
        .chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Capability(_) | Error::Budget(_) => 3,
                _ => 2,
            }
        }
    }
}

fn env_budget() -> Option<usize> {
    std::env::var("QSPEC_BUDGET").ok().and_then(|v| v.parse().ok())
}

fn with_sync(doc: &SpecDocument, sync: Option<SyncArg>) -> Result<LabelStructure> {
    match sync {
        None => Ok(doc.structure.clone()),
        Some(s) => LabelStructure::new(
            doc.structure.kind,
            doc.structure.alphabet.iter().cloned(),
            doc.structure.order.iter().cloned(),
            s.into(),
        ),
    }
}

fn parse_extended(s: &str) -> Result<Extended> {
    match s {
        "inf" | "+inf" => Ok(Extended::POS_INF),
        other => other
            .parse::<f64>()
            .map(Extended::new)
            .map_err(|_| Error::invalid("number", format!("`{other}` is not a number or `inf`"))),
    }
}

/// Human display of a distance value: six decimals with trailing zeros
/// trimmed down to one, so iterated values print as `9.0`, not
/// `9.000000000118`. JSON reports carry the full value.
fn fmt_value(v: Extended) -> String {
    if !v.is_finite() {
        return "inf".to_string();
    }
    let mut s = format!("{:.6}", v.value());
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

/// Brings two systems into one formalism using the verdict-preserving
/// translations: implementations embed, nu-calculus expressions pair with
/// DMTS via the table translation, and anything paired with an acceptance
/// automaton moves to acceptance automata.
fn unify(a: &System, b: &System, ls: &LabelStructure) -> Result<(System, System)> {
    use Formalism::*;
    let lift = |sys: &System, target: Formalism| -> Result<System> {
        Ok(match (sys, target) {
            (System::Lts(i), t) => model::embed_lts(i, t),
            (System::Dmts(d), Aa) => System::Aa(model::dmts_to_aa(d)?),
            (System::Dmts(d), Nu) => System::Nu(model::dmts_to_nu(d)),
            (System::Nu(n), Dmts) => System::Dmts(model::nu_to_dmts(n, ls)?),
            (System::Nu(n), Aa) => System::Aa(model::dmts_to_aa(&model::nu_to_dmts(n, ls)?)?),
            (s, _) => s.clone(),
        })
    };
    let target = match (a.formalism(), b.formalism()) {
        (Lts, Lts) => Dmts,
        (Lts, f) | (f, Lts) => f,
        (Aa, _) | (_, Aa) => Aa,
        (Nu, Nu) => Nu,
        _ => Dmts,
    };
    Ok((lift(a, target)?, lift(b, target)?))
}

fn refinement(a: &System, b: &System, ls: &LabelStructure) -> Result<refine::RefinementWitness> {
    match unify(a, b, ls)? {
        (System::Dmts(d1), System::Dmts(d2)) => refine::refines_dmts(&d1, &d2, ls),
        (System::Aa(a1), System::Aa(a2)) => refine::refines_aa(&a1, &a2, ls),
        (System::Nu(n1), System::Nu(n2)) => refine::refines_nu(&n1, &n2, ls),
        _ => unreachable!("unify returns matching formalisms"),
    }
}

fn as_dmts(doc: &SpecDocument, name: &str) -> Result<model::Dmts> {
    match doc.get(name)? {
        System::Dmts(d) => Ok(d.clone()),
        System::Lts(i) => Ok(model::lts_to_dmts(i)),
        System::Nu(n) => model::nu_to_dmts(n, &doc.structure),
        System::Aa(_) => Err(Error::Capability(format!(
            "`{name}` is an acceptance automaton; conjunction and disjunction operate on DMTS (translate first)"
        ))),
    }
}

fn as_aa(doc: &SpecDocument, name: &str) -> Result<model::Aa> {
    match doc.get(name)? {
        System::Aa(a) => Ok(a.clone()),
        System::Dmts(d) => model::dmts_to_aa(d),
        System::Lts(i) => match model::embed_lts(i, Formalism::Aa) {
            System::Aa(a) => Ok(a),
            _ => unreachable!(),
        },
        System::Nu(n) => model::dmts_to_aa(&model::nu_to_dmts(n, &doc.structure)?),
    }
}

fn as_lts(doc: &SpecDocument, name: &str) -> Result<model::Lts> {
    model::system_to_lts(doc.get(name)?, &doc.structure)
}

fn emit_result(doc: &SpecDocument, ls: &LabelStructure, name: &str, sys: System, out: Option<&Path>) -> Result<()> {
    let _ = doc;
    let out_doc = SpecDocument {
        structure: ls.clone(),
        systems: BTreeMap::from([(name.to_string(), sys)]),
    };
    let format = match out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => DocFormat::Json,
        _ => DocFormat::Text,
    };
    let body = serialize(&out_doc, format);
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Validate { common } => {
            let doc = load_documents(&common.files)?;
            // Parsing already rejects invalid systems; report per system.
            let mut report = Vec::new();
            for (name, sys) in &doc.systems {
                let r = model::validate(sys, &doc.structure);
                report.push((name.clone(), sys.formalism(), r));
            }
            let warnings = doc.structure.conjunction_warnings();
            match common.format {
                OutputFormat::Json => {
                    let systems: Vec<serde_json::Value> = report
                        .iter()
                        .map(|(name, f, r)| {
                            serde_json::json!({
                                "system": name,
                                "formalism": f.to_string(),
                                "valid": r.is_valid(),
                                "implementation": r.is_implementation,
                                "violations": r.violations,
                            })
                        })
                        .collect();
                    println!(
                        "{}",
                        serde_json::json!({"systems": systems, "conjunction_warnings": warnings})
                    );
                }
                OutputFormat::Text => {
                    for (name, f, r) in &report {
                        let role = if r.is_implementation { "implementation" } else { "specification" };
                        println!("{name}: valid {f} {role}");
                    }
                    for (a, b) in &warnings {
                        println!("warning: symbols {a} and {b} have no unique maximal common lower bound; conjunction may be incomplete");
                    }
                }
            }
            Ok(0)
        }
        Cmd::Refine { left, right, common } => {
            let doc = load_documents(&common.files)?;
            let w = refinement(doc.get(&left)?, doc.get(&right)?, &doc.structure)?;
            match common.format {
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::json!({"holds": w.holds, "relation_size": w.relation.len()})
                ),
                OutputFormat::Text => {
                    if w.holds {
                        println!("true: {left} refines {right} ({} related state pairs)", w.relation.len());
                    } else {
                        let why = w
                            .failure
                            .map(|f| format!(" (violated clause: {})", f.clause))
                            .unwrap_or_default();
                        println!("false: {left} does not refine {right}{why}");
                    }
                }
            }
            Ok(if w.holds { 0 } else { 1 })
        }
        Cmd::Distance { left, right, metric, table, common } => {
            let doc = load_documents(&common.files)?;
            let m = metric.build()?;
            let (a, b) = unify(doc.get(&left)?, doc.get(&right)?, &doc.structure)?;
            let (value, dt) = quant::refinement_distance(&a, &b, &m, &doc.structure, metric.tol)?;
            match common.format {
                OutputFormat::Json => {
                    let mut obj = serde_json::json!({
                        "value": value,
                        "converged": dt.converged,
                        "error_bound": dt.error_bound,
                    });
                    if table {
                        obj["table"] = dt.to_json();
                    }
                    println!("{obj}");
                }
                OutputFormat::Text => {
                    println!("{}", fmt_value(value));
                    if table {
                        println!("{}", dt.to_json());
                    }
                }
            }
            Ok(0)
        }
        Cmd::Mc { left, right, common } => {
            let doc = load_documents(&common.files)?;
            let i = as_lts(&doc, &left)?;
            let System::Nu(nu) = doc.get(&right)? else {
                return Err(Error::invalid("usage", format!("`{right}` is not a nu-calculus expression")));
            };
            let holds = refine::models(&i, nu, &doc.structure)?;
            match common.format {
                OutputFormat::Json => println!("{}", serde_json::json!({"holds": holds})),
                OutputFormat::Text => println!("{}", if holds { "true" } else { "false" }),
            }
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::Member { left, right, alpha, metric, common } => {
            let doc = load_documents(&common.files)?;
            let i = as_lts(&doc, &left)?;
            let alpha = parse_extended(&alpha)?;
            let m = metric.build()?;
            let verdict = quant::implements_within(&i, doc.get(&right)?, alpha, &m, &doc.structure, metric.tol)?;
            match common.format {
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::json!({"holds": verdict.holds, "near_threshold": verdict.near_threshold})
                ),
                OutputFormat::Text => {
                    let margin = if verdict.near_threshold { " (within tolerance of the threshold)" } else { "" };
                    println!("{}{margin}", if verdict.holds { "true" } else { "false" });
                }
            }
            Ok(if verdict.holds { 0 } else { 1 })
        }
        Cmd::Compose { left, right, sync, name, out, budget, common } => {
            let doc = load_documents(&common.files)?;
            let ls = with_sync(&doc, sync)?;
            let a = as_aa(&doc, &left)?;
            let b = as_aa(&doc, &right)?;
            let budget = budget.or_else(env_budget).unwrap_or(ops::STATE_BUDGET);
            let c = ops::compose_with(&a, &b, &ls, budget)?;
            emit_result(&doc, &ls, &name, System::Aa(c), out.as_deref())?;
            Ok(0)
        }
        Cmd::Quotient { dividend, divisor, sync, no_split, prune, name, out, budget, common } => {
            let doc = load_documents(&common.files)?;
            let ls = with_sync(&doc, sync)?;
            let a3 = as_aa(&doc, &dividend)?;
            let a1 = as_aa(&doc, &divisor)?;
            let mut opts = ops::QuotientOptions::default();
            opts.split_divisor = !no_split;
            if let Some(b) = budget.or_else(env_budget) {
                opts.max_states = b;
            }
            let q = ops::quotient_with(&a3, &a1, &ls, &opts)?;
            let result = if prune { ops::prune_inconsistent(&q.aa) } else { q.aa };
            emit_result(&doc, &ls, &name, System::Aa(result), out.as_deref())?;
            Ok(0)
        }
        Cmd::Conjoin { left, right, name, out, common } => {
            let doc = load_documents(&common.files)?;
            let d1 = as_dmts(&doc, &left)?;
            let d2 = as_dmts(&doc, &right)?;
            let c = ops::conjoin(&d1, &d2, &doc.structure)?;
            emit_result(&doc, &doc.structure, &name, System::Dmts(c), out.as_deref())?;
            Ok(0)
        }
        Cmd::Disjoin { left, right, name, out, common } => {
            let doc = load_documents(&common.files)?;
            let d1 = as_dmts(&doc, &left)?;
            let d2 = as_dmts(&doc, &right)?;
            let c = ops::disjoin(&d1, &d2);
            emit_result(&doc, &doc.structure, &name, System::Dmts(c), out.as_deref())?;
            Ok(0)
        }
        Cmd::Translate { system, from, to, name, out, budget, common } => {
            let doc = load_documents(&common.files)?;
            let sys = doc.get(&system)?;
            if let Some(f) = from {
                if sys.formalism() != f.into() {
                    return Err(Error::invalid(
                        "usage",
                        format!("`{system}` is a {} system, not {}", sys.formalism(), Formalism::from(f)),
                    ));
                }
            }
            let budget = budget.or_else(env_budget).unwrap_or(model::DMTS_STATE_BUDGET);
            let target: Formalism = to.into();
            let result = translate(sys, target, &doc.structure, budget)?;
            let name = name.unwrap_or_else(|| format!("{system}_{target}"));
            emit_result(&doc, &doc.structure, &name, result, out.as_deref())?;
            Ok(0)
        }
        Cmd::Prune { system, name, out, common } => {
            let doc = load_documents(&common.files)?;
            let a = as_aa(&doc, &system)?;
            let pruned = ops::prune_detailed(&a);
            for bad in &pruned.unsatisfiable_initials {
                eprintln!("warning: initial state {bad} has no consistent implementation");
            }
            emit_result(&doc, &doc.structure, &name, System::Aa(pruned.aa), out.as_deref())?;
            Ok(0)
        }
        Cmd::Check { manifest, format } => run_manifest(&manifest, format),
    }
}

fn translate(sys: &System, target: Formalism, ls: &LabelStructure, budget: usize) -> Result<System> {
    Ok(match (sys, target) {
        (System::Lts(i), t) => model::embed_lts(i, t),
        (s, Formalism::Lts) => System::Lts(model::system_to_lts(s, ls)?),
        (System::Dmts(d), Formalism::Dmts) => System::Dmts(d.clone()),
        (System::Dmts(d), Formalism::Aa) => System::Aa(model::dmts_to_aa(d)?),
        (System::Dmts(d), Formalism::Nu) => System::Nu(model::dmts_to_nu(d)),
        (System::Aa(a), Formalism::Dmts) => System::Dmts(model::aa_to_dmts(a, budget)?),
        (System::Aa(a), Formalism::Aa) => System::Aa(a.clone()),
        (System::Aa(a), Formalism::Nu) => System::Nu(model::dmts_to_nu(&model::aa_to_dmts(a, budget)?)),
        (System::Nu(n), Formalism::Dmts) => System::Dmts(model::nu_to_dmts(n, ls)?),
        (System::Nu(n), Formalism::Aa) => System::Aa(model::dmts_to_aa(&model::nu_to_dmts(n, ls)?)?),
        (System::Nu(n), Formalism::Nu) => System::Nu(n.clone()),
    })
}

/// One entry of a check manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Check {
    op: String,
    #[serde(default)]
    left: Option<String>,
    #[serde(default)]
    right: Option<String>,
    #[serde(default)]
    dividend: Option<String>,
    #[serde(default)]
    divisor: Option<String>,
    #[serde(default)]
    system: Option<String>,
    #[serde(default)]
    metric: Option<String>,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    alpha: Option<serde_json::Value>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    sync: Option<String>,
    /// Expected Boolean verdict.
    #[serde(default)]
    expect: Option<bool>,
    /// Expected numeric value (a number or "inf"), compared within
    /// `value_tol`.
    #[serde(default)]
    expect_value: Option<serde_json::Value>,
    #[serde(default)]
    value_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    files: Vec<PathBuf>,
    checks: Vec<Check>,
}

fn manifest_metric(check: &Check) -> Result<TraceMetric> {
    match check.metric.as_deref() {
        None | Some("pointwise") => Ok(TraceMetric::pointwise()),
        Some("discrete") => Ok(TraceMetric::discrete()),
        Some("discounting") => TraceMetric::discounting(check.lambda.unwrap_or(0.9)),
        Some(other) => Err(Error::invalid("manifest", format!("unknown metric `{other}`"))),
    }
}

fn json_extended(v: &serde_json::Value) -> Result<Extended> {
    match v {
        serde_json::Value::Number(n) => Ok(Extended::new(n.as_f64().unwrap())),
        serde_json::Value::String(s) => parse_extended(s),
        other => Err(Error::invalid("manifest", format!("`{other}` is not a number or \"inf\""))),
    }
}

fn need<'a>(field: &Option<String>, name: &str, op: &str) -> Result<String> {
    let _ = name;
    field
        .clone()
        .ok_or_else(|| Error::invalid("manifest", format!("op `{op}` needs field `{name}`", name = name)))
}

fn run_manifest(path: &Path, format: OutputFormat) -> Result<i32> {
    let body = std::fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&body)
        .map_err(|e| Error::Parse { line: e.line(), col: e.column(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let files: Vec<PathBuf> = manifest.files.iter().map(|f| base.join(f)).collect();
    let doc = load_documents(&files)?;
    let mut failures = 0usize;
    let mut lines = Vec::new();
    for (i, check) in manifest.checks.iter().enumerate() {
        let label = format!("{} #{}", check.op, i + 1);
        let outcome = run_check(&doc, check);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        lines.push((label, ok, detail));
    }
    match format {
        OutputFormat::Json => {
            let checks: Vec<serde_json::Value> = lines
                .iter()
                .map(|(label, ok, detail)| serde_json::json!({"check": label, "ok": ok, "detail": detail}))
                .collect();
            println!("{}", serde_json::json!({"checks": checks, "failures": failures}));
        }
        OutputFormat::Text => {
            for (label, ok, detail) in &lines {
                println!("{} {label}: {detail}", if *ok { "ok  " } else { "FAIL" });
            }
            println!("{} checks, {} failures", lines.len(), failures);
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn run_check(doc: &SpecDocument, check: &Check) -> Result<(bool, String)> {
    let ls = match check.sync.as_deref() {
        None => doc.structure.clone(),
        Some(s) => {
            let sync = match s {
                "csp" => SyncOp::Csp,
                "plus" => SyncOp::Plus,
                "max" => SyncOp::Max,
                "cap" => SyncOp::Cap,
                other => return Err(Error::invalid("manifest", format!("unknown sync `{other}`"))),
            };
            LabelStructure::new(
                doc.structure.kind,
                doc.structure.alphabet.iter().cloned(),
                doc.structure.order.iter().cloned(),
                sync,
            )?
        }
    };
    let tol = check.tol.unwrap_or(1e-9);
    let against_bool = |found: bool| -> (bool, String) {
        match check.expect {
            Some(want) => (found == want, format!("got {found}, expected {want}")),
            None => (found, format!("got {found}")),
        }
    };
    match check.op.as_str() {
        "refine" => {
            let left = need(&check.left, "left", "refine")?;
            let right = need(&check.right, "right", "refine")?;
            let w = refinement(doc.get(&left)?, doc.get(&right)?, &ls)?;
            Ok(against_bool(w.holds))
        }
        "mc" => {
            let left = need(&check.left, "left", "mc")?;
            let right = need(&check.right, "right", "mc")?;
            let i = as_lts(doc, &left)?;
            let System::Nu(nu) = doc.get(&right)? else {
                return Err(Error::invalid("manifest", format!("`{right}` is not a nu expression")));
            };
            Ok(against_bool(refine::models(&i, nu, &ls)?))
        }
        "member" => {
            let left = need(&check.left, "left", "member")?;
            let right = need(&check.right, "right", "member")?;
            let alpha = json_extended(
                check.alpha.as_ref().ok_or_else(|| Error::invalid("manifest", "member needs `alpha`"))?,
            )?;
            let m = manifest_metric(check)?;
            let i = as_lts(doc, &left)?;
            let v = quant::implements_within(&i, doc.get(&right)?, alpha, &m, &ls, tol)?;
            Ok(against_bool(v.holds))
        }
        "distance" => {
            let left = need(&check.left, "left", "distance")?;
            let right = need(&check.right, "right", "distance")?;
            let m = manifest_metric(check)?;
            let (a, b) = unify(doc.get(&left)?, doc.get(&right)?, &ls)?;
            let (value, _) = quant::refinement_distance(&a, &b, &m, &ls, tol)?;
            match &check.expect_value {
                None => Ok((true, format!("value {}", fmt_value(value)))),
                Some(want) => {
                    let want = json_extended(want)?;
                    let vtol = check.value_tol.unwrap_or(1e-6);
                    let ok = if want.is_finite() && value.is_finite() {
                        (want.value() - value.value()).abs() <= vtol
                    } else {
                        want == value
                    };
                    Ok((ok, format!("value {}, expected {}", fmt_value(value), fmt_value(want))))
                }
            }
        }
        "validate" => {
            let system = need(&check.system, "system", "validate")?;
            let r = model::validate(doc.get(&system)?, &ls);
            Ok(against_bool(r.is_valid()))
        }
        "compose" | "conjoin" | "disjoin" | "quotient" | "translate" | "prune" => {
            // Construction checks: these succeed when the operation does.
            match check.op.as_str() {
                "compose" => {
                    let a = as_aa(doc, &need(&check.left, "left", "compose")?)?;
                    let b = as_aa(doc, &need(&check.right, "right", "compose")?)?;
                    let c = ops::compose(&a, &b, &ls)?;
                    Ok((true, format!("{} states", c.states.len())))
                }
                "conjoin" => {
                    let a = as_dmts(doc, &need(&check.left, "left", "conjoin")?)?;
                    let b = as_dmts(doc, &need(&check.right, "right", "conjoin")?)?;
                    let c = ops::conjoin(&a, &b, &ls)?;
                    Ok((true, format!("{} states", c.states.len())))
                }
                "disjoin" => {
                    let a = as_dmts(doc, &need(&check.left, "left", "disjoin")?)?;
                    let b = as_dmts(doc, &need(&check.right, "right", "disjoin")?)?;
                    let c = ops::disjoin(&a, &b);
                    Ok((true, format!("{} states", c.states.len())))
                }
                "quotient" => {
                    let dividend = as_aa(doc, &need(&check.dividend, "dividend", "quotient")?)?;
                    let divisor = as_aa(doc, &need(&check.divisor, "divisor", "quotient")?)?;
                    let q = ops::quotient(&dividend, &divisor, &ls)?;
                    Ok((true, format!("{} states", q.aa.states.len())))
                }
                "translate" => {
                    let system = need(&check.system, "system", "translate")?;
                    let to = match check.to.as_deref() {
                        Some("lts") => Formalism::Lts,
                        Some("dmts") => Formalism::Dmts,
                        Some("aa") => Formalism::Aa,
                        Some("nu") => Formalism::Nu,
                        other => {
                            return Err(Error::invalid("manifest", format!("bad translation target {other:?}")))
                        }
                    };
                    let t = translate(doc.get(&system)?, to, &ls, model::DMTS_STATE_BUDGET)?;
                    Ok((true, format!("{} states", t.state_names().len())))
                }
                "prune" => {
                    let system = need(&check.system, "system", "prune")?;
                    let a = as_aa(doc, &system)?;
                    let p = ops::prune_inconsistent(&a);
                    Ok((true, format!("{} states", p.states.len())))
                }
                _ => unreachable!(),
            }
        }
        other => Err(Error::invalid("manifest", format!("unknown op `{other}`"))),
    }
}
