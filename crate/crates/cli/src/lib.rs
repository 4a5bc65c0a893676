//! The `restake` command-line driver.
//!
//! [`run_cli`] parses arguments, runs one analysis and writes a report to
//! `out`. Exit codes: 0 success, 1 insecure (with `--fail-on-insecure`),
//! 2 usage or input errors, 3 size limits, non-convergence and infeasible
//! reward searches.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use restake::attack::{check_attack, find_attacks, security_report, Verdict};
use restake::cascade::cascade_coefficient;
use restake::dynamics::{simulate, Band, Controller, SimConfig};
use restake::io::scenario::{AppBParams, RandomParams, Scenario, StakeDist};
use restake::io::script::parse_script;
use restake::io::GraphDocument;
use restake::optimizer::compute_optimal_rewards;
use restake::{Error, ProfitSpec, RestakingGraph};
use serde_json::json;

pub use report::{Format, REPORT_SCHEMA_VERSION};
use report::{ids, num, opt_num, value, InputDigest, Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INSECURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

/// Environment variable holding the default `--format`.
pub const FORMAT_ENV: &str = "RESTAKE_FORMAT";

#[derive(Debug, Parser)]
#[command(name = "restake", version, about = "Security analysis of restaking graphs")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, env = FORMAT_ENV, default_value = "json")]
    format: Format,
    /// Suppress the report; only the exit code and errors remain.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ProfitArg {
    /// `linear`, `maxnorm`, `pnorm:P` or `powerscaled:C`; defaults to the
    /// document's profit entry.
    #[arg(long, value_parser = parse_profit)]
    profit: Option<ProfitSpec>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a graph document and check it for valid attacks.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        profit: ProfitArg,
        #[arg(long)]
        fail_on_insecure: bool,
    },
    /// Enumerate valid attacks, and check scripted ones.
    Attack {
        file: PathBuf,
        #[command(flatten)]
        profit: ProfitArg,
        #[arg(long)]
        max_a: Option<usize>,
        #[arg(long)]
        max_b: Option<usize>,
        /// Attack script whose steps are checked one by one against the
        /// full graph.
        #[arg(long)]
        check: Option<PathBuf>,
        #[arg(long)]
        fail_on_insecure: bool,
    },
    /// Worst-case cascade after losing at most a ψ fraction of stake.
    Cascade {
        file: PathBuf,
        #[arg(long)]
        psi: f64,
        #[command(flatten)]
        profit: ProfitArg,
    },
    /// Security margin γ* and the sufficient overcollateralization test.
    Gamma {
        file: PathBuf,
        #[command(flatten)]
        profit: ProfitArg,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        fail_on_insecure: bool,
    },
    /// Rewards that halt the greedy attack sequence.
    Optimize {
        file: PathBuf,
        #[arg(long)]
        p: f64,
        /// Attack horizon.
        #[arg(long)]
        t: usize,
    },
    /// Replay an attack script through the reward / attack / rebalance game.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[command(flatten)]
        profit: ProfitArg,
        /// Reward controller band `LO,HI`.
        #[arg(long, value_parser = parse_band)]
        controller: Option<Band>,
        /// Norm exponent for the controller; defaults to the profit's.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        max_sweeps: Option<usize>,
        /// Recorded in the report. The game itself has no random choices.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a named example graph.
    Scenario {
        /// fig1, fig2, fig3, overlap-appb, union-appa or random.
        name: String,
        /// Output file; the document goes to standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: ScenarioArgs,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Collusion threshold (fig1, overlap-appb).
    #[arg(long)]
    alpha: Option<f64>,
    /// overlap-appb: private stake σ.
    #[arg(long)]
    sigma: Option<f64>,
    /// overlap-appb: shared stake multiple K.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    pi1: Option<f64>,
    #[arg(long)]
    pi2: Option<f64>,
    /// random: generator seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    services: Option<usize>,
    #[arg(long)]
    operators: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    /// random: `const:V`, `uniform:LO:HI` or `int:LO:HI`.
    #[arg(long, value_parser = parse_dist)]
    stakes: Option<StakeDist>,
    #[arg(long, value_parser = parse_dist)]
    profits: Option<StakeDist>,
}

fn parse_profit(s: &str) -> Result<ProfitSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_band(s: &str) -> Result<Band, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad HI: {e}"))?;
    Band::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_dist(s: &str) -> Result<StakeDist, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let f = |x: &str| x.parse::<f64>().map_err(|e| format!("bad number `{x}`: {e}"));
    let u = |x: &str| x.parse::<u32>().map_err(|e| format!("bad integer `{x}`: {e}"));
    match parts.as_slice() {
        ["const", v] => Ok(StakeDist::Constant { value: f(v)? }),
        ["uniform", lo, hi] => Ok(StakeDist::Uniform { lo: f(lo)?, hi: f(hi)? }),
        ["int", lo, hi] => Ok(StakeDist::Integer { lo: u(lo)?, hi: u(hi)? }),
        _ => Err("expected const:V, uniform:LO:HI or int:LO:HI".into()),
    }
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) | Error::Convergence(_) | Error::Infeasible(_) => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

fn fail(context: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure { code: exit_code(&e), message: if context.is_empty() { e.to_string() } else { format!("{context}: {e}") } }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

struct Loaded {
    bytes: Vec<u8>,
    doc: GraphDocument,
    graph: RestakingGraph,
    spec: ProfitSpec,
}

fn load(path: &Path, profit: Option<ProfitSpec>) -> Result<Loaded, Failure> {
    let bytes = read(path)?;
    let name = path.display().to_string();
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::usage(format!("{name}: not utf-8: {e}")))?;
    let doc = GraphDocument::parse(text).map_err(fail(&name))?;
    let graph = doc.graph().map_err(fail(&name))?;
    let spec = match profit {
        Some(s) => s,
        None => doc.profit_spec().map_err(fail(&name))?,
    };
    Ok(Loaded { bytes, doc, graph, spec })
}

enum Output {
    Report(Report),
    /// Written verbatim, whatever the format.
    Raw(String),
}

struct Outcome {
    output: Output,
    code: i32,
    /// Shown on standard error when the run is insecure.
    note: Option<String>,
}

fn witness_note(a: &restake::Attack) -> String {
    format!("witness A = [{}], B = [{}]", ids(&a.services).replace(';', ", "), ids(&a.operators).replace(';', ", "))
}

fn verdict_row(source: &str, index: usize, a: &restake::Attack, v: &Verdict, profit: f64, stake: f64) -> Vec<String> {
    let (service, colluding, required) = match v {
        Verdict::Infeasible { service, colluding, required } => (service.to_string(), num(*colluding), num(*required)),
        _ => Default::default(),
    };
    vec![
        source.into(),
        index.to_string(),
        ids(&a.services),
        ids(&a.operators),
        num(profit),
        num(stake),
        v.condition().into(),
        service,
        colluding,
        required,
    ]
}

const ATTACK_HEADER: [&str; 10] =
    ["source", "index", "A", "B", "profit", "stake", "verdict", "service", "colluding", "required"];

fn graph_summary(g: &RestakingGraph) -> serde_json::Value {
    json!({
        "services": g.num_services(),
        "operators": g.num_operators(),
        "edges": g.num_edges(),
        "total_stake": g.total_stake(),
    })
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Validate { file, profit, fail_on_insecure } => {
            let l = load(&file, profit.profit)?;
            let canonical = {
                let mut c = l.doc.clone();
                c.canonicalize();
                c.to_json().as_bytes() == l.bytes.as_slice()
            };
            let (security, security_error) = match security_report(&l.graph, &l.spec, 0.0) {
                Ok(r) => (Some(r), None),
                Err(e @ Error::Resource(_)) => (None, Some(e)),
                Err(e) => return Err(fail("")(e)),
            };
            let secure = security.as_ref().map(|r| r.secure);
            let code = match (fail_on_insecure, secure, &security_error) {
                (true, Some(false), _) => EXIT_INSECURE,
                (true, None, Some(e)) => return Err(fail("")(e.clone())),
                _ => EXIT_OK,
            };
            let mut table = Table::new(&["services", "operators", "edges", "total_stake", "canonical", "secure", "witness_A", "witness_B"]);
            let witness = security.as_ref().and_then(|r| r.witness.clone());
            table.push(vec![
                l.graph.num_services().to_string(),
                l.graph.num_operators().to_string(),
                l.graph.num_edges().to_string(),
                num(l.graph.total_stake()),
                canonical.to_string(),
                secure.map(|s| s.to_string()).unwrap_or_default(),
                witness.as_ref().map(|w| ids(&w.services)).unwrap_or_default(),
                witness.as_ref().map(|w| ids(&w.operators)).unwrap_or_default(),
            ]);
            Ok(Outcome {
                code,
                note: witness.as_ref().map(witness_note),
                output: Output::Report(Report {
                    command: "validate",
                    inputs: vec![InputDigest::of("graph", &l.bytes)],
                    parameters: json!({ "profit": value(&l.spec), "fail_on_insecure": fail_on_insecure }),
                    result: json!({
                        "graph": graph_summary(&l.graph),
                        "has_incentives": l.doc.has_incentives(),
                        "canonical": canonical,
                        "security": security,
                        "security_error": security_error.map(|e| e.to_string()),
                    }),
                    table,
                }),
            })
        }
        Command::Attack { file, profit, max_a, max_b, check, fail_on_insecure } => {
            let l = load(&file, profit.profit)?;
            let found = find_attacks(&l.graph, &l.spec, max_a, max_b).map_err(fail(""))?;
            let mut inputs = vec![InputDigest::of("graph", &l.bytes)];
            let mut table = Table::new(&ATTACK_HEADER);
            let mut attacks = Vec::with_capacity(found.len());
            for (i, a) in found.iter().enumerate() {
                let profit = l.spec.profit(&l.graph, &a.services).map_err(fail(""))?;
                let stake = l.graph.stake_of(&a.operators).map_err(fail(""))?;
                table.push(verdict_row("found", i, a, &Verdict::Valid, profit, stake));
                attacks.push(json!({ "A": a.services, "B": a.operators, "profit": profit, "stake": stake }));
            }
            let mut checked = Vec::new();
            if let Some(path) = check {
                let bytes = read(&path)?;
                let name = path.display().to_string();
                let text = std::str::from_utf8(&bytes).map_err(|e| Failure::usage(format!("{name}: not utf-8: {e}")))?;
                let script = parse_script(text).map_err(fail(&name))?;
                inputs.push(InputDigest::of("check", &bytes));
                for (i, a) in script.attacks.iter().enumerate() {
                    let v = check_attack(&l.graph, &l.spec, a).map_err(fail(&format!("{name}: step {i}")))?;
                    let profit = l.spec.profit(&l.graph, &a.services).map_err(fail(""))?;
                    let stake = l.graph.stake_of(&a.operators).map_err(fail(""))?;
                    table.push(verdict_row("check", i, a, &v, profit, stake));
                    checked.push(json!({
                        "A": a.services, "B": a.operators, "profit": profit, "stake": stake,
                        "valid": v.is_valid(), "condition": v.condition(), "detail": v,
                    }));
                }
            }
            let code = if fail_on_insecure && !found.is_empty() { EXIT_INSECURE } else { EXIT_OK };
            Ok(Outcome {
                code,
                note: found.first().map(|a| format!("{} valid attacks; first {}", found.len(), witness_note(a))),
                output: Output::Report(Report {
                    command: "attack",
                    inputs,
                    parameters: json!({ "profit": value(&l.spec), "max_a": max_a, "max_b": max_b, "fail_on_insecure": fail_on_insecure }),
                    result: json!({ "count": found.len(), "attacks": attacks, "checked": checked }),
                    table,
                }),
            })
        }
        Command::Cascade { file, psi, profit } => {
            let l = load(&file, profit.profit)?;
            let res = cascade_coefficient(&l.graph, &l.spec, psi).map_err(fail(""))?;
            let mut table = Table::new(&["step", "A", "B", "slashed_stake", "cumulative_loss", "r_psi"]);
            let total = l.graph.total_stake();
            let mut lost = l.graph.stake_of(&res.best_d).map_err(fail(""))?;
            table.push(vec!["0".into(), String::new(), ids(&res.best_d), num(lost), num(lost / total), num(res.r_psi)]);
            for (i, st) in res.best_sequence.steps.iter().enumerate() {
                let s = l.graph.stake_of(&st.operators).map_err(fail(""))?;
                lost += s;
                table.push(vec![
                    (i + 1).to_string(),
                    ids(&st.services),
                    ids(&st.operators),
                    num(s),
                    num(lost / total),
                    num(res.r_psi),
                ]);
            }
            Ok(Outcome {
                code: EXIT_OK,
                note: None,
                output: Output::Report(Report {
                    command: "cascade",
                    inputs: vec![InputDigest::of("graph", &l.bytes)],
                    parameters: json!({ "profit": value(&l.spec), "psi": psi }),
                    result: json!({ "sequence_length": res.best_sequence.len(), "cascade": value(&res) }),
                    table,
                }),
            })
        }
        Command::Gamma { file, profit, gamma, fail_on_insecure } => {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(Failure::usage(format!("--gamma must be finite and non-negative, got {gamma}")));
            }
            let l = load(&file, profit.profit)?;
            let r = security_report(&l.graph, &l.spec, gamma).map_err(fail(""))?;
            let gamma_secure = r.secure && r.gamma_star.is_some_and(|g| g >= gamma);
            let mut table = Table::new(&["gamma", "secure", "gamma_star", "gamma_secure", "sufficient_condition_ok"]);
            table.push(vec![
                num(gamma),
                r.secure.to_string(),
                opt_num(r.gamma_star),
                gamma_secure.to_string(),
                r.sufficient_condition_ok.to_string(),
            ]);
            Ok(Outcome {
                code: if fail_on_insecure && !gamma_secure { EXIT_INSECURE } else { EXIT_OK },
                note: Some(match (&r.witness, r.gamma_star) {
                    (Some(w), _) => witness_note(w),
                    (None, g) => format!("gamma* = {} < {gamma}", opt_num(g)),
                }),
                output: Output::Report(Report {
                    command: "gamma",
                    inputs: vec![InputDigest::of("graph", &l.bytes)],
                    parameters: json!({ "profit": value(&l.spec), "gamma": gamma, "fail_on_insecure": fail_on_insecure }),
                    result: json!({
                        "gamma_secure": gamma_secure,
                        // serde_json writes an infinite γ* as null
                        "gamma_star_infinite": r.gamma_star.is_some_and(f64::is_infinite),
                        "report": value(&r),
                    }),
                    table,
                }),
            })
        }
        Command::Optimize { file, p, t } => {
            let l = load(&file, None)?;
            let schedule = l.doc.schedule().map_err(fail(&file.display().to_string()))?;
            let sol = compute_optimal_rewards(&l.graph, &schedule, t, p).map_err(fail(""))?;
            let a2: Vec<usize> = sol.greedy_sequence.steps.get(1).map(|s| s.services.clone()).unwrap_or_default();
            let mut table = Table::new(&["service", "cost", "base_reward", "reward", "in_second_attack"]);
            for s in 0..l.graph.num_services() {
                table.push(vec![
                    s.to_string(),
                    num(schedule.cost(s)),
                    num(sol.base_rewards[s]),
                    num(sol.rewards[s]),
                    a2.contains(&s).to_string(),
                ]);
            }
            Ok(Outcome {
                code: EXIT_OK,
                note: None,
                output: Output::Report(Report {
                    command: "optimize",
                    inputs: vec![InputDigest::of("graph", &l.bytes)],
                    parameters: json!({ "p": p, "t": t }),
                    result: value(&sol),
                    table,
                }),
            })
        }
        Command::Simulate { file, script, profit, controller, p, max_sweeps, seed } => {
            let l = load(&file, profit.profit)?;
            let schedule = l.doc.schedule().map_err(fail(&file.display().to_string()))?;
            let bytes = read(&script)?;
            let name = script.display().to_string();
            let text = std::str::from_utf8(&bytes).map_err(|e| Failure::usage(format!("{name}: not utf-8: {e}")))?;
            let steps = parse_script(text).map_err(fail(&name))?;
            let mut cfg = SimConfig::new(l.spec);
            if let Some(n) = max_sweeps {
                cfg.max_sweeps = n;
            }
            if let Some(band) = controller {
                let p = match (p, l.spec) {
                    (Some(p), _) => p,
                    (None, ProfitSpec::PNorm { p }) => p,
                    _ => return Err(Failure::usage("--controller needs --p unless the profit is a p-norm")),
                };
                if !(p > 1.0) {
                    return Err(Failure::usage(format!("--p must exceed 1, got {p}")));
                }
                cfg.controller = Some(Controller { p, band });
            }
            let end = simulate(&l.graph, &schedule, &steps, &cfg).map_err(fail(""))?;
            let mut table = Table::new(&[
                "round", "A", "B", "verdict", "executed", "slashed_stake", "joins", "leaves", "sweeps", "reward_changes", "lost_fraction",
            ]);
            let mut lost = l.graph.stake_of(&steps.seed_loss).map_err(fail(""))?;
            for r in &end.trace {
                lost += r.slashed_stake;
                let pairs = |m: &[restake::dynamics::Membership]| {
                    m.iter().map(|x| format!("{}>{}", x.operator, x.service)).collect::<Vec<_>>().join(";")
                };
                table.push(vec![
                    r.round.to_string(),
                    ids(&r.attack.services),
                    ids(&r.attack.operators),
                    r.verdict.condition().into(),
                    r.executed.to_string(),
                    num(r.slashed_stake),
                    pairs(&r.joins),
                    pairs(&r.leaves),
                    r.sweeps.to_string(),
                    r.reward_changes.len().to_string(),
                    num(lost / end.initial_stake),
                ]);
            }
            let rewards: Vec<_> = end
                .service_ids
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    json!({
                        "service": s,
                        "reward": end.schedule.reward(i),
                        "cost": end.schedule.cost(i),
                        "discount": end.schedule.discount(i),
                    })
                })
                .collect();
            Ok(Outcome {
                code: EXIT_OK,
                note: None,
                output: Output::Report(Report {
                    command: "simulate",
                    inputs: vec![InputDigest::of("graph", &l.bytes), InputDigest::of("script", &bytes)],
                    parameters: json!({ "profit": value(&l.spec), "config": value(&cfg), "seed": seed }),
                    result: json!({
                        "rounds": end.round,
                        "executed_attacks": end.executed_attacks(),
                        "seed_loss": end.seed_loss,
                        "slashed": end.slashed,
                        "initial_stake": end.initial_stake,
                        "live_stake": end.live_stake(),
                        "lost_fraction": end.lost_fraction(),
                        "live_services": end.service_ids,
                        "live_operators": end.operator_ids,
                        "final_schedule": rewards,
                        "trace": value(&end.trace),
                    }),
                    table,
                }),
            })
        }
        Command::Scenario { name, out, params } => {
            let sc = scenario(&name, &params)?;
            let doc = sc.document().map_err(fail(""))?;
            let text = doc.to_json();
            let digest = InputDigest::of("document", text.as_bytes());
            let Some(path) = out else {
                return Ok(Outcome { code: EXIT_OK, note: None, output: Output::Raw(text) });
            };
            std::fs::write(&path, &text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let mut table = Table::new(&["name", "out", "sha256"]);
            table.push(vec![name.clone(), path.display().to_string(), digest.sha256.clone()]);
            Ok(Outcome {
                code: EXIT_OK,
                note: None,
                output: Output::Report(Report {
                    command: "scenario",
                    inputs: Vec::new(),
                    parameters: json!({ "name": name }),
                    result: json!({ "out": path.display().to_string(), "document": digest, "graph": graph_summary(&doc.graph().map_err(fail(""))?) }),
                    table,
                }),
            })
        }
    }
}

fn scenario(name: &str, a: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut sc = Scenario::named(name).map_err(fail(""))?;
    let random_only = a.seed.is_some()
        || a.services.is_some()
        || a.operators.is_some()
        || a.edge_prob.is_some()
        || a.stakes.is_some()
        || a.profits.is_some();
    let appb_only = a.sigma.is_some() || a.k.is_some() || a.pi1.is_some() || a.pi2.is_some();
    match &mut sc {
        Scenario::Fig1 { alpha } => {
            if let Some(x) = a.alpha {
                *alpha = x;
            }
        }
        Scenario::OverlapAppB(p) => {
            *p = AppBParams {
                sigma: a.sigma.unwrap_or(p.sigma),
                k: a.k.unwrap_or(p.k),
                pi1: a.pi1.unwrap_or(p.pi1),
                pi2: a.pi2.unwrap_or(p.pi2),
                alpha: a.alpha.unwrap_or(p.alpha),
            };
        }
        Scenario::Random(p) => {
            let mut q = RandomParams::new(a.seed.unwrap_or(p.seed), a.services.unwrap_or(p.services), a.operators.unwrap_or(p.operators));
            q.edge_prob = a.edge_prob.unwrap_or(p.edge_prob);
            q.stakes = a.stakes.unwrap_or(p.stakes);
            q.profits = a.profits.unwrap_or(p.profits);
            *p = q;
        }
        _ => {}
    }
    let takes_alpha = matches!(sc, Scenario::Fig1 { .. } | Scenario::OverlapAppB(_));
    let bad = (random_only && !matches!(sc, Scenario::Random(_)))
        || (appb_only && !matches!(sc, Scenario::OverlapAppB(_)))
        || (a.alpha.is_some() && !takes_alpha);
    if bad {
        return Err(Failure::usage(format!("parameters given that scenario `{name}` does not take")));
    }
    Ok(sc)
}

/// Runs one command. `args` includes the program name.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let (format, quiet) = (cli.format, cli.quiet);
    match run(cli) {
        Ok(o) => {
            if !quiet {
                let text = match &o.output {
                    Output::Report(r) => r.render(format),
                    Output::Raw(t) => t.clone(),
                };
                if let Err(e) = out.write_all(text.as_bytes()) {
                    let _ = writeln!(err, "restake: cannot write report: {e}");
                    return EXIT_USAGE;
                }
            }
            if let (EXIT_INSECURE, Some(note)) = (o.code, &o.note) {
                let _ = writeln!(err, "restake: insecure: {note}");
            }
            o.code
        }
        Err(f) => {
            let _ = writeln!(err, "restake: {}", f.message);
            f.code
        }
    }
}
