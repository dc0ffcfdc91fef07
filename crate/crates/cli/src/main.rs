use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use adsem::atomic::{self, AtomicBinding, AtomicInstance, AtomicSystem};
use adsem::methods::{self, check_role_frames, check_two_phase, MethodsBinding, Scenario};
use adsem::semantics::{satisfies, Verdict};
use adsem::syntax::{self, ActivityDiagram, Diagnostic, Profile};
use adsem::system::Attributes;
use adsem::token_game::{
    self, analyze, initial_config, random_run, reachability_dot, reachable, ActionMode, StepMode, Underspecified,
};
use adsem::tracefile::{self, Header, Variant};
use adsem::Exec;

const EXIT_INVALID: u8 = 1;
const EXIT_VIOLATED: u8 = 2;
const EXIT_USAGE: u8 = 3;
const SEED_VAR: &str = "ADSEM_SEED";

#[derive(Parser)]
#[command(name = "adsem", version, about = "Activity diagram token-flow semantics workbench")]
struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a diagram against a profile's context conditions.
    Validate {
        file: PathBuf,
        #[arg(long, default_value = "general")]
        profile: Profile,
    },
    /// Print the diagram as Graphviz DOT.
    Render { file: PathBuf },
    /// Play the token game along one random run.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "interleaving")]
        mode: StepMode,
        #[arg(long, default_value = "instant")]
        actions: ActionMode,
        /// Maximum number of steps.
        #[arg(long, default_value_t = 1000)]
        bound: usize,
        /// Defaults to $ADSEM_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the run here and print a summary instead.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Explore all reachable configurations.
    Reach {
        file: PathBuf,
        #[arg(long, default_value = "interleaving")]
        mode: StepMode,
        #[arg(long, default_value = "instant")]
        actions: ActionMode,
        /// Maximum number of configurations.
        #[arg(long, default_value_t = token_game::DEFAULT_BOUND)]
        bound: usize,
        /// Also write the reachability graph as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Run a single-method diagram of atomic actions.
    #[command(name = "run-v1")]
    RunV1 {
        file: PathBuf,
        /// Initial attributes, `name=value`.
        store: Vec<String>,
        /// Method arguments, `name=value`.
        #[arg(long = "arg")]
        args: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write the trace here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a diagram whose actions are methods of objects.
    #[command(name = "run-v2")]
    RunV2 {
        file: PathBuf,
        scenario: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write the trace here and print a summary instead.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a trace file against a diagram.
    #[command(name = "check-trace")]
    CheckTrace {
        file: PathBuf,
        /// Trace file, or `-` for stdin.
        trace: PathBuf,
        #[arg(long)]
        variant: Variant,
        /// Also check the variant's own constraints (effects for v1, phase
        /// alternation and roles for v2).
        #[arg(long)]
        constraints: bool,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: EXIT_USAGE, error }
    }
}

impl From<io::Error> for Failure {
    fn from(error: io::Error) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INVALID, error: error.into() }
}

type Outcome = Result<u8, Failure>;

struct Out {
    human: bool,
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut stdout = io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
}

fn emit_line(text: &str) {
    emit(&format!("{text}\n"));
}

impl Out {
    fn json(&self, v: &serde_json::Value, human: impl FnOnce() -> String) {
        if self.human {
            emit_line(&human());
        } else {
            emit_line(&v.to_string());
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::from)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(Failure::from)
}

fn print_diagnostics(out: &Out, diags: &[Diagnostic]) {
    if out.human {
        for d in diags {
            emit_line(&d.to_string());
        }
    } else {
        emit_line(&serde_json::to_string(diags).expect("diagnostics serialize"));
    }
}

/// Parses a diagram; syntax errors are reported and end the command.
fn load(out: &Out, path: &Path) -> Result<ActivityDiagram, Failure> {
    let text = read(path)?;
    syntax::parse(&text).map_err(|diags| {
        print_diagnostics(out, &diags);
        invalid(anyhow!("{} does not parse", path.display()))
    })
}

/// Parses and validates; any error-level diagnostic ends the command.
fn load_valid(out: &Out, path: &Path, profile: Profile) -> Result<ActivityDiagram, Failure> {
    let ad = load(out, path)?;
    let errors: Vec<Diagnostic> = diagnostics(&ad, profile).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        print_diagnostics(out, &errors);
        return Err(invalid(anyhow!("{} is not valid", path.display())));
    }
    Ok(ad)
}

fn diagnostics(ad: &ActivityDiagram, profile: Profile) -> Vec<Diagnostic> {
    let mut diags = syntax::validate(ad, profile);
    if profile == Profile::Variant1 {
        diags.extend(atomic::validate_program(ad));
    }
    diags
}

fn seed_from_env() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| anyhow!("{SEED_VAR} is not an integer: `{v}`").into()),
        Err(_) => Ok(None),
    }
}

fn assignments(pairs: &[String]) -> Result<Attributes, Failure> {
    atomic::parse_assignments(pairs.iter().map(String::as_str)).map_err(|e| anyhow!(e).into())
}

fn run(cli: Cli) -> Outcome {
    let out = Out { human: cli.human };
    match cli.command {
        Command::Validate { file, profile } => {
            let ad = load(&out, &file)?;
            let diags = diagnostics(&ad, profile);
            if out.human && diags.is_empty() {
                emit_line(&format!("{}: ok", file.display()));
            } else {
                print_diagnostics(&out, &diags);
            }
            Ok(if diags.iter().any(Diagnostic::is_error) { EXIT_INVALID } else { 0 })
        }
        Command::Render { file } => {
            let ad = load(&out, &file)?;
            emit(&syntax::export_dot(&ad));
            Ok(0)
        }
        Command::Simulate { file, mode, actions, bound, seed, output } => {
            let ad = load_valid(&out, &file, Profile::General)?;
            let seed = match seed {
                Some(s) => s,
                None => seed_from_env()?.unwrap_or(0),
            };
            let start = initial_config(&ad).map_err(invalid)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = random_run(&ad, start, mode, &Underspecified, actions, bound, &mut rng);
            let params = json!({ "mode": mode, "actions": actions, "seed": seed, "bound": bound });
            let text = tracefile::write_run(&Header::new(ad.name(), Variant::Token, params, run.truncated), &ad, &run);
            match output {
                None => emit(&text),
                Some(path) => {
                    write(&path, &text)?;
                    let summary = json!({
                        "steps": run.steps.len(),
                        "truncated": run.truncated,
                        "final": run.last().is_final(&ad),
                    });
                    out.json(&summary, || {
                        format!("{} steps, final: {}, truncated: {}", run.steps.len(), run.last().is_final(&ad), run.truncated)
                    });
                }
            }
            Ok(0)
        }
        Command::Reach { file, mode, actions, bound, dot, sequential } => {
            let ad = load_valid(&out, &file, Profile::General)?;
            if bound == 0 {
                return Err(anyhow!("--bound must be positive").into());
            }
            let exec = if sequential { Exec::Sequential } else { Exec::default() };
            let reach = reachable(&ad, mode, &Underspecified, actions, bound, exec).map_err(invalid)?;
            let report = analyze(&ad, &reach);
            if let Some(path) = dot {
                write(&path, &reachability_dot(&ad, &reach))?;
            }
            out.json(&serde_json::to_value(&report).expect("reports serialize"), || {
                serde_json::to_string_pretty(&report).expect("reports serialize")
            });
            Ok(0)
        }
        Command::RunV1 { file, store, args, max_steps, output } => {
            let ad = load_valid(&out, &file, Profile::Variant1)?;
            let store = assignments(&store)?;
            let args = assignments(&args)?;
            let inst = AtomicInstance::new(&ad).with_params(args.keys().cloned().collect());
            let sys = AtomicSystem::new(&ad, &inst).map_err(invalid)?;
            let result = sys.run(&store, &args, max_steps).map_err(invalid)?;
            if let Some(path) = &output {
                let params = json!({ "store": store, "args": args });
                let header = Header::new(ad.name(), Variant::V1, params, result.trace.truncated);
                write(path, &tracefile::write_states(&header, &result.trace))?;
            }
            let final_store = result.final_store(&inst.callee);
            let summary = json!({
                "store": final_store,
                "returned": result.returned.is_some(),
                "truncated": result.trace.truncated,
                "steps": result.fired.len(),
            });
            out.json(&summary, || {
                let attrs: Vec<String> = final_store.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let status = if result.returned.is_some() { "returned" } else { "truncated" };
                format!("{} after {} steps: {}", status, result.fired.len(), attrs.join(" "))
            });
            Ok(0)
        }
        Command::RunV2 { file, scenario, max_steps, output } => {
            let ad = load_valid(&out, &file, Profile::General)?;
            let mut sc = Scenario::from_json(&read(&scenario)?).map_err(Failure::from_display)?;
            if let Some(seed) = seed_from_env()? {
                sc.seed = seed;
            }
            let inst = sc.instance(&ad);
            let sim = methods::simulate(&ad, &inst, &sc, max_steps).map_err(invalid)?;
            let params = serde_json::to_value(&sc).expect("scenarios serialize");
            let header = Header::new(ad.name(), Variant::V2, params, sim.trace.truncated);
            let text = tracefile::write_states(&header, &sim.trace);
            match output {
                None => emit(&text),
                Some(path) => {
                    write(&path, &text)?;
                    let summary = json!({ "outcome": sim.outcome, "steps": sim.events.len(), "events": sim.events });
                    out.json(&summary, || {
                        let lines: Vec<String> = sim.events.iter().map(|e| format!("{:>4} {} {:?}", e.step, e.node, e.kind)).collect();
                        format!("{}\noutcome: {:?}", lines.join("\n"), sim.outcome)
                    });
                }
            }
            Ok(0)
        }
        Command::CheckTrace { file, trace, variant, constraints } => check_trace(&out, &file, &trace, variant, constraints),
    }
}

impl Failure {
    fn from_display(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, error: anyhow!(e.to_string()) }
    }
}

fn report_verdict(out: &Out, verdict: &Verdict) -> u8 {
    out.json(&serde_json::to_value(verdict).expect("verdicts serialize"), || verdict.to_string());
    if verdict.accepted() {
        0
    } else {
        EXIT_VIOLATED
    }
}

fn violated(out: &Out, what: &str, detail: serde_json::Value) -> u8 {
    let v = json!({ "verdict": "violated", "constraint": what, "detail": detail });
    out.json(&v, || format!("{what} violated: {detail}"));
    EXIT_VIOLATED
}

fn rejected(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_VIOLATED, error: anyhow!("trace rejected: {e}") }
}

fn check_trace(out: &Out, file: &Path, trace: &Path, variant: Variant, constraints: bool) -> Outcome {
    let text = read(trace)?;
    let header = tracefile::read_header(&text).map_err(Failure::from_display)?;
    if header.variant != variant {
        return Err(anyhow!("trace was written for variant {}, not {variant}", header.variant).into());
    }
    match variant {
        Variant::Token => {
            let ad = load_valid(out, file, Profile::General)?;
            let (_, run) = tracefile::read_run(&text, &ad).map_err(Failure::from_display)?;
            let (b, trace) = token_game::as_binding(&ad, &Underspecified, &run).map_err(rejected)?;
            let verdict = satisfies(&trace, &b).map_err(rejected)?;
            Ok(report_verdict(out, &verdict))
        }
        Variant::V1 => {
            let ad = load_valid(out, file, Profile::Variant1)?;
            let (header, trace) = tracefile::read_states(&text).map_err(Failure::from_display)?;
            let args: BTreeMap<String, serde_json::Value> =
                header.params.get("args").and_then(|a| serde_json::from_value(a.clone()).ok()).unwrap_or_default();
            let inst = AtomicInstance::new(&ad).with_params(args.into_keys().collect());
            let b = AtomicBinding { ad: &ad, inst: &inst };
            let verdict = satisfies(&trace, &b).map_err(rejected)?;
            if constraints && verdict.accepted() {
                let sys = AtomicSystem::new(&ad, &inst).map_err(invalid)?;
                if let Some(m) = sys.check_effect_constraint(&trace).map_err(rejected)? {
                    let detail = json!({ "index": m.index, "node": m.node, "stepped": m.stepped, "effect": m.effect });
                    return Ok(violated(out, "effect", detail));
                }
            }
            Ok(report_verdict(out, &verdict))
        }
        Variant::V2 => {
            let ad = load_valid(out, file, Profile::General)?;
            let (header, trace) = tracefile::read_states(&text).map_err(Failure::from_display)?;
            let sc: Scenario = serde_json::from_value(header.params).unwrap_or_default();
            let inst = sc.instance(&ad);
            let b = MethodsBinding { ad: &ad, inst: &inst };
            let verdict = satisfies(&trace, &b).map_err(rejected)?;
            if constraints && verdict.accepted() {
                if let Some(v) = check_two_phase(&b, &trace).map_err(rejected)? {
                    return Ok(violated(out, "two-phase", serde_json::to_value(v).expect("serializes")));
                }
                if let Err(v) = check_role_frames(&ad, &inst, &inst.universe(&ad), &trace) {
                    return Ok(violated(out, "roles", serde_json::to_value(v).expect("serializes")));
                }
            }
            Ok(report_verdict(out, &verdict))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            code
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(code)
}
