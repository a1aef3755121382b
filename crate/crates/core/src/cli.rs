//! Command-line front end: `solve`, `verify` and `gen`.
//!
//! Allocation files look like
//!
//! ```json
//! {
//!   "bundles": {"alice": ["a", "b"], "bob": []},
//!   "payments": {"alice": "1", "bob": "0"},
//!   "pieces": {"alice": [["0", "1/2"]], "bob": [["1/2", "1"]]}
//! }
//! ```
//!
//! `payments` and `pieces` are optional. All numbers are rational strings.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 parse error, 3 search
//! budget exhausted, 4 verification failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::division::{solve_efm, solve_efm_money, DivisionError, MoneySplit};
use crate::envy::{build_envy_graph, envy_freeable_by_permutation, has_positive_cycle, PERMUTATION_ORACLE_MAX_AGENTS};
use crate::model::{
    instance_to_json, parse_instance, CakePiece, DensitySegment, DiscreteAllocation, Divisible, Instance,
    MixedAllocation, ModelError, Ratio,
};
use crate::solver::{solve, SolveCertificate, SolveError, SolverConfig, DEFAULT_BUDGET};
use crate::verify::{check_ef1, check_efm, FairnessReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "efm",
    version,
    about = "Fair division of mixed goods, chores and a divisible resource"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an allocation for an instance file.
    Solve(SolveArgs),
    /// Check an allocation file against an instance file.
    Verify(VerifyArgs),
    /// Write a seeded random instance.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// EF1 and envy-freeable allocation of the items only.
    Discrete,
    /// EFM allocation of the items plus the instance's cake.
    Efm,
    /// EFM allocation of the items plus one unit of money.
    Money,
}

#[derive(Debug, clap::Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value = "discrete")]
    pub mode: Mode,
    /// Maximum candidates per exhaustive search.
    #[arg(long, default_value_t = DEFAULT_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    /// Use local search when a search exceeds the budget (no optimality guarantee).
    #[arg(long)]
    pub heuristic: bool,
    /// Worker threads for the searches (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    pub instance: PathBuf,
    /// Allocation output (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Where to write the solve certificate.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub allocation: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub agents: u64,
    #[arg(long, default_value_t = 5)]
    pub items: u64,
    /// Add a piecewise-constant cake with up to three segments per agent.
    #[arg(long)]
    pub cake: bool,
    /// Make every utility negative.
    #[arg(long)]
    pub chores_only: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Other(_) => EXIT_OTHER,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<DivisionError> for CliError {
    fn from(e: DivisionError) -> Self {
        match e {
            DivisionError::Solve(s) => s.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Parse(e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("efm: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(args) => match args.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Other(e.to_string()))?
                .install(|| run_solve(&args)),
            None => run_solve(&args),
        },
        Command::Verify(args) => run_verify(&args),
        Command::Gen(args) => run_gen(&args),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDoc {
    pub bundles: IndexMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payments: Option<IndexMap<String, Ratio>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<IndexMap<String, Vec<[Ratio; 2]>>>,
}

impl AllocationDoc {
    pub fn new(inst: &Instance, a: &DiscreteAllocation, divisible: Option<&Divisible>) -> Self {
        let agents = inst.agent_ids();
        let bundles = agents
            .iter()
            .zip(&a.bundles)
            .map(|(id, b)| (id.clone(), b.iter().map(|t| inst.item_ids()[t].clone()).collect()))
            .collect();
        let (mut payments, mut pieces) = (None, None);
        match divisible {
            Some(Divisible::Payments(p)) => payments = Some(agents.iter().cloned().zip(p.iter().cloned()).collect()),
            Some(Divisible::Pieces(c)) => {
                pieces = Some(
                    agents
                        .iter()
                        .zip(c)
                        .map(|(id, piece)| {
                            let ivs = piece
                                .intervals
                                .iter()
                                .map(|iv| [iv.start.clone(), iv.end.clone()])
                                .collect();
                            (id.clone(), ivs)
                        })
                        .collect(),
                )
            }
            None => {}
        }
        AllocationDoc {
            bundles,
            payments,
            pieces,
        }
    }

    /// Resolves ids against the instance. Agents absent from `bundles` hold
    /// nothing; every item must be assigned exactly once.
    pub fn resolve(
        &self,
        inst: &Instance,
    ) -> Result<(DiscreteAllocation, Option<Divisible>, Option<Divisible>), ModelError> {
        let n = inst.n();
        let agent = |id: &str| {
            inst.agent_index(id)
                .ok_or_else(|| ModelError::UnknownAgent(id.to_string()))
        };
        let mut a = DiscreteAllocation::empty(n);
        for (id, items) in &self.bundles {
            let i = agent(id)?;
            for t in items {
                let k = inst
                    .item_index(t)
                    .ok_or_else(|| ModelError::InvalidAllocation(format!("unknown item `{t}`")))?;
                if a.bundles[i].contains(k) {
                    return Err(ModelError::InvalidAllocation(format!("item `{t}` listed twice")));
                }
                a.bundles[i].insert(k);
            }
        }
        a.validate(inst)?;
        let payments = match &self.payments {
            None => None,
            Some(map) => {
                let mut p = vec![Ratio::zero(); n];
                for (id, v) in map {
                    p[agent(id)?] = v.clone();
                }
                Some(Divisible::Payments(p))
            }
        };
        let pieces = match &self.pieces {
            None => None,
            Some(map) => {
                let mut c = vec![CakePiece::empty(); n];
                for (id, ivs) in map {
                    let i = agent(id)?;
                    for [s, e] in ivs {
                        if s > e {
                            return Err(ModelError::InvalidAllocation(format!(
                                "interval [{s}, {e}] of `{id}` is reversed"
                            )));
                        }
                        c[i].push(s.clone(), e.clone());
                    }
                }
                Some(Divisible::Pieces(c))
            }
        };
        Ok((a, payments, pieces))
    }
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    #[serde(flatten)]
    solver: &'a SolveCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    paid_agents: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    money: Option<&'a MoneySplit>,
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    let inst = parse_instance(&read(&args.instance)?)?;
    let config = SolverConfig {
        budget: args.budget,
        heuristic: args.heuristic,
    };
    let (doc, cert) = match args.mode {
        Mode::Discrete => {
            let sol = solve(&inst, &config)?;
            let cert = CertificateDoc {
                solver: &sol.certificate,
                paid_agents: None,
                money: None,
            };
            (AllocationDoc::new(&inst, &sol.allocation, None), to_json(&cert))
        }
        Mode::Money => {
            let (sol, money) = solve_efm_money(&inst, &config)?;
            let divisible = Divisible::Payments(money.payments.0.clone());
            let cert = CertificateDoc {
                solver: &sol.certificate,
                paid_agents: Some(inst.agent_ids().to_vec()),
                money: Some(&money),
            };
            (
                AllocationDoc::new(&inst, &sol.allocation, Some(&divisible)),
                to_json(&cert),
            )
        }
        Mode::Efm => {
            if !inst.has_cake() {
                return Err(CliError::Parse(
                    "efm mode needs a `cake` section in the instance".into(),
                ));
            }
            let out = solve_efm(&inst, &config)?;
            let cert = CertificateDoc {
                solver: &out.discrete.certificate,
                paid_agents: Some(out.paid.iter().map(|&i| inst.agent_ids()[i].clone()).collect()),
                money: out.money.as_ref(),
            };
            let doc = AllocationDoc::new(&inst, &out.allocation.discrete, Some(&out.allocation.divisible));
            (doc, to_json(&cert))
        }
    };
    emit(args.output.as_deref(), &to_json(&doc))?;
    if let Some(path) = &args.certificate {
        write_atomic(path, &cert)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnvyFreeabilityReport {
    pub no_positive_cycle: bool,
    /// Permutation oracle; absent above its agent limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation_oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub ef1: FairnessReport,
    pub envy_freeable: EnvyFreeabilityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efm: Option<FairnessReport>,
}

/// Runs every applicable check. With both pieces and payments present the
/// pieces are checked.
pub fn verify_allocation(inst: &Instance, doc: &AllocationDoc) -> Result<VerifyReport, ModelError> {
    let (a, payments, pieces) = doc.resolve(inst)?;
    let ef1 = check_ef1(inst, &a);
    let no_positive_cycle = !has_positive_cycle(&build_envy_graph(inst, &a, None));
    let permutation_oracle =
        (inst.n() <= PERMUTATION_ORACLE_MAX_AGENTS).then(|| envy_freeable_by_permutation(inst, &a).unwrap_or(false));
    let efm = match pieces.or(payments) {
        None => None,
        Some(divisible) => {
            let mixed = MixedAllocation { discrete: a, divisible };
            mixed.validate(inst)?;
            Some(check_efm(inst, &mixed))
        }
    };
    let passed = ef1.verdict
        && no_positive_cycle
        && permutation_oracle.unwrap_or(true)
        && efm.as_ref().is_none_or(|r| r.verdict);
    Ok(VerifyReport {
        passed,
        ef1,
        envy_freeable: EnvyFreeabilityReport {
            no_positive_cycle,
            permutation_oracle,
        },
        efm,
    })
}

fn run_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let inst = parse_instance(&read(&args.instance)?)?;
    let doc: AllocationDoc =
        serde_json::from_str(&read(&args.allocation)?).map_err(|e| CliError::Parse(format!("allocation: {e}")))?;
    let report = verify_allocation(&inst, &doc)?;
    let ids = inst.agent_ids();
    let line = |name: &str, r: &FairnessReport| {
        let mut s = format!("{name}: {}", if r.verdict { "pass" } else { "FAIL" });
        for w in &r.witnesses {
            s.push_str(&format!("\n  {} -> {}: {}", ids[w.envier], ids[w.envied], w.reason));
        }
        s
    };
    println!("{}", line("EF1", &report.ef1));
    let ef = &report.envy_freeable;
    let oracle = match ef.permutation_oracle {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "skipped",
    };
    println!(
        "envy-freeable: cycle check {}, permutation oracle {oracle}",
        if ef.no_positive_cycle { "pass" } else { "FAIL" }
    );
    if let Some(r) = &report.efm {
        println!("{}", line("EFM", r));
    }
    if let Some(path) = &args.report {
        write_atomic(path, &to_json(&report))?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Verification("allocation failed verification".into()))
    }
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub agents: usize,
    pub items: usize,
    pub cake: bool,
    pub chores_only: bool,
}

/// Integer utilities in `[-3, 3]` (`[-3, -1]` for chores only). The cake
/// gives each agent up to three segments on a grid of twelfths, rescaled so
/// the agent values the whole cake at 1; an agent whose segments all have
/// density 0 values the cake at 0.
pub fn generate_instance(cfg: &GenConfig) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = if cfg.chores_only { (-3, -1) } else { (-3, 3) };
    let utilities: Vec<Vec<Ratio>> = (0..cfg.agents)
        .map(|_| {
            (0..cfg.items)
                .map(|_| Ratio::from_integer(rng.gen_range(lo..=hi)))
                .collect()
        })
        .collect();
    let agents = (0..cfg.agents).map(|i| format!("a{i}")).collect();
    let items = (0..cfg.items).map(|t| format!("t{t}")).collect();
    let cake = cfg
        .cake
        .then(|| (0..cfg.agents).map(|_| random_density(&mut rng)).collect());
    Instance::new(agents, items, utilities, cake).expect("generated instances are valid")
}

fn random_density(rng: &mut ChaCha8Rng) -> Vec<DensitySegment> {
    let segments = rng.gen_range(1..=3);
    let mut cuts: Vec<i64> = Vec::new();
    while cuts.len() < segments - 1 {
        let c = rng.gen_range(1..12);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(12);
    let raw: Vec<(i64, i64, i64)> = bounds
        .windows(2)
        .map(|w| (w[0], w[1], rng.gen_range(0..=3)))
        .filter(|&(_, _, d)| d > 0)
        .collect();
    // Total value in units of 1/12.
    let total: i64 = raw.iter().map(|(s, e, d)| (e - s) * d).sum();
    raw.into_iter()
        .map(|(s, e, d)| DensitySegment::new(Ratio::new(s, 12), Ratio::new(e, 12), Ratio::new(12 * d, total)))
        .collect()
}

fn run_gen(args: &GenArgs) -> Result<(), CliError> {
    let cfg = GenConfig {
        seed: args.seed,
        agents: args.agents as usize,
        items: args.items as usize,
        cake: args.cake,
        chores_only: args.chores_only,
    };
    emit(args.output.as_deref(), &instance_to_json(&generate_instance(&cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(seed: u64, cake: bool, chores_only: bool) -> Instance {
        generate_instance(&GenConfig {
            seed,
            agents: 3,
            items: 5,
            cake,
            chores_only,
        })
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(
            instance_to_json(&gen(1, true, false)),
            instance_to_json(&gen(1, true, false))
        );
        assert_ne!(
            instance_to_json(&gen(1, false, false)),
            instance_to_json(&gen(2, false, false))
        );
    }

    #[test]
    fn generator_respects_options() {
        let inst = gen(7, false, true);
        assert!((0..inst.m()).all(|t| inst.is_objective_chore(t)));
        for seed in 0..50 {
            let inst = gen(seed, true, false);
            for i in 0..inst.n() {
                let total = inst.cake_total(i);
                assert!(total.is_zero() || total == Ratio::one());
                assert!(inst.cake().unwrap()[i].len() <= 3);
            }
        }
    }

    #[test]
    fn allocation_doc_round_trip() {
        let inst = gen(3, true, false);
        let out = solve_efm(&inst, &SolverConfig::default()).unwrap();
        let doc = AllocationDoc::new(&inst, &out.allocation.discrete, Some(&out.allocation.divisible));
        let text = to_json(&doc);
        let back: AllocationDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let report = verify_allocation(&inst, &back).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn resolve_rejects_inconsistent_files() {
        let inst = Instance::from_integers(&[vec![1, -1], vec![1, -1]]);
        let doc = |json: &str| -> AllocationDoc { serde_json::from_str(json).unwrap() };
        assert!(doc(r#"{"bundles": {"a0": ["t0"], "a1": ["t1"]}}"#)
            .resolve(&inst)
            .is_ok());
        assert!(doc(r#"{"bundles": {"zz": ["t0", "t1"]}}"#).resolve(&inst).is_err());
        assert!(doc(r#"{"bundles": {"a0": ["t0"]}}"#).resolve(&inst).is_err());
        assert!(doc(r#"{"bundles": {"a0": ["t0", "t1"], "a1": ["t1"]}}"#)
            .resolve(&inst)
            .is_err());
    }

    #[test]
    fn twin_split_fails_ef1() {
        let inst = Instance::from_integers(&[vec![1, -1], vec![1, -1]]);
        let doc: AllocationDoc = serde_json::from_str(r#"{"bundles": {"a0": ["t0"], "a1": ["t1"]}}"#).unwrap();
        let report = verify_allocation(&inst, &doc).unwrap();
        assert!(!report.passed);
        assert_eq!(report.ef1.witnesses.len(), 1);
        assert_eq!(report.ef1.witnesses[0].envier, 1);
        assert_eq!(report.envy_freeable.permutation_oracle, Some(true));
    }

    #[test]
    fn parse_errors_map_to_exit_codes() {
        assert_eq!(main_with_args(["efm", "solve", "--budget", "0", "x.json"]), EXIT_PARSE);
        assert_eq!(main_with_args(["efm", "frobnicate"]), EXIT_PARSE);
        assert_eq!(
            main_with_args(["efm", "solve", "/nonexistent/instance.json"]),
            EXIT_OTHER
        );
    }
}
