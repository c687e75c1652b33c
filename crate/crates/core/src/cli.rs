//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eldgba::FrontierMode;
use crate::error::{Error, Result};
use crate::instances::{random_instance, random_policy, InstanceSize};
use crate::learning::{train, StartMode, TrainConfig};
use crate::persist::{PolicyFile, RunInfo};
use crate::product::{count_state_pairs, reachable_states, ExplicitProduct, ProductModel, RelaxedProduct, DEFAULT_BUDGET};
use crate::rollout::{execute_policy, validate_trajectory};
use crate::scenario::{Instance, Scenario, SCALED_SIZES};
use crate::verification::{
    check_lemma_accepting_sets, check_theorem1, compare_with_optimum, induced_chain_explicit, value_iteration,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ldgba-rl", version, about = "Soft-constrained LTL controllers via Q-learning on relaxed product MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StartArg {
    Fixed,
    Random,
}

impl From<StartArg> for StartMode {
    fn from(s: StartArg) -> Self {
        match s {
            StartArg::Fixed => StartMode::Fixed,
            StartArg::Random => StartMode::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrontierArg {
    Tracking,
    Disabled,
}

impl From<FrontierArg> for FrontierMode {
    fn from(f: FrontierArg) -> Self {
        match f {
            FrontierArg::Tracking => FrontierMode::Tracking,
            FrontierArg::Disabled => FrontierMode::Disabled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Theorem1,
    Lemma1,
    ProductSize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a policy with Q-learning and save it as JSON.
    Train {
        /// Scenario file or `builtin:NAME`.
        #[arg(long)]
        scenario: String,
        /// Replaces the scenario's automaton file.
        #[arg(long)]
        automaton: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "r-acc")]
        r_acc: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        start: Option<StartArg>,
        /// Stop once the windowed mean reward settles.
        #[arg(long)]
        until_converged: bool,
        /// `disabled` drops the frontier (ablation).
        #[arg(long, value_enum, default_value = "tracking")]
        frontier: FrontierArg,
        /// Policy file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Learning-curve CSV to write.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Roll out a saved policy.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trajectory CSV to write; printed when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Structural checks on a scenario and on random instances.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',', default_value = "theorem1,lemma1,product-size")]
        checks: Vec<Check>,
        #[arg(long, default_value_t = 0)]
        random_instances: usize,
        #[arg(long, default_value = "builtin:fig1")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Optimal values by exact solution; compares a saved policy if given.
    Oracle {
        #[arg(long, default_value = "builtin:fig1")]
        scenario: String,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BUDGET * 10)]
        budget: usize,
    },
    /// Workspace size, MDP states, product states and episodes to convergence.
    Stats {
        /// Scenarios to report; the scaled grids when absent.
        #[arg(long)]
        scenario: Vec<String>,
        /// Episode cap for the convergence run; 0 skips training.
        #[arg(long, default_value_t = 20_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `argv` (program name first) and runs the command, writing reports
/// to `out`. Returns the process exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn load(scenario: &str, automaton: Option<&str>) -> Result<Instance<f64>> {
    let (mut sc, base) = Scenario::load(scenario)?;
    match automaton {
        Some(a) => {
            sc.automaton.file = a.to_string();
            sc.instantiate(None)
        }
        None => sc.instantiate(base.as_deref()),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<bool> {
    match cmd {
        Command::Train {
            scenario,
            automaton,
            episodes,
            tau,
            beta,
            gamma,
            r_acc,
            seed,
            start,
            until_converged,
            frontier,
            out: path,
            curve,
        } => {
            let inst = load(&scenario, automaton.as_deref())?;
            let sc = &inst.scenario;
            let run = RunInfo {
                scenario: scenario.clone(),
                automaton,
                frontier: frontier.into(),
                r_acc: r_acc.unwrap_or(sc.reward.r_acc),
                beta: beta.unwrap_or(sc.reward.beta),
                gamma: gamma.unwrap_or(sc.reward.gamma),
                episodes: episodes.unwrap_or(sc.episodes.episodes),
                tau: tau.unwrap_or(sc.episodes.tau),
                seed,
            };
            let mut cfg = TrainConfig::new(run.reward()?, run.episodes, run.tau, seed);
            cfg.start = start.map_or(sc.episodes.start, StartMode::from);
            cfg.stop_on_convergence = until_converged;
            let model = RelaxedProduct::with_mode(&inst.mdp, &inst.ldgba, run.frontier);
            let res = train(&model, &cfg)?;
            writeln!(out, "episodes run: {}", res.episodes_run).map_err(io)?;
            match res.curve.converged_at {
                Some(e) => writeln!(out, "converged at episode: {e}"),
                None => writeln!(out, "converged at episode: -"),
            }
            .map_err(io)?;
            writeln!(out, "q-table rows: {}", res.qtable.len()).map_err(io)?;
            writeln!(out, "updates: {}", res.updates).map_err(io)?;
            writeln!(out, "final mean reward: {:.4}", res.curve.mean_reward.last().copied().unwrap_or(0.0))
                .map_err(io)?;
            if let Some(p) = curve {
                fs::write(&p, res.curve.to_csv())?;
            }
            if let Some(p) = path {
                let file = PolicyFile::new(run, &inst.mdp, &res.qtable, &res.policy);
                fs::write(&p, file.to_json()?)?;
                writeln!(out, "policy written to {}", p.display()).map_err(io)?;
            }
            Ok(true)
        }
        Command::Simulate { policy, steps, seed, csv } => {
            let file = PolicyFile::from_json(&fs::read_to_string(&policy)?)?;
            let inst = load(&file.run.scenario, file.run.automaton.as_deref())?;
            let pol = file.policy(&inst.mdp)?;
            let cfg = file.run.reward()?;
            let model = RelaxedProduct::with_mode(&inst.mdp, &inst.ldgba, file.run.frontier);
            let traj = execute_policy(&model, &pol, &cfg, steps, seed)?;
            let text = traj.to_csv(&model);
            match csv {
                Some(p) => fs::write(p, &text)?,
                None => out.write_all(text.as_bytes()).map_err(io)?,
            }
            let mut undefined = traj.undefined_states();
            undefined.sort();
            undefined.dedup();
            for x in &undefined {
                eprintln!("warning: policy undefined at ({}, l={}, q{}, T={}); used the first action",
                    inst.mdp.state_name(x.s), x.l.bits(), x.q, x.t);
            }
            let valid = validate_trajectory(&model, &traj);
            writeln!(
                out,
                "steps: {}  reward: {:.4}  violation: {}  rounds: {}  set visits: {:?}  undefined: {}",
                steps,
                traj.total_reward,
                traj.total_violation,
                traj.rounds,
                traj.set_visits,
                undefined.len()
            )
            .map_err(io)?;
            if let Err(e) = &valid {
                writeln!(out, "trajectory check: FAIL ({e})").map_err(io)?;
            }
            Ok(valid.is_ok())
        }
        Command::Verify { checks, random_instances, scenario, seed, budget } => {
            let inst = load(&scenario, None)?;
            let mut ok = true;
            for check in checks {
                ok &= match check {
                    Check::Theorem1 => verify_theorem1(&inst, random_instances, seed, budget, out)?,
                    Check::Lemma1 => verify_lemma1(&inst, random_instances, seed, budget, out)?,
                    Check::ProductSize => product_size(&inst, budget, out)?,
                };
            }
            Ok(ok)
        }
        Command::Oracle { scenario, tolerance, policy, budget } => {
            let inst = load(&scenario, None)?;
            let cfg = inst.scenario.reward_config::<f64>()?;
            let model = RelaxedProduct::new(&inst.mdp, &inst.ldgba);
            let ep = ExplicitProduct::build(&model, &model.initial_states(), budget)?;
            let sol = value_iteration(&ep, &cfg, tolerance)?;
            let e0 = ep.index[&model.initial()];
            let chain = induced_chain_explicit(&ep, &sol.policy, &[e0])?;
            writeln!(out, "explicit states: {}  transitions: {}", ep.len(), ep.num_transitions()).map_err(io)?;
            writeln!(out, "optimal value at start: {:.6}", sol.values[e0]).map_err(io)?;
            writeln!(
                out,
                "optimal policy: accepting class {}  long-run violation {:.6}",
                chain.has_accepting_class(),
                chain.long_run_violation()?[0]
            )
            .map_err(io)?;
            if let Some(p) = policy {
                let file = PolicyFile::from_json(&fs::read_to_string(&p)?)?;
                let pol = file.policy(&inst.mdp)?;
                let cmp = compare_with_optimum(&model, &pol, &cfg, tolerance, budget)?;
                writeln!(
                    out,
                    "learned value at start: {:.6}  relative gap: {:.4}  accepting class {}  long-run violation {:.6}  undefined states {}",
                    cmp.learned,
                    cmp.relative_gap(),
                    cmp.learned_chain.has_accepting_class(),
                    cmp.learned_chain.long_run_violation()?[0],
                    cmp.learned_chain.undefined.len()
                )
                .map_err(io)?;
            }
            Ok(true)
        }
        Command::Stats { scenario, episodes, seed } => {
            let names: Vec<String> = if scenario.is_empty() {
                SCALED_SIZES.iter().map(|n| format!("builtin:grid{n}")).collect()
            } else {
                scenario
            };
            writeln!(out, "workspace,mdp_states,product_states,episodes_to_convergence").map_err(io)?;
            for name in names {
                let row = stats_row(&name, episodes, seed)?;
                writeln!(out, "{row}").map_err(io)?;
            }
            Ok(true)
        }
    }
}

/// One CSV row of `stats`.
pub fn stats_row(scenario: &str, episodes: usize, seed: u64) -> Result<String> {
    let inst = load(scenario, None)?;
    let (mdp_states, pairs) = product_pairs(&inst, DEFAULT_BUDGET)?;
    let label = match &inst.scenario.workspace {
        crate::scenario::Workspace::Grid { rows, cols, .. } => format!("{rows}x{cols}"),
        _ => inst.scenario.name.clone(),
    };
    let conv = if episodes == 0 {
        "-".to_string()
    } else {
        let model = RelaxedProduct::new(&inst.mdp, &inst.ldgba);
        let mut cfg = TrainConfig::new(inst.scenario.reward_config()?, episodes, inst.scenario.episodes.tau, seed);
        cfg.start = inst.scenario.episodes.start;
        cfg.stop_on_convergence = true;
        let res = train(&model, &cfg)?;
        res.curve.converged_at.map_or_else(|| format!(">{episodes}"), |e| e.to_string())
    };
    Ok(format!("{label},{mdp_states},{pairs},{conv}"))
}

/// MDP states and distinct reachable (MDP state, automaton state) pairs.
pub fn product_pairs(inst: &Instance<f64>, budget: usize) -> Result<(usize, usize)> {
    let model = RelaxedProduct::new(&inst.mdp, &inst.ldgba);
    let states = reachable_states(&model, &model.initial_states(), budget)?;
    Ok((inst.mdp.num_states(), count_state_pairs(&states, &inst.ldgba)))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn verify_theorem1(inst: &Instance<f64>, n: usize, seed: u64, budget: usize, out: &mut dyn Write) -> Result<bool> {
    let rep = check_theorem1(&inst.mdp, &inst.ldgba, budget)?;
    write!(out, "theorem1 on {}:\n{rep}", inst.scenario.name).map_err(io)?;
    let mut ok = rep.passed();
    if n > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = InstanceSize::default();
        let mut failures = 0;
        for i in 0..n {
            let (mdp, ldgba) = random_instance::<f64, _>(&size, &mut rng)?;
            let rep = check_theorem1(&mdp, &ldgba, budget)?;
            if !rep.passed() {
                failures += 1;
                write!(out, "random instance {i}:\n{rep}").map_err(io)?;
            }
        }
        writeln!(out, "theorem1 on {n} random instances: {failures} failures: {}", verdict(failures == 0))
            .map_err(io)?;
        ok &= failures == 0;
    }
    writeln!(out, "theorem1: {}", verdict(ok)).map_err(io)?;
    Ok(ok)
}

fn verify_lemma1(inst: &Instance<f64>, n: usize, seed: u64, budget: usize, out: &mut dyn Write) -> Result<bool> {
    let cfg = inst.scenario.reward_config::<f64>()?;
    let model = RelaxedProduct::new(&inst.mdp, &inst.ldgba);
    let ep = ExplicitProduct::build(&model, &model.initial_states(), budget)?;
    let sol = value_iteration(&ep, &cfg, 1e-8)?;
    let chain = induced_chain_explicit(&ep, &sol.policy, &ep.roots)?;
    let rep = check_lemma_accepting_sets(&chain);
    writeln!(
        out,
        "lemma1 on {} (optimal policy): {} classes, {} accepting, {} mixed",
        inst.scenario.name,
        rep.classes,
        rep.accepting_classes,
        rep.violations.len()
    )
    .map_err(io)?;
    let mut ok = rep.holds();
    if n > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = InstanceSize::default();
        let mut failures = 0;
        for i in 0..n {
            let (mdp, ldgba) = random_instance::<f64, _>(&size, &mut rng)?;
            let model = RelaxedProduct::new(&mdp, &ldgba);
            let ep = ExplicitProduct::build(&model, &model.initial_states(), budget)?;
            let pol = random_policy(&ep, &mut rng);
            let chain = induced_chain_explicit(&ep, &pol, &ep.roots)?;
            let rep = check_lemma_accepting_sets(&chain);
            if !rep.holds() {
                failures += 1;
                writeln!(out, "random instance {i}: mixed classes {:?}", rep.violations).map_err(io)?;
            }
        }
        writeln!(out, "lemma1 on {n} random policies: {failures} failures: {}", verdict(failures == 0)).map_err(io)?;
        ok &= failures == 0;
    }
    writeln!(out, "lemma1: {}", verdict(ok)).map_err(io)?;
    Ok(ok)
}

fn product_size(inst: &Instance<f64>, budget: usize, out: &mut dyn Write) -> Result<bool> {
    let (mdp_states, pairs) = product_pairs(inst, budget)?;
    let bound = mdp_states * inst.ldgba.num_states();
    let ok = pairs > 0 && pairs <= bound;
    writeln!(
        out,
        "product-size on {}: {mdp_states} MDP states, {pairs} (s,q) pairs (bound {bound}): {}",
        inst.scenario.name,
        verdict(ok)
    )
    .map_err(io)?;
    Ok(ok)
}
