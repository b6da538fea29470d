//! Command-line front end. Exit codes: 0 success or informative data,
//! 2 not informative or verification failure, 1 usage, parse or input error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::io::{self, LoadedProblem, RegulatorFile};
use crate::model::{compatible_set, compatible_set_unknown_a3, CompatibleSet, Problem, Regulator};
use crate::simulation;
use crate::synthesis::{
    self, ConditionReport, Synthesis, SynthesisConfig, SynthesisReport, TryOrder,
};
use crate::Matrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ddreg",
    version,
    about = "Data-driven output regulation from input/state data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SynthFlags {
    /// Which condition to try first: condition2-first or condition1-first.
    #[arg(long)]
    pub order: Option<String>,
    /// Treat A3 as unknown.
    #[arg(long)]
    pub unknown_a3: bool,
    /// Seed for the LMI solver's random restarts.
    #[arg(long, env = "DDREG_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide informativity and print ranks, LMI margin and residuals.
    Check {
        problem: PathBuf,
        #[command(flatten)]
        flags: SynthFlags,
    },
    /// Synthesize a regulator and write it to a regulator file.
    Synth {
        problem: PathBuf,
        /// Regulator file to write; untouched when the data are not informative.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: SynthFlags,
    },
    /// Check a regulator against sampled members of the compatible set.
    Verify {
        problem: PathBuf,
        regulator: PathBuf,
        /// Random members in addition to the particular one.
        #[arg(long, default_value_t = 25)]
        members: usize,
        #[arg(long, env = "DDREG_SEED")]
        seed: Option<u64>,
    },
    /// Simulate the closed loop on sampled members and write a CSV.
    Simulate {
        problem: PathBuf,
        regulator: PathBuf,
        /// Steps per member; defaults to a horizon derived from the closed-loop radius.
        #[arg(long)]
        horizon: Option<usize>,
        /// Exosystem initial state, e.g. `1,0,1`; random in [-1, 1] if omitted.
        #[arg(long = "x1-0")]
        x1_0: Option<String>,
        /// Endosystem initial state; random in [-1, 1] if omitted.
        #[arg(long = "x2-0")]
        x2_0: Option<String>,
        /// Seed for the sampled members and the default initial states.
        #[arg(long, env = "DDREG_SEED")]
        member_seed: Option<u64>,
        /// Number of blocks: the particular member plus `members - 1` random ones.
        #[arg(long, default_value_t = 1)]
        members: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a bundled example end to end.
    Example {
        name: String,
        /// Where the bundled problem file is written.
        #[arg(long, default_value = ".")]
        dir: PathBuf,
        #[arg(long, env = "DDREG_SEED")]
        seed: Option<u64>,
    },
    /// Generate a problem file from a system file.
    GenData {
        system: PathBuf,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long = "x1-0")]
        x1_0: Option<String>,
        #[arg(long = "x2-0")]
        x2_0: Option<String>,
        /// Input samples, rows separated by `;`.
        #[arg(long)]
        inputs: Option<String>,
        #[arg(long, env = "DDREG_SEED")]
        seed: Option<u64>,
        /// Leave A3 out of the emitted file.
        #[arg(long)]
        drop_a3: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    Negative,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Negative) => EXIT_NEGATIVE,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome> {
    match cmd {
        Command::Check { problem, flags } => cmd_check(&problem, &flags, out),
        Command::Synth {
            problem,
            output,
            flags,
        } => cmd_synth(&problem, &output, &flags, out),
        Command::Verify {
            problem,
            regulator,
            members,
            seed,
        } => cmd_verify(&problem, &regulator, members, seed.unwrap_or(0), out, err),
        Command::Simulate {
            problem,
            regulator,
            horizon,
            x1_0,
            x2_0,
            member_seed,
            members,
            out: csv_path,
        } => {
            let opts = SimulateOptions {
                horizon,
                x1_0: x1_0.as_deref().map(io::parse_vector).transpose()?,
                x2_0: x2_0.as_deref().map(io::parse_vector).transpose()?,
                member_seed: member_seed.unwrap_or(0),
                members,
            };
            cmd_simulate(&problem, &regulator, &opts, csv_path.as_deref(), out, err)
        }
        Command::Example { name, dir, seed } => {
            cmd_example(&name, &dir, seed.unwrap_or(0), out, err)
        }
        Command::GenData {
            system,
            tau,
            x1_0,
            x2_0,
            inputs,
            seed,
            drop_a3,
            output,
        } => cmd_gen_data(
            &system,
            &GenDataOptions {
                tau,
                x1_0: x1_0.as_deref().map(io::parse_vector).transpose()?,
                x2_0: x2_0.as_deref().map(io::parse_vector).transpose()?,
                inputs: inputs.as_deref().map(io::parse_matrix).transpose()?,
                seed: seed.unwrap_or(0),
                drop_a3,
            },
            output.as_deref(),
            out,
        ),
    }
}

fn config_for(loaded: &LoadedProblem, flags: &SynthFlags) -> Result<SynthesisConfig> {
    let mut cfg = SynthesisConfig::default();
    if let Some(o) = &loaded.config {
        o.apply(&mut cfg)?;
    }
    if let Some(order) = &flags.order {
        cfg.order = TryOrder::parse(order).ok_or_else(|| {
            Error::Invalid(format!(
                "unknown order `{order}` (use condition2-first or condition1-first)"
            ))
        })?;
    }
    if let Some(seed) = flags.seed {
        cfg.lmi.seed = seed;
    }
    Ok(cfg)
}

fn run_synth(problem: &Problem, cfg: &SynthesisConfig, unknown_a3: bool) -> Result<Synthesis> {
    if unknown_a3 {
        synthesis::synthesize_unknown_a3(problem, cfg)
    } else {
        synthesis::synthesize(problem, cfg)
    }
}

fn write_condition(out: &mut dyn Write, name: &str, c: &ConditionReport) -> Result<()> {
    if !c.attempted && c.failure.is_none() {
        writeln!(out, "{name}: not attempted")?;
        return Ok(());
    }
    let verdict = if c.holds { "holds" } else { "fails" };
    writeln!(out, "{name}: {verdict}")?;
    for (k, v) in &c.residuals {
        writeln!(out, "  residual {k}: {v:.3e}")?;
    }
    if let Some(l) = &c.lmi {
        writeln!(
            out,
            "  lmi: feasible={} min_eig={:.6e} iterations={}",
            l.feasible, l.min_eig, l.iterations
        )?;
    }
    if let Some(f) = &c.failure {
        writeln!(out, "  reason: {f}")?;
    }
    Ok(())
}

pub fn write_report(out: &mut dyn Write, report: &SynthesisReport) -> Result<()> {
    writeln!(
        out,
        "rank X2_minus: {} (n2 = {})",
        report.rank_x2_minus, report.n2
    )?;
    if report.unknown_a3 {
        writeln!(out, "mode: unknown A3")?;
    }
    if let Some(l) = report.lmi() {
        writeln!(out, "lmi margin: {:.6e}", l.min_eig)?;
    }
    write_condition(out, "condition 1", &report.condition1)?;
    write_condition(out, "condition 2", &report.condition2)?;
    if let Some(r) = report.closed_loop_radius {
        writeln!(out, "closed-loop spectral radius: {r:.6}")?;
    }
    match report.chosen {
        Some(p) => writeln!(out, "informative: yes ({p})")?,
        None => writeln!(out, "informative: no")?,
    }
    for m in &report.messages {
        writeln!(out, "note: {m}")?;
    }
    Ok(())
}

pub fn format_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let v: Vec<String> = r.iter().map(|x| format_number(*x)).collect();
            format!("[{}]", v.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn format_number(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

fn cmd_check(path: &Path, flags: &SynthFlags, out: &mut dyn Write) -> Result<Outcome> {
    let loaded = io::load_problem(path)?;
    let cfg = config_for(&loaded, flags)?;
    writeln!(
        out,
        "problem: {} (sha256 {})",
        path.display(),
        loaded.sha256
    )?;
    writeln!(out, "seed: {}", cfg.lmi.seed)?;
    let s = run_synth(&loaded.problem, &cfg, flags.unknown_a3)?;
    write_report(out, &s.report)?;
    Ok(if s.report.informative() {
        Outcome::Ok
    } else {
        Outcome::Negative
    })
}

fn cmd_synth(
    path: &Path,
    output: &Path,
    flags: &SynthFlags,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let loaded = io::load_problem(path)?;
    let cfg = config_for(&loaded, flags)?;
    let s = run_synth(&loaded.problem, &cfg, flags.unknown_a3)?;
    let Some(reg) = s.regulator else {
        write_report(out, &s.report)?;
        return Ok(Outcome::Negative);
    };
    let file = RegulatorFile::new(&reg, &loaded.sha256, cfg.lmi.seed);
    io::atomic_write(output, io::regulator_to_string(&file)?.as_bytes())?;
    writeln!(out, "provenance: {}", reg.provenance)?;
    writeln!(out, "seed: {}", cfg.lmi.seed)?;
    writeln!(out, "K1 = {}", format_matrix(&reg.k1))?;
    writeln!(out, "K2 = {}", format_matrix(&reg.k2))?;
    if let Some(r) = s.report.closed_loop_radius {
        writeln!(out, "closed-loop spectral radius: {r:.6}")?;
    }
    writeln!(out, "wrote {}", output.display())?;
    Ok(Outcome::Ok)
}

/// Load a regulator, warning when it was synthesized from other data.
fn load_regulator_for(
    loaded: &LoadedProblem,
    path: &Path,
    err: &mut dyn Write,
) -> Result<(Regulator, RegulatorFile)> {
    let file = io::load_regulator(path)?;
    if file.problem_sha256 != loaded.sha256 {
        writeln!(
            err,
            "warning: {} was synthesized from a different problem file (hash {} vs {})",
            path.display(),
            file.problem_sha256,
            loaded.sha256
        )?;
    }
    let reg = file.to_regulator(&loaded.problem)?;
    Ok((reg, file))
}

fn set_for(problem: &Problem, reg: &Regulator) -> Result<CompatibleSet> {
    if reg.provenance.unknown_a3() || problem.known.a3.is_none() {
        compatible_set_unknown_a3(problem)
    } else {
        compatible_set(problem)
    }
}

fn cmd_verify(
    problem_path: &Path,
    reg_path: &Path,
    members: usize,
    seed: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Outcome> {
    let loaded = io::load_problem(problem_path)?;
    let (reg, _) = load_regulator_for(&loaded, reg_path, err)?;
    let set = set_for(&loaded.problem, &reg)?;
    let report = synthesis::verify_regulator(&reg, &set, &loaded.problem.known, members, seed)?;
    writeln!(out, "seed: {seed}")?;
    writeln!(out, "compatible-set dimension: {}", set.dimension())?;
    for m in &report.members {
        writeln!(
            out,
            "member {}: radius {:.6} endo_stable={} regulated={} decay={} -> {}",
            m.index,
            m.closed_loop_radius,
            m.endo_stable,
            m.regulated,
            m.decay
                .as_ref()
                .map_or("skipped", |d| if d.passes { "pass" } else { "fail" }),
            if m.passes() { "PASS" } else { "FAIL" }
        )?;
    }
    writeln!(
        out,
        "verified {} members, {} failures",
        report.members.len(),
        report.failures()
    )?;
    Ok(if report.all_pass() {
        Outcome::Ok
    } else {
        Outcome::Negative
    })
}

pub struct SimulateOptions {
    pub horizon: Option<usize>,
    pub x1_0: Option<DVector<f64>>,
    pub x2_0: Option<DVector<f64>>,
    pub member_seed: u64,
    pub members: usize,
}

fn cmd_simulate(
    problem_path: &Path,
    reg_path: &Path,
    opts: &SimulateOptions,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Outcome> {
    if opts.horizon == Some(0) {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    let loaded = io::load_problem(problem_path)?;
    let (reg, _) = load_regulator_for(&loaded, reg_path, err)?;
    let problem = &loaded.problem;
    let set = set_for(problem, &reg)?;
    let (n1, n2) = (problem.data.n1(), problem.data.n2());
    // Unspecified initial states are drawn in [-1, 1] from the member seed.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.member_seed);
    let mut random_vec = |n: usize| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let x1_0 = opts.x1_0.clone().unwrap_or_else(|| random_vec(n1));
    let x2_0 = opts.x2_0.clone().unwrap_or_else(|| random_vec(n2));

    let mut systems = vec![set.particular()];
    if opts.members > 1 && set.dimension() > 0 {
        systems.extend(simulation::sample_members(
            &set,
            opts.members - 1,
            5.0,
            opts.member_seed,
        )?);
    } else if opts.members > 1 {
        writeln!(
            err,
            "note: the compatible set is a single system; simulating one member"
        )?;
    }

    let mut trajectories = Vec::with_capacity(systems.len());
    let mut all_pass = true;
    writeln!(out, "member_seed: {}", opts.member_seed)?;
    for (id, sys) in systems.iter().enumerate() {
        let radius = analysis::spectral_radius(&(&sys.a2 + &sys.b2 * &reg.k2))?;
        let horizon = opts
            .horizon
            .unwrap_or_else(|| simulation::verification_horizon(radius));
        let (traj, verdict, _) =
            synthesis::simulate_member(sys, &problem.known, &reg, &x1_0, &x2_0, horizon)?;
        all_pass &= verdict.passes;
        writeln!(
            out,
            "member {id}: closed-loop radius {radius:.6} horizon {horizon} |z(0)| {:.3e} |z(T)| {:.3e} rate {:.4} decay {}",
            verdict.initial_norm,
            verdict.terminal_norm,
            verdict.fitted_rate,
            if verdict.passes { "pass" } else { "fail" }
        )?;
        trajectories.push((id, traj));
    }
    let blocks: Vec<(usize, &simulation::Trajectory)> =
        trajectories.iter().map(|(i, t)| (*i, t)).collect();
    let mut buf = Vec::new();
    io::write_trajectories_csv(&mut buf, &blocks)?;
    match csv_path {
        Some(p) => {
            io::atomic_write(p, &buf)?;
            writeln!(out, "wrote {}", p.display())?;
        }
        None => out.write_all(&buf)?,
    }
    Ok(if all_pass {
        Outcome::Ok
    } else {
        Outcome::Negative
    })
}

pub struct GenDataOptions {
    pub tau: Option<usize>,
    pub x1_0: Option<DVector<f64>>,
    pub x2_0: Option<DVector<f64>>,
    pub inputs: Option<Matrix>,
    pub seed: u64,
    pub drop_a3: bool,
}

/// Build the problem a system file and options describe. Missing initial
/// states and inputs come from the file, then from a seeded generator.
pub fn gen_problem(system: &io::LoadedSystem, opts: &GenDataOptions) -> Result<Problem> {
    let sys = &system.system;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vec = |n: usize| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let x1_0 = opts
        .x1_0
        .clone()
        .or_else(|| system.x1_0.clone())
        .unwrap_or_else(|| random_vec(sys.n1()));
    let x2_0 = opts
        .x2_0
        .clone()
        .or_else(|| system.x2_0.clone())
        .unwrap_or_else(|| random_vec(sys.n2()));
    let inputs = match opts.inputs.clone().or_else(|| system.inputs.clone()) {
        Some(u) => {
            if let Some(tau) = opts.tau {
                if u.ncols() < tau {
                    return Err(Error::Invalid(format!(
                        "--tau {tau} exceeds the {} input samples given",
                        u.ncols()
                    )));
                }
                u.columns(0, tau).into_owned()
            } else {
                u
            }
        }
        None => {
            let tau = opts.tau.unwrap_or(sys.n2() + sys.m() + 1);
            Matrix::from_fn(sys.m(), tau, |_, _| rng.gen_range(-1.0..1.0))
        }
    };
    if inputs.ncols() == 0 {
        return Err(Error::Invalid("tau must be at least 1".into()));
    }
    let data = simulation::generate_data(sys, &x1_0, &x2_0, &inputs)?;
    let known = if opts.drop_a3 {
        system.known.without_a3()
    } else {
        system.known.clone()
    };
    Problem::new(data, known)
}

fn cmd_gen_data(
    system_path: &Path,
    opts: &GenDataOptions,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let system = io::load_system(system_path)?;
    let problem = gen_problem(&system, opts)?;
    let mut text = format!(
        "# generated from {} with seed {}\n",
        system_path.display(),
        opts.seed
    );
    text.push_str(&io::problem_to_string(&problem, None)?);
    match output {
        Some(p) => {
            io::atomic_write(p, text.as_bytes())?;
            writeln!(out, "wrote {} (tau = {})", p.display(), problem.data.tau())?;
        }
        None => write!(out, "{text}")?,
    }
    Ok(Outcome::Ok)
}

fn cmd_example(
    name: &str,
    dir: &Path,
    seed: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Outcome> {
    let text = fixtures::problem_text(name).ok_or_else(|| {
        Error::Invalid(format!(
            "unknown example `{name}`; valid names: {}",
            fixtures::EXAMPLES.join(", ")
        ))
    })?;
    fs::create_dir_all(dir)?;
    let problem_path = dir.join(format!("{name}.toml"));
    io::atomic_write(&problem_path, text.as_bytes())?;
    writeln!(out, "wrote {}", problem_path.display())?;

    let loaded = io::parse_problem(text, name)?;
    let problem = &loaded.problem;
    let cfg = SynthesisConfig::default().with_seed(seed);
    let s = synthesis::synthesize(problem, &cfg)?;
    writeln!(out, "== check")?;
    write_report(out, &s.report)?;
    let Some(reg) = s.regulator else {
        return Ok(Outcome::Negative);
    };

    let reg_path = dir.join(format!("{name}.regulator.toml"));
    let file = RegulatorFile::new(&reg, &loaded.sha256, seed);
    io::atomic_write(&reg_path, io::regulator_to_string(&file)?.as_bytes())?;
    writeln!(out, "== synth (wrote {})", reg_path.display())?;
    writeln!(out, "K1 computed  = {}", format_matrix(&reg.k1))?;
    writeln!(out, "K2 computed  = {}", format_matrix(&reg.k2))?;

    let x_dagger = reg
        .x_dagger
        .as_ref()
        .expect("synthesized regulators carry X_dagger");
    let closed_loop = problem.closed_loop_data()? * x_dagger;
    match name {
        "scalar" => {
            let r = fixtures::scalar_reference();
            writeln!(out, "W reference  = {}", format_matrix(&r.w))?;
            if let Some(w) = &reg.w {
                writeln!(out, "W computed   = {}", format_matrix(w))?;
            }
            writeln!(out, "X_dagger reference = {}", format_matrix(&r.x_dagger))?;
            writeln!(out, "X_dagger computed  = {}", format_matrix(x_dagger))?;
            writeln!(out, "K1 reference = {}", format_matrix(&r.k1))?;
            writeln!(out, "K2 reference = {}", format_matrix(&r.k2))?;
            let witness = synthesis::check_witnesses(
                problem,
                &Regulator {
                    k1: r.k1,
                    k2: r.k2,
                    provenance: reg.provenance,
                    w: Some(r.w),
                    theta: None,
                    x_dagger: Some(r.x_dagger),
                },
            )?;
            writeln!(
                out,
                "reference witnesses: max residual {:.3e}, closed-loop radius {:.6}",
                witness.max_residual(),
                witness.closed_loop_radius.unwrap_or(f64::NAN)
            )?;
        }
        _ => {
            let r = fixtures::planar_reference();
            writeln!(out, "K2 reference = {}", format_matrix(&r.k2))?;
            writeln!(
                out,
                "closed loop reference = {}",
                format_matrix(&r.closed_loop)
            )?;
            writeln!(
                out,
                "closed loop computed  = {}",
                format_matrix(&closed_loop)
            )?;
            writeln!(
                out,
                "eigenvalues reference = {0} ± {1}i",
                r.eigenvalue.0, r.eigenvalue.1
            )?;
        }
    }
    let spec = analysis::spectral_info(&closed_loop, analysis::STABILITY_MARGIN)?;
    let eigs: Vec<String> = spec
        .eigenvalues
        .iter()
        .map(|c| {
            let im = format_number(c.im.abs());
            let sign = if c.im < 0.0 { '-' } else { '+' };
            format!("{}{sign}{im}i", format_number(c.re))
        })
        .collect();
    writeln!(out, "eigenvalues computed  = {}", eigs.join(", "))?;

    writeln!(out, "== simulate")?;
    let members = if name == "planar" { 25 } else { 1 };
    let csv_path = dir.join(format!("{name}.csv"));
    let opts = SimulateOptions {
        horizon: None,
        x1_0: None,
        x2_0: None,
        member_seed: seed,
        members,
    };
    let sim = cmd_simulate(&problem_path, &reg_path, &opts, Some(&csv_path), out, err)?;
    let set = set_for(problem, &reg)?;
    let verify = synthesis::verify_regulator(&reg, &set, &problem.known, 25, seed)?;
    writeln!(
        out,
        "== verify: {} members, {} failures",
        verify.members.len(),
        verify.failures()
    )?;
    Ok(match sim {
        Outcome::Ok if verify.all_pass() => Outcome::Ok,
        _ => Outcome::Negative,
    })
}
