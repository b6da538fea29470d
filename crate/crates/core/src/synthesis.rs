//! Informativity for regulator design and regulator synthesis.
//!
//! Data are informative iff at least one of two conditions holds (with `A1`
//! anti-stable, `Z := X2+ - A3 X1-` and `C := D2 X2- + E U-`):
//!
//! 1. `X2-` has a right inverse `X†` with `Z X†` stable and `C X† = 0`, and
//!    `im D1 ⊆ im E`. Then `K1` solves `D1 + E K1 = 0` and `K2 = U- X†`.
//! 2. `X2-` has a right inverse `X†` with `Z X†` stable, and some `W` solves
//!    `X2- W A1 - Z W = A3`, `D1 + C W = 0`. Then `K1 = U- (I - X† X2-) W`
//!    and `K2 = U- X†`.
//!
//! When `A3` is unknown both conditions additionally require `X1- X† = 0`, the
//! W-equations become `X2- W A1 - X2+ W = 0`, `X1- W = I`, `D1 + C W = 0`, and
//! the gain formulas stay the same.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{self, STABILITY_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::{self, kron, unvec, vec};
use crate::lmi::{self, LmiOptions, LmiOutcome, LmiProblem};
use crate::model::{
    CompatibleSet, KnownMatrices, Problem, Provenance, Regulator, TrueSystem, DEFAULT_RESIDUAL_TOL,
};
use crate::simulation::{self, DecayVerdict};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TryOrder {
    #[default]
    Condition2First,
    Condition1First,
}

impl TryOrder {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "condition2-first" | "2" => Some(TryOrder::Condition2First),
            "condition1-first" | "1" => Some(TryOrder::Condition1First),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TryOrder::Condition2First => "condition2-first",
            TryOrder::Condition1First => "condition1-first",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub residual_tol: f64,
    pub order: TryOrder,
    pub lmi: LmiOptions,
    /// Random compatible-set members checked by [`verify_regulator`].
    pub verify_samples: usize,
    /// Entries of the member offset `N` are drawn from `[-radius, radius]`.
    pub sample_radius: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            residual_tol: DEFAULT_RESIDUAL_TOL,
            order: TryOrder::default(),
            lmi: LmiOptions::default(),
            verify_samples: 25,
            sample_radius: 5.0,
        }
    }
}

impl SynthesisConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.lmi.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct LmiReport {
    pub feasible: bool,
    pub min_eig: f64,
    pub iterations: usize,
    pub rank_deficient: bool,
}

impl From<&LmiOutcome> for LmiReport {
    fn from(o: &LmiOutcome) -> Self {
        LmiReport {
            feasible: o.is_feasible(),
            min_eig: o.min_eig(),
            iterations: o.iterations(),
            rank_deficient: matches!(o, LmiOutcome::NotFound(f) if f.rank_deficient),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub attempted: bool,
    pub holds: bool,
    /// Named residuals, e.g. the W-system or image-inclusion residual.
    pub residuals: Vec<(&'static str, f64)>,
    pub lmi: Option<LmiReport>,
    /// Why the condition failed, when it did.
    pub failure: Option<String>,
}

impl ConditionReport {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthesisReport {
    pub rank_x2_minus: usize,
    pub n2: usize,
    pub unknown_a3: bool,
    pub condition1: ConditionReport,
    pub condition2: ConditionReport,
    pub chosen: Option<Provenance>,
    /// Spectral radius of the data-driven closed loop `Z X†`.
    pub closed_loop_radius: Option<f64>,
    pub messages: Vec<String>,
}

impl SynthesisReport {
    pub fn informative(&self) -> bool {
        self.chosen.is_some()
    }

    /// LMI margin of whichever condition ran the solver last.
    pub fn lmi(&self) -> Option<&LmiReport> {
        match self.chosen {
            Some(p) if p.is_condition2() => self.condition2.lmi.as_ref(),
            Some(_) => self.condition1.lmi.as_ref(),
            None => self
                .condition2
                .lmi
                .as_ref()
                .or(self.condition1.lmi.as_ref()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub regulator: Option<Regulator>,
    pub report: SynthesisReport,
}

/// Result of checking one informativity condition.
#[derive(Debug, Clone)]
pub struct ConditionOutcome {
    pub holds: bool,
    pub regulator: Option<Regulator>,
    pub report: ConditionReport,
}

#[derive(Debug, Clone)]
pub struct EndoStabilization {
    pub informative: bool,
    pub k2: Option<Matrix>,
    pub x_dagger: Option<Matrix>,
    pub lmi: LmiOutcome,
}

/// Whether one `K2` stabilizes `A2 + B2 K2` for every compatible system:
/// iff `X2-` has full row rank and a right inverse makes `Z X†` stable.
pub fn check_endo_stabilization(
    problem: &Problem,
    options: &LmiOptions,
) -> Result<EndoStabilization> {
    let lp = LmiProblem::new(problem.data.x2_minus(), problem.closed_loop_data()?);
    let outcome = lmi::solve_lmi(&lp, options)?;
    let (k2, x_dagger) = match outcome.solution() {
        Some(s) => (
            Some(&problem.data.u_minus * &s.x_dagger),
            Some(s.x_dagger.clone()),
        ),
        None => (None, None),
    };
    Ok(EndoStabilization {
        informative: outcome.is_feasible(),
        k2,
        x_dagger,
        lmi: outcome,
    })
}

/// Which variant of the conditions is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    KnownA3,
    UnknownA3,
}

impl Mode {
    fn provenance(self, condition2: bool) -> Provenance {
        match (self, condition2) {
            (Mode::KnownA3, false) => Provenance::Condition1,
            (Mode::KnownA3, true) => Provenance::Condition2,
            (Mode::UnknownA3, false) => Provenance::UnknownA3Condition1,
            (Mode::UnknownA3, true) => Provenance::UnknownA3Condition2,
        }
    }
}

fn lmi_problem(problem: &Problem, mode: Mode, output_constraint: bool) -> Result<LmiProblem> {
    let d = &problem.data;
    let mut lp = match mode {
        Mode::KnownA3 => LmiProblem::new(d.x2_minus(), problem.closed_loop_data()?),
        // With X1- X† = 0 the closed loop no longer depends on A3.
        Mode::UnknownA3 => {
            LmiProblem::new(d.x2_minus(), d.x2_plus()).with_constraint(d.x1_minus.clone())
        }
    };
    if output_constraint {
        lp = lp.with_constraint(problem.output_data());
    }
    Ok(lp)
}

/// Minimum-norm least-squares solution of the data-driven regulator
/// equations and its residual relative to `1 + ‖rhs‖`.
fn solve_w_system(problem: &Problem, mode: Mode) -> Result<(Matrix, f64, f64)> {
    let d = &problem.data;
    let k = &problem.known;
    let (tau, n1, n2, p) = (d.tau(), d.n1(), d.n2(), k.p());
    let x = d.x2_minus();
    let i1 = Matrix::identity(n1, n1);
    let c = problem.output_data();

    let (z, top_rhs) = match mode {
        Mode::KnownA3 => (problem.closed_loop_data()?, vec(k.a3()?)),
        Mode::UnknownA3 => (d.x2_plus(), vec(&Matrix::zeros(n2, n1))),
    };
    let mut blocks: Vec<Matrix> = vec![kron(&k.a1.transpose(), &x) - kron(&i1, &z)];
    let mut rhs: Vec<f64> = top_rhs.iter().copied().collect();
    if mode == Mode::UnknownA3 {
        blocks.push(kron(&i1, &d.x1_minus));
        rhs.extend(vec(&i1).iter());
    }
    blocks.push(kron(&i1, &c));
    rhs.extend((-vec(&k.d1)).iter());
    debug_assert_eq!(blocks.last().unwrap().nrows(), p * n1);

    let refs: Vec<&Matrix> = blocks.iter().collect();
    let op = linalg::vstack(&refs);
    let rhs = Matrix::from_column_slice(rhs.len(), 1, &rhs);
    let (sol, residual) = linalg::lstsq(&op, &rhs);
    let w = unvec(&sol.column(0).into_owned(), tau, n1);
    Ok((w, residual, rhs.norm()))
}

/// Condition 1: pointwise output zeroing.
pub fn check_condition1(problem: &Problem, config: &SynthesisConfig) -> Result<ConditionOutcome> {
    condition1(problem, config, Mode::KnownA3)
}

/// Condition 2: data-driven regulator equations.
pub fn check_condition2(problem: &Problem, config: &SynthesisConfig) -> Result<ConditionOutcome> {
    condition2(problem, config, Mode::KnownA3)
}

fn condition1(problem: &Problem, config: &SynthesisConfig, mode: Mode) -> Result<ConditionOutcome> {
    let k = &problem.known;
    let mut report = ConditionReport {
        attempted: true,
        ..Default::default()
    };

    // im D1 ⊆ im E  <=>  E K1 = -D1 is solvable.
    let (k1, image_residual) = linalg::lstsq(&k.e, &(-&k.d1));
    report.residuals.push(("image", image_residual));
    if image_residual > config.residual_tol * (1.0 + k.d1.norm()) {
        report.failure = Some(format!(
            "im D1 is not contained in im E (residual {image_residual:.3e})"
        ));
        return Ok(ConditionOutcome {
            holds: false,
            regulator: None,
            report,
        });
    }

    let lp = lmi_problem(problem, mode, true)?;
    let outcome = lmi::solve_lmi(&lp, &config.lmi)?;
    report.lmi = Some(LmiReport::from(&outcome));
    let Some(sol) = outcome.solution() else {
        report.failure = Some(lmi_failure_message(&outcome, true));
        return Ok(ConditionOutcome {
            holds: false,
            regulator: None,
            report,
        });
    };
    let k2 = &problem.data.u_minus * &sol.x_dagger;
    report
        .residuals
        .push(("output", (&k.d2 + &k.e * &k2).norm()));
    report.holds = true;
    Ok(ConditionOutcome {
        holds: true,
        regulator: Some(Regulator {
            k1,
            k2,
            provenance: mode.provenance(false),
            w: None,
            theta: Some(sol.theta.clone()),
            x_dagger: Some(sol.x_dagger.clone()),
        }),
        report,
    })
}

fn condition2(problem: &Problem, config: &SynthesisConfig, mode: Mode) -> Result<ConditionOutcome> {
    let d = &problem.data;
    let mut report = ConditionReport {
        attempted: true,
        ..Default::default()
    };

    let (w, w_residual, rhs_norm) = solve_w_system(problem, mode)?;
    report.residuals.push(("w_system", w_residual));
    if w_residual > config.residual_tol * (1.0 + rhs_norm) {
        report.failure = Some(format!(
            "data-driven regulator equations have no solution (residual {w_residual:.3e})"
        ));
        return Ok(ConditionOutcome {
            holds: false,
            regulator: None,
            report,
        });
    }

    let lp = lmi_problem(problem, mode, false)?;
    let outcome = lmi::solve_lmi(&lp, &config.lmi)?;
    report.lmi = Some(LmiReport::from(&outcome));
    let Some(sol) = outcome.solution() else {
        report.failure = Some(lmi_failure_message(&outcome, false));
        return Ok(ConditionOutcome {
            holds: false,
            regulator: None,
            report,
        });
    };
    let x = d.x2_minus();
    let tau = d.tau();
    let k2 = &d.u_minus * &sol.x_dagger;
    let k1 = &d.u_minus * (Matrix::identity(tau, tau) - &sol.x_dagger * &x) * &w;
    report.holds = true;
    Ok(ConditionOutcome {
        holds: true,
        regulator: Some(Regulator {
            k1,
            k2,
            provenance: mode.provenance(true),
            w: Some(w),
            theta: Some(sol.theta.clone()),
            x_dagger: Some(sol.x_dagger.clone()),
        }),
        report,
    })
}

fn lmi_failure_message(outcome: &LmiOutcome, constrained: bool) -> String {
    match outcome {
        LmiOutcome::NotFound(f) if f.rank_deficient => "X2_minus does not have full row rank".into(),
        LmiOutcome::NotFound(f) => format!(
            "no stabilizing right inverse{} found within bound and budget (best min eigenvalue {:.3e}, {} iterations)",
            if constrained { " satisfying the output constraint" } else { "" },
            f.best_min_eig,
            f.total_iterations
        ),
        LmiOutcome::Feasible(_) => String::new(),
    }
}

/// Decide informativity and synthesize a regulator, trying the conditions in
/// `config.order`.
pub fn synthesize(problem: &Problem, config: &SynthesisConfig) -> Result<Synthesis> {
    problem.known.a3()?;
    run_synthesis(problem, config, Mode::KnownA3)
}

/// Same as [`synthesize`] with `A3` treated as unknown; any `A3` in
/// `problem.known` is ignored.
pub fn synthesize_unknown_a3(problem: &Problem, config: &SynthesisConfig) -> Result<Synthesis> {
    run_synthesis(problem, config, Mode::UnknownA3)
}

fn run_synthesis(problem: &Problem, config: &SynthesisConfig, mode: Mode) -> Result<Synthesis> {
    if config.residual_tol <= 0.0 {
        return Err(Error::Invalid("residual tolerance must be positive".into()));
    }
    analysis::require_anti_stable(&problem.known.a1)?;
    let d = &problem.data;
    let mut report = SynthesisReport {
        rank_x2_minus: linalg::rank(&d.x2_minus()),
        n2: d.n2(),
        unknown_a3: mode == Mode::UnknownA3,
        ..Default::default()
    };
    if report.rank_x2_minus < report.n2 {
        let msg = format!(
            "X2_minus has rank {} < n2 = {}: no right inverse exists, data are not informative",
            report.rank_x2_minus, report.n2
        );
        report.messages.push(msg.clone());
        for c in [&mut report.condition1, &mut report.condition2] {
            c.failure = Some(msg.clone());
        }
        return Ok(Synthesis {
            regulator: None,
            report,
        });
    }

    let order = match config.order {
        TryOrder::Condition2First => [true, false],
        TryOrder::Condition1First => [false, true],
    };
    for second in order {
        let outcome = if second {
            condition2(problem, config, mode)?
        } else {
            condition1(problem, config, mode)?
        };
        if second {
            report.condition2 = outcome.report;
        } else {
            report.condition1 = outcome.report;
        }
        if let Some(reg) = outcome.regulator {
            report.chosen = Some(reg.provenance);
            let x_dagger = reg
                .x_dagger
                .as_ref()
                .expect("synthesized regulators carry X_dagger");
            let z = match mode {
                Mode::KnownA3 => problem.closed_loop_data()?,
                Mode::UnknownA3 => d.x2_plus(),
            };
            report.closed_loop_radius = Some(analysis::spectral_radius(&(z * x_dagger))?);
            report
                .messages
                .push(format!("informative: {}", reg.provenance));
            return Ok(Synthesis {
                regulator: Some(reg),
                report,
            });
        }
    }
    report
        .messages
        .push("neither condition holds: data are not informative for regulator design".into());
    Ok(Synthesis {
        regulator: None,
        report,
    })
}

/// Residuals of a regulator's witnesses against the data.
#[derive(Debug, Clone, Default)]
pub struct WitnessReport {
    /// `‖X2- X† - I‖`.
    pub right_inverse: Option<f64>,
    /// Spectral radius of the data-driven closed loop `Z X†`.
    pub closed_loop_radius: Option<f64>,
    /// `‖K2 - U- X†‖`.
    pub k2_formula: Option<f64>,
    /// `‖K1 - U- (I - X† X2-) W‖` (condition 2).
    pub k1_formula: Option<f64>,
    /// Residuals of each W-equation (condition 2).
    pub w_equations: Vec<f64>,
    /// `‖D1 + E K1‖` and `‖D2 + E K2‖` (condition 1).
    pub output_zeroing: Vec<f64>,
    /// `‖X1- X†‖` (unknown `A3`).
    pub exo_annihilation: Option<f64>,
}

impl WitnessReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.right_inverse,
            self.k2_formula,
            self.k1_formula,
            self.exo_annihilation,
        ]
        .into_iter()
        .flatten()
        .chain(self.w_equations.iter().copied())
        .chain(self.output_zeroing.iter().copied())
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() < tol && self.closed_loop_radius.is_some_and(|r| r < 1.0)
    }
}

/// Check a regulator's witnesses (`X†`, `W`) and gain formulas directly
/// against the data. Needs `x_dagger`.
pub fn check_witnesses(problem: &Problem, reg: &Regulator) -> Result<WitnessReport> {
    let d = &problem.data;
    let k = &problem.known;
    reg.check_dims(d.n1(), d.n2(), d.m(), d.tau())?;
    let x_dagger = reg
        .x_dagger
        .as_ref()
        .ok_or_else(|| Error::Invalid("regulator carries no X_dagger witness".into()))?;
    let x = d.x2_minus();
    let (tau, n1, n2) = (d.tau(), d.n1(), d.n2());
    let unknown = reg.provenance.unknown_a3();
    let z = if unknown {
        d.x2_plus()
    } else {
        problem.closed_loop_data()?
    };
    let mut out = WitnessReport {
        right_inverse: Some((&x * x_dagger - Matrix::identity(n2, n2)).norm()),
        closed_loop_radius: Some(analysis::spectral_radius(&(&z * x_dagger))?),
        k2_formula: Some((&reg.k2 - &d.u_minus * x_dagger).norm()),
        ..Default::default()
    };
    if unknown {
        out.exo_annihilation = Some((&d.x1_minus * x_dagger).norm());
    }
    let c = problem.output_data();
    if reg.provenance.is_condition2() {
        let w = reg
            .w
            .as_ref()
            .ok_or_else(|| Error::Invalid("condition-2 regulator carries no W witness".into()))?;
        let a3_term = if unknown {
            Matrix::zeros(n2, n1)
        } else {
            k.a3()?.clone()
        };
        out.w_equations
            .push((&x * w * &k.a1 - &z * w - a3_term).norm());
        if unknown {
            out.w_equations
                .push((&d.x1_minus * w - Matrix::identity(n1, n1)).norm());
        }
        out.w_equations.push((&k.d1 + &c * w).norm());
        let k1 = &d.u_minus * (Matrix::identity(tau, tau) - x_dagger * &x) * w;
        out.k1_formula = Some((&reg.k1 - k1).norm());
    } else {
        out.output_zeroing.push((&k.d1 + &k.e * &reg.k1).norm());
        out.output_zeroing.push((&k.d2 + &k.e * &reg.k2).norm());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MemberVerdict {
    /// 0 is the particular solution.
    pub index: usize,
    pub closed_loop_radius: f64,
    pub endo_stable: bool,
    pub regulated: bool,
    pub output_residual: Option<f64>,
    /// `None` when the exosystem grows and a finite simulation says nothing.
    pub decay: Option<DecayVerdict>,
    /// `A2 + B2 K2` of this member.
    pub closed_loop: Matrix,
}

impl MemberVerdict {
    pub fn passes(&self) -> bool {
        self.endo_stable && self.regulated && self.decay.as_ref().is_none_or(|d| d.passes)
    }
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub members: Vec<MemberVerdict>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.members.iter().all(MemberVerdict::passes)
    }

    pub fn failures(&self) -> usize {
        self.members.iter().filter(|m| !m.passes()).count()
    }
}

/// Check a regulator against the particular member of `set` and `samples`
/// random members: endo-stability, output regulation via the Sylvester test,
/// and decay of a simulated output trajectory.
pub fn verify_regulator(
    reg: &Regulator,
    set: &CompatibleSet,
    known: &KnownMatrices,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    verify_regulator_with_radius(reg, set, known, samples, 5.0, seed)
}

pub fn verify_regulator_with_radius(
    reg: &Regulator,
    set: &CompatibleSet,
    known: &KnownMatrices,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<VerificationReport> {
    let (n1, n2, m) = (set.a1.nrows(), set.n2(), set.m());
    linalg::check_shape("K1", &reg.k1, m, n1)?;
    linalg::check_shape("K2", &reg.k2, m, n2)?;

    let mut systems = vec![set.particular()];
    if set.dimension() > 0 && samples > 0 {
        systems.extend(simulation::sample_members(set, samples, radius, seed)?);
    }
    let exo_bounded = analysis::spectral_radius(&set.a1)? <= 1.0 + STABILITY_MARGIN;

    let members = systems
        .par_iter()
        .enumerate()
        .map(|(index, sys)| -> Result<MemberVerdict> {
            let closed_loop = &sys.a2 + &sys.b2 * &reg.k2;
            let radius = analysis::spectral_radius(&closed_loop)?;
            let chk = analysis::check_output_regulated(
                &sys.a1,
                &closed_loop,
                &(&sys.a3 + &sys.b2 * &reg.k1),
                &(&known.d1 + &known.e * &reg.k1),
                &(&known.d2 + &known.e * &reg.k2),
            )?;
            let decay = if exo_bounded && chk.endo_stable {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15 ^ index as u64);
                let x1_0 = nalgebra::DVector::from_fn(n1, |_, _| rng.gen_range(-1.0..1.0));
                let x2_0 = nalgebra::DVector::from_fn(n2, |_, _| rng.gen_range(-1.0..1.0));
                let horizon = simulation::verification_horizon(radius);
                Some(simulate_member(sys, known, reg, &x1_0, &x2_0, horizon)?.1)
            } else {
                None
            };
            Ok(MemberVerdict {
                index,
                closed_loop_radius: radius,
                endo_stable: chk.endo_stable,
                regulated: chk.regulated,
                output_residual: chk.output_residual,
                decay,
                closed_loop,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport { members })
}

/// Simulate one compatible system in closed loop and run the decay check
/// against its closed-loop spectral radius. The rounding floor accounts for
/// the steady-state error `‖D1 + D2 T‖ ‖x1‖` left by a regulator that is
/// exact only up to the accuracy of the data.
pub fn simulate_member(
    sys: &TrueSystem,
    known: &KnownMatrices,
    reg: &Regulator,
    x1_0: &nalgebra::DVector<f64>,
    x2_0: &nalgebra::DVector<f64>,
    horizon: usize,
) -> Result<(simulation::Trajectory, DecayVerdict, f64)> {
    let closed_loop = &sys.a2 + &sys.b2 * &reg.k2;
    let radius = analysis::spectral_radius(&closed_loop)?;
    let traj = simulation::closed_loop_sim(sys, known, reg, x1_0, x2_0, horizon)?;
    let chk = analysis::check_output_regulated(
        &sys.a1,
        &closed_loop,
        &(&sys.a3 + &sys.b2 * &reg.k1),
        &(&known.d1 + &known.e * &reg.k1),
        &(&known.d2 + &known.e * &reg.k2),
    )?;
    let x1_max = traj.x1.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = 10.0 * chk.output_residual.unwrap_or(0.0) * x1_max;
    let verdict = simulation::decay_check_with_floor(&traj, radius, floor)?;
    Ok((traj, verdict, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::from_rows;
    use crate::model::{compatible_set, ProblemData};

    #[test]
    fn scalar_endo_stabilization_with_published_right_inverse() {
        let p = fixtures::scalar_problem();
        let xd = from_rows(&[&[-0.5], &[2.0 / 3.0], &[0.0]]);
        let k2 = &p.data.u_minus * &xd;
        assert!((k2[(0, 0)] + 0.5).abs() < 1e-15);
        let es = check_endo_stabilization(&p, &LmiOptions::default()).unwrap();
        assert!(es.informative);
    }

    #[test]
    fn zero_row_in_x2_minus_is_not_endo_stabilizable() {
        let mut p = fixtures::planar_problem();
        p.data.x2.row_mut(1).fill(0.0);
        let es = check_endo_stabilization(&p, &LmiOptions::default()).unwrap();
        assert!(!es.informative);
    }

    #[test]
    fn planar_endo_stabilization_gives_common_closed_loop() {
        let p = fixtures::planar_problem();
        let es = check_endo_stabilization(&p, &LmiOptions::default()).unwrap();
        let k2 = es.k2.unwrap();
        let set = compatible_set(&p).unwrap();
        let expected = from_rows(&[&[0.5, -0.25], &[1.0, 0.5]]);
        for n in [-3.0, 0.0, 2.5] {
            let sys = set.member_at(&from_rows(&[&[n], &[-n / 2.0]])).unwrap();
            assert!((&sys.a2 + &sys.b2 * &k2 - &expected).norm() < 1e-10);
        }
    }

    #[test]
    fn planar_condition1_matches_published_gains() {
        let p = fixtures::planar_problem();
        let out = check_condition1(&p, &SynthesisConfig::default()).unwrap();
        assert!(out.holds);
        let reg = out.regulator.unwrap();
        assert!((&reg.k2 - from_rows(&[&[-1.0, -0.25]])).norm() < 1e-12);
        assert!((&reg.k1 + &p.known.d1 * 0.5).norm() < 1e-12);
        assert!((&p.known.d2 + &p.known.e * &reg.k2).norm() < 1e-12);
    }

    #[test]
    fn zero_e_with_nonzero_d1_fails_image_inclusion() {
        let p = fixtures::scalar_problem();
        let out = check_condition1(&p, &SynthesisConfig::default()).unwrap();
        assert!(!out.holds);
        assert!(out.report.residual("image").unwrap() > 0.5);
        assert!(out.report.lmi.is_none());
    }

    #[test]
    fn surjective_e_passes_image_inclusion() {
        let mut p = fixtures::scalar_problem();
        p.known.e = Matrix::identity(1, 1);
        let out = check_condition1(&p, &SynthesisConfig::default()).unwrap();
        assert!(out.report.residual("image").unwrap() < 1e-14);
        // The LMI with constraint (D2 X2- + E U-) Θ = 0 decides the rest.
        assert!(out.report.lmi.is_some());
        if let Some(reg) = out.regulator {
            assert!((&reg.k1 + &p.known.d1).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_condition2_with_published_witnesses() {
        let p = fixtures::scalar_problem();
        let reference = fixtures::scalar_reference();
        let reg = Regulator {
            k1: reference.k1.clone(),
            k2: reference.k2.clone(),
            provenance: Provenance::Condition2,
            w: Some(reference.w.clone()),
            theta: None,
            x_dagger: Some(reference.x_dagger.clone()),
        };
        let rep = check_witnesses(&p, &reg).unwrap();
        assert!(rep.max_residual() < 1e-12, "{rep:?}");
        assert!((rep.closed_loop_radius.unwrap() - 0.5).abs() < 1e-12);

        let out = check_condition2(&p, &SynthesisConfig::default()).unwrap();
        assert!(out.holds);
        assert!(out.report.residual("w_system").unwrap() < 1e-12);
    }

    #[test]
    fn homogeneous_w_system() {
        let mut p = fixtures::scalar_problem();
        p.known.a3 = Some(Matrix::zeros(1, 3));
        p.known.d1 = Matrix::zeros(1, 3);
        // Keep the data consistent: remove the disturbance from the successors.
        let x2p = p.data.x2_plus() - from_rows(&[&[0.5, 0.5, 0.5]]);
        p.data.x2.columns_mut(1, 3).copy_from(&x2p);
        let out = check_condition2(&p, &SynthesisConfig::default()).unwrap();
        assert!(out.holds);
        let reg = out.regulator.unwrap();
        assert!(reg.w.unwrap().norm() < 1e-14);
        assert!(reg.k1.norm() < 1e-14);
    }

    #[test]
    fn synthesize_chooses_condition2_for_scalar_and_condition1_for_planar() {
        let cfg = SynthesisConfig::default();
        let s = synthesize(&fixtures::scalar_problem(), &cfg).unwrap();
        assert_eq!(s.report.chosen, Some(Provenance::Condition2));
        let s = synthesize(&fixtures::planar_problem(), &cfg).unwrap();
        assert_eq!(s.report.chosen, Some(Provenance::Condition1));
        assert!(!s.report.condition2.holds);
        assert!(s.report.condition2.attempted);
    }

    #[test]
    fn rank_deficient_data_are_not_informative() {
        let mut p = fixtures::planar_problem();
        p.data.x2.row_mut(1).fill(0.0);
        p.known.a3 = Some(Matrix::zeros(2, 3));
        let s = synthesize(&p, &SynthesisConfig::default()).unwrap();
        assert!(s.regulator.is_none());
        assert_eq!(s.report.rank_x2_minus, 1);
        assert!(s.report.messages[0].contains("rank"));
    }

    #[test]
    fn non_anti_stable_exosystem_is_refused() {
        let mut p = fixtures::scalar_problem();
        p.known.a1[(2, 2)] = 0.5;
        assert!(matches!(
            synthesize(&p, &SynthesisConfig::default()),
            Err(Error::NotAntiStable(_))
        ));
    }

    #[test]
    fn zeroed_k2_fails_verification() {
        let p = fixtures::scalar_problem();
        let set = compatible_set(&p).unwrap();
        let mut reg = synthesize(&p, &SynthesisConfig::default())
            .unwrap()
            .regulator
            .unwrap();
        reg.k2.fill(0.0);
        let rep = verify_regulator(&reg, &set, &p.known, 5, 1).unwrap();
        assert_eq!(rep.members.len(), 1);
        assert!(!rep.all_pass());
    }

    #[test]
    fn scalar_without_a3_is_refused_or_verified() {
        let p = fixtures::scalar_problem();
        let s = synthesize_unknown_a3(&p, &SynthesisConfig::default()).unwrap();
        assert!(s.report.unknown_a3);
        if let Some(reg) = s.regulator {
            let set = crate::model::compatible_set_unknown_a3(&p).unwrap();
            assert!(verify_regulator(&reg, &set, &p.known, 10, 0)
                .unwrap()
                .all_pass());
        }
    }

    #[test]
    fn exosystem_samples_in_the_row_space_of_x2_block_the_unknown_a3_variant() {
        // X1- = X2- makes X1- X† = I, so X1- X† = 0 cannot hold.
        let x2 = from_rows(&[&[1.0, 2.0, 0.5]]);
        let data =
            ProblemData::new(from_rows(&[&[1.0, -1.0]]), from_rows(&[&[1.0, 2.0]]), x2).unwrap();
        let known = KnownMatrices {
            a1: from_rows(&[&[1.0]]),
            a3: None,
            d1: from_rows(&[&[1.0]]),
            d2: from_rows(&[&[1.0]]),
            e: from_rows(&[&[1.0]]),
        };
        let p = Problem::new(data, known).unwrap();
        let s = synthesize_unknown_a3(&p, &SynthesisConfig::default()).unwrap();
        assert!(s.regulator.is_none());
        for c in [&s.report.condition1, &s.report.condition2] {
            if let Some(lmi) = &c.lmi {
                assert!(!lmi.feasible && lmi.min_eig <= 0.0);
            }
        }
    }

    #[test]
    fn identity_exosystem_samples_force_w() {
        // With X1- = I and tau = n1, X1- W = I leaves only W = I, which the
        // data below satisfy exactly.
        let a1 = from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        // X2+ = X2- A1 with a shared middle sample: X2 = [1, 0, 1].
        let x2 = from_rows(&[&[1.0, 0.0, 1.0]]);
        let x2_minus = x2.columns(0, 2).into_owned();
        assert_eq!(x2.columns(1, 2).into_owned(), &x2_minus * &a1);
        let u = from_rows(&[&[0.5, -1.0]]);
        let d2 = from_rows(&[&[1.0]]);
        let e = from_rows(&[&[2.0]]);
        let d1 = -(&d2 * &x2_minus + &e * &u);
        let data = ProblemData::new(u, Matrix::identity(2, 2), x2).unwrap();
        let known = KnownMatrices {
            a1,
            a3: None,
            d1,
            d2,
            e,
        };
        let p = Problem::new(data, known).unwrap();
        let s = synthesize_unknown_a3(&p, &SynthesisConfig::default()).unwrap();
        let w_residual = s.report.condition2.residual("w_system").unwrap();
        assert!(w_residual < 1e-12, "{w_residual}");
        // Θ must vanish, so no stabilizing right inverse is found.
        assert!(s.regulator.is_none());
    }

    #[test]
    fn decision_does_not_depend_on_try_order() {
        let mut problems = vec![fixtures::scalar_problem(), fixtures::planar_problem()];
        for seed in 0..6 {
            problems.push(crate::scenarios::regulable(seed).unwrap().problem);
        }
        for p in &problems {
            let first = synthesize(p, &SynthesisConfig::default()).unwrap();
            let cfg = SynthesisConfig {
                order: TryOrder::Condition1First,
                ..Default::default()
            };
            let second = synthesize(p, &cfg).unwrap();
            assert_eq!(first.report.informative(), second.report.informative());
        }
    }

    #[test]
    fn condition2_witnesses_hold_on_every_sampled_member() {
        use crate::scenarios::{regulable_with, Sizes};
        use rand::SeedableRng;
        let mut checked = 0;
        for seed in 0..12 {
            // tau = n2 + m - 1 leaves a one-dimensional compatible set.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes = Sizes {
                n1: 2,
                n2: 2,
                m: 2,
                p: 1,
                tau: 3,
            };
            let sc = regulable_with(&mut rng, sizes).unwrap();
            let p = &sc.problem;
            let set = compatible_set(p).unwrap();
            assert_eq!(set.dimension(), 1);
            let out = check_condition2(p, &SynthesisConfig::default().with_seed(seed)).unwrap();
            let Some(reg) = out.regulator else { continue };
            let w = reg.w.as_ref().unwrap();
            let x_dagger = reg.x_dagger.as_ref().unwrap();
            let t = p.data.x2_minus() * w;
            let v = &p.data.u_minus * w;
            let data_loop = p.closed_loop_data().unwrap() * x_dagger;
            let k = &p.known;
            for sys in simulation::sample_members(&set, 10, 5.0, seed).unwrap() {
                let res = analysis::regulator_equation_residual(
                    &sys.a1, &sys.a2, &sys.b2, &sys.a3, &k.d1, &k.d2, &k.e, &t, &v,
                );
                assert!(res < 1e-8, "seed {seed}: {res}");
                let loop_err = (&sys.a2 + &sys.b2 * &reg.k2 - &data_loop).amax();
                assert!(loop_err < 1e-9, "seed {seed}: {loop_err}");
            }
            let x = p.data.x2_minus();
            assert!((&x * x_dagger - Matrix::identity(2, 2)).amax() < 1e-10);
            assert!((&reg.k2 * &x - &p.data.u_minus * x_dagger * &x).amax() < 1e-10);
            checked += 1;
        }
        assert!(checked >= 10, "{checked}");
    }
}
