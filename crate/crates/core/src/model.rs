//! Shared domain types and the set of systems compatible with the data.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, check_finite};
use crate::Matrix;

/// Default relative tolerance for data-consistency and equation residuals.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

/// Measured samples on the interval `0..=tau`.
///
/// `u_minus` holds `u(0..tau)`, `x1_minus` holds `x1(0..tau)` and `x2` holds
/// `x2(0..=tau)`, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub u_minus: Matrix,
    pub x1_minus: Matrix,
    pub x2: Matrix,
}

impl ProblemData {
    pub fn new(u_minus: Matrix, x1_minus: Matrix, x2: Matrix) -> Result<Self> {
        let data = ProblemData {
            u_minus,
            x1_minus,
            x2,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("U_minus", &self.u_minus)?;
        check_finite("X1_minus", &self.x1_minus)?;
        check_finite("X2", &self.x2)?;
        let tau = self.u_minus.ncols();
        if tau < 1 {
            return Err(Error::Invalid(
                "at least one sample (tau >= 1) is required".into(),
            ));
        }
        if self.x1_minus.ncols() != tau {
            return Err(Error::mismatch(
                "X1_minus",
                "U_minus",
                format!("{} columns vs {}", self.x1_minus.ncols(), tau),
            ));
        }
        if self.x2.ncols() != tau + 1 {
            return Err(Error::mismatch(
                "X2",
                "U_minus",
                format!(
                    "X2 needs tau + 1 = {} columns, found {}",
                    tau + 1,
                    self.x2.ncols()
                ),
            ));
        }
        Ok(())
    }

    pub fn tau(&self) -> usize {
        self.u_minus.ncols()
    }

    pub fn n1(&self) -> usize {
        self.x1_minus.nrows()
    }

    pub fn n2(&self) -> usize {
        self.x2.nrows()
    }

    pub fn m(&self) -> usize {
        self.u_minus.nrows()
    }

    /// `x2(0..tau)`.
    pub fn x2_minus(&self) -> Matrix {
        self.x2.columns(0, self.tau()).into_owned()
    }

    /// `x2(1..=tau)`.
    pub fn x2_plus(&self) -> Matrix {
        self.x2.columns(1, self.tau()).into_owned()
    }
}

/// Matrices that are known a priori: the exosystem, the interconnection and
/// the output specification. `a3` may be absent when it is treated as unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownMatrices {
    pub a1: Matrix,
    pub a3: Option<Matrix>,
    pub d1: Matrix,
    pub d2: Matrix,
    pub e: Matrix,
}

impl KnownMatrices {
    pub fn n1(&self) -> usize {
        self.a1.nrows()
    }

    pub fn p(&self) -> usize {
        self.d1.nrows()
    }

    pub fn a3(&self) -> Result<&Matrix> {
        self.a3.as_ref().ok_or(Error::MissingA3)
    }

    /// The same matrices without `A3`.
    pub fn without_a3(&self) -> Self {
        KnownMatrices {
            a3: None,
            ..self.clone()
        }
    }
}

/// Data paired with the known matrices after dimension cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub data: ProblemData,
    pub known: KnownMatrices,
}

impl Problem {
    /// Validate dimensions across data and known matrices.
    pub fn new(data: ProblemData, known: KnownMatrices) -> Result<Self> {
        data.validate()?;
        let k = &known;
        check_finite("A1", &k.a1)?;
        check_finite("D1", &k.d1)?;
        check_finite("D2", &k.d2)?;
        check_finite("E", &k.e)?;
        if let Some(a3) = &k.a3 {
            check_finite("A3", a3)?;
        }

        let (n1, n2, m) = (data.n1(), data.n2(), data.m());
        if !k.a1.is_square() {
            return Err(Error::NotSquare("A1".into()));
        }
        if k.a1.nrows() != n1 {
            return Err(Error::mismatch(
                "A1",
                "X1_minus",
                format!("A1 is {0}x{0} but X1_minus has {1} rows", k.a1.nrows(), n1),
            ));
        }
        if let Some(a3) = &k.a3 {
            if a3.shape() != (n2, n1) {
                return Err(Error::mismatch(
                    "A3",
                    "X2/X1_minus",
                    format!("A3 must be {n2}x{n1}, found {}x{}", a3.nrows(), a3.ncols()),
                ));
            }
        }
        let p = k.d1.nrows();
        if k.d1.ncols() != n1 {
            return Err(Error::mismatch(
                "D1",
                "A1",
                format!("D1 needs {n1} columns, found {}", k.d1.ncols()),
            ));
        }
        if k.d2.shape() != (p, n2) {
            return Err(Error::mismatch(
                "D2",
                "D1/X2",
                format!(
                    "D2 must be {p}x{n2}, found {}x{}",
                    k.d2.nrows(),
                    k.d2.ncols()
                ),
            ));
        }
        if k.e.shape() != (p, m) {
            return Err(Error::mismatch(
                "E",
                "D1/U_minus",
                format!("E must be {p}x{m}, found {}x{}", k.e.nrows(), k.e.ncols()),
            ));
        }
        Ok(Problem { data, known })
    }

    /// `X2+ - A3 X1-`, the part of the successor states explained by `(A2, B2)`.
    pub fn closed_loop_data(&self) -> Result<Matrix> {
        let a3 = self.known.a3()?;
        Ok(self.data.x2_plus() - a3 * &self.data.x1_minus)
    }

    /// `D2 X2- + E U-`.
    pub fn output_data(&self) -> Matrix {
        &self.known.d2 * self.data.x2_minus() + &self.known.e * &self.data.u_minus
    }
}

/// Alias matching the operation name used in the docs.
pub fn build_problem(data: ProblemData, known: KnownMatrices) -> Result<Problem> {
    Problem::new(data, known)
}

/// A complete interconnection: exosystem `a1`, endosystem `(a2, b2)` and
/// coupling `a3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueSystem {
    pub a1: Matrix,
    pub a2: Matrix,
    pub b2: Matrix,
    pub a3: Matrix,
}

impl TrueSystem {
    pub fn new(a1: Matrix, a2: Matrix, b2: Matrix, a3: Matrix) -> Result<Self> {
        for (name, m) in [("A1", &a1), ("A2", &a2), ("B2", &b2), ("A3", &a3)] {
            check_finite(name, m)?;
        }
        if !a1.is_square() {
            return Err(Error::NotSquare("A1".into()));
        }
        if !a2.is_square() {
            return Err(Error::NotSquare("A2".into()));
        }
        let (n1, n2) = (a1.nrows(), a2.nrows());
        if b2.nrows() != n2 {
            return Err(Error::mismatch("B2", "A2", "row counts differ"));
        }
        linalg::check_shape("A3", &a3, n2, n1)?;
        Ok(TrueSystem { a1, a2, b2, a3 })
    }

    pub fn n1(&self) -> usize {
        self.a1.nrows()
    }

    pub fn n2(&self) -> usize {
        self.a2.nrows()
    }

    pub fn m(&self) -> usize {
        self.b2.ncols()
    }
}

/// Frobenius norm of `A2 X2- + B2 U- + A3 X1- - X2+`.
pub fn data_residual(data: &ProblemData, sys: &TrueSystem) -> f64 {
    (&sys.a2 * data.x2_minus() + &sys.b2 * &data.u_minus + &sys.a3 * &data.x1_minus
        - data.x2_plus())
    .norm()
}

/// Affine parametrization of every system consistent with the data:
/// a particular solution plus `N S^T` for an orthonormal kernel basis `S`.
///
/// With `A3` known the unknowns are `[A2 B2]` and `S` spans the kernel of
/// `[X2-; U-]^T`. With `A3` unknown the unknowns are `[A2 B2 A3]` and `S`
/// spans the kernel of `[X2-; U-; X1-]^T`.
#[derive(Debug, Clone)]
pub struct CompatibleSet {
    pub a1: Matrix,
    pub a2_part: Matrix,
    pub b2_part: Matrix,
    pub a3_part: Matrix,
    /// Columns span the kernel of the transposed regressor.
    pub kernel: Matrix,
    pub a3_free: bool,
    pub consistency_residual: f64,
    /// Rank of the stacked regressor.
    pub regressor_rank: usize,
}

impl CompatibleSet {
    pub fn n2(&self) -> usize {
        self.a2_part.nrows()
    }

    pub fn m(&self) -> usize {
        self.b2_part.ncols()
    }

    /// Kernel dimension `r`; zero means the data identify the system.
    pub fn dimension(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn s1(&self) -> Matrix {
        self.kernel.rows(0, self.n2()).into_owned()
    }

    pub fn s2(&self) -> Matrix {
        self.kernel.rows(self.n2(), self.m()).into_owned()
    }

    /// Rows of the kernel basis acting on `A3`; empty unless `a3_free`.
    pub fn s3(&self) -> Matrix {
        let n1 = if self.a3_free { self.a1.nrows() } else { 0 };
        self.kernel.rows(self.n2() + self.m(), n1).into_owned()
    }

    pub fn particular(&self) -> TrueSystem {
        TrueSystem {
            a1: self.a1.clone(),
            a2: self.a2_part.clone(),
            b2: self.b2_part.clone(),
            a3: self.a3_part.clone(),
        }
    }

    /// The member `(A2 + N S1^T, B2 + N S2^T[, A3 + N S3^T])`.
    pub fn member_at(&self, n: &Matrix) -> Result<TrueSystem> {
        linalg::check_shape("N", n, self.n2(), self.dimension())?;
        let mut sys = self.particular();
        if self.dimension() == 0 {
            return Ok(sys);
        }
        sys.a2 += n * self.s1().transpose();
        sys.b2 += n * self.s2().transpose();
        if self.a3_free {
            sys.a3 += n * self.s3().transpose();
        }
        Ok(sys)
    }
}

/// Compatible set with `A3` known, at the default tolerance.
pub fn compatible_set(problem: &Problem) -> Result<CompatibleSet> {
    compatible_set_with_tol(problem, DEFAULT_RESIDUAL_TOL)
}

pub fn compatible_set_with_tol(problem: &Problem, tol: f64) -> Result<CompatibleSet> {
    let a3 = problem.known.a3()?.clone();
    let d = &problem.data;
    let regressor = linalg::vstack(&[&d.x2_minus(), &d.u_minus]);
    let target = d.x2_plus() - &a3 * &d.x1_minus;
    let (part, residual, rank, kernel) = solve_affine(&regressor, &target, tol)?;
    let (n2, m) = (d.n2(), d.m());
    Ok(CompatibleSet {
        a1: problem.known.a1.clone(),
        a2_part: part.columns(0, n2).into_owned(),
        b2_part: part.columns(n2, m).into_owned(),
        a3_part: a3,
        kernel,
        a3_free: false,
        consistency_residual: residual,
        regressor_rank: rank,
    })
}

/// Compatible set with `A3` treated as unknown.
pub fn compatible_set_unknown_a3(problem: &Problem) -> Result<CompatibleSet> {
    compatible_set_unknown_a3_with_tol(problem, DEFAULT_RESIDUAL_TOL)
}

pub fn compatible_set_unknown_a3_with_tol(problem: &Problem, tol: f64) -> Result<CompatibleSet> {
    let d = &problem.data;
    let regressor = linalg::vstack(&[&d.x2_minus(), &d.u_minus, &d.x1_minus]);
    let target = d.x2_plus();
    let (part, residual, rank, kernel) = solve_affine(&regressor, &target, tol)?;
    let (n2, m, n1) = (d.n2(), d.m(), d.n1());
    Ok(CompatibleSet {
        a1: problem.known.a1.clone(),
        a2_part: part.columns(0, n2).into_owned(),
        b2_part: part.columns(n2, m).into_owned(),
        a3_part: part.columns(n2 + m, n1).into_owned(),
        kernel,
        a3_free: true,
        consistency_residual: residual,
        regressor_rank: rank,
    })
}

/// Minimum-norm solution of `P R = Y`, its residual, `rank(R)` and a basis of
/// `ker R^T`.
fn solve_affine(
    regressor: &Matrix,
    target: &Matrix,
    tol: f64,
) -> Result<(Matrix, f64, usize, Matrix)> {
    let part = target * linalg::pinv(regressor);
    let residual = (&part * regressor - target).norm();
    let tolerance = tol * (1.0 + target.norm());
    if residual > tolerance {
        return Err(Error::InconsistentData {
            residual,
            tolerance,
        });
    }
    let kernel = linalg::null_space(&regressor.transpose());
    let rank = regressor.nrows() - kernel.ncols();
    Ok((part, residual, rank, kernel))
}

/// Which mechanism produced a regulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Pointwise output zeroing: `D1 + E K1 = 0`, `D2 + E K2 = 0`.
    Condition1,
    /// Data-driven regulator equations.
    Condition2,
    UnknownA3Condition1,
    UnknownA3Condition2,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Condition1 => "condition-1",
            Provenance::Condition2 => "condition-2",
            Provenance::UnknownA3Condition1 => "unknown-a3/condition-1",
            Provenance::UnknownA3Condition2 => "unknown-a3/condition-2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Provenance::Condition1,
            Provenance::Condition2,
            Provenance::UnknownA3Condition1,
            Provenance::UnknownA3Condition2,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }

    pub fn is_condition2(&self) -> bool {
        matches!(
            self,
            Provenance::Condition2 | Provenance::UnknownA3Condition2
        )
    }

    pub fn unknown_a3(&self) -> bool {
        matches!(
            self,
            Provenance::UnknownA3Condition1 | Provenance::UnknownA3Condition2
        )
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State feedback `u = K1 x1 + K2 x2` with the witnesses that certify it.
#[derive(Debug, Clone, PartialEq)]
pub struct Regulator {
    pub k1: Matrix,
    pub k2: Matrix,
    pub provenance: Provenance,
    pub w: Option<Matrix>,
    pub theta: Option<Matrix>,
    pub x_dagger: Option<Matrix>,
}

impl Regulator {
    pub fn m(&self) -> usize {
        self.k1.nrows()
    }

    /// Check gain and witness shapes against `(n1, n2, m, tau)`.
    pub fn check_dims(&self, n1: usize, n2: usize, m: usize, tau: usize) -> Result<()> {
        linalg::check_shape("K1", &self.k1, m, n1)?;
        linalg::check_shape("K2", &self.k2, m, n2)?;
        if let Some(w) = &self.w {
            linalg::check_shape("W", w, tau, n1)?;
        }
        if let Some(t) = &self.theta {
            linalg::check_shape("Theta", t, tau, n2)?;
        }
        if let Some(x) = &self.x_dagger {
            linalg::check_shape("X_dagger", x, tau, n2)?;
        }
        Ok(())
    }
}
