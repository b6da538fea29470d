//! Model-based primitives: spectra, the Sylvester equation `T A1 - A2 T = A3`
//! and the classical regulator equations.
//!
//! These work on explicit matrices and serve both as building blocks for
//! verification and as identification-based oracles for the data-driven path.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, unvec, vec};
use crate::Matrix;

/// Default guard band around the unit circle.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Relative tolerance for equation residuals in this module.
pub const EQUATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralInfo {
    pub eigenvalues: Vec<Complex<f64>>,
    pub spectral_radius: f64,
    /// Every `|lambda| < 1 - margin`.
    pub is_stable: bool,
    /// Every `|lambda| >= 1 - margin`.
    pub is_anti_stable: bool,
}

impl SpectralInfo {
    /// Smallest eigenvalue modulus (`inf` for an empty spectrum).
    pub fn min_modulus(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalues via the real Schur form and the derived stability flags.
pub fn spectral_info(m: &Matrix, margin: f64) -> Result<SpectralInfo> {
    if !m.is_square() {
        return Err(Error::NotSquare("matrix".into()));
    }
    linalg::check_finite("matrix", m)?;
    let eigenvalues: Vec<Complex<f64>> = if m.nrows() == 0 {
        Vec::new()
    } else {
        m.clone()
            .schur()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    };
    let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let is_stable = eigenvalues.iter().all(|l| l.norm() < 1.0 - margin);
    let is_anti_stable = eigenvalues.iter().all(|l| l.norm() >= 1.0 - margin);
    Ok(SpectralInfo {
        eigenvalues,
        spectral_radius,
        is_stable,
        is_anti_stable,
    })
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(spectral_info(m, 0.0)?.spectral_radius)
}

/// Error unless `a1` is anti-stable within [`STABILITY_MARGIN`].
pub fn require_anti_stable(a1: &Matrix) -> Result<()> {
    let info = spectral_info(a1, STABILITY_MARGIN)?;
    if info.is_anti_stable {
        Ok(())
    } else {
        Err(Error::NotAntiStable(info.min_modulus()))
    }
}

/// Solve `T A1 - A2 T = A3` for `T` (`n2 x n1`) through the vectorized system
/// `(A1^T ⊗ I - I ⊗ A2) vec T = vec A3`.
pub fn solve_sylvester(a1: &Matrix, a2: &Matrix, a3: &Matrix) -> Result<Matrix> {
    if !a1.is_square() {
        return Err(Error::NotSquare("A1".into()));
    }
    if !a2.is_square() {
        return Err(Error::NotSquare("A2".into()));
    }
    let (n1, n2) = (a1.nrows(), a2.nrows());
    linalg::check_shape("A3", a3, n2, n1)?;
    if n1 == 0 || n2 == 0 {
        return Ok(Matrix::zeros(n2, n1));
    }
    let op = kron(&a1.transpose(), &Matrix::identity(n2, n2)) - kron(&Matrix::identity(n1, n1), a2);
    let s = linalg::svd(&op).singular_values;
    let (smax, smin) = (s[0], *s.last().unwrap());
    if smin <= 1e-12 * smax.max(1.0) {
        return Err(Error::SingularSylvester(smin));
    }
    let rhs = vec(a3);
    let sol = op
        .full_piv_lu()
        .solve(&Matrix::from_column_slice(n1 * n2, 1, rhs.as_slice()))
        .ok_or(Error::SingularSylvester(smin))?;
    Ok(Matrix::from_column_slice(n2, n1, sol.as_slice()))
}

#[derive(Debug, Clone)]
pub struct RegulationCheck {
    pub regulated: bool,
    pub endo_stable: bool,
    /// The unique Sylvester solution, when `A2` is stable.
    pub t: Option<Matrix>,
    /// `‖D1 + D2 T‖_F`, when `T` exists.
    pub output_residual: Option<f64>,
}

/// Decide whether the autonomous interconnection
/// `x1+ = A1 x1`, `x2+ = A2 x2 + A3 x1`, `z = D1 x1 + D2 x2`
/// is endo-stable and output regulated.
///
/// Requires `A1` anti-stable. The answer is yes iff `A2` is stable and the
/// unique `T` with `T A1 - A2 T = A3` also satisfies `D1 + D2 T = 0`.
pub fn check_output_regulated(
    a1: &Matrix,
    a2: &Matrix,
    a3: &Matrix,
    d1: &Matrix,
    d2: &Matrix,
) -> Result<RegulationCheck> {
    require_anti_stable(a1)?;
    let (n1, n2) = (a1.nrows(), a2.nrows());
    linalg::check_shape("A3", a3, n2, n1)?;
    linalg::check_shape("D2", d2, d1.nrows(), n2)?;
    linalg::check_shape("D1", d1, d2.nrows(), n1)?;

    let endo_stable = spectral_info(a2, STABILITY_MARGIN)?.is_stable;
    if !endo_stable {
        return Ok(RegulationCheck {
            regulated: false,
            endo_stable,
            t: None,
            output_residual: None,
        });
    }
    let t = solve_sylvester(a1, a2, a3)?;
    let residual = (d1 + d2 * &t).norm();
    let tol = EQUATION_TOL * (1.0 + d1.norm() + d2.norm() * t.norm());
    Ok(RegulationCheck {
        regulated: residual <= tol,
        endo_stable,
        t: Some(t),
        output_residual: Some(residual),
    })
}

/// Least-squares solution of the classical regulator equations.
#[derive(Debug, Clone)]
pub struct RegulatorEquations {
    pub t: Matrix,
    pub v: Matrix,
    /// Residual of the stacked system.
    pub residual: f64,
    pub feasible: bool,
}

/// Solve `T A1 - A2 T - B2 V = A3`, `D1 + D2 T + E V = 0` jointly for
/// `(T, V)` as one minimum-norm least-squares problem.
pub fn solve_classical_regulator(
    a1: &Matrix,
    a2: &Matrix,
    b2: &Matrix,
    a3: &Matrix,
    d1: &Matrix,
    d2: &Matrix,
    e: &Matrix,
) -> Result<RegulatorEquations> {
    require_anti_stable(a1)?;
    let (n1, n2, m, p) = (a1.nrows(), a2.nrows(), b2.ncols(), d1.nrows());
    if !a2.is_square() {
        return Err(Error::NotSquare("A2".into()));
    }
    linalg::check_shape("B2", b2, n2, m)?;
    linalg::check_shape("A3", a3, n2, n1)?;
    linalg::check_shape("D1", d1, p, n1)?;
    linalg::check_shape("D2", d2, p, n2)?;
    linalg::check_shape("E", e, p, m)?;

    let i1 = Matrix::identity(n1, n1);
    let top_t = kron(&a1.transpose(), &Matrix::identity(n2, n2)) - kron(&i1, a2);
    let top_v = -kron(&i1, b2);
    let bot_t = kron(&i1, d2);
    let bot_v = kron(&i1, e);

    let (nt, nv) = (n2 * n1, m * n1);
    let rows = n2 * n1 + p * n1;
    let mut op = Matrix::zeros(rows, nt + nv);
    op.view_mut((0, 0), (n2 * n1, nt)).copy_from(&top_t);
    op.view_mut((0, nt), (n2 * n1, nv)).copy_from(&top_v);
    op.view_mut((n2 * n1, 0), (p * n1, nt)).copy_from(&bot_t);
    op.view_mut((n2 * n1, nt), (p * n1, nv)).copy_from(&bot_v);

    let mut rhs = Matrix::zeros(rows, 1);
    rhs.view_mut((0, 0), (n2 * n1, 1))
        .copy_from_slice(vec(a3).as_slice());
    rhs.view_mut((n2 * n1, 0), (p * n1, 1))
        .copy_from_slice((-vec(d1)).as_slice());

    let (x, residual) = linalg::lstsq(&op, &rhs);
    let x = x.column(0).into_owned();
    let t = unvec(&x.rows(0, nt).into_owned(), n2, n1);
    let v = unvec(&x.rows(nt, nv).into_owned(), m, n1);
    let feasible = residual <= EQUATION_TOL * (1.0 + rhs.norm());
    Ok(RegulatorEquations {
        t,
        v,
        residual,
        feasible,
    })
}

/// Residual `‖T A1 - A2 T - B2 V - A3‖ + ‖D1 + D2 T + E V‖`.
#[allow(clippy::too_many_arguments)]
pub fn regulator_equation_residual(
    a1: &Matrix,
    a2: &Matrix,
    b2: &Matrix,
    a3: &Matrix,
    d1: &Matrix,
    d2: &Matrix,
    e: &Matrix,
    t: &Matrix,
    v: &Matrix,
) -> f64 {
    (t * a1 - a2 * t - b2 * v - a3).norm() + (d1 + d2 * t + e * v).norm()
}

/// `K1 = -K2 T + V`.
pub fn assemble_gains(t: &Matrix, v: &Matrix, k2: &Matrix) -> Result<Matrix> {
    let (n2, n1) = t.shape();
    let m = v.nrows();
    linalg::check_shape("V", v, m, n1)?;
    linalg::check_shape("K2", k2, m, n2)?;
    Ok(v - k2 * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn rotation_with_constant() -> Matrix {
        from_rows(&[&[0.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]])
    }

    #[test]
    fn zero_matrix_is_stable() {
        let info = spectral_info(&Matrix::zeros(2, 2), STABILITY_MARGIN).unwrap();
        assert_eq!(info.spectral_radius, 0.0);
        assert!(info.is_stable);
        assert!(!info.is_anti_stable);
    }

    #[test]
    fn planar_closed_loop_spectrum() {
        let m = from_rows(&[&[0.5, -0.25], &[1.0, 0.5]]);
        let info = spectral_info(&m, STABILITY_MARGIN).unwrap();
        assert!(info.is_stable);
        assert!((info.spectral_radius - 0.5f64.sqrt()).abs() < 1e-12);
        let mut eig = info.eigenvalues.clone();
        eig.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((eig[0] - Complex::new(0.5, -0.5)).norm() < 1e-12);
        assert!((eig[1] - Complex::new(0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn exosystem_is_anti_stable() {
        let info = spectral_info(&rotation_with_constant(), STABILITY_MARGIN).unwrap();
        assert!(info.is_anti_stable);
        assert!(!info.is_stable);
        for l in &info.eigenvalues {
            assert!((l.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(
            spectral_info(&Matrix::zeros(2, 3), 0.0),
            Err(Error::NotSquare(_))
        ));
    }

    #[test]
    fn sylvester_homogeneous() {
        let a1 = rotation_with_constant();
        let a2 = from_rows(&[&[0.3]]);
        let t = solve_sylvester(&a1, &a2, &Matrix::zeros(1, 3)).unwrap();
        assert_eq!(t.norm(), 0.0);
    }

    #[test]
    fn sylvester_recovers_back_solved_solution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n1 = rng.gen_range(1..=4);
            let n2 = rng.gen_range(1..=4);
            let a1 = crate::scenarios::unit_circle_exosystem(&mut rng, n1);
            let mut a2 = Matrix::from_fn(n2, n2, |_, _| rng.gen_range(-1.0..1.0));
            a2 *= 0.9 / spectral_radius(&a2).unwrap().max(1e-3);
            let t = Matrix::from_fn(n2, n1, |_, _| rng.gen_range(-1.0..1.0));
            let a3 = &t * &a1 - &a2 * &t;
            let solved = solve_sylvester(&a1, &a2, &a3).unwrap();
            assert!((solved - &t).norm() < 1e-10 * (1.0 + t.norm()));
        }
    }

    #[test]
    fn sylvester_scalar() {
        let t = solve_sylvester(
            &from_rows(&[&[2.0]]),
            &from_rows(&[&[0.0]]),
            &from_rows(&[&[3.0]]),
        )
        .unwrap();
        assert!((t[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sylvester_with_shared_eigenvalue_is_singular() {
        let r = solve_sylvester(
            &from_rows(&[&[1.0]]),
            &from_rows(&[&[1.0]]),
            &from_rows(&[&[1.0]]),
        );
        assert!(matches!(r, Err(Error::SingularSylvester(_))));
    }

    #[test]
    fn zero_output_map_is_regulated() {
        let a1 = rotation_with_constant();
        let a2 = from_rows(&[&[0.5, 0.1], &[0.0, -0.2]]);
        let a3 = from_rows(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]]);
        let chk = check_output_regulated(&a1, &a2, &a3, &Matrix::zeros(1, 3), &Matrix::zeros(1, 2))
            .unwrap();
        assert!(chk.regulated);
        assert!(chk.t.is_some());
    }

    #[test]
    fn scalar_example_closed_loop_is_regulated() {
        // A3 + B2 K1 and D1 + E K1 with the published gains.
        let a1 = rotation_with_constant();
        let a2 = from_rows(&[&[0.5]]);
        let a3 = from_rows(&[&[-0.5, 1.0, 0.0]]);
        let d1 = from_rows(&[&[1.0, 0.0, 0.0]]);
        let d2 = from_rows(&[&[-1.0]]);
        let chk = check_output_regulated(&a1, &a2, &a3, &d1, &d2).unwrap();
        assert!(chk.regulated);
        let t = chk.t.unwrap();
        assert!((t - from_rows(&[&[1.0, 0.0, 0.0]])).norm() < 1e-12);
    }

    #[test]
    fn unstable_endosystem_is_not_regulated() {
        let a1 = from_rows(&[&[1.0]]);
        let chk = check_output_regulated(
            &a1,
            &from_rows(&[&[1.1]]),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(!chk.regulated);
        assert!(!chk.endo_stable);
    }

    #[test]
    fn stable_exosystem_is_rejected() {
        let r = check_output_regulated(
            &from_rows(&[&[0.5]]),
            &from_rows(&[&[0.1]]),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(Error::NotAntiStable(_))));
    }

    #[test]
    fn classical_regulator_for_scalar_example() {
        let a1 = rotation_with_constant();
        let one = from_rows(&[&[1.0]]);
        let a3 = from_rows(&[&[0.0, 0.0, 1.0]]);
        let d1 = from_rows(&[&[1.0, 0.0, 0.0]]);
        let d2 = from_rows(&[&[-1.0]]);
        let e = Matrix::zeros(1, 1);
        let t = from_rows(&[&[1.0, 0.0, 0.0]]);
        let v = from_rows(&[&[-1.0, 1.0, -1.0]]);
        let published = regulator_equation_residual(&a1, &one, &one, &a3, &d1, &d2, &e, &t, &v);
        assert!(published < 1e-12);

        let sol = solve_classical_regulator(&a1, &one, &one, &a3, &d1, &d2, &e).unwrap();
        assert!(sol.feasible);
        assert!(sol.residual < 1e-12);
        // Unique here: T is pinned by D2 T = -D1, V by the first equation.
        assert!((sol.t - t).norm() < 1e-10);
        assert!((sol.v - v).norm() < 1e-10);
    }

    #[test]
    fn classical_regulator_homogeneous() {
        let a1 = rotation_with_constant();
        let sol = solve_classical_regulator(
            &a1,
            &from_rows(&[&[0.2]]),
            &from_rows(&[&[1.0]]),
            &Matrix::zeros(1, 3),
            &Matrix::zeros(1, 3),
            &from_rows(&[&[1.0]]),
            &Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(sol.feasible);
        assert!(sol.t.norm() < 1e-14 && sol.v.norm() < 1e-14);
    }

    #[test]
    fn classical_regulator_infeasible() {
        // B2 = 0, E = 0: z = x1 cannot be zeroed.
        let sol = solve_classical_regulator(
            &from_rows(&[&[1.0]]),
            &from_rows(&[&[0.5]]),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
            &from_rows(&[&[1.0]]),
            &Matrix::zeros(1, 1),
            &Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(!sol.feasible);
    }

    #[test]
    fn assemble_gains_cases() {
        let t = from_rows(&[&[1.0, 0.0, 0.0]]);
        let v = from_rows(&[&[-1.0, 1.0, -1.0]]);
        let k1 = assemble_gains(&t, &v, &from_rows(&[&[-0.5]])).unwrap();
        assert_eq!(k1, from_rows(&[&[-0.5, 1.0, -1.0]]));
        assert_eq!(assemble_gains(&t, &v, &Matrix::zeros(1, 1)).unwrap(), v);
        assert_eq!(
            assemble_gains(&Matrix::zeros(1, 3), &v, &from_rows(&[&[7.0]])).unwrap(),
            v
        );
        assert!(assemble_gains(&t, &v, &Matrix::zeros(2, 1)).is_err());
    }
}
