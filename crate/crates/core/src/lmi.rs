//! Search for a right inverse `X† = Θ (X Θ)^{-1}` of `X` that makes `Z X†`
//! stable.
//!
//! A stabilizing right inverse exists iff some `Θ` (`tau x n`) makes `X Θ`
//! symmetric and
//!
//! ```text
//! [ X Θ        Z Θ ]
//! [ (Z Θ)^T    X Θ ]  > 0.
//! ```
//!
//! Extra linear constraints `C_k Θ = 0` encode additional requirements on the
//! right inverse (for instance `(D2 X2- + E U-) X† = 0`).
//!
//! The solver is a phase-I method: it maximizes the minimum eigenvalue of the
//! block matrix, a concave function of `Θ`, by projected supergradient ascent.
//! The linear constraints are removed up front by parametrizing `Θ` over an
//! orthonormal basis of their solution space, so the only projection left is
//! onto the Frobenius ball `‖Θ‖ <= bound`. A "not found" answer means no
//! feasible point was reached within the bound and the iteration budget; it
//! is not a proof of infeasibility.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::Matrix;

#[derive(Debug, Clone)]
pub struct LmiProblem {
    /// `n x tau`; plays the role of `X2-`.
    pub x: Matrix,
    /// `n x tau`; plays the role of `X2+ - A3 X1-`.
    pub z: Matrix,
    /// Each `C_k` must satisfy `C_k Θ = 0`.
    pub equality_constraints: Vec<Matrix>,
}

impl LmiProblem {
    pub fn new(x: Matrix, z: Matrix) -> Self {
        LmiProblem {
            x,
            z,
            equality_constraints: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, c: Matrix) -> Self {
        self.equality_constraints.push(c);
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn tau(&self) -> usize {
        self.x.ncols()
    }

    fn validate(&self) -> Result<()> {
        if self.z.shape() != self.x.shape() {
            return Err(Error::mismatch(
                "Z",
                "X",
                format!("{:?} vs {:?}", self.z.shape(), self.x.shape()),
            ));
        }
        for (k, c) in self.equality_constraints.iter().enumerate() {
            if c.ncols() != self.tau() {
                return Err(Error::mismatch(
                    &format!("C_{k}"),
                    "X",
                    format!(
                        "constraint needs {} columns, found {}",
                        self.tau(),
                        c.ncols()
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LmiOptions {
    /// Frobenius-norm bound on `Θ`.
    pub bound: f64,
    /// Required minimum eigenvalue of the block matrix.
    pub margin: f64,
    /// Iteration budget per start.
    pub max_iterations: usize,
    /// Random restarts, tried only when the pseudoinverse start fails.
    pub starts: usize,
    pub seed: u64,
    /// Initial step as a fraction of `bound`; decays as `1/sqrt(k)`.
    pub step: f64,
    /// Stop a start after this many iterations without improvement (once
    /// feasible, without a 0.1% relative gain).
    pub patience: usize,
}

impl Default for LmiOptions {
    fn default() -> Self {
        LmiOptions {
            bound: 1e3,
            margin: 1e-6,
            max_iterations: 20_000,
            starts: 5,
            seed: 0,
            step: 0.2,
            patience: 2_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub theta: Matrix,
    /// Minimum eigenvalue of the block matrix at `theta`.
    pub min_eig: f64,
    pub x_dagger: Matrix,
    /// Iterations used by the winning start.
    pub iterations: usize,
    pub total_iterations: usize,
    /// Index of the winning start.
    pub start: usize,
}

#[derive(Debug, Clone)]
pub struct LmiFailure {
    /// Best minimum eigenvalue reached (`-inf` when nothing was tried).
    pub best_min_eig: f64,
    pub best_theta: Option<Matrix>,
    pub total_iterations: usize,
    /// `X` lacks full row rank; no right inverse exists at all.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub enum LmiOutcome {
    Feasible(LmiSolution),
    NotFound(LmiFailure),
}

impl LmiOutcome {
    pub fn solution(&self) -> Option<&LmiSolution> {
        match self {
            LmiOutcome::Feasible(s) => Some(s),
            LmiOutcome::NotFound(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, LmiOutcome::Feasible(_))
    }

    /// Best minimum eigenvalue, feasible or not.
    pub fn min_eig(&self) -> f64 {
        match self {
            LmiOutcome::Feasible(s) => s.min_eig,
            LmiOutcome::NotFound(f) => f.best_min_eig,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            LmiOutcome::Feasible(s) => s.total_iterations,
            LmiOutcome::NotFound(f) => f.total_iterations,
        }
    }
}

/// `[[XΘ, ZΘ], [(ZΘ)^T, XΘ]]`, symmetrized.
pub fn block_matrix(problem: &LmiProblem, theta: &Matrix) -> Matrix {
    let n = problem.n();
    let xt = &problem.x * theta;
    let zt = &problem.z * theta;
    let mut f = Matrix::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(&xt);
    f.view_mut((n, n), (n, n)).copy_from(&xt);
    f.view_mut((0, n), (n, n)).copy_from(&zt);
    f.view_mut((n, 0), (n, n)).copy_from(&zt.transpose());
    (&f + f.transpose()) * 0.5
}

/// Diagnostics for a candidate `Θ`.
#[derive(Debug, Clone)]
pub struct ThetaCheck {
    /// `‖XΘ - (XΘ)^T‖_F`.
    pub symmetry_residual: f64,
    /// `‖C_k Θ‖_F` per constraint.
    pub equality_residuals: Vec<f64>,
    pub min_eig: f64,
    /// `Θ (XΘ)^{-1}` when `XΘ` is invertible.
    pub x_dagger: Option<Matrix>,
}

impl ThetaCheck {
    /// Strictly feasible with the given margin and residual tolerance.
    pub fn is_feasible(&self, margin: f64, tol: f64) -> bool {
        self.min_eig > margin
            && self.symmetry_residual <= tol
            && self.equality_residuals.iter().all(|&r| r <= tol)
    }
}

pub fn check_theta(problem: &LmiProblem, theta: &Matrix) -> Result<ThetaCheck> {
    problem.validate()?;
    linalg::check_shape("Theta", theta, problem.tau(), problem.n())?;
    let xt = &problem.x * theta;
    let symmetry_residual = (&xt - xt.transpose()).norm();
    let equality_residuals = problem
        .equality_constraints
        .iter()
        .map(|c| (c * theta).norm())
        .collect();
    let min_eig = if problem.n() == 0 {
        f64::INFINITY
    } else {
        linalg::min_eig_sym(&block_matrix(problem, theta)).0
    };
    let x_dagger = xt.try_inverse().map(|inv| theta * inv);
    Ok(ThetaCheck {
        symmetry_residual,
        equality_residuals,
        min_eig,
        x_dagger,
    })
}

/// Orthonormal basis (columns, in `vec Θ` coordinates) of
/// `{Θ : XΘ symmetric, C_k Θ = 0}`.
fn constraint_basis(problem: &LmiProblem) -> Matrix {
    let (n, tau) = (problem.n(), problem.tau());
    let idx = |i: usize, j: usize| i + j * tau;
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let mut r = DVector::zeros(tau * n);
            for i in 0..tau {
                r[idx(i, b)] += problem.x[(a, i)];
                r[idx(i, a)] -= problem.x[(b, i)];
            }
            rows.push(r);
        }
    }
    for c in &problem.equality_constraints {
        for row in 0..c.nrows() {
            for b in 0..n {
                let mut r = DVector::zeros(tau * n);
                for i in 0..tau {
                    r[idx(i, b)] = c[(row, i)];
                }
                rows.push(r);
            }
        }
    }
    if rows.is_empty() {
        return Matrix::identity(tau * n, tau * n);
    }
    let mut m = Matrix::zeros(rows.len(), tau * n);
    for (k, r) in rows.iter().enumerate() {
        m.set_row(k, &r.transpose());
    }
    linalg::null_space(&m)
}

struct StartResult {
    index: usize,
    best_min_eig: f64,
    best_coords: DVector<f64>,
    best_iteration: usize,
    iterations: usize,
}

struct Ascent<'a> {
    blocks: Vec<Matrix>,
    options: &'a LmiOptions,
}

impl Ascent<'_> {
    fn eval(&self, c: &DVector<f64>) -> (f64, DVector<f64>) {
        let dim = self.blocks[0].nrows();
        let mut f = Matrix::zeros(dim, dim);
        for (cj, fj) in c.iter().zip(&self.blocks) {
            f += fj * *cj;
        }
        linalg::min_eig_sym(&f)
    }

    fn run(&self, index: usize, init: DVector<f64>) -> StartResult {
        let rho = self.options.bound;
        let mut c = init;
        let norm = c.norm();
        if norm > 0.0 {
            c *= rho / norm;
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_c = c.clone();
        let mut best_it = 0;
        let mut last_gain = 0;
        let mut anchor = f64::NEG_INFINITY;
        let mut k = 0;
        // Before feasibility an improvement must beat this to count; after
        // it, a 0.1% relative gain is required.
        let noise = 1e-9 * rho;
        let margin = self.options.margin;
        while k < self.options.max_iterations {
            k += 1;
            let (lam, v) = self.eval(&c);
            if lam > best {
                best = lam;
                best_c = c.clone();
                best_it = k;
            }
            let feasible = best > margin;
            let gain = if feasible {
                1e-3 * anchor.abs().max(margin)
            } else {
                noise
            };
            if best > anchor + gain {
                anchor = best;
                last_gain = k;
            }
            if k - last_gain > self.options.patience {
                break;
            }
            let g = DVector::from_iterator(
                self.blocks.len(),
                self.blocks
                    .iter()
                    .map(|fj| (v.transpose() * fj * &v)[(0, 0)]),
            );
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            let alpha = rho * self.options.step / (k as f64).sqrt();
            c.axpy(alpha / gn, &g, 1.0);
            let cn = c.norm();
            if cn > rho {
                c *= rho / cn;
            }
        }
        StartResult {
            index,
            best_min_eig: best,
            best_coords: best_c,
            best_iteration: best_it,
            iterations: k,
        }
    }
}

/// Maximize the block minimum eigenvalue; report a feasible `Θ` when it
/// exceeds `options.margin`.
pub fn solve_lmi(problem: &LmiProblem, options: &LmiOptions) -> Result<LmiOutcome> {
    problem.validate()?;
    if options.bound <= 0.0 || options.margin < 0.0 {
        return Err(Error::Invalid(
            "LMI bound must be positive and margin nonnegative".into(),
        ));
    }
    let (n, tau) = (problem.n(), problem.tau());
    if n == 0 || linalg::rank(&problem.x) < n {
        return Ok(LmiOutcome::NotFound(LmiFailure {
            best_min_eig: f64::NEG_INFINITY,
            best_theta: None,
            total_iterations: 0,
            rank_deficient: true,
        }));
    }

    let basis = constraint_basis(problem);
    let dim = basis.ncols();
    if dim == 0 {
        // Only Θ = 0 satisfies the constraints.
        let zero = Matrix::zeros(tau, n);
        let min_eig = check_theta(problem, &zero)?.min_eig;
        return Ok(LmiOutcome::NotFound(LmiFailure {
            best_min_eig: min_eig,
            best_theta: Some(zero),
            total_iterations: 0,
            rank_deficient: false,
        }));
    }

    let to_theta = |c: &DVector<f64>| linalg::unvec(&(&basis * c), tau, n);
    let blocks: Vec<Matrix> = (0..dim)
        .map(|j| {
            block_matrix(
                problem,
                &linalg::unvec(&basis.column(j).into_owned(), tau, n),
            )
        })
        .collect();
    let ascent = Ascent { blocks, options };

    // Start 0 projects the pseudoinverse, which is a right inverse with XΘ = I.
    let pinv = linalg::vec(&linalg::pinv(&problem.x));
    let starts = options.starts.max(1);
    let inits: Vec<DVector<f64>> = (0..starts)
        .map(|s| {
            let projected = basis.transpose() * &pinv;
            if s == 0 && projected.norm() > 1e-12 {
                projected
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(s as u64));
                DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0))
            }
        })
        .collect();

    // The remaining starts only run when the first one fails.
    let mut inits = inits.into_iter();
    let first = ascent.run(0, inits.next().expect("at least one start"));
    let mut results = vec![first];
    if results[0].best_min_eig <= options.margin {
        results.extend(
            inits
                .collect::<Vec<_>>()
                .into_par_iter()
                .enumerate()
                .map(|(i, init)| ascent.run(i + 1, init))
                .collect::<Vec<_>>(),
        );
    }
    let total_iterations = results.iter().map(|r| r.iterations).sum();
    results.sort_by(|a, b| {
        b.best_min_eig
            .total_cmp(&a.best_min_eig)
            .then(a.index.cmp(&b.index))
    });
    let best = &results[0];
    let theta = to_theta(&best.best_coords);
    let check = check_theta(problem, &theta)?;

    match check.x_dagger {
        Some(x_dagger) if check.min_eig > options.margin => Ok(LmiOutcome::Feasible(LmiSolution {
            theta,
            min_eig: check.min_eig,
            x_dagger,
            iterations: best.best_iteration,
            total_iterations,
            start: best.index,
        })),
        _ => Ok(LmiOutcome::NotFound(LmiFailure {
            best_min_eig: check.min_eig,
            best_theta: Some(theta),
            total_iterations,
            rank_deficient: false,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::spectral_radius;
    use crate::fixtures;
    use crate::linalg::from_rows;

    fn scalar_lmi() -> LmiProblem {
        LmiProblem::new(
            from_rows(&[&[0.0, 1.5, 2.0]]),
            from_rows(&[&[1.0, 1.5, 2.0]]),
        )
    }

    fn planar_lmi() -> LmiProblem {
        let p = fixtures::planar_problem();
        LmiProblem::new(p.data.x2_minus(), p.closed_loop_data().unwrap())
    }

    fn solve_with_seed(problem: &LmiProblem, seed: u64) -> LmiSolution {
        let options = LmiOptions {
            seed,
            ..LmiOptions::default()
        };
        match solve_lmi(problem, &options).unwrap() {
            LmiOutcome::Feasible(s) => s,
            LmiOutcome::NotFound(f) => panic!("not found: {f:?}"),
        }
    }

    #[test]
    fn scalar_lmi_is_feasible() {
        let p = scalar_lmi();
        let s = solve_with_seed(&p, 0);
        assert!(s.min_eig > 1e-6);
        assert!(((&p.x * &s.x_dagger)[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((&p.z * &s.x_dagger)[(0, 0)].abs() < 1.0);
    }

    #[test]
    fn identity_data_with_zero_successor() {
        let p = LmiProblem::new(Matrix::identity(2, 2), Matrix::zeros(2, 2));
        let s = solve_with_seed(&p, 0);
        assert!((&s.x_dagger - Matrix::identity(2, 2)).norm() < 1e-9);
        assert!((&p.z * &s.x_dagger).norm() < 1e-12);
    }

    #[test]
    fn forced_unstable_right_inverse_is_not_found() {
        let p = LmiProblem::new(from_rows(&[&[1.0]]), from_rows(&[&[2.0]]));
        match solve_lmi(&p, &LmiOptions::default()).unwrap() {
            LmiOutcome::NotFound(f) => {
                assert!(f.best_min_eig <= 0.0);
                assert!(!f.rank_deficient);
            }
            LmiOutcome::Feasible(s) => panic!("unexpected solution {s:?}"),
        }
    }

    #[test]
    fn rank_deficient_x_is_flagged() {
        let p = LmiProblem::new(from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]), Matrix::zeros(2, 2));
        match solve_lmi(&p, &LmiOptions::default()).unwrap() {
            LmiOutcome::NotFound(f) => assert!(f.rank_deficient),
            LmiOutcome::Feasible(_) => panic!("rank-deficient X cannot have a right inverse"),
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = LmiProblem::new(Matrix::identity(2, 3), Matrix::identity(2, 2));
        assert!(solve_lmi(&p, &LmiOptions::default()).is_err());
        let q = scalar_lmi();
        assert!(check_theta(&q, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn equality_constraints_hold_on_the_solution() {
        // Θ must vanish on its last row, as the published witness does.
        let p = scalar_lmi().with_constraint(from_rows(&[&[0.0, 0.0, 1.0]]));
        let s = solve_with_seed(&p, 0);
        let check = check_theta(&p, &s.theta).unwrap();
        assert!(check.equality_residuals[0] < 1e-9);
        assert!(check.symmetry_residual < 1e-9);
        // Forced to zero entirely, only Θ = 0 remains.
        let q = LmiProblem::new(Matrix::identity(1, 1), Matrix::zeros(1, 1))
            .with_constraint(Matrix::identity(1, 1));
        assert!(!solve_lmi(&q, &LmiOptions::default()).unwrap().is_feasible());
    }

    #[test]
    fn scaled_published_theta_has_half_its_scale_as_min_eig() {
        let p = scalar_lmi();
        for s in [0.1, 1.0, 7.5] {
            let theta = from_rows(&[&[-0.5], &[2.0 / 3.0], &[0.0]]) * s;
            let check = check_theta(&p, &theta).unwrap();
            assert!(
                (check.min_eig - s / 2.0).abs() < 1e-12,
                "{s}: {}",
                check.min_eig
            );
            assert!(check.symmetry_residual == 0.0);
            let xd = check.x_dagger.unwrap();
            assert!((&xd - from_rows(&[&[-0.5], &[2.0 / 3.0], &[0.0]])).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_theta_is_rejected() {
        let check = check_theta(&scalar_lmi(), &Matrix::zeros(3, 1)).unwrap();
        assert!(check.min_eig <= 0.0);
        assert!(!check.is_feasible(1e-6, 1e-9));
        assert!(check.x_dagger.is_none());
    }

    /// Grid search for `P = [[a, b], [b, c]] > 0` with `P - M P M^T > 0`,
    /// tested through 2x2 trace and determinant.
    fn lyapunov_by_grid(m: &Matrix) -> Matrix {
        let pd = |q: &Matrix| q[(0, 0)] > 0.0 && q.determinant() > 0.0;
        for i in 1..=16 {
            for j in -8..=8 {
                for k in 1..=16 {
                    let (a, b, c) = (i as f64 * 0.25, j as f64 * 0.25, k as f64 * 0.25);
                    let p = from_rows(&[&[a, b], &[b, c]]);
                    if pd(&p) && pd(&(&p - m * &p * m.transpose())) {
                        return p;
                    }
                }
            }
        }
        panic!("no Lyapunov matrix on the grid");
    }

    #[test]
    fn planar_lyapunov_witness_is_feasible() {
        let p = planar_lmi();
        let x_inv = p.x.clone().try_inverse().unwrap();
        let m = &p.z * &x_inv;
        assert!((&m - fixtures::planar_reference().closed_loop).norm() < 1e-12);
        let lyap = lyapunov_by_grid(&m);
        let check = check_theta(&p, &(&x_inv * &lyap)).unwrap();
        assert!(check.min_eig > 0.0, "{}", check.min_eig);
        assert!(check.symmetry_residual < 1e-12);
    }

    #[test]
    fn solutions_are_stable_and_reproducible_by_check() {
        for p in [scalar_lmi(), planar_lmi()] {
            let s = solve_with_seed(&p, 0);
            let check = check_theta(&p, &s.theta).unwrap();
            assert!((check.min_eig - s.min_eig).abs() < 1e-10);
            assert!(check.symmetry_residual < 1e-9);
            assert!((&p.x * &s.x_dagger - Matrix::identity(p.n(), p.n())).norm() < 1e-9);
            assert!(spectral_radius(&(&p.z * &s.x_dagger)).unwrap() < 1.0);
        }
    }

    #[test]
    fn convex_combinations_and_scalings_stay_feasible() {
        for p in [scalar_lmi(), planar_lmi()] {
            let sols: Vec<LmiSolution> = (0..3)
                .map(|seed| solve_with_seed(&p, seed * 17 + 1))
                .collect();
            for a in &sols {
                for b in &sols {
                    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                        let theta = &a.theta * t + &b.theta * (1.0 - t);
                        assert!(check_theta(&p, &theta).unwrap().min_eig > 0.0);
                    }
                }
                for c in [1e-3, 0.5, 3.0] {
                    let check = check_theta(&p, &(&a.theta * c)).unwrap();
                    assert!(check.min_eig > 0.0);
                    assert!(
                        (check.x_dagger.unwrap() - &a.x_dagger).norm()
                            < 1e-9 * (1.0 + a.x_dagger.norm())
                    );
                }
            }
        }
    }
}
