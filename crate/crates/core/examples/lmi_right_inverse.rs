//! Search for a right inverse of `X2-` with a stable data-driven closed loop,
//! and show the certificate the solver returns.
//!
//! Usage: `cargo run --example lmi_right_inverse`

use ddreg::analysis::spectral_radius;
use ddreg::cli::format_matrix;
use ddreg::linalg::from_rows;
use ddreg::lmi::{check_theta, solve_lmi, LmiOptions, LmiOutcome, LmiProblem};
use ddreg::Matrix;

fn report(name: &str, problem: &LmiProblem) -> ddreg::Result<()> {
    match solve_lmi(problem, &LmiOptions::default())? {
        LmiOutcome::Feasible(s) => {
            let check = check_theta(problem, &s.theta)?;
            println!(
                "{name}: feasible after {} iterations (start {})",
                s.total_iterations, s.start
            );
            println!(
                "  min eigenvalue {:.4e}, symmetry residual {:.1e}",
                s.min_eig, check.symmetry_residual
            );
            println!("  X_dagger = {}", format_matrix(&s.x_dagger));
            println!(
                "  radius of Z X_dagger = {:.6}",
                spectral_radius(&(&problem.z * &s.x_dagger))?
            );
        }
        LmiOutcome::NotFound(f) => {
            println!(
                "{name}: not found within bound and budget (best min eigenvalue {:.4}, {} iterations)",
                f.best_min_eig, f.total_iterations
            );
        }
    }
    Ok(())
}

fn main() -> ddreg::Result<()> {
    // Scalar example: X2- = [0, 3/2, 2], X2+ - A3 X1- = [1, 3/2, 2].
    let scalar = LmiProblem::new(
        from_rows(&[&[0.0, 1.5, 2.0]]),
        from_rows(&[&[1.0, 1.5, 2.0]]),
    );
    report("scalar", &scalar)?;

    // The same data with Θ forced to vanish on the last sample.
    report(
        "scalar, last sample excluded",
        &scalar
            .clone()
            .with_constraint(from_rows(&[&[0.0, 0.0, 1.0]])),
    )?;

    // A square X has a single right inverse; here it is unstable.
    report(
        "forced",
        &LmiProblem::new(Matrix::identity(1, 1), Matrix::from_element(1, 1, 2.0)),
    )?;
    Ok(())
}
