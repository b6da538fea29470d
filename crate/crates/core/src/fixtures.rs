//! Bundled problems: the scalar tracking example and the two-dimensional
//! example, with the reference values they are known to produce.

use crate::io;
use crate::linalg::from_rows;
use crate::model::{Problem, TrueSystem};
use crate::Matrix;

pub const SCALAR_TOML: &str = include_str!("../fixtures/scalar.toml");
pub const PLANAR_TOML: &str = include_str!("../fixtures/planar.toml");
pub const SCALAR_SYSTEM_TOML: &str = include_str!("../fixtures/scalar_system.toml");

/// Names accepted by the `example` subcommand.
pub const EXAMPLES: [&str; 2] = ["scalar", "planar"];

pub fn problem_text(name: &str) -> Option<&'static str> {
    match name {
        "scalar" => Some(SCALAR_TOML),
        "planar" => Some(PLANAR_TOML),
        _ => None,
    }
}

pub fn scalar_problem() -> Problem {
    io::parse_problem(SCALAR_TOML, "scalar.toml")
        .expect("bundled scalar fixture")
        .problem
}

pub fn planar_problem() -> Problem {
    io::parse_problem(PLANAR_TOML, "planar.toml")
        .expect("bundled planar fixture")
        .problem
}

/// The interconnection that generated the scalar data (a_s = b_s = 1).
pub fn scalar_true_system() -> TrueSystem {
    io::parse_system(SCALAR_SYSTEM_TOML, "scalar_system.toml")
        .expect("bundled scalar system")
        .system
}

/// One member of the planar compatible set.
pub fn planar_true_system() -> TrueSystem {
    TrueSystem::new(
        scalar_free_a1(),
        from_rows(&[&[2.0, 0.125], &[4.0, 1.25]]),
        from_rows(&[&[1.5], &[3.0]]),
        from_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]),
    )
    .expect("planar system")
}

fn scalar_free_a1() -> Matrix {
    from_rows(&[&[0.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]])
}

/// Published witnesses for the scalar example.
#[derive(Debug, Clone)]
pub struct ScalarReference {
    pub w: Matrix,
    pub x_dagger: Matrix,
    pub k1: Matrix,
    pub k2: Matrix,
}

pub fn scalar_reference() -> ScalarReference {
    ScalarReference {
        w: from_rows(&[&[-1.0, 1.0, -1.0], &[2.0 / 3.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
        x_dagger: from_rows(&[&[-0.5], &[2.0 / 3.0], &[0.0]]),
        k1: from_rows(&[&[-0.5, 1.0, -1.0]]),
        k2: from_rows(&[&[-0.5]]),
    }
}

/// Published values for the two-dimensional example.
#[derive(Debug, Clone)]
pub struct PlanarReference {
    pub closed_loop: Matrix,
    pub k2: Matrix,
    /// Real and imaginary part of the closed-loop eigenvalue pair.
    pub eigenvalue: (f64, f64),
}

pub fn planar_reference() -> PlanarReference {
    PlanarReference {
        closed_loop: from_rows(&[&[0.5, -0.25], &[1.0, 0.5]]),
        k2: from_rows(&[&[-1.0, -0.25]]),
        eigenvalue: (0.5, 0.5),
    }
}
