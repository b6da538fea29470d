//! Seeded random problems that are regulable by construction.
//!
//! The exosystem is a random orthogonal similarity of rotation blocks and
//! `±1`, so its spectrum lies on the unit circle. A solution `(T, V)` of the
//! regulator equations is picked first and `A3`, `D1` are back-solved from
//! it.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{KnownMatrices, Problem, ProblemData, TrueSystem};
use crate::simulation;
use crate::Matrix;

/// A generated problem together with the system and regulator-equation
/// solution behind it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub problem: Problem,
    pub system: TrueSystem,
    pub t: Matrix,
    pub v: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub p: usize,
    pub tau: usize,
}

impl Sizes {
    /// `n1 ∈ 1..=3`, `n2 ∈ 1..=4`, `m ∈ 1..=2`, `p ∈ 1..=m`,
    /// `tau ∈ n2+m ..= n2+m+2`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let n1 = rng.gen_range(1..=3);
        let n2 = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=2);
        let p = rng.gen_range(1..=m);
        let tau = n2 + m + rng.gen_range(0..=2);
        Sizes { n1, n2, m, p, tau }
    }
}

fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn uniform_vec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random orthogonal `n x n` matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    uniform(rng, n, n).qr().q()
}

/// `n x n` matrix with all eigenvalues on the unit circle.
pub fn unit_circle_exosystem(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut block = Matrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        if n - i >= 2 {
            let angle: f64 = rng.gen_range(0.2..std::f64::consts::PI - 0.2);
            let (s, c) = angle.sin_cos();
            block[(i, i)] = c;
            block[(i, i + 1)] = s;
            block[(i + 1, i)] = -s;
            block[(i + 1, i + 1)] = c;
            i += 2;
        } else {
            block[(i, i)] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            i += 1;
        }
    }
    let q = random_orthogonal(rng, n);
    &q * block * q.transpose()
}

/// Regulable instance with open-loop data excited by random inputs.
pub fn regulable(seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = Sizes::random(&mut rng);
    regulable_with(&mut rng, sizes)
}

pub fn regulable_with(rng: &mut impl Rng, sizes: Sizes) -> Result<Scenario> {
    let Sizes { n1, n2, m, p, tau } = sizes;
    let a1 = unit_circle_exosystem(rng, n1);
    let a2 = uniform(rng, n2, n2);
    let b2 = uniform(rng, n2, m);
    let d2 = uniform(rng, p, n2);
    let e = uniform(rng, p, m);
    let t = uniform(rng, n2, n1);
    let v = uniform(rng, m, n1);
    let a3 = &t * &a1 - &a2 * &t - &b2 * &v;
    let d1 = -(&d2 * &t) - &e * &v;
    let system = TrueSystem::new(a1.clone(), a2, b2, a3.clone())?;
    let x1_0 = uniform_vec(rng, n1);
    let x2_0 = uniform_vec(rng, n2);
    let inputs = uniform(rng, m, tau);
    let data = simulation::generate_data(&system, &x1_0, &x2_0, &inputs)?;
    let known = KnownMatrices {
        a1,
        a3: Some(a3),
        d1,
        d2,
        e,
    };
    Ok(Scenario {
        problem: Problem::new(data, known)?,
        system,
        t,
        v,
    })
}

/// Instance for the unknown-`A3` variant: data recorded in closed loop under
/// a regulating feedback `u = K1 x1 + K2 x2`, with `tau = n1 + n2`. The
/// recorded inputs are then a combination of the states, so `A2`, `B2` and
/// `A3` are not identified, while `X1- Θ = 0` and the unknown-`A3` regulator
/// equations stay solvable.
pub fn unknown_a3(seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = rng.gen_range(1..=3);
    let n2 = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let p = rng.gen_range(1..=m);
    let a1 = unit_circle_exosystem(&mut rng, n1);
    let b2 = uniform(&mut rng, n2, m);
    let k2 = uniform(&mut rng, m, n2);
    // A stable closed loop with spectral radius 0.6.
    let q = random_orthogonal(&mut rng, n2);
    let acl = &q
        * Matrix::from_diagonal(&DVector::from_fn(n2, |_, _| rng.gen_range(-0.6..0.6)))
        * q.transpose();
    let a2 = &acl - &b2 * &k2;
    let d2 = uniform(&mut rng, p, n2);
    let e = uniform(&mut rng, p, m);
    let t = uniform(&mut rng, n2, n1);
    let v = uniform(&mut rng, m, n1);
    let a3 = &t * &a1 - &a2 * &t - &b2 * &v;
    let d1 = -(&d2 * &t) - &e * &v;
    let k1 = &v - &k2 * &t;
    let system = TrueSystem::new(a1.clone(), a2, b2, a3.clone())?;

    let tau = n1 + n2;
    let mut x1 = uniform_vec(&mut rng, n1);
    let mut x2 = uniform_vec(&mut rng, n2);
    let mut x1m = Matrix::zeros(n1, tau);
    let mut x2m = Matrix::zeros(n2, tau + 1);
    let mut um = Matrix::zeros(m, tau);
    x2m.set_column(0, &x2);
    for s in 0..tau {
        let u = &k1 * &x1 + &k2 * &x2;
        x1m.set_column(s, &x1);
        um.set_column(s, &u);
        x2 = &system.a2 * &x2 + &system.b2 * &u + &system.a3 * &x1;
        x1 = &system.a1 * &x1;
        x2m.set_column(s + 1, &x2);
    }
    let data = ProblemData::new(um, x1m, x2m)?;
    let known = KnownMatrices {
        a1,
        a3: None,
        d1,
        d2,
        e,
    };
    Ok(Scenario {
        problem: Problem::new(data, known)?,
        system,
        t,
        v,
    })
}
