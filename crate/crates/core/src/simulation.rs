//! Data generation, closed-loop simulation and an empirical decay test for
//! the regulated output.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CompatibleSet, KnownMatrices, ProblemData, Regulator, TrueSystem};
use crate::Matrix;

/// Samples of the interconnection, one column per time step `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x1: Matrix,
    pub x2: Matrix,
    pub u: Matrix,
    pub z: Matrix,
}

impl Trajectory {
    /// Number of samples (`horizon + 1`).
    pub fn len(&self) -> usize {
        self.x1.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn z_norms(&self) -> Vec<f64> {
        self.z.column_iter().map(|c| c.norm()).collect()
    }

    /// Drop the first `k` samples.
    pub fn shifted(&self, k: usize) -> Trajectory {
        let n = self.len().saturating_sub(k);
        Trajectory {
            x1: self.x1.columns(k, n).into_owned(),
            x2: self.x2.columns(k, n).into_owned(),
            u: self.u.columns(k, n).into_owned(),
            z: self.z.columns(k, n).into_owned(),
        }
    }
}

fn check_vec(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::shape(name, (n, 1), (v.len(), 1)));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

/// Run the open-loop interconnection under `inputs` (`m x tau`) and collect
/// the data matrices.
pub fn generate_data(
    sys: &TrueSystem,
    x1_0: &DVector<f64>,
    x2_0: &DVector<f64>,
    inputs: &Matrix,
) -> Result<ProblemData> {
    let (n1, n2, m) = (sys.n1(), sys.n2(), sys.m());
    check_vec("x1_0", x1_0, n1)?;
    check_vec("x2_0", x2_0, n2)?;
    if inputs.nrows() != m {
        return Err(Error::mismatch(
            "inputs",
            "B2",
            format!("{} rows vs {m} inputs", inputs.nrows()),
        ));
    }
    let tau = inputs.ncols();
    if tau < 1 {
        return Err(Error::Invalid(
            "at least one input sample is required".into(),
        ));
    }
    let mut x1 = Matrix::zeros(n1, tau);
    let mut x2 = Matrix::zeros(n2, tau + 1);
    let mut a = x1_0.clone();
    let mut b = x2_0.clone();
    x2.set_column(0, &b);
    for t in 0..tau {
        x1.set_column(t, &a);
        let u = inputs.column(t);
        b = &sys.a2 * &b + &sys.b2 * u + &sys.a3 * &a;
        a = &sys.a1 * &a;
        x2.set_column(t + 1, &b);
    }
    ProblemData::new(inputs.clone(), x1, x2)
}

/// Simulate `u = K1 x1 + K2 x2` on `sys` for `horizon` steps; `z` uses the
/// output matrices of `known` (its `A3`, if any, is ignored in favor of
/// `sys.a3`).
pub fn closed_loop_sim(
    sys: &TrueSystem,
    known: &KnownMatrices,
    reg: &Regulator,
    x1_0: &DVector<f64>,
    x2_0: &DVector<f64>,
    horizon: usize,
) -> Result<Trajectory> {
    let (n1, n2, m) = (sys.n1(), sys.n2(), sys.m());
    let p = known.p();
    if horizon < 1 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    check_vec("x1_0", x1_0, n1)?;
    check_vec("x2_0", x2_0, n2)?;
    linalg::check_shape("K1", &reg.k1, m, n1)?;
    linalg::check_shape("K2", &reg.k2, m, n2)?;
    linalg::check_shape("D1", &known.d1, p, n1)?;
    linalg::check_shape("D2", &known.d2, p, n2)?;
    linalg::check_shape("E", &known.e, p, m)?;

    let len = horizon + 1;
    let mut traj = Trajectory {
        x1: Matrix::zeros(n1, len),
        x2: Matrix::zeros(n2, len),
        u: Matrix::zeros(m, len),
        z: Matrix::zeros(p, len),
    };
    let mut a = x1_0.clone();
    let mut b = x2_0.clone();
    for t in 0..len {
        let u = &reg.k1 * &a + &reg.k2 * &b;
        let z = &known.d1 * &a + &known.d2 * &b + &known.e * &u;
        traj.x1.set_column(t, &a);
        traj.x2.set_column(t, &b);
        traj.u.set_column(t, &u);
        traj.z.set_column(t, &z);
        b = &sys.a2 * &b + &sys.b2 * &u + &sys.a3 * &a;
        a = &sys.a1 * &a;
    }
    Ok(traj)
}

/// Largest per-step residual of the recursions when re-substituted.
pub fn recursion_residual(
    traj: &Trajectory,
    sys: &TrueSystem,
    known: &KnownMatrices,
    reg: &Regulator,
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..traj.len() {
        let (a, b) = (traj.x1.column(t), traj.x2.column(t));
        let u = traj.u.column(t);
        worst = worst.max((&reg.k1 * a + &reg.k2 * b - u).norm());
        worst = worst.max((&known.d1 * a + &known.d2 * b + &known.e * u - traj.z.column(t)).norm());
        if t + 1 < traj.len() {
            worst = worst.max((&sys.a1 * a - traj.x1.column(t + 1)).norm());
            worst =
                worst.max((&sys.a2 * b + &sys.b2 * u + &sys.a3 * a - traj.x2.column(t + 1)).norm());
        }
    }
    worst
}

/// Horizon long enough for a `(rho + 0.05)^t` envelope to fall below `1e-9`,
/// clamped to `[20, 500]`.
pub fn default_horizon(rho: f64) -> usize {
    let rate = rho + 0.05;
    if !(rate > 0.0 && rate < 1.0) {
        return 500;
    }
    ((1e-9f64).ln() / rate.ln()).ceil().clamp(20.0, 500.0) as usize
}

/// Horizon used when verifying a regulator: at least [`default_horizon`], and
/// long enough for `rho^t` itself to reach rounding level, `1e-15` (capped at
/// 20000).
pub fn verification_horizon(rho: f64) -> usize {
    let exact = if rho > 0.0 && rho < 1.0 {
        ((1e-15f64).ln() / rho.ln()).ceil().min(20_000.0) as usize
    } else {
        0
    };
    default_horizon(rho).max(exact)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayVerdict {
    pub passes: bool,
    /// Fitted geometric rate of `‖z(t)‖` over the tail (0 when the tail is
    /// at the floating-point floor).
    pub fitted_rate: f64,
    pub initial_norm: f64,
    pub terminal_norm: f64,
}

/// Tail rate allowance above `rho_bound`.
pub const RATE_SLACK: f64 = 0.05;

/// Fit `‖z(t)‖ <= C γ^t` and pass when `γ <= rho_bound + 0.05` and the
/// terminal output is below `1e-6 (1 + ‖z(0)‖)`.
///
/// `γ` comes from least squares on `log ‖z(t)‖` from the peak of the output
/// to the last step above the rounding floor, using the steps where the
/// running envelope `max_{s >= t} ‖z(s)‖` drops. The floor is `1e-14`,
/// raised to `1e-12` times the largest signal magnitude in the trajectory so
/// that rounding noise on a persistent exosystem signal is not mistaken for
/// slow decay, and to four times the level of a rounding plateau the output
/// settles on in the final quarter.
pub fn decay_check(traj: &Trajectory, rho_bound: f64) -> Result<DecayVerdict> {
    decay_check_with_floor(traj, rho_bound, 0.0)
}

/// [`decay_check`] with the floor raised to at least `floor`, for outputs
/// known to settle at a small nonzero level (a regulator computed from
/// ill-conditioned data leaves a steady-state error of that size).
pub fn decay_check_with_floor(
    traj: &Trajectory,
    rho_bound: f64,
    floor: f64,
) -> Result<DecayVerdict> {
    let len = traj.len();
    if len < 4 {
        return Err(Error::Invalid(format!(
            "trajectory too short for a decay fit ({len} samples)"
        )));
    }
    let norms = traj.z_norms();
    let initial_norm = norms[0];
    let terminal_norm = norms[len - 1];
    let terminal_ok = terminal_norm < 1e-6 * (1.0 + initial_norm);

    let scale = [&traj.x1, &traj.x2, &traj.u, &traj.z]
        .iter()
        .flat_map(|m| m.column_iter().map(|c| c.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    // A regulated output settles on a roundoff plateau; when the final
    // quarter sits there, its level bounds the usable part of the signal.
    let quarter = len - (len / 4).max(1);
    let plateau = norms[quarter..].iter().cloned().fold(0.0, f64::max);
    let mut floor = (1e-12 * scale).max(1e-14).max(floor);
    if plateau < 1e-8 * scale {
        floor = floor.max(4.0 * plateau);
    }

    // The fit runs from the peak of the output to the last step above the
    // floor. Within it, only the steps where the envelope
    // max_{s >= t} ‖z(s)‖ drops are used, so that modes of alternating sign,
    // which make the norms zig-zag, do not bias the slope.
    let mut envelope = norms.clone();
    for t in (0..len - 1).rev() {
        envelope[t] = envelope[t].max(envelope[t + 1]);
    }
    let last = (0..len).rev().find(|&t| norms[t] >= floor).unwrap_or(0);
    let peak = (0..=last).fold(0, |best, t| if norms[t] > norms[best] { t } else { best });
    let window = peak..=last;
    let mut points: Vec<(f64, f64)> = window
        .clone()
        .filter(|&t| norms[t] >= floor && (t + 1 == len || norms[t] > envelope[t + 1]))
        .map(|t| (t as f64, norms[t].ln()))
        .collect();
    if points.len() < 2 {
        points = window
            .filter(|&t| norms[t] >= floor)
            .map(|t| (t as f64, norms[t].ln()))
            .collect();
    }
    let fitted_rate = if points.len() < 2 {
        0.0
    } else {
        let k = points.len() as f64;
        let mt = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (sxy / sxx).exp()
    };
    Ok(DecayVerdict {
        passes: terminal_ok && fitted_rate <= rho_bound + RATE_SLACK,
        fitted_rate,
        initial_norm,
        terminal_norm,
    })
}

/// `count` members of `set` with offset entries uniform in
/// `[-radius, radius]`; only the particular member when the set is a
/// singleton.
pub fn sample_members(
    set: &CompatibleSet,
    count: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<TrueSystem>> {
    if count == 0 {
        return Err(Error::Invalid("member count must be at least 1".into()));
    }
    if set.dimension() == 0 {
        return Ok(vec![set.particular()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n2, r) = (set.n2(), set.dimension());
    (0..count)
        .map(|_| {
            let n = Matrix::from_fn(n2, r, |_, _| rng.gen_range(-radius..=radius));
            set.member_at(&n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::from_rows;
    use crate::model::{data_residual, Provenance};

    fn traj_from_z(z: &[f64]) -> Trajectory {
        let len = z.len();
        Trajectory {
            x1: Matrix::zeros(1, len),
            x2: Matrix::zeros(1, len),
            u: Matrix::zeros(1, len),
            z: Matrix::from_row_slice(1, len, z),
        }
    }

    #[test]
    fn scalar_system_reproduces_published_data() {
        let sys = fixtures::scalar_true_system();
        let data = generate_data(
            &sys,
            &DVector::from_vec(vec![1.0, 0.0, 0.5]),
            &DVector::from_vec(vec![0.0]),
            &from_rows(&[&[1.0, 0.0, 0.0]]),
        )
        .unwrap();
        assert_eq!(data.x2, from_rows(&[&[0.0, 1.5, 2.0, 2.5]]));
        assert_eq!(data.x1_minus, fixtures::scalar_problem().data.x1_minus);
    }

    #[test]
    fn zero_state_and_input_give_zero_data() {
        let sys = fixtures::scalar_true_system();
        let data = generate_data(
            &sys,
            &DVector::zeros(3),
            &DVector::zeros(1),
            &Matrix::zeros(1, 4),
        )
        .unwrap();
        assert_eq!(data.x2.norm(), 0.0);
        assert_eq!(data_residual(&data, &sys), 0.0);
    }

    #[test]
    fn deadbeat_open_loop_output_vanishes() {
        let sys = TrueSystem::new(
            from_rows(&[&[1.0]]),
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        let known = KnownMatrices {
            a1: sys.a1.clone(),
            a3: None,
            d1: Matrix::zeros(1, 1),
            d2: from_rows(&[&[1.0, -2.0]]),
            e: Matrix::zeros(1, 1),
        };
        let reg = Regulator {
            k1: Matrix::zeros(1, 1),
            k2: Matrix::zeros(1, 2),
            provenance: Provenance::Condition2,
            w: None,
            theta: None,
            x_dagger: None,
        };
        let traj = closed_loop_sim(
            &sys,
            &known,
            &reg,
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![0.3, 0.7]),
            10,
        )
        .unwrap();
        assert!(traj.z[(0, 0)] != 0.0);
        assert!(traj.z.columns(1, 10).norm() == 0.0);
    }

    #[test]
    fn horizon_zero_is_rejected() {
        let sys = fixtures::scalar_true_system();
        let p = fixtures::scalar_problem();
        let r = fixtures::scalar_reference();
        let reg = Regulator {
            k1: r.k1,
            k2: r.k2,
            provenance: Provenance::Condition2,
            w: None,
            theta: None,
            x_dagger: None,
        };
        assert!(closed_loop_sim(
            &sys,
            &p.known,
            &reg,
            &DVector::zeros(3),
            &DVector::zeros(1),
            0
        )
        .is_err());
    }

    #[test]
    fn zero_output_passes_with_rate_zero() {
        let v = decay_check(&traj_from_z(&[0.0; 30]), 0.5).unwrap();
        assert!(v.passes);
        assert_eq!(v.fitted_rate, 0.0);
    }

    #[test]
    fn geometric_output_fits_its_rate() {
        let z: Vec<f64> = (0..60).map(|t| 0.5f64.powi(t)).collect();
        let v = decay_check(&traj_from_z(&z), 0.5).unwrap();
        assert!(v.passes);
        assert!((v.fitted_rate - 0.5).abs() < 1e-9);
    }

    #[test]
    fn alternating_modes_fit_the_envelope() {
        // 0.3^t + (-0.28)^t zig-zags but decays at rate 0.3.
        let z: Vec<f64> = (0..21)
            .map(|t| 0.3f64.powi(t) + (-0.28f64).powi(t))
            .collect();
        let v = decay_check(&traj_from_z(&z), 0.3).unwrap();
        assert!(v.passes, "{v:?}");
        assert!((v.fitted_rate - 0.3).abs() < 0.03, "{v:?}");
    }

    #[test]
    fn constant_output_fails() {
        let v = decay_check(&traj_from_z(&[1.0; 60]), 0.5).unwrap();
        assert!(!v.passes);
        assert!((v.fitted_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizons() {
        assert_eq!(default_horizon(0.0), 20);
        assert_eq!(default_horizon(0.96), 500);
        let h = default_horizon(0.5);
        assert!((0.55f64).powi(h as i32) <= 1e-9 && h >= 20);
        assert!(verification_horizon(0.97) > 500);
    }

    #[test]
    fn singleton_set_samples_particular_only() {
        let set = crate::model::compatible_set(&fixtures::scalar_problem()).unwrap();
        let members = sample_members(&set, 7, 5.0, 3).unwrap();
        assert_eq!(members.len(), 1);
        assert_eq!(members[0], set.particular());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let set = crate::model::compatible_set(&fixtures::planar_problem()).unwrap();
        let a = sample_members(&set, 4, 5.0, 11).unwrap();
        let b = sample_members(&set, 4, 5.0, 11).unwrap();
        let c = sample_members(&set, 4, 5.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn planar_members_have_the_affine_form() {
        let set = crate::model::compatible_set(&fixtures::planar_problem()).unwrap();
        let members = sample_members(&set, 4, 5.0, 9).unwrap();
        assert_eq!(members.len(), 4);
        for sys in &members {
            let (a, b) = (sys.a2[(0, 0)], sys.a2[(1, 0)]);
            let a2 = from_rows(&[&[a, a / 4.0 - 0.375], &[b, b / 4.0 + 0.25]]);
            let b2 = from_rows(&[&[a - 0.5], &[b - 1.0]]);
            assert!((&sys.a2 - a2).amax() < 1e-10);
            assert!((&sys.b2 - b2).amax() < 1e-10);
        }
    }

    #[test]
    fn sampled_members_explain_the_data() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes = crate::scenarios::Sizes {
                n1: 2,
                n2: 3,
                m: 2,
                p: 1,
                tau: 3,
            };
            let sc = crate::scenarios::regulable_with(&mut rng, sizes).unwrap();
            let set = crate::model::compatible_set(&sc.problem).unwrap();
            assert_eq!(set.dimension(), 2);
            assert!(data_residual(&sc.problem.data, &sc.system) < 1e-10);
            for sys in sample_members(&set, 100, 5.0, seed).unwrap() {
                assert!(data_residual(&sc.problem.data, &sys) < 1e-10);
            }
        }
    }
}
