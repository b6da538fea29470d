use ddreg::io::{self, RegulatorFile};
use ddreg::simulation::{decay_check, Trajectory};
use ddreg::{analysis, KnownMatrices, Matrix, Problem, ProblemData, Provenance, Regulator};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -10.0..10.0f64,
        (-1000i32..1000).prop_map(|k| k as f64 / 8.0),
    ]
}

/// `(n1, n2, m, p, tau)` with a pool of entries large enough for every matrix.
fn shapes_and_entries() -> impl Strategy<Value = ((usize, usize, usize, usize, usize), Vec<f64>)> {
    (1usize..=3, 1usize..=3, 1usize..=2, 1usize..=2, 1usize..=5)
        .prop_flat_map(|s| (Just(s), prop::collection::vec(finite(), 200)))
}

fn take(pool: &mut impl Iterator<Item = f64>, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| pool.next().expect("entry pool"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn files_round_trip_exactly((s, entries) in shapes_and_entries(), with_a3 in any::<bool>()) {
        let (n1, n2, m, p, tau) = s;
        let mut pool = entries.into_iter().cycle();
        let data = ProblemData::new(take(&mut pool, m, tau), take(&mut pool, n1, tau), take(&mut pool, n2, tau + 1)).unwrap();
        let known = KnownMatrices {
            a1: take(&mut pool, n1, n1),
            a3: with_a3.then(|| take(&mut pool, n2, n1)),
            d1: take(&mut pool, p, n1),
            d2: take(&mut pool, p, n2),
            e: take(&mut pool, p, m),
        };
        let problem = Problem::new(data, known).unwrap();
        let text = io::problem_to_string(&problem, None).unwrap();
        let back = io::parse_problem(&text, "generated").unwrap();
        prop_assert_eq!(&back.problem, &problem);

        let reg = Regulator {
            k1: take(&mut pool, m, n1),
            k2: take(&mut pool, m, n2),
            provenance: Provenance::Condition2,
            w: Some(take(&mut pool, tau, n1)),
            theta: None,
            x_dagger: Some(take(&mut pool, tau, n2)),
        };
        let file = RegulatorFile::new(&reg, &back.sha256, 3);
        let text = io::regulator_to_string(&file).unwrap();
        let parsed = io::parse_regulator(&text, "generated").unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.to_regulator(&problem).unwrap(), reg);

        // One CSV column per state, input and output entry, plus time and member id.
        let traj = Trajectory {
            x1: take(&mut pool, n1, tau),
            x2: take(&mut pool, n2, tau),
            u: take(&mut pool, m, tau),
            z: take(&mut pool, p, tau),
        };
        let mut buf = Vec::new();
        io::write_trajectories_csv(&mut buf, &[(0, &traj), (1, &traj)]).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        prop_assert_eq!(reader.headers().unwrap().len(), n1 + n2 + m + p + 2);
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        prop_assert_eq!(rows.len(), 2 * tau);
        for (k, row) in rows.iter().enumerate() {
            let z: f64 = row[1 + n1 + n2 + m].parse().unwrap();
            prop_assert_eq!(z, traj.z[(0, k % tau)]);
        }
    }

    #[test]
    fn decay_verdict_survives_dropping_initial_steps(
        n in 1usize..=4,
        entries in prop::collection::vec(-1.0..1.0f64, 40),
        target in 0.05..0.95f64,
        shift in 1usize..=5,
    ) {
        let mut pool = entries.into_iter().cycle();
        let raw = take(&mut pool, n, n);
        let radius = analysis::spectral_radius(&raw).unwrap();
        prop_assume!(radius > 1e-3);
        let a = raw * (target / radius);
        let c = take(&mut pool, 1, n);
        let mut x = take(&mut pool, n, 1);
        let horizon = 80;
        let mut z = Matrix::zeros(1, horizon + 1);
        for t in 0..=horizon {
            z.set_column(t, &(&c * &x).column(0));
            x = &a * x;
        }
        let traj = Trajectory {
            x1: Matrix::zeros(0, horizon + 1),
            x2: Matrix::zeros(0, horizon + 1),
            u: Matrix::zeros(0, horizon + 1),
            z,
        };
        let verdict = decay_check(&traj, target).unwrap();
        prop_assume!(verdict.passes);
        let shifted = decay_check(&traj.shifted(shift), target).unwrap();
        prop_assert!(shifted.passes, "{:?} -> {:?}", verdict, shifted);
    }
}
