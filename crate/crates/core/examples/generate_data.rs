//! Record data from a known interconnection, write it as a problem file and
//! read it back.
//!
//! Usage: `cargo run --example generate_data`

use ddreg::{fixtures, io, simulation, KnownMatrices, Problem};
use nalgebra::DVector;

fn main() -> ddreg::Result<()> {
    let sys = fixtures::scalar_true_system();
    let x1_0 = DVector::from_vec(vec![1.0, 0.0, 0.5]);
    let x2_0 = DVector::from_vec(vec![0.0]);
    let inputs = ddreg::linalg::from_rows(&[&[1.0, 0.0, 0.0]]);
    let data = simulation::generate_data(&sys, &x1_0, &x2_0, &inputs)?;
    let known = KnownMatrices {
        a1: sys.a1.clone(),
        a3: Some(sys.a3.clone()),
        d1: ddreg::linalg::from_rows(&[&[1.0, 0.0, 0.0]]),
        d2: ddreg::linalg::from_rows(&[&[-1.0]]),
        e: ddreg::linalg::from_rows(&[&[0.0]]),
    };
    let problem = Problem::new(data, known)?;
    let text = io::problem_to_string(&problem, None)?;
    print!("{text}");
    let back = io::parse_problem(&text, "generated")?;
    println!("# round trip exact: {}", back.problem == problem);
    println!("# sha256: {}", back.sha256);
    Ok(())
}
