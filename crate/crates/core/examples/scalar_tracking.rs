//! Scalar tracking example: the data identify the plant, condition 2 holds,
//! and the synthesized feedback makes the output track the reference despite
//! the constant disturbance.
//!
//! Usage: `cargo run --example scalar_tracking`

use ddreg::cli::format_matrix;
use ddreg::synthesis::check_witnesses;
use ddreg::{fixtures, simulation, synthesize, SynthesisConfig};
use nalgebra::DVector;

fn main() -> ddreg::Result<()> {
    let problem = fixtures::scalar_problem();
    let synth = synthesize(&problem, &SynthesisConfig::default())?;
    let reg = synth.regulator.expect("the scalar data are informative");
    println!("provenance: {}", reg.provenance);
    println!("K1 = {}", format_matrix(&reg.k1));
    println!("K2 = {}", format_matrix(&reg.k2));

    // The textbook witnesses are one valid choice among many.
    let reference = fixtures::scalar_reference();
    let published = ddreg::Regulator {
        k1: reference.k1,
        k2: reference.k2,
        provenance: ddreg::Provenance::Condition2,
        w: Some(reference.w),
        theta: None,
        x_dagger: Some(reference.x_dagger),
    };
    let witnesses = check_witnesses(&problem, &published)?;
    println!(
        "reference witnesses: max residual {:.1e}, data-driven closed loop {:.3}",
        witnesses.max_residual(),
        witnesses.closed_loop_radius.unwrap_or(f64::NAN)
    );

    let truth = fixtures::scalar_true_system();
    let x1_0 = DVector::from_vec(vec![1.0, 0.0, 0.5]);
    let x2_0 = DVector::from_vec(vec![0.0]);
    for (name, r) in [("synthesized", &reg), ("reference", &published)] {
        let traj = simulation::closed_loop_sim(&truth, &problem.known, r, &x1_0, &x2_0, 12)?;
        let z: Vec<String> = traj.z.iter().map(|v| format!("{v:.2e}")).collect();
        println!("{name:>11} z: {}", z.join(" "));
    }
    Ok(())
}
