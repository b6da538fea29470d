//! Simulate a regulator on several systems compatible with the data and
//! write the trajectories as CSV.
//!
//! Usage: `cargo run --example simulate_members -- [members] [out.csv]`

use ddreg::model::compatible_set;
use ddreg::synthesis::simulate_member;
use ddreg::{fixtures, io, simulation, synthesize, SynthesisConfig};
use nalgebra::DVector;

fn main() -> ddreg::Result<()> {
    let mut args = std::env::args().skip(1);
    let members: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let out = args.next();

    let problem = fixtures::planar_problem();
    let reg = synthesize(&problem, &SynthesisConfig::default())?
        .regulator
        .expect("the planar data are informative");
    let set = compatible_set(&problem)?;
    let systems = simulation::sample_members(&set, members, 5.0, 11)?;

    // A nonzero disturbance and an endosystem started away from the target.
    let x1_0 = DVector::from_vec(vec![1.0, 0.0, 0.5]);
    let x2_0 = DVector::from_vec(vec![-1.0, 2.0]);
    let mut trajectories = Vec::new();
    for (i, sys) in systems.iter().enumerate() {
        let (traj, verdict, radius) = simulate_member(sys, &problem.known, &reg, &x1_0, &x2_0, 40)?;
        let x2_norms: Vec<f64> = traj.x2.column_iter().map(|c| c.norm()).collect();
        println!(
            "member {i}: radius {radius:.4}, |x2| peaks at {:.3}, |z| max {:.1e}, decay {}",
            x2_norms.iter().cloned().fold(0.0, f64::max),
            traj.z_norms().iter().cloned().fold(0.0, f64::max),
            if verdict.passes { "pass" } else { "fail" }
        );
        trajectories.push((i, traj));
    }

    let blocks: Vec<(usize, &simulation::Trajectory)> =
        trajectories.iter().map(|(i, t)| (*i, t)).collect();
    let mut buf = Vec::new();
    io::write_trajectories_csv(&mut buf, &blocks)?;
    match out {
        Some(path) => {
            io::atomic_write(path.as_ref(), &buf)?;
            println!("wrote {path}");
        }
        None => println!(
            "{} CSV rows (pass a path to save them)",
            buf.iter().filter(|&&b| b == b'\n').count()
        ),
    }
    Ok(())
}
