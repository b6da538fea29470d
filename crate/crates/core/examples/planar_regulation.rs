//! Two-dimensional example: two samples leave a family of plants, and
//! condition 1 yields one feedback that regulates all of them with the same
//! closed loop.
//!
//! Usage: `cargo run --example planar_regulation`

use ddreg::analysis::{check_output_regulated, spectral_info};
use ddreg::cli::format_matrix;
use ddreg::model::compatible_set;
use ddreg::{fixtures, simulation, synthesize, SynthesisConfig};

fn main() -> ddreg::Result<()> {
    let problem = fixtures::planar_problem();
    let synth = synthesize(&problem, &SynthesisConfig::default())?;
    let reg = synth.regulator.expect("the planar data are informative");
    println!("provenance: {}", reg.provenance);
    println!("K1 = {}", format_matrix(&reg.k1));
    println!("K2 = {}", format_matrix(&reg.k2));

    let set = compatible_set(&problem)?;
    println!("compatible set: {} free direction(s)", set.dimension());
    let k = &problem.known;
    for (i, sys) in simulation::sample_members(&set, 8, 5.0, 1)?
        .iter()
        .enumerate()
    {
        let closed = &sys.a2 + &sys.b2 * &reg.k2;
        let eig = spectral_info(&closed, 0.0)?.eigenvalues;
        let chk = check_output_regulated(
            &sys.a1,
            &closed,
            &(&sys.a3 + &sys.b2 * &reg.k1),
            &(&k.d1 + &k.e * &reg.k1),
            &(&k.d2 + &k.e * &reg.k2),
        )?;
        println!(
            "member {i}: A2 row 1 = [{:7.3}, {:7.3}], B2 = [{:7.3}, {:7.3}], eigenvalues {:.3} {:.3}, regulated {}",
            sys.a2[(0, 0)],
            sys.a2[(0, 1)],
            sys.b2[(0, 0)],
            sys.b2[(1, 0)],
            eig[0],
            eig[1],
            chk.regulated
        );
    }
    Ok(())
}
