//! Compare the data-driven regulator with the classical one computed from the
//! identified plant: with rich data both give the same gains.
//!
//! Usage: `cargo run --example regulator_equations -- [seed]`

use ddreg::analysis::{assemble_gains, solve_classical_regulator};
use ddreg::model::compatible_set;
use ddreg::synthesis::check_condition2;
use ddreg::{scenarios, SynthesisConfig};

fn main() -> ddreg::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let sc = scenarios::regulable(seed)?;
    let d = &sc.problem.data;
    let k = &sc.problem.known;
    println!(
        "seed {seed}: n1={} n2={} m={} tau={}",
        d.n1(),
        d.n2(),
        d.m(),
        d.tau()
    );

    let set = compatible_set(&sc.problem)?;
    println!("identified: {}", set.dimension() == 0);
    let outcome = check_condition2(&sc.problem, &SynthesisConfig::default().with_seed(seed))?;
    let Some(reg) = outcome.regulator else {
        println!("condition 2 does not hold: {:?}", outcome.report.failure);
        return Ok(());
    };
    let w = reg.w.as_ref().expect("condition 2 carries W");
    let t = d.x2_minus() * w;
    let v = &d.u_minus * w;

    let sys = set.particular();
    let classical =
        solve_classical_regulator(&sys.a1, &sys.a2, &sys.b2, &sys.a3, &k.d1, &k.d2, &k.e)?;
    println!("classical equations residual {:.1e}", classical.residual);
    println!(
        "T from data vs classical: {:.1e}",
        (&t - &classical.t).norm()
    );
    println!(
        "V from data vs classical: {:.1e}",
        (&v - &classical.v).norm()
    );
    let k1 = assemble_gains(&t, &v, &reg.k2)?;
    println!(
        "K1 = V - K2 T matches the data-driven K1 within {:.1e}",
        (&k1 - &reg.k1).norm()
    );
    Ok(())
}
