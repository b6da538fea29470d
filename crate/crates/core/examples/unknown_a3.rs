//! Regulator design when the coupling `A3` from exosystem to endosystem is
//! unknown. The data below were recorded in closed loop, so `A2`, `B2` and
//! `A3` are all left partly free by the data; the synthesized regulator is
//! checked on random members of that larger compatible set.
//!
//! Usage: `cargo run --example unknown_a3 -- [count]`

use ddreg::model::compatible_set_unknown_a3;
use ddreg::synthesis::verify_regulator;
use ddreg::{scenarios, synthesize_unknown_a3, SynthesisConfig};

fn main() -> ddreg::Result<()> {
    let count: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let mut passed = 0;
    for seed in 0..count {
        let sc = scenarios::unknown_a3(seed)?;
        let d = &sc.problem.data;
        let set = compatible_set_unknown_a3(&sc.problem)?;
        let s = synthesize_unknown_a3(&sc.problem, &SynthesisConfig::default().with_seed(seed))?;
        let Some(reg) = s.regulator else {
            println!(
                "seed {seed}: n1={} n2={} m={}: not informative ({:?} / {:?})",
                d.n1(),
                d.n2(),
                d.m(),
                s.report.condition2.failure,
                s.report.condition1.failure
            );
            continue;
        };
        let v = verify_regulator(&reg, &set, &sc.problem.known, 10, seed)?;
        passed += usize::from(v.all_pass());
        println!(
            "seed {seed}: n1={} n2={} m={} free directions={} {} radius {:.4} -> {}/{} members pass",
            d.n1(),
            d.n2(),
            d.m(),
            set.dimension(),
            reg.provenance,
            s.report.closed_loop_radius.unwrap_or(f64::NAN),
            v.members.len() - v.failures(),
            v.members.len()
        );
    }
    println!("{passed}/{count} regulators verified");
    Ok(())
}
