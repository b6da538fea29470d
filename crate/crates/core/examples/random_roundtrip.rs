//! Synthesize regulators for seeded random regulable problems and verify
//! each against its compatible set.
//!
//! Usage: `cargo run --release --example random_roundtrip -- [count] [first_seed]`

use std::time::Instant;

use ddreg::model::compatible_set;
use ddreg::synthesis::verify_regulator;
use ddreg::{scenarios, synthesize, SynthesisConfig};

fn main() -> ddreg::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let first: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let start = Instant::now();
    let (mut ok, mut verified) = (0, 0);
    for seed in first..first + count {
        let sc = scenarios::regulable(seed)?;
        let d = &sc.problem.data;
        let t0 = Instant::now();
        let s = synthesize(&sc.problem, &SynthesisConfig::default().with_seed(seed))?;
        let Some(reg) = s.regulator else {
            println!(
                "seed {seed:3} (n1={} n2={} m={} tau={}): no regulator: {:?}",
                d.n1(),
                d.n2(),
                d.m(),
                d.tau(),
                s.report.condition2.failure
            );
            continue;
        };
        ok += 1;
        let set = compatible_set(&sc.problem)?;
        let v = verify_regulator(&reg, &set, &sc.problem.known, 10, seed)?;
        verified += usize::from(v.all_pass());
        println!(
            "seed {seed:3} (n1={} n2={} m={} tau={}): {} radius {:.4} verify {} [{:.0} ms]",
            d.n1(),
            d.n2(),
            d.m(),
            d.tau(),
            reg.provenance,
            s.report.closed_loop_radius.unwrap_or(f64::NAN),
            if v.all_pass() { "pass" } else { "FAIL" },
            t0.elapsed().as_secs_f64() * 1e3
        );
    }
    println!(
        "{ok}/{count} synthesized, {verified} verified, {:.2} s",
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
