//! Stationary amplitudes across the drive range and the bistable window edges.
use kerrsim::classical::{critical_frequencies, find_fixed_points, root_residual, FrequencyScan, ROOT_TOL};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let base = OscillatorParams::standard(1.0);
    let crit = critical_frequencies(&base, &FrequencyScan::default())?;
    println!("bistable window: nu1 = {:?}, nu2 = {:?}", crit.nu1, crit.nu2);

    for nu in [0.8, 1.2, 1.6, 2.0, 2.4] {
        let p = base.with_nu(nu);
        let set = find_fixed_points(&p, ROOT_TOL)?;
        print!("nu = {nu:.2}:");
        for r in &set.roots {
            print!(
                "  |b|^2 = {:7.3} ({}, residual {:.1e})",
                r.action,
                if r.stable { "stable" } else { "saddle" },
                root_residual(&p, r.b)
            );
        }
        println!();
    }
    Ok(())
}
