//! Truncated-Wigner Langevin ensemble from the outer stable amplitude.
use kerrsim::classical::{find_fixed_points, ROOT_TOL};
use kerrsim::langevin::{run_ensemble, InitialCondition, LangevinConfig};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.4);
    let outer = find_fixed_points(&p, ROOT_TOL)?.outer().b;
    let initial = InitialCondition::Point { re: outer.re, im: outer.im };
    let cfg = LangevinConfig::new(&p, 4000, 1, initial);
    let t = p.period();

    let s = run_ensemble(&p, &cfg, 20.0 * t, 200)?;
    for k in (0..s.times.len()).step_by(4) {
        println!(
            "t = {:4.0} T   <|a|^2> = {:8.4} +- {:.4}",
            s.times[k] / t,
            s.values[k],
            s.stderr[k]
        );
    }
    println!("noise amplitude per step: {:.4e}", cfg.noise_amplitude(&p));
    Ok(())
}
