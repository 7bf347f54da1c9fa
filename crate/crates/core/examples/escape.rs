//! Noise-induced escape from the outer state against the Liouvillian rate.
use kerrsim::classical::{find_fixed_points, ROOT_TOL};
use kerrsim::langevin::{escape_statistics, Attractor, EscapeConfig, InitialCondition, LangevinConfig};
use kerrsim::liouvillian::metastable_rate;
use kerrsim::{Error, OscillatorParams};

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.5);
    let outer = find_fixed_points(&p, ROOT_TOL)?.outer().b;
    let cfg = LangevinConfig::new(&p, 500, 3, InitialCondition::Point { re: outer.re, im: outer.im });
    let esc = EscapeConfig::new(&p, Attractor::Outer);

    match escape_statistics(&p, &cfg, &esc, 2400.0) {
        Ok(s) => println!("{} escapes, rate {:.3e}", s.escapes, s.rate),
        Err(Error::InsufficientEvents { escapes, rate_upper_bound, .. }) => {
            println!("only {escapes} escapes, rate below {rate_upper_bound:.3e}")
        }
        Err(e) => return Err(e),
    }
    println!("Liouvillian |Re lambda1| = {:.3e}", metastable_rate(&p, 40)?);
    Ok(())
}
