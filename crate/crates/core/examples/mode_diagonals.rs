//! Stationary and metastable modes, lifetime, and the slowest-rate drive.
use kerrsim::liouvillian::{build_liouvillian, lifetime, metastable_minimum, mode_diagonals, spectrum};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.22);
    let dim = 30;
    let sd = spectrum(&build_liouvillian(&p, dim)?, 2)?;
    println!("lambda1 = {:.3e}", sd.lambda(1));
    println!("tau = {:.1} T", lifetime(&sd)? / p.period());

    let (d0, d1) = mode_diagonals(&sd);
    for n in (0..dim).step_by(3) {
        println!("n = {n:2}   rho0 = {:8.5}   rho1 = {:+8.5}", d0[n], d1[n]);
    }

    let nus: Vec<f64> = (0..7).map(|k| 1.16 + 0.06 * k as f64).collect();
    let m = metastable_minimum(&p, &nus, dim, 1e-3)?;
    println!("slowest switching at nu = {:.3} (rate {:.3e}, interior {})", m.nu, m.rate, m.interior);
    Ok(())
}
