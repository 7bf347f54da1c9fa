//! Master-equation evolution of a Fock state and the lab-frame check.
use kerrsim::fock::{evolve_density_matrix, evolve_lab_frame_occupation, occupation, DensityMatrix};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.2);
    let dim = 60;
    let t = p.period();
    let rho0 = DensityMatrix::fock(dim, 12)?;

    let ev = evolve_density_matrix(&p, &rho0, 20.0 * t, t / 200.0, 400)?;
    for (tt, n) in ev.times.iter().zip(ev.occupations()) {
        println!("t = {:4.0} T   <n> = {:.5}", tt / t, n);
    }
    let last = ev.last();
    println!(
        "final: trace {:.2e} off one, tail {:.1e}, <n> = {:.5}",
        (last.trace().re - 1.0).abs(),
        last.tail(),
        occupation(last)
    );

    let (_, lab) = evolve_lab_frame_occupation(&p, &DensityMatrix::fock(40, 12)?, 2.0 * t, t / 2000.0, 4000)?;
    println!("lab frame <n> after 2 T: {:.5}", lab.last().unwrap());
    Ok(())
}
