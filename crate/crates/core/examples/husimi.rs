//! Husimi Q function of the evolved state, printed on a coarse grid.
use kerrsim::fock::{evolve_density_matrix, husimi, AlphaGrid, DensityMatrix};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.2);
    let t = p.period();
    let rho0 = DensityMatrix::fock(60, 12)?;
    let ev = evolve_density_matrix(&p, &rho0, 20.0 * t, t / 200.0, usize::MAX)?;

    let grid = AlphaGrid::square(5.0, 31);
    let q = husimi(ev.last(), &grid)?;
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    let max = q.max();
    for row in (0..grid.resolution).rev() {
        let line: String = (0..grid.resolution)
            .map(|col| shades[((q.value(row, col) / max) * 9.0).round() as usize])
            .collect();
        println!("{line}");
    }
    println!("max Q = {max:.4}");
    Ok(())
}
