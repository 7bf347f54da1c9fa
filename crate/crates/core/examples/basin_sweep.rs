//! Outer-basin fraction across the bistable window and the equal-basin drive.
use kerrsim::basins::{basin_fraction_sweep, crossing_bracket, equal_basin_frequency, Bounds, GridSpec, Horizon};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let base = OscillatorParams::standard(1.2);
    let grid = GridSpec {
        bounds: Bounds::square(10.0),
        resolution: 64,
    };
    let h = Horizon::default_for(&base);
    let nus: Vec<f64> = (0..12).map(|k| 1.16 + 0.1 * k as f64).collect();
    let sweep = basin_fraction_sweep(&base, &nus, &grid, &h)?;
    for s in &sweep {
        println!("nu = {:.2}  outer fraction = {:.3}", s.nu, s.fractions.outer);
    }
    if let Some((lo, hi)) = crossing_bracket(&sweep) {
        let nu3 = equal_basin_frequency(&base, lo, hi, &grid, &h, 1e-3)?;
        println!("equal basins near nu = {nu3:.3}");
    }
    Ok(())
}
