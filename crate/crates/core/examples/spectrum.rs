//! Slowest Liouvillian eigenvalues across the drive range.
use kerrsim::liouvillian::{spectrum_sweep, DEFAULT_MAX_DIM};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let base = OscillatorParams::standard(1.0);
    let nus: Vec<f64> = (0..10).map(|k| 0.8 + 0.15 * k as f64).collect();
    for row in spectrum_sweep(&base, &nus, 30, 4, DEFAULT_MAX_DIM)? {
        let re: Vec<String> = row.eigenvalues.iter().map(|l| format!("{:9.5}", l.re)).collect();
        println!("nu = {:.2}  Re lambda = {}", row.nu, re.join(" "));
    }
    Ok(())
}
