use kerrsim::fock::{evolve_density_matrix, DensityMatrix};
use kerrsim::liouvillian::{build_liouvillian, spectrum, two_mode_reconstruction};
use kerrsim::OscillatorParams;

/// Two-mode expansion against direct integration after the fast modes have
/// died out.
#[test]
fn two_mode_reconstruction_matches_integration() {
    let p = OscillatorParams::standard(1.22);
    let dim = 40;
    let sd = spectrum(&build_liouvillian(&p, dim).unwrap(), 3).unwrap();
    let rho0 = DensityMatrix::fock(dim, 12).unwrap();
    let t = 10.0 * p.relaxation_period();
    let ev = evolve_density_matrix(&p, &rho0, t, p.period() / 200.0, usize::MAX).unwrap();
    let direct = ev.last();
    let rec = two_mode_reconstruction(&sd, &rho0, t);
    let err = rec
        .0
        .iter()
        .zip(direct.0.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let bound = (sd.lambda(2).re * t).exp().max(1e-8);
    assert!(err < bound, "max |Δρ| = {err:e}, bound {bound:e}");
}
