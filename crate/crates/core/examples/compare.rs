//! Classical, quantum and Langevin mean occupation from the same outer start.
use kerrsim::basins::{ensemble_mean_action, CircleEnsemble};
use kerrsim::classical::{find_fixed_points, ROOT_TOL};
use kerrsim::fock::{evolve_density_matrix, DensityMatrix};
use kerrsim::langevin::{run_ensemble, InitialCondition, LangevinConfig};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.2);
    let outer = find_fixed_points(&p, ROOT_TOL)?.outer().b;
    let t = p.period();
    let t_final = 20.0 * t;
    let dt = t / 200.0;

    let ens = CircleEnsemble {
        a0: outer.norm(),
        n_particles: 2000,
    };
    let classical = ensemble_mean_action(&p, &ens, t_final, dt, 200)?;

    let n0 = outer.norm_sqr().round() as usize;
    let quantum = evolve_density_matrix(&p, &DensityMatrix::fock(60, n0)?, t_final, dt, 200)?;

    let cfg = LangevinConfig::new(&p, 2000, 1, InitialCondition::Circle(ens));
    let langevin = run_ensemble(&p, &cfg, t_final, 200)?;

    println!("  t/T   classical    quantum   langevin");
    for (k, n) in quantum.occupations().into_iter().enumerate().step_by(2) {
        println!(
            "{:5.0} {:11.4} {:10.4} {:10.4}",
            quantum.times[k] / t,
            classical.values[k],
            n,
            langevin.values[k]
        );
    }
    Ok(())
}
