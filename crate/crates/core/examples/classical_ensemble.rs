//! Noise-free ensemble started on a circle of radius |b_outer|, averaged action.
use kerrsim::basins::{ensemble_mean_action, CircleEnsemble};
use kerrsim::classical::{find_fixed_points, integrate_classical, ROOT_TOL};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.2);
    let set = find_fixed_points(&p, ROOT_TOL)?;
    let outer = set.outer();
    let t = p.period();

    let single = integrate_classical(&p, outer.b * 1.3, 10.0 * p.relaxation_period(), t / 100.0, 100)?;
    println!("single trajectory relaxes to {:.4} (outer root {:.4})", single.last(), outer.b);

    let ens = CircleEnsemble {
        a0: outer.b.norm(),
        n_particles: 2000,
    };
    let series = ensemble_mean_action(&p, &ens, 20.0 * t, t / 100.0, 100)?;
    for (tt, i) in series.times.iter().zip(&series.values).step_by(4) {
        println!("t = {:5.1} T   <|a|^2> = {:.4}", tt / t, i);
    }
    Ok(())
}
