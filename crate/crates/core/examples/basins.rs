//! Basins of attraction of the two stable states, printed as coarse ASCII.
use kerrsim::basins::{classify_grid, BasinLabel, Bounds, GridSpec, Horizon};
use kerrsim::OscillatorParams;

fn main() -> kerrsim::Result<()> {
    let p = OscillatorParams::standard(1.2);
    let grid = GridSpec {
        bounds: Bounds::square(10.0),
        resolution: 48,
    };
    let map = classify_grid(&p, &grid, &Horizon::default_for(&p))?;

    // top row is Im a = +10
    for row in (0..grid.resolution).rev().step_by(2) {
        let line: String = (0..grid.resolution)
            .map(|col| match map.label(row, col) {
                BasinLabel::Inner => '.',
                BasinLabel::Outer => '#',
                BasinLabel::Unresolved => '?',
            })
            .collect();
        println!("{line}");
    }
    let f = map.fractions;
    println!("outer {:.3}  inner {:.3}  unresolved {:.3}", f.outer, f.inner, f.unresolved);
    Ok(())
}
