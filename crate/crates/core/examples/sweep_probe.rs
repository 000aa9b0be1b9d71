use driftshear::solver::{solve, to_moving_frame, Frame, SolverConfig};
use driftshear::{FlowParams, Grid, SpectralField, TranslationLaw};

fn main() {
    let grid = Grid::new(128).unwrap();
    let theta0 = SpectralField::cos_2y(grid);
    let params = FlowParams::new(1.0, 2e-3, 1, TranslationLaw::Explicit(0.2)).unwrap();
    let t_end = 2.0;
    for dt in [0.04, 0.02, 0.01, 0.005, 0.0025] {
        let lab_cfg = SolverConfig::new(dt, t_end, usize::MAX, Frame::Lab).unwrap();
        let lab = solve(&theta0, &params, &lab_cfg).unwrap();
        let moved = to_moving_frame(&lab);
        let mov_cfg = SolverConfig::new(dt, t_end, usize::MAX, Frame::Moving).unwrap();
        let moving = solve(&theta0, &params, &mov_cfg).unwrap();
        let a = moved.states.last().unwrap();
        let b = moving.states.last().unwrap();
        let gap = a.sub(b).unwrap().sobolev_norm(0.0) / b.sobolev_norm(0.0);
        println!("dt={dt}: gap={gap:.6e} t_lab={} t_mov={}", lab.times.last().unwrap(), moving.times.last().unwrap());
    }
}
