// A pseudo-orbit that follows a stable path no true solution can track.

use tipshift::bifurcation::build_diagram;
use tipshift::dynamics::ParameterShift;
use tipshift::models;
use tipshift::nonautonomous::{construct_pseudo_orbit, make_stable_path, verify_pseudo_orbit, PseudoOrbitConfig, RoutingPolicy};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let field = models::changeover();
    let shift = ParameterShift::tanh(-2.0, 2.0)?;
    let d = build_diagram(&field, (-2.0, 2.0), 400, 1000)?;
    let path = make_stable_path(&d, &shift, 0.0, RoutingPolicy::default())?;
    let (r, eps) = (1e-3, 0.05);
    let po = construct_pseudo_orbit(&field, &shift, r, &path, eps, &PseudoOrbitConfig::default())?;
    let rep = verify_pseudo_orbit(&po, &field, &shift, &path, eps);
    println!(
        "{} pieces, {} jumps, largest {:.2e}, closest gap {:.2}, sup deviation {:.2e}, passed {}",
        po.pieces.len(),
        rep.n_jumps,
        rep.max_jump,
        rep.min_gap,
        rep.sup_deviation,
        rep.passed
    );
    for j in po.jumps.iter().take(3) {
        println!("jump at t = {:.1}: {:.2e} -> {:.2e}", j.t, j.x_left, j.x_restart);
    }
    Ok(())
}

fn main() {
    run_example().expect("pseudo-orbit example");
}
