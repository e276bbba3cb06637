// Stable paths through exchange-of-stability points under each routing policy.

use tipshift::bifurcation::build_diagram;
use tipshift::dynamics::ParameterShift;
use tipshift::models;
use tipshift::nonautonomous::{make_stable_path, RoutingPolicy};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let d = build_diagram(&models::changeover(), (-2.0, 2.0), 400, 1000)?;
    let shift = ParameterShift::tanh(-2.0, 2.0)?;
    for policy in [RoutingPolicy::StableUpper, RoutingPolicy::StableLower] {
        let path = make_stable_path(&d, &shift, 0.0, policy)?;
        println!(
            "{policy:?}: {} -> {} over {} segments, {} crossings",
            path.x_minus,
            path.x_plus,
            path.segments.len(),
            path.crossings.len()
        );
    }
    if let Err(e) = make_stable_path(&d, &shift, 0.0, RoutingPolicy::Strict) {
        println!("Strict: {e}");
    }
    Ok(())
}

fn main() {
    run_example().expect("stable path example");
}
