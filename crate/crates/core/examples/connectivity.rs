// Endpoints reachable along stable paths for monotone and non-monotone sweeps.

use tipshift::bifurcation::build_diagram;
use tipshift::dynamics::ParameterShift;
use tipshift::models;
use tipshift::tipping::{reachable_endpoints, sweep_decompose, ConnectivityGraph, MonotoneSweep};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let d = build_diagram(&models::changeover(), (-2.0, 2.0), 400, 1000)?;
    let graph = ConnectivityGraph::build(&d);
    let monotone = sweep_decompose(&ParameterShift::tanh(-2.0, 2.0)?, 4000);
    let overshoot = MonotoneSweep::from_levels(&[-2.0, 1.5, -1.5, 2.0])?;
    for (name, sweep) in [("monotone", monotone), ("up-down-up", overshoot)] {
        let reach = reachable_endpoints(&graph, &sweep, 0.0)?;
        let xs: Vec<f64> = reach.endpoints.iter().map(|e| e.x).collect();
        println!("{name} sweep {:?}: endpoints {xs:?}", sweep.levels());
    }
    Ok(())
}

fn main() {
    run_example().expect("connectivity example");
}
