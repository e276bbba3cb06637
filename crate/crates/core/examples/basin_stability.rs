// Sufficient conditions for and against rate-induced tipping on a fold diagram.

use tipshift::bifurcation::build_diagram;
use tipshift::dynamics::{ParameterShift, ScalarField, StateDomain};
use tipshift::nonautonomous::{make_stable_path, RoutingPolicy};
use tipshift::tipping::{foreign_basin_check, forward_basin_stable, no_rtip_neighborhood, reparametrization_witness};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // a stable line at -1 and a fold at the origin with arms 2 lambda +- sqrt(lambda)
    let field = ScalarField::new("fold", StateDomain::new(-3.0, 10.0)?, |x, l| {
        -(x + 1.0) * ((x - 2.0 * l) * (x - 2.0 * l) - l)
    });
    let arm = |l: f64| 2.0 * l + l.sqrt();
    for (lm, lp) in [(0.01, 0.2), (0.05, 1.5), (3.0, 3.5)] {
        let d = build_diagram(&field, (lm, lp), 300, 1500)?;
        let shift = ParameterShift::tanh(lm, lp)?;
        let path = make_stable_path(&d, &shift, arm(lm), RoutingPolicy::default())?;
        let stable = forward_basin_stable(&d, &path, 800).stable;
        let witness = reparametrization_witness(&d, &path, 1e3, 0.01)?.is_some();
        let foreign = foreign_basin_check(&d, &shift, arm(lm))?;
        println!(
            "range ({lm}, {lp}): basin stable {stable}, reparametrization witness {witness}, foreign basin {} (rates above {:?})",
            foreign.holds,
            foreign.rate_bound()
        );
    }
    let d = build_diagram(&field, (0.01, 3.5), 700, 1500)?;
    let nt = no_rtip_neighborhood(&d, arm(0.05), 0.05)?;
    println!("certified free of rate-induced tipping on [0.05, {:.4}]", 0.05 + nt.nu);
    if let Some(f) = nt.fold {
        println!("post-fold interval ({:.4}, {:.4})", f.lambda0, f.lambda1);
    }
    Ok(())
}

fn main() {
    run_example().expect("basin stability example");
}
