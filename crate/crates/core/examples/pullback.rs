// Pullback attractors of the bump model and their forward limits.

use tipshift::bifurcation::build_diagram;
use tipshift::dynamics::ParameterShift;
use tipshift::models::{self, BumpConstants};
use tipshift::nonautonomous::{compute_pullback, forward_limit_on, ForwardLimit, PullbackConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = BumpConstants::default();
    let field = models::bump(k);
    let shift = ParameterShift::logistic(-1.0, 1.0)?;
    let d = build_diagram(&field, (-1.0, 1.0), 400, 1000)?;
    for r in [0.05, 0.12, 1.0] {
        let pb = compute_pullback(&field, &shift, r, k.bump_branch(-1.0), &PullbackConfig::default())?;
        let limit = match forward_limit_on(&pb, &d, 1.0) {
            ForwardLimit::Converged(e) => format!("{:.6} ({})", e.x, e.kind.as_str()),
            other => format!("{other:?}"),
        };
        println!("r = {r}: horizon {:.0}, convergence {:.1e}, limit {limit}", pb.horizon, pb.convergence);
    }
    Ok(())
}

fn main() {
    run_example().expect("pullback example");
}
