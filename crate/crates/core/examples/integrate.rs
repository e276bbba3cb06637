// Integrate a shifted field and print the trajectory as CSV.

use tipshift::dynamics::{integrate, IntegratorConfig, ParameterShift, Sampling};
use tipshift::models::{self, BumpConstants};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = BumpConstants::default();
    let field = models::bump(k);
    let shift = ParameterShift::logistic(-1.0, 1.0)?;
    let cfg = IntegratorConfig::default().with_sampling(Sampling::Steps);
    let traj = integrate(&field, &shift, 0.5, k.bump_branch(-1.0), -40.0, 40.0, &cfg)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let text = String::from_utf8(csv)?;
    for line in text.lines().take(5) {
        println!("{line}");
    }
    let (t, x) = traj.last();
    println!("... {} samples, x({t}) = {x:.6}, {} accepted steps", traj.len(), traj.stats.accepted);
    Ok(())
}

fn main() {
    run_example().expect("integration example");
}
