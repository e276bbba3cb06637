// Critical-rate window of the bump model by log-spaced scan and bisection.

use tipshift::dynamics::ParameterShift;
use tipshift::models::{self, BumpConstants};
use tipshift::tipping::{find_rate_windows, RateScanConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = BumpConstants::default();
    let shift = ParameterShift::logistic(-1.0, 1.0)?;
    let res = find_rate_windows(&models::bump(k), &shift, k.bump_branch(-1.0), 0.01, 10.0, &RateScanConfig::default())?;
    println!("{} samples, {} refinements", res.grid.len(), res.refinements.len());
    for w in &res.windows {
        let y = w.limit.equilibrium().map_or(f64::NAN, |e| e.x);
        println!("window {}: r in ({:.7}, {:.7}) tips to {y:.6}", w.id, w.r_lo, w.r_hi);
    }
    Ok(())
}

fn main() {
    run_example().expect("rate scan example");
}
