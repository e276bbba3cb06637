// Bifurcation diagram of the bump model: branches and bifurcation points.

use tipshift::bifurcation::build_diagram;
use tipshift::models::{self, BumpConstants};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let d = build_diagram(&models::bump(BumpConstants::default()), (-1.0, 1.0), 400, 1000)?;
    for b in &d.branches {
        let (l0, l1) = b.lambda_range();
        let (x0, x1) = b.x_range();
        println!("branch {} {:<8} lambda [{l0:+.3}, {l1:+.3}] x [{x0:+.3}, {x1:+.3}]", b.id, b.stability.as_str());
    }
    for p in &d.bif_points {
        println!("point {} {} at (lambda, x) = ({:+.6}, {:+.6})", p.id, p.class.as_str(), p.lambda, p.x);
    }
    let mut csv = Vec::new();
    d.write_csv(&mut csv)?;
    println!("{} CSV rows", String::from_utf8(csv)?.lines().count() - 1);
    Ok(())
}

fn main() {
    run_example().expect("diagram example");
}
