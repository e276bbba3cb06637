// Frozen equilibria, their stability and basins.

use tipshift::bifurcation::{basin, build_diagram, find_equilibria, Kind};
use tipshift::models;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let field = models::changeover();
    for e in find_equilibria(&field, -2.0, 1000) {
        println!("lambda = -2: x = {:+.3} df = {:+.4} {}", e.x, e.df, e.kind.as_str());
    }
    let ebm = models::energy_balance(|_| 2.5, |_| 1.0);
    let d = build_diagram(&ebm, (0.0, 1.0), 100, 1000)?;
    for e in d.equilibria_at(0.5).iter().filter(|e| e.kind == Kind::Stable) {
        let b = basin(&d, e)?;
        let edge = if b.hi_unbounded { " (domain edge)" } else { "" };
        println!("energy balance: attractor {:.3} has basin ({:.3}, {:.3}){edge}", e.x, b.lo, b.hi);
    }
    Ok(())
}

fn main() {
    run_example().expect("equilibria example");
}
