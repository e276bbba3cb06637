// Positive state-dependent time rescaling keeps equilibria and their stability.

use tipshift::bifurcation::check_bifurcation_equivalence;
use tipshift::dynamics::StateDomain;
use tipshift::models;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (a, tau) = (0.5, 2.0);
    let field = models::energy_balance_on(|_| 2.5, |l| 0.8 + 0.4 * l, StateDomain::new(0.1, 5.0)?);
    for l in [0.0, 0.5, 1.0] {
        let rep = check_bifurcation_equivalence(&field, move |x| 2.0 * a * x.sqrt() / tau, l, 1000)?;
        println!("lambda = {l}: {} equilibria, equivalent {}, worst shift {:.1e}", rep.n_original, rep.equivalent, rep.max_position_error);
    }
    Ok(())
}

fn main() {
    run_example().expect("rescaling example");
}
