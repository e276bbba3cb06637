// Branch conditions of the reduced energy-balance model.

use tipshift::tipping::energy_balance_report;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cases: [(&str, fn(f64) -> f64, fn(f64) -> f64); 3] = [
        ("fixed b", |_| 2.5, |l| 0.8 + 0.4 * l),
        ("fixed c", |l| 3.0 - 0.8 * l, |_| 1.0),
        ("vanishing", |l| 3.0 - 2.2 * l, |_| 1.0),
    ];
    for (name, b, c) in cases {
        let r = energy_balance_report(b, c, 1001)?;
        println!(
            "{name}: two branches {}, separated {}, overtaken {}, ends overtaken {}, vanishes {}, no rate tipping {}",
            r.two_branches.holds,
            r.separated.holds,
            r.overtaken.holds,
            r.ends_overtaken.holds,
            r.vanishes.holds,
            r.no_rate_tipping()
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("energy balance example");
}
