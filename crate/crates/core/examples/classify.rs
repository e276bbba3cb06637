// Tipping verdicts for the built-in models.

use tipshift::dynamics::{ParameterShift, ScalarField};
use tipshift::models::{self, BumpConstants};
use tipshift::tipping::{classify_tipping, ClassifyConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = BumpConstants::default();
    let upper = |b: f64, c: f64| models::energy_balance_branches(b, c).map_or(f64::NAN, |(s, _)| s);
    let cases: Vec<(&str, ScalarField, ParameterShift, f64)> = vec![
        ("changeover", models::changeover(), ParameterShift::tanh(-2.0, 2.0)?, 0.0),
        ("bump", models::bump(k), ParameterShift::logistic(-1.0, 1.0)?, k.bump_branch(-1.0)),
        ("fixed b", models::energy_balance_linear(2.5, 2.5, 0.8, 1.2), ParameterShift::tanh(0.0, 1.0)?, upper(2.5, 0.8)),
        ("vanishing", models::energy_balance_linear(3.0, 0.8, 1.0, 1.0), ParameterShift::tanh(0.0, 1.0)?, upper(3.0, 1.0)),
    ];
    for (name, field, shift, x0) in cases {
        let rep = classify_tipping(&field, &shift, x0, &ClassifyConfig::default())?;
        let kinds: Vec<String> = rep
            .verdicts
            .iter()
            .map(|v| serde_json::to_value(v).map(|j| j["kind"].as_str().unwrap_or("?").to_string()))
            .collect::<Result<_, _>>()?;
        println!("{name}: {} (consistent: {})", kinds.join(", "), rep.predicates.bifurcation_consistent);
    }
    Ok(())
}

fn main() {
    run_example().expect("classify example");
}
