// User-defined fields and shifts from arithmetic expressions.

use tipshift::bifurcation::build_diagram;
use tipshift::cli::expr::{field_from_expression, parse_expression, shift_from_expression, Var, Vars};
use tipshift::dynamics::StateDomain;
use tipshift::tipping::sweep_decompose;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let e = parse_expression("-(x^2) + 2.5*x - (0.8 + 0.4*lambda)", &[Var::X, Var::Lambda])?;
    println!("{e} at (2, 0.5) = {}", e.eval(&Vars { x: 2.0, lambda: 0.5, s: 0.0 }));
    if let Err(err) = parse_expression("sin(", &[Var::X]) {
        println!("sin( -> {err}");
    }
    let field = field_from_expression("cubic", "lambda + x - x^3", StateDomain::new(-2.0, 2.0)?)?;
    let d = build_diagram(&field, (-1.0, 1.0), 200, 1000)?;
    for p in &d.bif_points {
        println!("cubic: {} at lambda = {:+.6}", p.class.as_str(), p.lambda);
    }
    let shift = shift_from_expression("tanh(s) + 0.6*exp(-s^2)*sin(2*s)", -1.0, 1.0)?;
    println!("rise-dip-rise shift levels {:?}", sweep_decompose(&shift, 4000).levels());
    Ok(())
}

fn main() {
    run_example().expect("expressions example");
}
