//! Parse an expression once, evaluate it as a per-cycle column.
//!
//! Every expression evaluates to one value per cycle. `model_time` counts
//! cycles from 1, so time-dependent inputs are ordinary arithmetic over it.

use ceasim::expr::{eval_expression, parse_expression, Bindings, EvalContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cycles = 6;

    let mut bindings = Bindings::new();
    bindings.push("rate_acute", vec![0.18; cycles])?;
    bindings.push("cost_year", vec![4200.0; cycles])?;

    // Conversion helpers and branching work element-wise over cycles.
    let p_event = parse_expression("ifelse(model_time <= 2, rate_to_prob(rate_acute), rate_to_prob(rate_acute / 3))")?;
    let cost = parse_expression("discount(cost_year, r = 0.035)")?;

    let ctx = EvalContext::new(cycles, "demo", &bindings);
    let p = eval_expression(&p_event, &ctx)?;
    let c = eval_expression(&cost, &ctx)?;

    println!("cycle  p_event   cost (discounted)");
    for k in 0..cycles {
        println!("{:>5}  {:.6}  {:>10.2}", k + 1, p[k], c[k]);
    }
    Ok(())
}
