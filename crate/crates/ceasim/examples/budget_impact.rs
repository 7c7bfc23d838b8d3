//! Budget impact: a real cohort with new patients flowing in every cycle.
//!
//! Cost-effectiveness runs usually start a fixed cohort and let it decay.
//! For budgeting, the model instead starts from today's caseload and adds
//! the incidence stream: `init` sets the standing population, `inflow`
//! injects new entrants after each transition step.

use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::ParameterSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let transition = TransitionSpec::new(
        vec!["on_treatment".into(), "off_treatment".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression("0.12")?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Complement,
        ],
    )?;
    let states = vec![
        (
            "on_treatment".into(),
            StateSpec::new(vec![("cost".into(), parse_expression("2600")?)]),
        ),
        (
            "off_treatment".into(),
            StateSpec::new(vec![("cost".into(), parse_expression("150")?)]),
        ),
    ];
    let spec = ModelSpec {
        parameters: ParameterSet::empty(),
        strategies: vec![StrategySpec::new("reimburse", transition, states)?],
        cycles: 5,
        cost: "cost".into(),
        effect: "cost".into(),
        method: CountingMethod::Start,
        // 18,000 patients on the drug today; 2,500 start it each year,
        // with uptake fading as the backlog clears.
        init: vec![18_000.0, 0.0],
        inflow: vec![("on_treatment".into(), parse_expression("2500 - 300 * (model_time - 1)")?)],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };

    let result = run_model(&spec, None)?;
    let run = &result.strategies[0];
    println!("year  on treatment  annual spend");
    for k in 1..=5 {
        println!(
            "{:>4}  {:>12.0}  {:>12.0}",
            k,
            run.counts.at(k, 0),
            run.values.get(k, "cost").unwrap(),
        );
    }
    println!("\nfive-year budget impact: {:.0}", run.total("cost").unwrap());
    Ok(())
}
