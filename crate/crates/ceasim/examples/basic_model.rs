//! A minimal two-state cohort model, built in code and run for 15 cycles.
//!
//! 1000 people start healthy; each cycle some fall ill and the ill pay for
//! care. The run produces boundary counts per cycle and cost/utility
//! totals under half-cycle ("life-table") counting.

use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::{ParameterSet, SurvivalRegistry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parameters = ParameterSet::new(
        vec![
            ("rate_sick".into(), parse_expression("0.25")?.into()),
            ("p_sick".into(), parse_expression("rate_to_prob(rate_sick)")?.into()),
            ("cost_care".into(), parse_expression("2500")?.into()),
        ],
        SurvivalRegistry::default(),
    )?;

    let transition = TransitionSpec::new(
        vec!["healthy".into(), "sick".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression("p_sick")?),
            TransitionEntry::Expr(parse_expression("0.05")?),
            TransitionEntry::Complement,
        ],
    )?;

    let states = vec![
        (
            "healthy".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("0")?),
                ("utility".into(), parse_expression("1")?),
            ]),
        ),
        (
            "sick".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("cost_care")?),
                ("utility".into(), parse_expression("0.6")?),
            ]),
        ),
    ];

    let spec = ModelSpec {
        parameters,
        strategies: vec![StrategySpec::new("care", transition, states)?],
        cycles: 15,
        cost: "cost".into(),
        effect: "utility".into(),
        method: CountingMethod::LifeTable,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };

    let result = run_model(&spec, None)?;
    let run = &result.strategies[0];

    println!("cycle  healthy    sick");
    for k in [0, 1, 2, 5, 10, 15] {
        println!("{:>5}  {:>8.2}  {:>6.2}", k, run.counts.at(k, 0), run.counts.at(k, 1));
    }
    println!("\ntotal cost    {:>12.2}", run.total("cost").unwrap());
    println!("total utility {:>12.2}", run.total("utility").unwrap());
    Ok(())
}
