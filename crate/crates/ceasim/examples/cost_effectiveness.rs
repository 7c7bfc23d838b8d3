//! Comparing strategies: efficiency frontier, ICERs, net monetary benefit.
//!
//! Three treatments differ in how well they delay progression and what they
//! cost. `strategy_totals` reduces each run to (cost, effect);
//! `efficiency_frontier` removes dominated options and reports incremental
//! ratios along the frontier; `nmb` ranks everything at fixed
//! willingness-to-pay thresholds.

use ceasim::analysis::{efficiency_frontier, nmb, strategy_totals, summary};
use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::ParameterSet;

fn strategy(
    name: &str,
    p_progress: f64,
    cost_drug: f64,
) -> Result<StrategySpec, Box<dyn std::error::Error>> {
    let transition = TransitionSpec::new(
        vec!["stable".into(), "progressed".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression(&p_progress.to_string())?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Complement,
        ],
    )?;
    let states = vec![
        (
            "stable".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression(&format!("discount({cost_drug}, r = 0.03)"))?),
                ("qaly".into(), parse_expression("0.9")?),
            ]),
        ),
        (
            "progressed".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("discount(15000, r = 0.03)")?),
                ("qaly".into(), parse_expression("0.45")?),
            ]),
        ),
    ];
    Ok(StrategySpec::new(name, transition, states)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ModelSpec {
        parameters: ParameterSet::empty(),
        strategies: vec![
            strategy("standard", 0.30, 400.0)?,
            strategy("new_drug", 0.18, 5200.0)?,
            strategy("combo", 0.15, 9800.0)?,
        ],
        cycles: 20,
        cost: "cost".into(),
        effect: "qaly".into(),
        method: CountingMethod::LifeTable,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };

    let totals = strategy_totals(&run_model(&spec, None)?);
    let frontier = efficiency_frontier(&totals)?;
    let benefit = nmb(&totals, &[20_000.0, 50_000.0, 100_000.0])?;
    print!("{}", summary(&totals, &frontier, &benefit));

    for dropped in &frontier.dominated {
        println!("\n{} is {:?}-dominated by {}", dropped.strategy, dropped.kind, dropped.by);
    }
    Ok(())
}
