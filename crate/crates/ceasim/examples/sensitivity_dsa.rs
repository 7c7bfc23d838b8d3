//! Deterministic sensitivity analysis: one parameter at a time.
//!
//! Each parameter is pinned to its low and high bound while everything
//! else (including parameters derived from it) is re-evaluated. The spread
//! of the resulting cost difference is tornado-diagram material.

use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::{ParameterSet, SurvivalRegistry};
use ceasim::uncertainty::{run_dsa, DsaEntry, DsaSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parameters = ParameterSet::new(
        vec![
            ("rate_fail".into(), parse_expression("0.2")?.into()),
            ("p_fail".into(), parse_expression("rate_to_prob(rate_fail)")?.into()),
            ("cost_rescue".into(), parse_expression("12000")?.into()),
        ],
        SurvivalRegistry::default(),
    )?;
    let transition = TransitionSpec::new(
        vec!["ok".into(), "failed".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression("p_fail")?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Complement,
        ],
    )?;
    let states = vec![
        (
            "ok".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("100")?),
                ("ly".into(), parse_expression("1")?),
            ]),
        ),
        (
            "failed".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("cost_rescue")?),
                ("ly".into(), parse_expression("0.7")?),
            ]),
        ),
    ];
    let spec = ModelSpec {
        parameters,
        strategies: vec![StrategySpec::new("device", transition, states)?],
        cycles: 10,
        cost: "cost".into(),
        effect: "ly".into(),
        method: CountingMethod::LifeTable,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };

    let dsa = DsaSpec::new(vec![
        DsaEntry { parameter: "rate_fail".into(), low: 0.1, high: 0.35 },
        DsaEntry { parameter: "cost_rescue".into(), low: 8000.0, high: 20000.0 },
    ]);

    let result = run_dsa(&spec, &dsa, None)?;
    let base_cost = result.base[0].cost;
    println!("base cost {base_cost:.0}\n");
    println!("parameter    bound  value     cost        spread vs base");
    for row in &result.rows {
        match &row.outcome {
            Ok(totals) => println!(
                "{:<12} {:<5}  {:<8}  {:>10.0}  {:>+10.0}",
                row.parameter,
                row.bound.label(),
                row.value,
                totals[0].cost,
                totals[0].cost - base_cost,
            ),
            Err(message) => println!("{:<12} {}: failed: {message}", row.parameter, row.bound.label()),
        }
    }
    Ok(())
}
