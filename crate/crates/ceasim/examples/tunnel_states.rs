//! State-time dependency: hazards that change with time spent in a state.
//!
//! Using `state_time` in a row or value makes that state's history matter.
//! The engine expands it into tunnel copies (one per dwell cycle), runs the
//! enlarged homogeneous chain, and folds the copies back for reporting.
//! `state_cycle_limit` caps how many copies are tracked: dwellers past the
//! cap keep the capped binding.

use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::ParameterSet;

fn remission_model(limits: TunnelLimits) -> Result<ModelSpec, Box<dyn std::error::Error>> {
    // Relapse risk falls the longer someone stays in remission.
    let transition = TransitionSpec::new(
        vec!["remission".into(), "relapse".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression("0.4 / state_time")?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Complement,
        ],
    )?;
    let states = vec![
        (
            "remission".into(),
            StateSpec::new(vec![("years_well".into(), parse_expression("1")?)]),
        ),
        (
            "relapse".into(),
            StateSpec::new(vec![("years_well".into(), parse_expression("0")?)]),
        ),
    ];
    Ok(ModelSpec {
        parameters: ParameterSet::empty(),
        strategies: vec![StrategySpec::new("watchful", transition, states)?],
        cycles: 12,
        cost: "years_well".into(),
        effect: "years_well".into(),
        method: CountingMethod::Start,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits,
        discount_first_cycle: true,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let free = run_model(&remission_model(TunnelLimits::none())?, None)?;
    let capped = run_model(&remission_model(TunnelLimits::all(3))?, None)?;

    println!("cycle  remission (free)  remission (limit 3)");
    for k in [1, 3, 6, 12] {
        println!(
            "{:>5}  {:>16.2}  {:>19.2}",
            k,
            free.strategies[0].counts.at(k, 0),
            capped.strategies[0].counts.at(k, 0),
        );
    }
    println!(
        "\nyears in remission: {:.1} free vs {:.1} with risk pinned at dwell 3",
        free.strategies[0].total("years_well").unwrap(),
        capped.strategies[0].total("years_well").unwrap(),
    );
    Ok(())
}
