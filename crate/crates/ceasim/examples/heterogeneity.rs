//! Heterogeneity: rerun the model over a population table and pool results.
//!
//! Each row pins some parameters (here age and sex) to a subgroup's values;
//! weights say how common the subgroup is. The pooled result is the
//! weighted mean of the per-row totals.

use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::lifetable::{LifeTable, LifeTableRow, Sex};
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::{ParameterSet, SurvivalRegistry};
use ceasim::uncertainty::{update_heterogeneity, PopulationTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A small illustrative mortality table (not real vital statistics).
    let lifetable = LifeTable::from_rows(vec![
        LifeTableRow { age_lo: 0.0, age_hi: Some(50.0), sex: Sex::Male, prob: 0.002 },
        LifeTableRow { age_lo: 50.0, age_hi: None, sex: Sex::Male, prob: 0.015 },
        LifeTableRow { age_lo: 0.0, age_hi: Some(50.0), sex: Sex::Female, prob: 0.0015 },
        LifeTableRow { age_lo: 50.0, age_hi: None, sex: Sex::Female, prob: 0.011 },
    ])?;

    let parameters = ParameterSet::new(
        vec![
            ("age".into(), parse_expression("40")?.into()),
            ("sex".into(), parse_expression("MLE")?.into()),
            ("p_die".into(), parse_expression("mortality_prob(age + model_time, sex)")?.into()),
        ],
        SurvivalRegistry::default(),
    )?;
    let transition = TransitionSpec::new(
        vec!["alive".into(), "dead".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression("p_die")?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Expr(parse_expression("1")?),
        ],
    )?;
    let states = vec![
        (
            "alive".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("800")?),
                ("ly".into(), parse_expression("1")?),
            ]),
        ),
        (
            "dead".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("0")?),
                ("ly".into(), parse_expression("0")?),
            ]),
        ),
    ];
    let spec = ModelSpec {
        parameters,
        strategies: vec![StrategySpec::new("screening", transition, states)?],
        cycles: 25,
        cost: "cost".into(),
        effect: "ly".into(),
        method: CountingMethod::LifeTable,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };
    run_model(&spec, Some(&lifetable))?; // the reference 40-year-old male run

    // 1 = MLE, 2 = FMLE; weights are relative subgroup sizes.
    let population = PopulationTable::new(
        vec!["age".into(), "sex".into()],
        vec![
            vec![35.0, 1.0],
            vec![35.0, 2.0],
            vec![62.0, 1.0],
            vec![62.0, 2.0],
        ],
        Some(vec![0.31, 0.33, 0.17, 0.19]),
    )?;

    let pooled = update_heterogeneity(&spec, &population, Some(&lifetable))?;
    println!("row  weight  life-years");
    for row in &pooled.rows {
        println!("{:>3}  {:<6}  {:>9.1}", row.index, row.weight, row.totals[0].effect);
    }
    println!("\npooled life-years {:.1}", pooled.means[0].effect);
    println!("pooled cost       {:.0}", pooled.means[0].cost);
    Ok(())
}
