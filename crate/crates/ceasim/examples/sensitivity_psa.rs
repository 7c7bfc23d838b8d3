//! Probabilistic sensitivity analysis with correlated draws.
//!
//! Parameters get marginal distributions; a Gaussian copula ties them
//! together with rank correlations. Every draw reruns the whole model, and
//! the cloud of (cost, effect) outcomes feeds the cost-effectiveness
//! acceptability curve and the expected value of perfect information.

use ceasim::engine::run_model;
use ceasim::expr::parse_expression;
use ceasim::model::{
    CountingMethod, ModelSpec, StateSpec, StrategySpec, TransitionEntry, TransitionSpec,
    TunnelLimits,
};
use ceasim::params::{ParameterSet, SurvivalRegistry};
use ceasim::uncertainty::{ceac, evpi, psa_summary, run_psa, Marginal, PsaSpec};

fn strategy(name: &str, progress: &str, drug: &str) -> Result<StrategySpec, Box<dyn std::error::Error>> {
    let transition = TransitionSpec::new(
        vec!["stable".into(), "progressed".into()],
        vec![
            TransitionEntry::Complement,
            TransitionEntry::Expr(parse_expression(progress)?),
            TransitionEntry::Expr(parse_expression("0")?),
            TransitionEntry::Complement,
        ],
    )?;
    let states = vec![
        (
            "stable".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression(drug)?),
                ("qaly".into(), parse_expression("0.85")?),
            ]),
        ),
        (
            "progressed".into(),
            StateSpec::new(vec![
                ("cost".into(), parse_expression("cost_progressed")?),
                ("qaly".into(), parse_expression("0.5")?),
            ]),
        ),
    ];
    Ok(StrategySpec::new(name, transition, states)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parameters = ParameterSet::new(
        vec![
            ("p_progress".into(), parse_expression("0.22")?.into()),
            ("effect_new".into(), parse_expression("0.6")?.into()),
            ("cost_new".into(), parse_expression("4000")?.into()),
            ("cost_progressed".into(), parse_expression("11000")?.into()),
        ],
        SurvivalRegistry::default(),
    )?;
    let spec = ModelSpec {
        parameters,
        strategies: vec![
            strategy("standard", "p_progress", "300")?,
            strategy("new_drug", "p_progress * effect_new", "cost_new")?,
        ],
        cycles: 12,
        cost: "cost".into(),
        effect: "qaly".into(),
        method: CountingMethod::LifeTable,
        init: vec![1000.0, 0.0],
        inflow: vec![],
        limits: TunnelLimits::none(),
        discount_first_cycle: true,
    };
    run_model(&spec, None)?; // base run, sanity

    let psa = PsaSpec {
        parameters: vec![
            ("p_progress".into(), Marginal::Binomial { prob: 0.22, size: 400 }),
            ("effect_new".into(), Marginal::LogNormal { mean: 0.6, sd: 0.1 }),
            ("cost_new".into(), Marginal::Gamma { mean: 4000.0, sd: 600.0 }),
            ("cost_progressed".into(), Marginal::Gamma { mean: 11000.0, sd: 1500.0 }),
        ],
        // A drug that works better tends to cost more.
        correlations: vec![("effect_new".into(), "cost_new".into(), -0.4)],
    };

    let result = run_psa(&spec, &psa, 1000, 2024, None)?;
    let means = psa_summary(&result)?;
    println!("strategy  mean cost   mean qaly");
    for t in &means.means {
        println!("{:<9} {:>9.0}  {:>9.2}", t.strategy, t.cost, t.effect);
    }

    let lambdas: Vec<f64> = (0..=10).map(|i| i as f64 * 5000.0).collect();
    let curve = ceac(&result, &lambdas);
    println!("\nlambda   P(standard)  P(new_drug)");
    for (i, l) in lambdas.iter().enumerate() {
        println!("{:>6}   {:>10.3}  {:>10.3}", l, curve.probabilities[i][0], curve.probabilities[i][1]);
    }

    println!("\nlambda   EVPI per person");
    for (l, v) in evpi(&result, &[0.0, 25_000.0, 50_000.0]) {
        println!("{:>6}   {:>12.2}", l, v);
    }
    Ok(())
}
