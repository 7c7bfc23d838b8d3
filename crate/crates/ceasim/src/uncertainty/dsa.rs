//! Deterministic sensitivity analysis: parameter values are varied one at a
//! time between a low and a high bound, rerunning the full model each time
//! so dependent parameters follow.

use crate::analysis::{strategy_totals, StrategyTotals};
use crate::engine::run_model;
use crate::expr::Expr;
use crate::lifetable::LifeTable;
use crate::model::ModelSpec;
use crate::params::ParameterDefinition;

use super::UncertaintyError;

#[derive(Debug, Clone, PartialEq)]
pub struct DsaEntry {
    pub parameter: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DsaSpec {
    pub entries: Vec<DsaEntry>,
}

impl DsaSpec {
    pub fn new(entries: Vec<DsaEntry>) -> DsaSpec {
        DsaSpec { entries }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<(), UncertaintyError> {
        for e in &self.entries {
            if !spec.parameters.contains(&e.parameter) {
                return Err(UncertaintyError::UnknownParameter(e.parameter.clone()));
            }
            if !(e.low <= e.high) {
                return Err(UncertaintyError::BadBounds {
                    parameter: e.parameter.clone(),
                    low: e.low,
                    high: e.high,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Low,
    High,
}

impl Bound {
    pub fn label(&self) -> &'static str {
        match self {
            Bound::Low => "low",
            Bound::High => "high",
        }
    }
}

/// One (parameter, bound) model evaluation. A bound that breaks the model
/// (say, a probability pushed past 1) is reported here instead of aborting
/// the other rows.
#[derive(Debug, Clone)]
pub struct DsaRow {
    pub parameter: String,
    pub bound: Bound,
    pub value: f64,
    pub outcome: Result<Vec<StrategyTotals>, String>,
}

#[derive(Debug, Clone)]
pub struct DsaResult {
    pub base: Vec<StrategyTotals>,
    pub rows: Vec<DsaRow>,
}

/// Runs the model twice per entry with the parameter pinned to each bound
/// and everything else at base. The pinned value replaces the definition in
/// place, so parameters defined downstream recompute from it.
pub fn run_dsa(
    spec: &ModelSpec,
    dsa: &DsaSpec,
    lifetable: Option<&LifeTable>,
) -> Result<DsaResult, UncertaintyError> {
    dsa.validate(spec)?;
    let base = strategy_totals(&run_model(spec, lifetable)?);
    let mut rows = Vec::with_capacity(dsa.entries.len() * 2);
    for e in &dsa.entries {
        for (bound, value) in [(Bound::Low, e.low), (Bound::High, e.high)] {
            let patch = vec![(
                e.parameter.clone(),
                ParameterDefinition::from(Expr::number(value)),
            )];
            let outcome = spec
                .parameters
                .modify(patch)
                .map_err(UncertaintyError::from)
                .and_then(|parameters| {
                    let mut varied = spec.clone();
                    varied.parameters = parameters;
                    Ok(strategy_totals(&run_model(&varied, lifetable)?))
                })
                .map_err(|err| err.to_string());
            rows.push(DsaRow { parameter: e.parameter.clone(), bound, value, outcome });
        }
    }
    Ok(DsaResult { base, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::model::{
        CountingMethod, StateSpec, StrategySpec, TransitionEntry, TransitionSpec, TunnelLimits,
    };
    use crate::params::{ParameterSet, SurvivalRegistry};

    fn entry(src: &str) -> TransitionEntry {
        if src == "C" {
            TransitionEntry::Complement
        } else {
            TransitionEntry::Expr(parse_expression(src).unwrap())
        }
    }

    fn two_state(name: &str, p_src: &str, cost_src: &str, qaly_src: &str) -> StrategySpec {
        let t = TransitionSpec::new(
            vec!["well".into(), "dead".into()],
            vec![entry("C"), entry(p_src), entry("0"), entry("1")],
        )
        .unwrap();
        let mk = |cost: &str, qaly: &str| {
            StateSpec::new(vec![
                ("cost".into(), parse_expression(cost).unwrap()),
                ("qaly".into(), parse_expression(qaly).unwrap()),
            ])
        };
        StrategySpec::new(
            name,
            t,
            vec![
                ("well".into(), mk(cost_src, qaly_src)),
                ("dead".into(), mk("0", "0")),
            ],
        )
        .unwrap()
    }

    fn fixture() -> ModelSpec {
        let parameters = ParameterSet::new(vec![
            ("p_die".into(), parse_expression("0.1").unwrap().into()),
            ("c_well".into(), parse_expression("100").unwrap().into()),
            // Depends on c_well: DSA on c_well must flow through.
            ("c_extra".into(), parse_expression("c_well / 2").unwrap().into()),
        ], SurvivalRegistry::default())
        .unwrap();
        ModelSpec {
            parameters,
            strategies: vec![
                two_state("plain", "p_die", "c_well", "1"),
                two_state("costly", "p_die", "c_well + c_extra", "1"),
            ],
            cycles: 5,
            cost: "cost".into(),
            effect: "qaly".into(),
            method: CountingMethod::Start,
            init: vec![1000.0, 0.0],
            inflow: vec![],
            limits: TunnelLimits::none(),
            discount_first_cycle: true,
        }
    }

    fn dsa(parameter: &str, low: f64, high: f64) -> DsaSpec {
        DsaSpec::new(vec![DsaEntry { parameter: parameter.into(), low, high }])
    }

    #[test]
    fn unknown_parameter_and_reversed_bounds_are_rejected() {
        let spec = fixture();
        assert!(matches!(
            run_dsa(&spec, &dsa("nope", 0.0, 1.0), None),
            Err(UncertaintyError::UnknownParameter(_))
        ));
        assert!(matches!(
            run_dsa(&spec, &dsa("p_die", 0.3, 0.1), None),
            Err(UncertaintyError::BadBounds { .. })
        ));
    }

    #[test]
    fn bounds_equal_to_base_reproduce_base_exactly() {
        let spec = fixture();
        let result = run_dsa(&spec, &dsa("p_die", 0.1, 0.1), None).unwrap();
        for row in &result.rows {
            assert_eq!(row.outcome.as_ref().unwrap(), &result.base);
        }
    }

    #[test]
    fn cost_only_parameter_leaves_effects_alone_and_moves_costs_monotonically() {
        let spec = fixture();
        let result = run_dsa(&spec, &dsa("c_well", 50.0, 200.0), None).unwrap();
        let low = result.rows[0].outcome.as_ref().unwrap();
        let high = result.rows[1].outcome.as_ref().unwrap();
        for (strategy, (lo, hi)) in low.iter().zip(high).enumerate().map(|(i, p)| (i, p)) {
            assert_eq!(lo.effect, result.base[strategy].effect);
            assert_eq!(hi.effect, result.base[strategy].effect);
            assert!(lo.cost < result.base[strategy].cost);
            assert!(hi.cost > result.base[strategy].cost);
        }
        // Linearity in the pinned value: base cost sits midway when the
        // bounds straddle it symmetrically in cost-weighting terms.
        // c_extra = c_well / 2 must follow: `costly` moves 1.5x as much.
        let plain_swing = high[0].cost - low[0].cost;
        let costly_swing = high[1].cost - low[1].cost;
        assert!((costly_swing - 1.5 * plain_swing).abs() < 1e-9 * costly_swing.abs());
    }

    #[test]
    fn strategies_untouched_by_the_parameter_keep_base_totals() {
        let mut spec = fixture();
        // Only `costly` references c_extra.
        spec.strategies = vec![
            two_state("plain", "p_die", "c_well", "1"),
            two_state("costly", "p_die", "c_well + c_extra", "1"),
        ];
        let result = run_dsa(&spec, &dsa("c_extra", 10.0, 90.0), None).unwrap();
        for row in &result.rows {
            let totals = row.outcome.as_ref().unwrap();
            assert_eq!(totals[0], result.base[0], "plain must not move");
            assert_ne!(totals[1].cost, result.base[1].cost);
        }
    }

    #[test]
    fn a_bound_that_breaks_the_model_is_reported_per_row() {
        let spec = fixture();
        let result = run_dsa(&spec, &dsa("p_die", 0.05, 1.5), None).unwrap();
        assert!(result.rows[0].outcome.is_ok());
        let err = result.rows[1].outcome.as_ref().unwrap_err();
        assert!(err.contains("p_die") || err.contains("cycle"), "{err}");
        assert_eq!(result.rows[1].bound, Bound::High);
    }
}
