//! Population heterogeneity: the model is rerun per population stratum with
//! that stratum's covariate overrides, then totals are averaged with the
//! stratum weights.

use std::io::Read;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{efficiency_frontier, strategy_totals, FrontierResult, StrategyTotals};
use crate::engine::run_model;
use crate::expr::Expr;
use crate::lifetable::LifeTable;
use crate::model::ModelSpec;
use crate::params::ParameterDefinition;

use super::UncertaintyError;

/// Weight column name recognized in population CSV files.
pub const WEIGHTS_COLUMN: &str = ".weights";

/// Rows of parameter overrides with a relative weight each.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl PopulationTable {
    pub fn new(
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    ) -> Result<PopulationTable, UncertaintyError> {
        if rows.is_empty() {
            return Err(UncertaintyError::EmptyPopulation);
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; rows.len()]);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(UncertaintyError::BadPopulationRow {
                    row: i + 1,
                    message: format!("{} cells for {} columns", row.len(), columns.len()),
                });
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(UncertaintyError::BadPopulationRow {
                    row: i + 1,
                    message: format!("weight {w} must be positive"),
                });
            }
        }
        if weights.len() != rows.len() {
            return Err(UncertaintyError::BadPopulationRow {
                row: 0,
                message: "one weight per row required".into(),
            });
        }
        Ok(PopulationTable { columns, rows, weights })
    }

    /// Reads a CSV of overrides; a `.weights` column (that exact name) is
    /// split out as the weights, all other columns must be numeric
    /// parameter overrides.
    pub fn from_csv<R: Read>(input: R) -> Result<PopulationTable, UncertaintyError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let weight_at = headers.iter().position(|h| h == WEIGHTS_COLUMN);
        let columns: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != weight_at)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(columns.len());
            for (j, cell) in record.iter().enumerate() {
                let value: f64 = cell.trim().parse().map_err(|_| {
                    UncertaintyError::BadPopulationRow {
                        row: i + 1,
                        message: format!("`{cell}` in column `{}` is not a number", &headers[j]),
                    }
                })?;
                if Some(j) == weight_at {
                    weights.push(value);
                } else {
                    row.push(value);
                }
            }
            rows.push(row);
        }
        PopulationTable::new(columns, rows, weight_at.map(|_| weights))
    }

    pub fn load(path: &Path) -> Result<PopulationTable, UncertaintyError> {
        PopulationTable::from_csv(std::fs::File::open(path)?)
    }
}

/// One stratum's run: its 1-based row id, raw weight, and per-strategy
/// totals in model order.
#[derive(Debug, Clone)]
pub struct HeterogeneityRow {
    pub index: usize,
    pub weight: f64,
    pub totals: Vec<StrategyTotals>,
}

#[derive(Debug, Clone)]
pub struct HeterogeneityResult {
    pub strategies: Vec<String>,
    pub rows: Vec<HeterogeneityRow>,
    /// Weighted means (weights normalized to sum 1) of every total.
    pub means: Vec<StrategyTotals>,
    /// Frontier over the weighted mean cost and effect.
    pub frontier: FrontierResult,
}

/// Runs the model once per population row with the row's overrides pinned
/// before dependency evaluation, then averages all totals with normalized
/// weights.
pub fn update_heterogeneity(
    spec: &ModelSpec,
    pop: &PopulationTable,
    lifetable: Option<&LifeTable>,
) -> Result<HeterogeneityResult, UncertaintyError> {
    for column in &pop.columns {
        if !spec.parameters.contains(column) {
            return Err(UncertaintyError::UnknownParameter(column.clone()));
        }
    }
    let outcomes: Vec<Result<Vec<StrategyTotals>, String>> = pop
        .rows
        .par_iter()
        .map(|row| {
            let patch = pop
                .columns
                .iter()
                .zip(row)
                .map(|(name, &v)| (name.clone(), ParameterDefinition::from(Expr::number(v))))
                .collect();
            let parameters = spec.parameters.modify(patch).map_err(|e| e.to_string())?;
            let mut varied = spec.clone();
            varied.parameters = parameters;
            Ok(strategy_totals(&run_model(&varied, lifetable).map_err(|e| e.to_string())?))
        })
        .collect();
    let mut rows = Vec::with_capacity(pop.rows.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let totals = outcome.map_err(|message| UncertaintyError::BadPopulationRow {
            row: i + 1,
            message,
        })?;
        rows.push(HeterogeneityRow { index: i + 1, weight: pop.weights[i], totals });
    }

    let strategies: Vec<String> = spec.strategies.iter().map(|s| s.name().to_string()).collect();
    let total_weight: f64 = pop.weights.iter().sum();
    let means: Vec<StrategyTotals> = strategies
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let weighted = |pick: &dyn Fn(&StrategyTotals) -> f64| {
                rows.iter()
                    .map(|r| r.weight / total_weight * pick(&r.totals[s]))
                    .sum::<f64>()
            };
            let mut out = StrategyTotals::new(
                name.clone(),
                weighted(&|t| t.cost),
                weighted(&|t| t.effect),
            );
            out.others = rows[0].totals[s]
                .others
                .iter()
                .enumerate()
                .map(|(v, (value_name, _))| {
                    (value_name.clone(), weighted(&|t| t.others[v].1))
                })
                .collect();
            out
        })
        .collect();
    let frontier = efficiency_frontier(&means)?;
    Ok(HeterogeneityResult { strategies, rows, means, frontier })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::model::{
        CountingMethod, StateSpec, StrategySpec, TransitionEntry, TransitionSpec, TunnelLimits,
    };
    use crate::params::{ParameterSet, SurvivalRegistry};

    fn fixture() -> ModelSpec {
        let t = TransitionSpec::new(
            vec!["well".into(), "dead".into()],
            vec![
                TransitionEntry::Complement,
                TransitionEntry::Expr(parse_expression("p_die").unwrap()),
                TransitionEntry::Expr(parse_expression("0").unwrap()),
                TransitionEntry::Expr(parse_expression("1").unwrap()),
            ],
        )
        .unwrap();
        let mk = |cost: &str, qaly: &str| {
            StateSpec::new(vec![
                ("cost".into(), parse_expression(cost).unwrap()),
                ("qaly".into(), parse_expression(qaly).unwrap()),
            ])
        };
        let strategy = StrategySpec::new(
            "only",
            t,
            vec![("well".into(), mk("c", "1")), ("dead".into(), mk("0", "0"))],
        )
        .unwrap();
        ModelSpec {
            parameters: ParameterSet::new(vec![
                ("p_die".into(), parse_expression("0.0").unwrap().into()),
                ("c".into(), parse_expression("5").unwrap().into()),
            ], SurvivalRegistry::default())
            .unwrap(),
            strategies: vec![strategy],
            cycles: 1,
            cost: "cost".into(),
            effect: "qaly".into(),
            method: CountingMethod::Start,
            init: vec![1.0, 0.0],
            inflow: vec![],
            limits: TunnelLimits::none(),
            discount_first_cycle: true,
        }
    }

    fn table(columns: &[&str], rows: &[&[f64]], weights: Option<&[f64]>) -> PopulationTable {
        PopulationTable::new(
            columns.iter().map(|c| c.to_string()).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            weights.map(|w| w.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn single_unweighted_row_equals_the_base_run() {
        let spec = fixture();
        let base = strategy_totals(&run_model(&spec, None).unwrap());
        let pop = table(&[], &[&[]], None);
        let result = update_heterogeneity(&spec, &pop, None).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.means, base);
    }

    #[test]
    fn identical_rows_average_to_the_single_row_result() {
        let spec = fixture();
        let pop = table(&["c"], &[&[12.0], &[12.0]], Some(&[2.0, 5.0]));
        let result = update_heterogeneity(&spec, &pop, None).unwrap();
        assert_eq!(result.rows[0].totals, result.rows[1].totals);
        assert_eq!(result.means[0].cost, result.rows[0].totals[0].cost);
    }

    #[test]
    fn weighted_mean_follows_the_weights() {
        // One cycle, one person, start counting: total cost = c exactly.
        let spec = fixture();
        let pop = table(&["c"], &[&[10.0], &[20.0]], Some(&[1.0, 3.0]));
        let result = update_heterogeneity(&spec, &pop, None).unwrap();
        assert!((result.means[0].cost - 17.5).abs() < 1e-12);
        assert_eq!(result.means[0].effect, 1.0);
    }

    #[test]
    fn unknown_override_column_is_rejected() {
        let spec = fixture();
        let pop = table(&["age_base"], &[&[40.0]], None);
        assert!(matches!(
            update_heterogeneity(&spec, &pop, None),
            Err(UncertaintyError::UnknownParameter(_))
        ));
    }

    #[test]
    fn csv_round_trip_with_and_without_weights() {
        let with = "c,.weights\n10,1\n20,3\n";
        let pop = PopulationTable::from_csv(with.as_bytes()).unwrap();
        assert_eq!(pop.columns, vec!["c".to_string()]);
        assert_eq!(pop.rows, vec![vec![10.0], vec![20.0]]);
        assert_eq!(pop.weights, vec![1.0, 3.0]);

        let without = "c\n10\n20\n";
        let pop = PopulationTable::from_csv(without.as_bytes()).unwrap();
        assert_eq!(pop.weights, vec![1.0, 1.0]);

        let bad_cell = "c\nten\n";
        assert!(matches!(
            PopulationTable::from_csv(bad_cell.as_bytes()),
            Err(UncertaintyError::BadPopulationRow { row: 1, .. })
        ));
        let bad_weight = "c,.weights\n10,0\n";
        assert!(matches!(
            PopulationTable::from_csv(bad_weight.as_bytes()),
            Err(UncertaintyError::BadPopulationRow { .. })
        ));
        let empty = "c,.weights\n";
        assert!(matches!(
            PopulationTable::from_csv(empty.as_bytes()),
            Err(UncertaintyError::EmptyPopulation)
        ));
    }

    #[test]
    fn failing_row_reports_its_index() {
        let spec = fixture();
        let pop = table(&["p_die"], &[&[0.5], &[1.7]], None);
        let err = update_heterogeneity(&spec, &pop, None).unwrap_err();
        assert!(matches!(err, UncertaintyError::BadPopulationRow { row: 2, .. }), "{err}");
    }
}
