//! Plot-ready CSV emitters.
//!
//! Every writer emits a fixed header and one observation per row (long
//! format), with numbers printed in their shortest round-trippable form so
//! reloading a file reproduces the values bit for bit. Columns never depend
//! on the data except where a model's own value names extend them, which is
//! stated per writer.

use std::io::Write;

use crate::analysis::StrategyTotals;
use crate::engine::RunResult;
use crate::uncertainty::{CeacResult, DsaResult, HeterogeneityResult};

/// `strategy,cycle,state,count` — raw boundary counts, cycle 0 is the
/// starting cohort.
pub fn write_counts<W: Write>(result: &RunResult, out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["strategy", "cycle", "state", "count"])?;
    for strategy in &result.strategies {
        let counts = &strategy.counts;
        for cycle in 0..=counts.cycles() {
            for (i, state) in counts.states().iter().enumerate() {
                wtr.write_record([
                    strategy.strategy.as_str(),
                    &cycle.to_string(),
                    state,
                    &counts.at(cycle, i).to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `strategy,cycle,value_name,amount` — per-cycle value totals, cycles 1..T.
pub fn write_values<W: Write>(result: &RunResult, out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["strategy", "cycle", "value_name", "amount"])?;
    for strategy in &result.strategies {
        let values = &strategy.values;
        for cycle in 1..=values.cycles() {
            for (i, name) in values.columns().iter().enumerate() {
                wtr.write_record([
                    strategy.strategy.as_str(),
                    &cycle.to_string(),
                    name,
                    &values.row(cycle)[i].to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `strategy,value_name,total` — every value column summed over the run.
pub fn write_totals<W: Write>(result: &RunResult, out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["strategy", "value_name", "total"])?;
    for strategy in &result.strategies {
        for (name, total) in &strategy.totals {
            wtr.write_record([strategy.strategy.as_str(), name, &total.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn totals_header(totals: &[StrategyTotals]) -> Vec<String> {
    let mut header = vec!["strategy".to_string(), "cost".to_string(), "effect".to_string()];
    if let Some(first) = totals.first() {
        header.extend(first.others.iter().map(|(n, _)| n.clone()));
    }
    header
}

fn totals_cells(t: &StrategyTotals) -> Vec<String> {
    let mut row = vec![t.strategy.clone(), t.cost.to_string(), t.effect.to_string()];
    row.extend(t.others.iter().map(|(_, v)| v.to_string()));
    row
}

/// `parameter,bound,strategy,cost,effect,...` — one row per strategy per
/// successful (parameter, bound) run, in tornado-ready long format. Failed
/// bounds are skipped here; read them off `DsaResult::rows`.
pub fn write_dsa<W: Write>(result: &DsaResult, out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["parameter".to_string(), "bound".to_string()];
    header.extend(totals_header(&result.base));
    wtr.write_record(&header)?;
    for row in &result.rows {
        let Ok(totals) = &row.outcome else { continue };
        for t in totals {
            let mut cells = vec![row.parameter.clone(), row.bound.label().to_string()];
            cells.extend(totals_cells(t));
            wtr.write_record(&cells)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `lambda,strategy,probability` — acceptability curves in long format.
pub fn write_ceac<W: Write>(ceac: &CeacResult, out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["lambda", "strategy", "probability"])?;
    for (t, lambda) in ceac.lambdas.iter().enumerate() {
        for (s, strategy) in ceac.strategies.iter().enumerate() {
            wtr.write_record([
                &lambda.to_string(),
                strategy.as_str(),
                &ceac.probabilities[t][s].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `lambda,evpi`
pub fn write_evpi<W: Write>(evpi: &[(f64, f64)], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["lambda", "evpi"])?;
    for (lambda, value) in evpi {
        wtr.write_record([&lambda.to_string(), &value.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `row,weight,strategy,cost,effect,...` — per-population-row totals; the
/// weighted means live in `HeterogeneityResult::means`, not here.
pub fn write_heterogeneity<W: Write>(
    result: &HeterogeneityResult,
    out: W,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string(), "weight".to_string()];
    header.extend(totals_header(&result.means));
    wtr.write_record(&header)?;
    for row in &result.rows {
        for t in &row.totals {
            let mut cells = vec![row.index.to_string(), row.weight.to_string()];
            cells.extend(totals_cells(t));
            wtr.write_record(&cells)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
