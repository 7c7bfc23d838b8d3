//! Cohort recursion, counting corrections, and state-value accounting.
//!
//! The core loop is `a_k = a_{k-1} U_k + Z_k`: row-vector counts pushed
//! through the cycle-k transition slice, plus optional new entrants. Counts
//! are fractional persons; nothing is ever rounded. Tunnel-expanded states
//! are simulated under their internal names and aggregated back to the
//! user's states in every reported result.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{eval_expression, Bindings, EvalContext, EvalError};
use crate::lifetable::LifeTable;
use crate::model::{
    detect_state_time, eval_transition, expand_tunnels, CountingMethod, ModelError, ModelSpec,
    TransitionArray,
};
use crate::params::{ParamError, ParameterTable};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("strategy `{strategy}`: {source}")]
    Strategy { strategy: String, source: Box<RunError> },
    #[error("{0}")]
    Dimension(String),
    #[error("init counts must be finite and nonnegative, got {value} for state `{state}`")]
    NegativeInit { state: String, value: f64 },
    #[error("inflow into `{state}` at cycle {cycle} is {value}, must be finite and nonnegative")]
    BadInflow { state: String, cycle: usize, value: f64 },
    #[error("inflow into `{state}`: {source}")]
    InflowEval { state: String, source: EvalError },
    #[error("value `{value}` of state `{state}`: {source}")]
    ValueEval { state: String, value: String, source: EvalError },
    #[error("value `{value}` at cycle {cycle} is not finite")]
    NonFiniteValue { value: String, cycle: usize },
}

/// Person counts per state, one row per cycle boundary; row 0 is the
/// initial cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    states: Vec<String>,
    data: Vec<f64>, // (cycles + 1) × n
}

impl CountMatrix {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Number of simulated cycles (rows minus the initial one).
    pub fn cycles(&self) -> usize {
        self.data.len() / self.n() - 1
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, state: usize) -> f64 {
        self.data[k * self.n() + state]
    }

    pub fn total(&self, k: usize) -> f64 {
        self.row(k).iter().sum()
    }

    /// Sums tunnel copies back into their parent states.
    fn aggregate(&self, parents: &[String], parent_of: &[usize]) -> CountMatrix {
        let n = parents.len();
        let rows = self.cycles() + 1;
        let mut data = vec![0.0; rows * n];
        for k in 0..rows {
            for (i, &p) in parent_of.iter().enumerate() {
                data[k * n + p] += self.at(k, i);
            }
        }
        CountMatrix { states: parents.to_vec(), data }
    }
}

/// A cycle-indexed table (rows 1..T): corrected counts or value amounts.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMatrix {
    columns: Vec<String>,
    data: Vec<f64>, // cycles × columns
}

impl CycleMatrix {
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn cycles(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    /// Row for cycle k, 1-based.
    pub fn row(&self, cycle: usize) -> &[f64] {
        let m = self.columns.len();
        &self.data[(cycle - 1) * m..cycle * m]
    }

    pub fn get(&self, cycle: usize, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == column)?;
        Some(self.row(cycle)[j])
    }

    pub fn column_sum(&self, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == column)?;
        Some((1..=self.cycles()).map(|k| self.row(k)[j]).sum())
    }
}

/// Runs the cohort recursion. `inflow`, when given, is a cycles × n
/// row-major matrix of new entrants added after each transition step.
pub fn run_cohort(
    states: &[String],
    init: &[f64],
    inflow: Option<&[f64]>,
    u: &TransitionArray,
) -> Result<CountMatrix, RunError> {
    let n = states.len();
    let cycles = u.cycles();
    if u.n() != n || init.len() != n {
        return Err(RunError::Dimension(format!(
            "{} states, init of {}, transitions over {}",
            n,
            init.len(),
            u.n()
        )));
    }
    if let Some(z) = inflow {
        if z.len() != cycles * n {
            return Err(RunError::Dimension(format!(
                "inflow of {} entries for {} cycles x {} states",
                z.len(),
                cycles,
                n
            )));
        }
        for (pos, &v) in z.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(RunError::BadInflow {
                    state: states[pos % n].clone(),
                    cycle: pos / n + 1,
                    value: v,
                });
            }
        }
    }
    for (i, &v) in init.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(RunError::NegativeInit { state: states[i].clone(), value: v });
        }
    }

    let mut data = vec![0.0; (cycles + 1) * n];
    data[..n].copy_from_slice(init);
    for k in 0..cycles {
        let (prev, rest) = data.split_at_mut((k + 1) * n);
        let a_prev = &prev[k * n..];
        let a_next = &mut rest[..n];
        for (i, &mass) in a_prev.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (j, &p) in u.row(k, i).iter().enumerate() {
                a_next[j] += mass * p;
            }
        }
        if let Some(z) = inflow {
            for (j, v) in a_next.iter_mut().enumerate() {
                *v += z[k * n + j];
            }
        }
    }
    Ok(CountMatrix { states: states.to_vec(), data })
}

/// Converts boundary counts into per-cycle person-time according to the
/// counting method.
pub fn correct_counts(counts: &CountMatrix, method: CountingMethod) -> CycleMatrix {
    let n = counts.n();
    let cycles = counts.cycles();
    let mut data = vec![0.0; cycles * n];
    for k in 1..=cycles {
        let row = &mut data[(k - 1) * n..k * n];
        match method {
            CountingMethod::Start => row.copy_from_slice(counts.row(k - 1)),
            CountingMethod::End => row.copy_from_slice(counts.row(k)),
            CountingMethod::LifeTable => {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (counts.at(k - 1, j) + counts.at(k, j)) / 2.0;
                }
            }
        }
    }
    CycleMatrix { columns: counts.states().to_vec(), data }
}

/// Per-state evaluated value columns, aligned with a corrected-count matrix.
#[derive(Debug, Clone)]
pub struct StateValueTable {
    /// Value names, identical across states.
    pub names: Vec<String>,
    /// One column of length T per name.
    pub columns: Vec<Vec<f64>>,
}

/// Weights each state's per-cycle values by its corrected person count and
/// sums over states.
pub fn compute_state_values(
    corrected: &CycleMatrix,
    values: &[StateValueTable],
) -> Result<CycleMatrix, RunError> {
    let n = corrected.columns().len();
    if values.len() != n {
        return Err(RunError::Dimension(format!(
            "{} value tables for {} states",
            values.len(),
            n
        )));
    }
    let names = values[0].names.clone();
    let cycles = corrected.cycles();
    let m = names.len();
    let mut data = vec![0.0; cycles * m];
    for (s, table) in values.iter().enumerate() {
        if table.names != names {
            return Err(RunError::Dimension(format!(
                "state `{}` values differ from `{}`",
                corrected.columns()[s],
                corrected.columns()[0]
            )));
        }
        for (v, column) in table.columns.iter().enumerate() {
            if column.len() != cycles {
                return Err(RunError::Dimension(format!(
                    "value `{}` column of {} entries for {} cycles",
                    names[v],
                    column.len(),
                    cycles
                )));
            }
            for k in 1..=cycles {
                data[(k - 1) * m + v] += corrected.row(k)[s] * column[k - 1];
            }
        }
    }
    for (pos, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(RunError::NonFiniteValue {
                value: names[pos % m].clone(),
                cycle: pos / m + 1,
            });
        }
    }
    Ok(CycleMatrix { columns: names, data })
}

/// Everything reported for one strategy after a run.
#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: String,
    /// Raw boundary counts aggregated to the original states (row 0 = init).
    pub counts: CountMatrix,
    /// Per-cycle value amounts (rows 1..T).
    pub values: CycleMatrix,
    /// Sum of each value column over all cycles.
    pub totals: Vec<(String, f64)>,
}

impl StrategyResult {
    pub fn total(&self, value: &str) -> Option<f64> {
        self.totals.iter().find(|(n, _)| n == value).map(|(_, t)| *t)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategies: Vec<StrategyResult>,
    pub cost: String,
    pub effect: String,
    pub cycles: usize,
    pub method: CountingMethod,
}

impl RunResult {
    pub fn strategy(&self, name: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.strategy == name)
    }

    /// (strategy, cost total, effect total) triples in model order.
    pub fn cost_effect(&self) -> Vec<(String, f64, f64)> {
        self.strategies
            .iter()
            .map(|s| {
                (
                    s.strategy.clone(),
                    s.total(&self.cost).expect("validated"),
                    s.total(&self.effect).expect("validated"),
                )
            })
            .collect()
    }
}

/// Runs every strategy of the model: parameter evaluation, tunnel
/// expansion, transition evaluation, cohort recursion, counting
/// correction, and value accounting.
pub fn run_model(spec: &ModelSpec, lifetable: Option<&LifeTable>) -> Result<RunResult, RunError> {
    spec.validate()?;
    let mut strategies = Vec::with_capacity(spec.strategies.len());
    for strategy in &spec.strategies {
        let result = run_strategy(spec, strategy.name(), lifetable).map_err(|source| {
            RunError::Strategy { strategy: strategy.name().to_string(), source: Box::new(source) }
        })?;
        strategies.push(result);
    }
    Ok(RunResult {
        strategies,
        cost: spec.cost.clone(),
        effect: spec.effect.clone(),
        cycles: spec.cycles,
        method: spec.method,
    })
}

fn run_strategy(
    spec: &ModelSpec,
    name: &str,
    lifetable: Option<&LifeTable>,
) -> Result<StrategyResult, RunError> {
    let strategy = spec
        .strategies
        .iter()
        .find(|s| s.name() == name)
        .expect("caller iterates model strategies");
    let cycles = spec.cycles;
    let empty = Bindings::new();
    let mut base_ctx = EvalContext::new(cycles, name, &empty)
        .with_discount_first_cycle(spec.discount_first_cycle);
    if let Some(table) = lifetable {
        base_ctx = base_ctx.with_lifetable(table);
    }

    let flagged = detect_state_time(strategy, &spec.parameters);
    let expanded = expand_tunnels(strategy, &flagged, cycles, &spec.limits)?;

    // One parameter table per distinct dwell, plus a base table without the
    // state-time-dependent columns for dwell-free rows and inflow.
    let st_dependent = spec.parameters.state_time_dependent();
    let base_table = spec.parameters.evaluate_skipping(&base_ctx, &st_dependent)?;
    let dwell_axes: BTreeMap<usize, Vec<f64>> = expanded
        .dwells()
        .into_iter()
        .map(|s| (s, vec![s as f64; cycles]))
        .collect();
    let mut dwell_tables: BTreeMap<usize, ParameterTable> = BTreeMap::new();
    for (&s, axis) in &dwell_axes {
        let mut ctx = base_ctx.with_state_time(axis);
        ctx.bindings = &empty;
        dwell_tables.insert(s, spec.parameters.evaluate(&ctx)?);
    }

    let contexts: Vec<EvalContext> = expanded
        .states
        .iter()
        .map(|es| {
            let mut ctx = base_ctx;
            match es.dwell {
                None => ctx.bindings = base_table.bindings(),
                Some(s) => {
                    ctx.bindings = dwell_tables[&s].bindings();
                    ctx.state_time = Some(&dwell_axes[&s]);
                }
            }
            ctx
        })
        .collect();

    let transition = expanded.strategy.transition();
    let u = eval_transition(transition, &contexts)?;

    // Original-state inputs land in the first tunnel copy.
    let m = transition.n();
    let originals = strategy.state_names();
    let mut init = vec![0.0; m];
    for (i, state) in originals.iter().enumerate() {
        let target = expanded.entry_index(state).expect("expansion covers every state");
        init[target] = spec.init[i];
    }
    let inflow = if spec.inflow.is_empty() {
        None
    } else {
        let mut z = vec![0.0; cycles * m];
        let mut ctx = base_ctx;
        ctx.bindings = base_table.bindings();
        for (state, expr) in &spec.inflow {
            let col = eval_expression(expr, &ctx)
                .map_err(|source| RunError::InflowEval { state: state.clone(), source })?;
            let target = expanded.entry_index(state).expect("validated");
            for (k, &v) in col.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(RunError::BadInflow {
                        state: state.clone(),
                        cycle: k + 1,
                        value: v,
                    });
                }
                z[k * m + target] += v;
            }
        }
        Some(z)
    };

    let counts = run_cohort(transition.states(), &init, inflow.as_deref(), &u)?;
    let corrected = correct_counts(&counts, spec.method);

    let value_names: Vec<String> = strategy.value_names().map(str::to_string).collect();
    let mut tables = Vec::with_capacity(m);
    for (i, es) in expanded.states.iter().enumerate() {
        let state_spec = expanded.strategy.state(i);
        // Values evaluate in declaration order, each one bound before the
        // next, so composites like a discounted total can build on the
        // values declared above them.
        let mut scoped = contexts[i].bindings.clone();
        for (value, expr) in state_spec.values() {
            let col = {
                let mut ctx = contexts[i];
                ctx.bindings = &scoped;
                eval_expression(expr, &ctx).map_err(|source| RunError::ValueEval {
                    state: es.name.clone(),
                    value: value.to_string(),
                    source,
                })?
            };
            scoped.push(value, col).map_err(|source| RunError::ValueEval {
                state: es.name.clone(),
                value: value.to_string(),
                source,
            })?;
        }
        let columns = value_names
            .iter()
            .map(|v| scoped.get(v).expect("bound in this loop").to_vec())
            .collect();
        tables.push(StateValueTable { names: value_names.clone(), columns });
    }
    let values = compute_state_values(&corrected, &tables)?;
    let totals = value_names
        .iter()
        .map(|v| (v.clone(), values.column_sum(v).expect("column exists")))
        .collect();

    // Reporting re-aggregates tunnel copies into their parents.
    let parent_of: Vec<usize> = expanded
        .states
        .iter()
        .map(|es| originals.iter().position(|o| *o == es.parent).expect("parent is original"))
        .collect();
    let counts = counts.aggregate(originals, &parent_of);

    Ok(StrategyResult { strategy: name.to_string(), counts, values, totals })
}
