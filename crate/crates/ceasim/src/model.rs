//! Model structure: states, symbolic transition matrices, strategies, and
//! tunnel expansion.
//!
//! A transition matrix entry is an expression or the complement marker `C`
//! (at most one per row), resolved per cycle after the other entries.
//! States whose transition row or value expressions depend on `state_time`
//! — directly or through parameters — are expanded into tunnel copies, one
//! per dwell cycle, so the cohort recursion stays first-order Markov. The
//! expansion is internal: results aggregate back to the original state
//! names.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{eval_expression, EvalContext, EvalError, Expr, RESERVED_NAMES, SEX_CODE_NAMES};
use crate::params::ParameterSet;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("a transition matrix needs at least two states, got {0}")]
    TooFewStates(usize),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("transition matrix over {states} states needs {expected} entries, got {got}")]
    EntryCount { states: usize, expected: usize, got: usize },
    #[error("row `{state}` has more than one complement entry")]
    MultipleComplements { state: String },
    #[error("strategy `{strategy}`: transition states and value states differ ({detail})")]
    StateMismatch { strategy: String, detail: String },
    #[error("strategy `{strategy}`: state `{state}` defines values {{{got}}}, expected {{{expected}}}")]
    ValueSetMismatch { strategy: String, state: String, got: String, expected: String },
    #[error("a model needs at least one strategy")]
    NoStrategies,
    #[error("duplicate strategy `{0}`")]
    DuplicateStrategy(String),
    #[error("strategy `{0}` does not use the same ordered state list as the first strategy")]
    StrategyStatesDiffer(String),
    #[error("{which} value `{name}` is not defined by the model's states")]
    UnknownValueName { which: &'static str, name: String },
    #[error("strategy `{strategy}`: state `{state}` value `{value}` has the same name as a parameter or reserved variable")]
    ValueShadowsName { strategy: String, state: String, value: String },
    #[error("init counts: {0}")]
    BadInit(String),
    #[error("cycle count must be at least 1")]
    BadCycles,
    #[error("inflow names unknown state `{0}`")]
    InflowUnknownState(String),
    #[error("inflow for state `{state}` depends on state_time, which has no meaning for new entrants")]
    InflowStateTime { state: String },
    #[error("strategy `{strategy}`, {place}: unknown name `{name}`")]
    UnknownName { strategy: String, place: String, name: String },
    #[error("state_cycle_limit for `{state}` must be at least 1, got {limit}")]
    BadLimit { state: String, limit: usize },
    #[error("transition {from} -> {to}, cycle {cycle}: value {value} is outside [0, 1]")]
    EntryOutOfRange { from: String, to: String, cycle: usize, value: f64 },
    #[error("transition row `{state}`, cycle {cycle}: entries sum to {sum}, leaving no probability for the complement")]
    RowSumExceedsOne { state: String, cycle: usize, sum: f64 },
    #[error("transition row `{state}`, cycle {cycle}: entries sum to {sum}, expected 1")]
    RowSumNotOne { state: String, cycle: usize, sum: f64 },
    #[error("transition row `{state}`: {source}")]
    Eval { state: String, source: EvalError },
}

/// One cell of a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionEntry {
    /// `C`: one minus the sum of the row's other entries, per cycle.
    Complement,
    Expr(Expr),
}

impl TransitionEntry {
    pub fn zero() -> TransitionEntry {
        TransitionEntry::Expr(Expr::number(0.0))
    }

    fn is_literal(&self, v: f64) -> bool {
        matches!(self, TransitionEntry::Expr(e) if e.is_literal(v))
    }
}

impl From<Expr> for TransitionEntry {
    fn from(expr: Expr) -> TransitionEntry {
        TransitionEntry::Expr(expr)
    }
}

/// Square grid of transition entries over an ordered state list.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    states: Vec<String>,
    entries: Vec<TransitionEntry>, // row-major, length n*n
}

impl TransitionSpec {
    pub fn new(states: Vec<String>, entries: Vec<TransitionEntry>) -> Result<TransitionSpec, ModelError> {
        let n = states.len();
        if n < 2 {
            return Err(ModelError::TooFewStates(n));
        }
        let mut seen = HashSet::new();
        for state in &states {
            if !seen.insert(state.as_str()) {
                return Err(ModelError::DuplicateState(state.clone()));
            }
        }
        if entries.len() != n * n {
            return Err(ModelError::EntryCount { states: n, expected: n * n, got: entries.len() });
        }
        for (i, row) in entries.chunks(n).enumerate() {
            let complements = row.iter().filter(|e| matches!(e, TransitionEntry::Complement)).count();
            if complements > 1 {
                return Err(ModelError::MultipleComplements { state: states[i].clone() });
            }
        }
        Ok(TransitionSpec { states, entries })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn entry(&self, row: usize, col: usize) -> &TransitionEntry {
        &self.entries[row * self.n() + col]
    }

    pub fn row(&self, row: usize) -> &[TransitionEntry] {
        let n = self.n();
        &self.entries[row * n..(row + 1) * n]
    }

    /// An absorbing row keeps all mass in place by construction: literal 0
    /// everywhere off the diagonal, literal 1 or the complement on it.
    pub fn is_absorbing(&self, row: usize) -> bool {
        self.row(row).iter().enumerate().all(|(j, entry)| {
            if j == row {
                matches!(entry, TransitionEntry::Complement) || entry.is_literal(1.0)
            } else {
                entry.is_literal(0.0)
            }
        })
    }
}

/// Per-cycle values attached to one state (cost and effect components).
///
/// Values evaluate in declaration order and may reference the values
/// declared above them in the same state, so a total can be composed from
/// its components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateSpec {
    values: Vec<(String, Expr)>,
}

impl StateSpec {
    pub fn new(values: Vec<(String, Expr)>) -> StateSpec {
        StateSpec { values }
    }

    pub fn value_names(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|(name, _)| name.as_str())
    }

    pub fn values(&self) -> impl Iterator<Item = (&str, &Expr)> {
        self.values.iter().map(|(name, expr)| (name.as_str(), expr))
    }

    pub fn value(&self, name: &str) -> Option<&Expr> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }
}

/// A named treatment alternative: one transition matrix plus state values.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    name: String,
    transition: TransitionSpec,
    /// Aligned with `transition.states()`.
    states: Vec<StateSpec>,
}

impl StrategySpec {
    pub fn new(
        name: impl Into<String>,
        transition: TransitionSpec,
        mut states: Vec<(String, StateSpec)>,
    ) -> Result<StrategySpec, ModelError> {
        let name = name.into();
        let mismatch = |detail: String| ModelError::StateMismatch {
            strategy: name.clone(),
            detail,
        };
        let mut ordered = Vec::with_capacity(transition.n());
        for state in transition.states() {
            let pos = states
                .iter()
                .position(|(n, _)| n == state)
                .ok_or_else(|| mismatch(format!("state `{state}` has no value definitions")))?;
            ordered.push(states.swap_remove(pos).1);
        }
        if let Some((extra, _)) = states.first() {
            return Err(mismatch(format!("`{extra}` is not in the transition matrix")));
        }
        // All states must answer for the same values, or the value matrix
        // would have holes.
        let expected: BTreeSet<&str> = ordered[0].value_names().collect();
        for (spec, state) in ordered.iter().zip(transition.states()) {
            let got: BTreeSet<&str> = spec.value_names().collect();
            if got != expected {
                return Err(ModelError::ValueSetMismatch {
                    strategy: name,
                    state: state.clone(),
                    got: got.into_iter().collect::<Vec<_>>().join(", "),
                    expected: expected.into_iter().collect::<Vec<_>>().join(", "),
                });
            }
        }
        Ok(StrategySpec { name, transition, states: ordered })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn transition(&self) -> &TransitionSpec {
        &self.transition
    }

    pub fn state_names(&self) -> &[String] {
        self.transition.states()
    }

    pub fn state(&self, index: usize) -> &StateSpec {
        &self.states[index]
    }

    /// Value names in the order declared by the first state.
    pub fn value_names(&self) -> impl Iterator<Item = &str> {
        self.states[0].value_names()
    }
}

/// How end-of-cycle counts translate into person-time for valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountingMethod {
    /// Row k values the cycle-start counts a_{k-1}.
    Start,
    /// Row k values the cycle-end counts a_k.
    End,
    /// Row k values the mid-cycle average (a_{k-1} + a_k) / 2.
    #[default]
    LifeTable,
}

impl CountingMethod {
    pub fn parse(s: &str) -> Option<CountingMethod> {
        match s {
            "start" | "beginning" => Some(CountingMethod::Start),
            "end" => Some(CountingMethod::End),
            "life-table" | "life_table" => Some(CountingMethod::LifeTable),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CountingMethod::Start => "start",
            CountingMethod::End => "end",
            CountingMethod::LifeTable => "life-table",
        }
    }
}

/// Per-state caps on tunnel length.
#[derive(Debug, Clone, Default)]
pub struct TunnelLimits {
    pub global: Option<usize>,
    pub per_state: HashMap<String, usize>,
}

impl TunnelLimits {
    pub fn none() -> TunnelLimits {
        TunnelLimits::default()
    }

    pub fn all(limit: usize) -> TunnelLimits {
        TunnelLimits { global: Some(limit), per_state: HashMap::new() }
    }

    pub fn for_state(&self, state: &str) -> Option<usize> {
        self.per_state.get(state).copied().or(self.global)
    }

    fn validate(&self, states: &[String]) -> Result<(), ModelError> {
        if let Some(limit) = self.global {
            if limit < 1 {
                return Err(ModelError::BadLimit { state: "*".into(), limit });
            }
        }
        for (state, &limit) in &self.per_state {
            if !states.contains(state) {
                return Err(ModelError::InflowUnknownState(state.clone()));
            }
            if limit < 1 {
                return Err(ModelError::BadLimit { state: state.clone(), limit });
            }
        }
        Ok(())
    }
}

/// A complete model: shared parameters, the competing strategies, and the
/// run configuration.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub parameters: ParameterSet,
    pub strategies: Vec<StrategySpec>,
    pub cycles: usize,
    pub cost: String,
    pub effect: String,
    pub method: CountingMethod,
    /// Cohort at cycle 0, aligned with the shared state order.
    pub init: Vec<f64>,
    /// New entrants per cycle: (state, count expression on model_time).
    pub inflow: Vec<(String, Expr)>,
    pub limits: TunnelLimits,
    pub discount_first_cycle: bool,
}

impl ModelSpec {
    /// 1000 persons starting in the first state.
    pub const DEFAULT_INIT_TOTAL: f64 = 1000.0;

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.strategies.is_empty() {
            return Err(ModelError::NoStrategies);
        }
        if self.cycles < 1 {
            return Err(ModelError::BadCycles);
        }
        let first = &self.strategies[0];
        let states = first.state_names();
        let mut names = HashSet::new();
        for strategy in &self.strategies {
            if !names.insert(strategy.name().to_string()) {
                return Err(ModelError::DuplicateStrategy(strategy.name().to_string()));
            }
            if strategy.state_names() != states {
                return Err(ModelError::StrategyStatesDiffer(strategy.name().to_string()));
            }
        }
        for (which, name) in [("cost", &self.cost), ("effect", &self.effect)] {
            for strategy in &self.strategies {
                if !strategy.value_names().any(|v| v == name.as_str()) {
                    return Err(ModelError::UnknownValueName { which, name: name.clone() });
                }
            }
        }
        if self.init.len() != states.len() {
            return Err(ModelError::BadInit(format!(
                "{} entries for {} states",
                self.init.len(),
                states.len()
            )));
        }
        if self.init.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(ModelError::BadInit("counts must be finite and nonnegative".into()));
        }
        let st_dependent = self.parameters.state_time_dependent();
        for (state, expr) in &self.inflow {
            if !states.contains(state) {
                return Err(ModelError::InflowUnknownState(state.clone()));
            }
            if expr
                .idents()
                .iter()
                .any(|id| *id == "state_time" || st_dependent.contains(*id))
            {
                return Err(ModelError::InflowStateTime { state: state.clone() });
            }
        }
        self.limits.validate(states)?;
        self.validate_names()?;
        Ok(())
    }

    /// Every identifier in transition, value, and inflow expressions must
    /// resolve to a parameter, a reserved variable, or a sex code, so
    /// mistakes surface at load time rather than mid-run.
    fn validate_names(&self) -> Result<(), ModelError> {
        let known = |ident: &str| {
            RESERVED_NAMES.contains(&ident)
                || SEX_CODE_NAMES.iter().any(|(code, _)| *code == ident)
                || self.parameters.contains(ident)
        };
        let check = |strategy: &str, place: String, expr: &Expr| -> Result<(), ModelError> {
            for ident in expr.idents() {
                if !known(ident) {
                    return Err(ModelError::UnknownName {
                        strategy: strategy.to_string(),
                        place,
                        name: ident.to_string(),
                    });
                }
            }
            Ok(())
        };
        for strategy in &self.strategies {
            let t = strategy.transition();
            for i in 0..t.n() {
                for j in 0..t.n() {
                    if let TransitionEntry::Expr(expr) = t.entry(i, j) {
                        check(
                            strategy.name(),
                            format!("transition {} -> {}", t.states()[i], t.states()[j]),
                            expr,
                        )?;
                    }
                }
            }
            for (index, state) in t.states().iter().enumerate() {
                // Values evaluate top to bottom and may reference the values
                // declared above them in the same state.
                let mut above: Vec<&str> = Vec::new();
                for (value, expr) in strategy.state(index).values() {
                    if RESERVED_NAMES.contains(&value) || self.parameters.contains(value) {
                        return Err(ModelError::ValueShadowsName {
                            strategy: strategy.name().to_string(),
                            state: state.clone(),
                            value: value.to_string(),
                        });
                    }
                    for ident in expr.idents() {
                        if !(known(ident) || above.contains(&ident)) {
                            return Err(ModelError::UnknownName {
                                strategy: strategy.name().to_string(),
                                place: format!("state `{state}` value `{value}`"),
                                name: ident.to_string(),
                            });
                        }
                    }
                    above.push(value);
                }
            }
        }
        for (state, expr) in &self.inflow {
            check("*", format!("inflow into `{state}`"), expr)?;
        }
        Ok(())
    }
}

/// One state of an expanded strategy: its internal name, the original
/// state it reports as, and the pinned dwell time when it is a tunnel copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedState {
    pub name: String,
    pub parent: String,
    pub dwell: Option<usize>,
}

/// A strategy after tunnel expansion, with the bookkeeping needed to
/// evaluate dwell-dependent expressions and to aggregate results back.
#[derive(Debug, Clone)]
pub struct ExpandedStrategy {
    pub strategy: StrategySpec,
    pub states: Vec<ExpandedState>,
}

impl ExpandedStrategy {
    /// Index of the expanded state that entries into `parent` land in
    /// (the first tunnel copy, or the state itself).
    pub fn entry_index(&self, parent: &str) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.parent == parent && s.dwell.is_none_or(|d| d == 1))
    }

    /// Distinct dwell values used by any state, for parameter-table reuse.
    pub fn dwells(&self) -> BTreeSet<usize> {
        self.states.iter().filter_map(|s| s.dwell).collect()
    }
}

/// States whose transition row or value expressions reach `state_time`,
/// directly or through the parameter dependency closure.
pub fn detect_state_time(strategy: &StrategySpec, parameters: &ParameterSet) -> BTreeSet<String> {
    let dependent = parameters.state_time_dependent();
    let touches = |expr: &Expr| {
        expr.idents()
            .iter()
            .any(|id| *id == "state_time" || dependent.contains(*id))
    };
    let t = strategy.transition();
    let mut flagged = BTreeSet::new();
    for (i, state) in t.states().iter().enumerate() {
        let row_touches = t.row(i).iter().any(|entry| match entry {
            TransitionEntry::Expr(expr) => touches(expr),
            TransitionEntry::Complement => false,
        });
        let value_touches = strategy.state(i).values().any(|(_, expr)| touches(expr));
        if row_touches || value_touches {
            flagged.insert(state.clone());
        }
    }
    flagged
}

/// Expands each flagged state A into tunnel copies A_1..A_L with
/// L = min(T, limit). Dwell advances along the copies carrying the original
/// self-transition; every other entry of A's row leaves from each copy
/// unchanged; entries into A land in the first copy. Absorbing states are
/// never expanded — dwell time cannot matter there — and only cost a
/// warning.
pub fn expand_tunnels(
    strategy: &StrategySpec,
    flagged: &BTreeSet<String>,
    cycles: usize,
    limits: &TunnelLimits,
) -> Result<ExpandedStrategy, ModelError> {
    let t = strategy.transition();
    let mut expand: Vec<Option<usize>> = Vec::with_capacity(t.n()); // tunnel length per state
    for (i, state) in t.states().iter().enumerate() {
        if !flagged.contains(state) {
            expand.push(None);
            continue;
        }
        if t.is_absorbing(i) {
            log::warn!(
                "strategy `{}`: state `{state}` uses state_time but is absorbing; not expanding",
                strategy.name()
            );
            expand.push(None);
            continue;
        }
        let limit = limits.for_state(state);
        if let Some(l) = limit {
            if l < 1 {
                return Err(ModelError::BadLimit { state: state.clone(), limit: l });
            }
        }
        expand.push(Some(limit.map_or(cycles, |l| l.min(cycles)).max(1)));
    }

    if expand.iter().all(Option::is_none) {
        let states = t
            .states()
            .iter()
            .map(|s| ExpandedState { name: s.clone(), parent: s.clone(), dwell: None })
            .collect();
        return Ok(ExpandedStrategy { strategy: strategy.clone(), states });
    }

    // Internal names use `#`, which cannot appear in user state names.
    let mut states: Vec<ExpandedState> = Vec::new();
    let mut entry_of: HashMap<&str, usize> = HashMap::new(); // original -> landing index
    for (i, state) in t.states().iter().enumerate() {
        entry_of.insert(state.as_str(), states.len());
        match expand[i] {
            None => states.push(ExpandedState { name: state.clone(), parent: state.clone(), dwell: None }),
            Some(len) => {
                for s in 1..=len {
                    states.push(ExpandedState {
                        name: format!("{state}#{s}"),
                        parent: state.clone(),
                        dwell: Some(s),
                    });
                }
            }
        }
    }

    let m = states.len();
    let mut entries = vec![TransitionEntry::zero(); m * m];
    let mut values: Vec<(String, StateSpec)> = Vec::with_capacity(m);
    let mut row_index = 0;
    for (i, state) in t.states().iter().enumerate() {
        let copies = expand[i].unwrap_or(1);
        for s in 1..=copies {
            let row = &mut entries[row_index * m..(row_index + 1) * m];
            for (j, target) in t.states().iter().enumerate() {
                let original = t.entry(i, j).clone();
                let col = if i == j && expand[i].is_some() {
                    // Self-transition advances the dwell clock, capped at
                    // the last copy.
                    let next = (s + 1).min(copies);
                    entry_of[state.as_str()] + next - 1
                } else {
                    entry_of[target.as_str()]
                };
                row[col] = original;
            }
            values.push((states[row_index].name.clone(), strategy.state(i).clone()));
            row_index += 1;
        }
    }

    let transition = TransitionSpec::new(states.iter().map(|s| s.name.clone()).collect(), entries)?;
    let expanded = StrategySpec::new(strategy.name(), transition, values)?;
    Ok(ExpandedStrategy { strategy: expanded, states })
}

/// Evaluated transition probabilities, cycle-major: `at(k, i, j)` is the
/// probability of moving from state i to state j during cycle k+1.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionArray {
    cycles: usize,
    n: usize,
    data: Vec<f64>,
}

impl TransitionArray {
    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, cycle: usize, from: usize, to: usize) -> f64 {
        self.data[(cycle * self.n + from) * self.n + to]
    }

    pub fn row(&self, cycle: usize, from: usize) -> &[f64] {
        let start = (cycle * self.n + from) * self.n;
        &self.data[start..start + self.n]
    }

    #[cfg(test)]
    pub fn from_raw(cycles: usize, n: usize, data: Vec<f64>) -> TransitionArray {
        assert_eq!(data.len(), cycles * n * n);
        TransitionArray { cycles, n, data }
    }
}

/// Evaluates a transition matrix into per-cycle probabilities. `contexts`
/// supplies one evaluation context per row, so tunnel rows can bind their
/// own dwell time.
pub fn eval_transition(
    tspec: &TransitionSpec,
    contexts: &[EvalContext],
) -> Result<TransitionArray, ModelError> {
    let n = tspec.n();
    assert_eq!(contexts.len(), n, "one context per transition row");
    let cycles = contexts.first().map_or(0, |c| c.cycles);
    let mut data = vec![0.0; cycles * n * n];
    for i in 0..n {
        let state = &tspec.states()[i];
        let mut complement_col = None;
        let mut columns: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
        for j in 0..n {
            match tspec.entry(i, j) {
                TransitionEntry::Complement => {
                    complement_col = Some(j);
                    columns.push(None);
                }
                TransitionEntry::Expr(expr) => {
                    let col = eval_expression(expr, &contexts[i])
                        .map_err(|source| ModelError::Eval { state: state.clone(), source })?;
                    for (k, &v) in col.iter().enumerate() {
                        if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                            return Err(ModelError::EntryOutOfRange {
                                from: state.clone(),
                                to: tspec.states()[j].clone(),
                                cycle: k + 1,
                                value: v,
                            });
                        }
                    }
                    columns.push(Some(col));
                }
            }
        }
        for k in 0..cycles {
            let mut sum = 0.0;
            for j in 0..n {
                if let Some(col) = &columns[j] {
                    let v = col[k].clamp(0.0, 1.0);
                    data[(k * n + i) * n + j] = v;
                    sum += v;
                }
            }
            match complement_col {
                Some(j) => {
                    if sum > 1.0 + 1e-9 {
                        return Err(ModelError::RowSumExceedsOne {
                            state: state.clone(),
                            cycle: k + 1,
                            sum,
                        });
                    }
                    data[(k * n + i) * n + j] = (1.0 - sum).clamp(0.0, 1.0);
                }
                None => {
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(ModelError::RowSumNotOne {
                            state: state.clone(),
                            cycle: k + 1,
                            sum,
                        });
                    }
                }
            }
        }
    }
    Ok(TransitionArray { cycles, n, data })
}

/// DOT rendering of a strategy's transition structure; zero entries are
/// omitted, other edges are labeled with their expression text.
pub fn to_dot(strategy: &StrategySpec) -> String {
    let t = strategy.transition();
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(strategy.name()));
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=ellipse];");
    for state in t.states() {
        let _ = writeln!(out, "  \"{}\";", escape(state));
    }
    for i in 0..t.n() {
        for j in 0..t.n() {
            let label = match t.entry(i, j) {
                TransitionEntry::Complement => "C".to_string(),
                TransitionEntry::Expr(expr) if expr.is_literal(0.0) => continue,
                TransitionEntry::Expr(expr) => expr.to_string(),
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(&t.states()[i]),
                escape(&t.states()[j]),
                escape(&label)
            );
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
