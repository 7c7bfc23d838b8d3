//! Deterministic decision outputs: incremental ratios, the efficiency
//! frontier with dominance pruning, and net monetary benefit.

use thiserror::Error;

use crate::engine::RunResult;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("ICER between `{a}` and `{b}` is undefined: equal effects")]
    UndefinedIcer { a: String, b: String },
    #[error("no strategies to analyze")]
    Empty,
}

/// Total expected cost and effect of one strategy, plus every other value
/// total it accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTotals {
    pub strategy: String,
    pub cost: f64,
    pub effect: f64,
    pub others: Vec<(String, f64)>,
}

impl StrategyTotals {
    pub fn new(strategy: impl Into<String>, cost: f64, effect: f64) -> StrategyTotals {
        StrategyTotals { strategy: strategy.into(), cost, effect, others: Vec::new() }
    }
}

/// Extracts per-strategy totals from a run, in model order.
pub fn strategy_totals(result: &RunResult) -> Vec<StrategyTotals> {
    result
        .strategies
        .iter()
        .map(|s| {
            let cost = s.total(&result.cost).expect("validated value name");
            let effect = s.total(&result.effect).expect("validated value name");
            let others = s
                .totals
                .iter()
                .filter(|(name, _)| *name != result.cost && *name != result.effect)
                .cloned()
                .collect();
            StrategyTotals { strategy: s.strategy.clone(), cost, effect, others }
        })
        .collect()
}

/// Cost of an incremental unit of effect moving from `a` to `b`.
pub fn icer(a: &StrategyTotals, b: &StrategyTotals) -> Result<f64, AnalysisError> {
    let de = b.effect - a.effect;
    if de == 0.0 {
        return Err(AnalysisError::UndefinedIcer {
            a: a.strategy.clone(),
            b: b.strategy.clone(),
        });
    }
    Ok((b.cost - a.cost) / de)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominanceKind {
    Strict,
    Extended,
}

/// A strategy excluded from the frontier, and what pushed it off.
#[derive(Debug, Clone, PartialEq)]
pub struct Dominated {
    pub strategy: String,
    pub kind: DominanceKind,
    /// The dominating strategy, or the pair bracketing an extended
    /// dominance.
    pub by: String,
}

/// One frontier member; deltas and ICER are versus the previous member.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierStep {
    pub strategy: String,
    pub cost: f64,
    pub effect: f64,
    pub delta_cost: Option<f64>,
    pub delta_effect: Option<f64>,
    pub icer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierResult {
    pub frontier: Vec<FrontierStep>,
    pub dominated: Vec<Dominated>,
}

impl FrontierResult {
    pub fn order(&self) -> Vec<&str> {
        self.frontier.iter().map(|s| s.strategy.as_str()).collect()
    }
}

/// Sorts by effect, drops dominated strategies, and reports incremental
/// ratios along the survivors.
///
/// A strategy is strictly dominated when another costs no more and yields
/// no less effect (exact duplicates keep the earlier one). Extended
/// dominance then iteratively removes interior strategies until the
/// frontier's incremental ratios strictly increase.
pub fn efficiency_frontier(totals: &[StrategyTotals]) -> Result<FrontierResult, AnalysisError> {
    if totals.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| {
        totals[a]
            .effect
            .total_cmp(&totals[b].effect)
            .then(totals[a].cost.total_cmp(&totals[b].cost))
            .then(a.cmp(&b))
    });

    let mut dominated = Vec::new();
    let beats = |winner: &StrategyTotals, pos_w: usize, loser: &StrategyTotals, pos_l: usize| {
        if winner.cost < loser.cost && winner.effect >= loser.effect {
            return true;
        }
        if winner.cost <= loser.cost && winner.effect > loser.effect {
            return true;
        }
        // Exact duplicate: the one sorted earlier wins.
        winner.cost == loser.cost && winner.effect == loser.effect && pos_w < pos_l
    };
    let mut survivors: Vec<usize> = Vec::new();
    for (pos_l, &i) in order.iter().enumerate() {
        let winner = order
            .iter()
            .enumerate()
            .find(|&(pos_w, &j)| j != i && beats(&totals[j], pos_w, &totals[i], pos_l));
        match winner {
            Some((_, &j)) => dominated.push(Dominated {
                strategy: totals[i].strategy.clone(),
                kind: DominanceKind::Strict,
                by: totals[j].strategy.clone(),
            }),
            None => survivors.push(i),
        }
    }

    // Along `survivors`, effect and cost now both strictly increase, so
    // consecutive ICERs are well defined; prune until they strictly
    // increase too.
    loop {
        let mut removed = None;
        for w in 0..survivors.len().saturating_sub(2) {
            let (a, b, c) = (survivors[w], survivors[w + 1], survivors[w + 2]);
            let left = icer(&totals[a], &totals[b])?;
            let right = icer(&totals[b], &totals[c])?;
            if left >= right {
                dominated.push(Dominated {
                    strategy: totals[b].strategy.clone(),
                    kind: DominanceKind::Extended,
                    by: format!("{} + {}", totals[a].strategy, totals[c].strategy),
                });
                removed = Some(w + 1);
                break;
            }
        }
        match removed {
            Some(w) => {
                survivors.remove(w);
            }
            None => break,
        }
    }

    let mut frontier = Vec::with_capacity(survivors.len());
    for (w, &i) in survivors.iter().enumerate() {
        let t = &totals[i];
        let mut step = FrontierStep {
            strategy: t.strategy.clone(),
            cost: t.cost,
            effect: t.effect,
            delta_cost: None,
            delta_effect: None,
            icer: None,
        };
        if w > 0 {
            let prev = &totals[survivors[w - 1]];
            step.delta_cost = Some(t.cost - prev.cost);
            step.delta_effect = Some(t.effect - prev.effect);
            step.icer = Some(icer(prev, t)?);
        }
        frontier.push(step);
    }
    Ok(FrontierResult { frontier, dominated })
}

/// Net monetary benefit of every strategy at every threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct NmbResult {
    pub thresholds: Vec<f64>,
    /// Strategy names in model order.
    pub strategies: Vec<String>,
    /// values[t][s] = threshold_t * effect_s - cost_s.
    pub values: Vec<Vec<f64>>,
    /// Index of the best strategy per threshold (ties keep model order).
    pub best: Vec<usize>,
    /// difference[t][s] = best NMB - strategy NMB (0 for the best).
    pub difference: Vec<Vec<f64>>,
}

pub fn nmb(totals: &[StrategyTotals], thresholds: &[f64]) -> Result<NmbResult, AnalysisError> {
    if totals.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let strategies = totals.iter().map(|t| t.strategy.clone()).collect();
    let mut values = Vec::with_capacity(thresholds.len());
    let mut best = Vec::with_capacity(thresholds.len());
    let mut difference = Vec::with_capacity(thresholds.len());
    for &lambda in thresholds {
        let row: Vec<f64> = totals.iter().map(|t| lambda * t.effect - t.cost).collect();
        let top = row
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.total_cmp(b).then(j.cmp(i)))
            .map(|(i, _)| i)
            .expect("nonempty");
        difference.push(row.iter().map(|v| row[top] - v).collect());
        values.push(row);
        best.push(top);
    }
    Ok(NmbResult { thresholds: thresholds.to_vec(), strategies, values, best, difference })
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, row: &[String]| {
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            out.extend(std::iter::repeat_n(' ', w - cell.len()));
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&mut out, header);
    for row in rows {
        emit(&mut out, row);
    }
    out
}

/// Renders totals, NMB differences, the frontier order, and incremental
/// ratios as a plain-text block.
pub fn summary(
    totals: &[StrategyTotals],
    frontier: &FrontierResult,
    nmb: &NmbResult,
) -> String {
    let mut out = String::new();

    out.push_str("Values\n");
    let mut header = vec!["strategy".to_string(), "cost".to_string(), "effect".to_string()];
    if let Some(first) = totals.first() {
        header.extend(first.others.iter().map(|(n, _)| n.clone()));
    }
    let rows: Vec<Vec<String>> = totals
        .iter()
        .map(|t| {
            let mut row = vec![t.strategy.clone(), fmt(t.cost), fmt(t.effect)];
            row.extend(t.others.iter().map(|(_, v)| fmt(*v)));
            row
        })
        .collect();
    out.push_str(&table(&header, &rows));

    if !nmb.thresholds.is_empty() {
        out.push_str("\nNet monetary benefit difference\n");
        let mut header = vec!["strategy".to_string()];
        header.extend(nmb.thresholds.iter().map(|l| fmt(*l)));
        let rows: Vec<Vec<String>> = nmb
            .strategies
            .iter()
            .enumerate()
            .map(|(s, name)| {
                let mut row = vec![name.clone()];
                row.extend((0..nmb.thresholds.len()).map(|t| fmt(nmb.difference[t][s])));
                row
            })
            .collect();
        out.push_str(&table(&header, &rows));
    }

    out.push_str("\nEfficiency frontier\n");
    out.push_str(&frontier.order().join(" -> "));
    out.push('\n');
    for d in &frontier.dominated {
        let kind = match d.kind {
            DominanceKind::Strict => "dominated by",
            DominanceKind::Extended => "extendedly dominated by",
        };
        out.push_str(&format!("{} {kind} {}\n", d.strategy, d.by));
    }

    if frontier.frontier.len() > 1 {
        out.push_str("\nDifferences\n");
        let header: Vec<String> = ["strategy", "cost diff", "effect diff", "icer"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = frontier.frontier[1..]
            .iter()
            .map(|s| {
                vec![
                    s.strategy.clone(),
                    fmt(s.delta_cost.unwrap()),
                    fmt(s.delta_effect.unwrap()),
                    fmt(s.icer.unwrap()),
                ]
            })
            .collect();
        out.push_str(&table(&header, &rows));
    }
    out
}
