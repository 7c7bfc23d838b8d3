//! Probabilistic sensitivity analysis. Parameter uncertainty is sampled
//! through a Gaussian copula: correlated standard normals are pushed
//! through Φ to uniforms and inverted through each marginal's quantile
//! function, so any marginal mix honors the requested rank dependence.
//!
//! Reproducibility contract: draw i uses an RNG stream derived from
//! (seed, i), so results are bit-identical for a given seed no matter how
//! many worker threads execute the draws.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Gamma, Normal, Poisson};

use crate::analysis::{efficiency_frontier, strategy_totals, FrontierResult, StrategyTotals};
use crate::engine::run_model;
use crate::expr::Expr;
use crate::lifetable::LifeTable;
use crate::model::ModelSpec;
use crate::params::ParameterDefinition;

use super::UncertaintyError;

/// A marginal sampling distribution. Lognormal and gamma take natural-scale
/// moments; binomial models an estimated proportion and draws k/size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    LogNormal { mean: f64, sd: f64 },
    Gamma { mean: f64, sd: f64 },
    Binomial { prob: f64, size: u64 },
    Poisson { mean: f64 },
}

impl Marginal {
    fn validate(&self, parameter: &str) -> Result<(), UncertaintyError> {
        let fail = |message: String| {
            Err(UncertaintyError::BadMarginal { parameter: parameter.to_string(), message })
        };
        match *self {
            Marginal::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0) || !sd.is_finite() {
                    return fail(format!("normal({mean}, {sd}) needs finite mean and sd > 0"));
                }
            }
            Marginal::LogNormal { mean, sd } | Marginal::Gamma { mean, sd } => {
                if !(mean > 0.0) || !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
                    return fail(format!("({mean}, {sd}): natural-scale moments must be > 0"));
                }
            }
            Marginal::Binomial { prob, size } => {
                if !(0.0..=1.0).contains(&prob) || size < 1 {
                    return fail(format!("binomial({prob}, {size}) needs prob in [0,1], size >= 1"));
                }
            }
            Marginal::Poisson { mean } => {
                if !(mean > 0.0) || !mean.is_finite() {
                    return fail(format!("poisson({mean}) needs mean > 0"));
                }
            }
        }
        Ok(())
    }

    /// Inverts the marginal at probability `u` in (0,1). Discrete marginals
    /// use the smallest k with CDF(k) ≥ u.
    pub fn quantile(&self, u: f64) -> f64 {
        // Φ of an extreme normal draw can round to 0 or 1; keep u strictly
        // inside the open interval so every quantile stays finite.
        let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        match *self {
            Marginal::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated").inverse_cdf(u)
            }
            Marginal::LogNormal { mean, sd } => {
                let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
                let mu = mean.ln() - sigma2 / 2.0;
                (mu + sigma2.sqrt() * Normal::new(0.0, 1.0).unwrap().inverse_cdf(u)).exp()
            }
            Marginal::Gamma { mean, sd } => {
                let shape = (mean / sd).powi(2);
                let rate = mean / (sd * sd);
                Gamma::new(shape, rate).expect("validated").inverse_cdf(u)
            }
            Marginal::Binomial { prob, size } => {
                if prob == 0.0 {
                    return 0.0;
                }
                if prob == 1.0 {
                    return 1.0;
                }
                let d = Binomial::new(prob, size).expect("validated");
                smallest_k(|k| d.cdf(k), u, size) as f64 / size as f64
            }
            Marginal::Poisson { mean } => {
                let d = Poisson::new(mean).expect("validated");
                let mut hi = (mean + 10.0 * mean.sqrt() + 20.0).ceil() as u64;
                while d.cdf(hi) < u {
                    hi *= 2;
                }
                smallest_k(|k| d.cdf(k), u, hi) as f64
            }
        }
    }
}

/// Smallest k in [0, hi] with cdf(k) ≥ u; requires cdf(hi) ≥ u.
fn smallest_k(cdf: impl Fn(u64) -> f64, u: f64, hi: u64) -> u64 {
    let (mut lo, mut hi) = (0u64, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Marginals per parameter plus pairwise rank-dependence targets; pairs not
/// listed are uncorrelated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PsaSpec {
    pub parameters: Vec<(String, Marginal)>,
    pub correlations: Vec<(String, String, f64)>,
}

impl PsaSpec {
    pub fn names(&self) -> Vec<&str> {
        self.parameters.iter().map(|(n, _)| n.as_str()).collect()
    }

    fn correlation_matrix(&self) -> Result<Vec<f64>, UncertaintyError> {
        let m = self.parameters.len();
        let index = |name: &str| {
            self.parameters
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| UncertaintyError::BadCorrelation(format!("unknown parameter `{name}`")))
        };
        let mut matrix = vec![0.0; m * m];
        for i in 0..m {
            matrix[i * m + i] = 1.0;
        }
        for (a, b, rho) in &self.correlations {
            let (i, j) = (index(a)?, index(b)?);
            if i == j {
                return Err(UncertaintyError::BadCorrelation(format!(
                    "`{a}` correlated with itself"
                )));
            }
            if !(-1.0..=1.0).contains(rho) {
                return Err(UncertaintyError::BadCorrelation(format!(
                    "correlation({a}, {b}) = {rho} outside [-1, 1]"
                )));
            }
            if matrix[i * m + j] != 0.0 {
                return Err(UncertaintyError::BadCorrelation(format!(
                    "duplicate pair ({a}, {b})"
                )));
            }
            matrix[i * m + j] = *rho;
            matrix[j * m + i] = *rho;
        }
        Ok(matrix)
    }

    fn validate(&self) -> Result<Vec<f64>, UncertaintyError> {
        for (name, marginal) in &self.parameters {
            marginal.validate(name)?;
        }
        for (i, (name, _)) in self.parameters.iter().enumerate() {
            if self.parameters[..i].iter().any(|(n, _)| n == name) {
                return Err(UncertaintyError::BadCorrelation(format!(
                    "parameter `{name}` listed twice"
                )));
            }
        }
        let matrix = self.correlation_matrix()?;
        cholesky(&matrix, self.parameters.len()).ok_or(UncertaintyError::NotPositiveDefinite)
    }
}

/// Lower-triangular L with M = L·Lᵀ; None when M is not positive definite.
fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 1e-12 {
            return None;
        }
        let root = d.sqrt();
        l[j * n + j] = root;
        for i in j + 1..n {
            let mut v = m[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / root;
        }
    }
    Some(l)
}

/// Sampled parameter values, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Draws correlated parameter vectors. Deterministic in (spec, n, seed) and
/// independent of rayon's worker count.
pub fn sample_psa(psa: &PsaSpec, n: usize, seed: u64) -> Result<DrawTable, UncertaintyError> {
    if n == 0 {
        return Err(UncertaintyError::ZeroDraws);
    }
    let l = psa.validate()?;
    let m = psa.parameters.len();
    let phi = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(draw as u64 + 1);
            let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            (0..m)
                .map(|i| {
                    let x: f64 = (0..=i).map(|k| l[i * m + k] * z[k]).sum();
                    psa.parameters[i].1.quantile(phi.cdf(x))
                })
                .collect()
        })
        .collect();
    Ok(DrawTable { names: psa.parameters.iter().map(|(n, _)| n.clone()).collect(), rows })
}

/// One draw's parameter values and per-strategy totals.
#[derive(Debug, Clone, PartialEq)]
pub struct PsaDraw {
    pub values: Vec<f64>,
    pub cost: Vec<f64>,
    pub effect: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsaResult {
    pub parameters: Vec<String>,
    /// Strategy names in model order.
    pub strategies: Vec<String>,
    pub draws: Vec<PsaDraw>,
    pub seed: u64,
}

/// Runs the full model once per draw per strategy. Any draw that produces
/// an invalid model aborts the analysis, reporting the draw index.
pub fn run_psa(
    spec: &ModelSpec,
    psa: &PsaSpec,
    n: usize,
    seed: u64,
    lifetable: Option<&LifeTable>,
) -> Result<PsaResult, UncertaintyError> {
    for (name, _) in &psa.parameters {
        if !spec.parameters.contains(name) {
            return Err(UncertaintyError::UnknownParameter(name.clone()));
        }
    }
    let table = sample_psa(psa, n, seed)?;
    let outcomes: Vec<Result<PsaDraw, String>> = table
        .rows
        .par_iter()
        .map(|values| {
            let patch = table
                .names
                .iter()
                .zip(values)
                .map(|(name, &v)| (name.clone(), ParameterDefinition::from(Expr::number(v))))
                .collect();
            let run = spec
                .parameters
                .modify(patch)
                .map_err(|e| e.to_string())
                .and_then(|parameters| {
                    let mut varied = spec.clone();
                    varied.parameters = parameters;
                    run_model(&varied, lifetable).map_err(|e| e.to_string())
                })?;
            let totals = strategy_totals(&run);
            Ok(PsaDraw {
                values: values.clone(),
                cost: totals.iter().map(|t| t.cost).collect(),
                effect: totals.iter().map(|t| t.effect).collect(),
            })
        })
        .collect();
    let mut draws = Vec::with_capacity(n);
    for (index, outcome) in outcomes.into_iter().enumerate() {
        draws.push(outcome.map_err(|message| UncertaintyError::Draw { index, message })?);
    }
    let strategies = spec.strategies.iter().map(|s| s.name().to_string()).collect();
    Ok(PsaResult { parameters: table.names, strategies, draws, seed })
}

#[derive(Debug, Clone)]
pub struct PsaSummary {
    /// Per-strategy mean cost and effect over draws.
    pub means: Vec<StrategyTotals>,
    /// Frontier computed on the means.
    pub frontier: FrontierResult,
}

pub fn psa_summary(result: &PsaResult) -> Result<PsaSummary, UncertaintyError> {
    let n = result.draws.len() as f64;
    let means: Vec<StrategyTotals> = result
        .strategies
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let cost = result.draws.iter().map(|d| d.cost[s]).sum::<f64>() / n;
            let effect = result.draws.iter().map(|d| d.effect[s]).sum::<f64>() / n;
            StrategyTotals::new(name.clone(), cost, effect)
        })
        .collect();
    let frontier = efficiency_frontier(&means)?;
    Ok(PsaSummary { means, frontier })
}

/// Index of the NMB argmax; ties keep the earliest (model-order) strategy.
fn best_at(draw: &PsaDraw, lambda: f64) -> usize {
    let mut best = 0;
    let mut best_nmb = f64::NEG_INFINITY;
    for (s, (&c, &e)) in draw.cost.iter().zip(&draw.effect).enumerate() {
        let nmb = lambda * e - c;
        if nmb > best_nmb {
            best = s;
            best_nmb = nmb;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeacResult {
    pub lambdas: Vec<f64>,
    pub strategies: Vec<String>,
    /// probabilities[t][s] = fraction of draws where strategy s wins at λ_t.
    pub probabilities: Vec<Vec<f64>>,
}

/// Cost-effectiveness acceptability: per threshold, the share of draws in
/// which each strategy has the highest net monetary benefit.
pub fn ceac(result: &PsaResult, lambdas: &[f64]) -> CeacResult {
    let n = result.draws.len() as f64;
    let probabilities = lambdas
        .iter()
        .map(|&lambda| {
            let mut wins = vec![0usize; result.strategies.len()];
            for draw in &result.draws {
                wins[best_at(draw, lambda)] += 1;
            }
            wins.into_iter().map(|w| w as f64 / n).collect()
        })
        .collect();
    CeacResult { lambdas: lambdas.to_vec(), strategies: result.strategies.clone(), probabilities }
}

/// Expected value of perfect information per threshold:
/// E[max_s NMB] − max_s E[NMB].
pub fn evpi(result: &PsaResult, lambdas: &[f64]) -> Vec<(f64, f64)> {
    let n = result.draws.len() as f64;
    lambdas
        .iter()
        .map(|&lambda| {
            let mut sum_max = 0.0;
            let mut sums = vec![0.0; result.strategies.len()];
            for draw in &result.draws {
                let mut draw_max = f64::NEG_INFINITY;
                for (s, (&c, &e)) in draw.cost.iter().zip(&draw.effect).enumerate() {
                    let nmb = lambda * e - c;
                    sums[s] += nmb;
                    draw_max = draw_max.max(nmb);
                }
                sum_max += draw_max;
            }
            let best_mean = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / n;
            (lambda, sum_max / n - best_mean)
        })
        .collect()
}

/// Writes one row per draw: parameter columns in spec order, then
/// cost_<strategy> and effect_<strategy> columns in model order.
pub fn export_psa<W: Write>(result: &PsaResult, out: W) -> Result<(), UncertaintyError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = result.parameters.clone();
    header.extend(result.strategies.iter().map(|s| format!("cost_{s}")));
    header.extend(result.strategies.iter().map(|s| format!("effect_{s}")));
    w.write_record(&header)?;
    for draw in &result.draws {
        let mut row: Vec<String> = draw.values.iter().map(|v| v.to_string()).collect();
        row.extend(draw.cost.iter().map(|v| v.to_string()));
        row.extend(draw.effect.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `export_psa` CSV back. The strategy columns anchor at the right
/// end — a trailing block of effect_* headers preceded by the matching
/// cost_* block — because parameters may themselves be named cost_something
/// and must not be mistaken for outcome columns.
pub fn import_psa<R: Read>(input: R) -> Result<PsaResult, UncertaintyError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let bad = |message: &str| UncertaintyError::BadCorrelation(message.to_string());
    let fields: Vec<&str> = headers.iter().collect();
    let ns = fields
        .iter()
        .rev()
        .take_while(|f| f.starts_with("effect_"))
        .count();
    if ns == 0 || fields.len() < 2 * ns {
        return Err(bad("header does not look like a PSA export"));
    }
    let np = fields.len() - 2 * ns;
    let strategies: Vec<String> = fields[np + ns..]
        .iter()
        .map(|f| f["effect_".len()..].to_string())
        .collect();
    for (field, strategy) in fields[np..np + ns].iter().zip(&strategies) {
        if field.strip_prefix("cost_") != Some(strategy.as_str()) {
            return Err(bad("cost and effect columns disagree"));
        }
    }
    let parameters: Vec<String> = fields[..np].iter().map(|s| s.to_string()).collect();
    let mut draws = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let cell = |i: usize| -> Result<f64, UncertaintyError> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or(UncertaintyError::Draw {
                    index: row,
                    message: format!("bad numeric cell {i}"),
                })
        };
        let values = (0..np).map(&cell).collect::<Result<_, _>>()?;
        let cost = (np..np + ns).map(&cell).collect::<Result<_, _>>()?;
        let effect = (np + ns..np + 2 * ns).map(&cell).collect::<Result<_, _>>()?;
        draws.push(PsaDraw { values, cost, effect });
    }
    if draws.is_empty() {
        return Err(UncertaintyError::ZeroDraws);
    }
    Ok(PsaResult { parameters, strategies, draws, seed: 0 })
}
