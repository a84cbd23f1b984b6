//! Order-statistic summaries of benchmark runs.
//!
//! Medians of an even number of values use the lower median (rank
//! `ceil(N/2)`). Infinite values (failed runs) sort above every finite value,
//! so a median is well defined even when some runs fail; a median that lands
//! on infinity means more than half the runs failed.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{BenchError, Result};
use crate::record::RunRecord;

pub const CONFIDENCE: f64 = 0.99;

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Rank (1-based) of the lower median.
pub fn median_rank(n: usize) -> usize {
    n.div_ceil(2)
}

pub fn lower_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    Ok(sorted(values)[median_rank(values.len()) - 1])
}

/// 1-based ranks `(l, u)` of the distribution-free confidence interval for
/// the median, and its exact coverage. The interval is the narrowest
/// symmetric pair with coverage at least `confidence`; when even the sample
/// extremes fall short, the extremes are returned with their lower coverage.
pub fn median_interval_ranks(n: usize, confidence: f64) -> (usize, usize, f64) {
    assert!(n >= 1);
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    let tail = (1.0 - confidence) / 2.0;
    let mut best = None;
    for l in 1..=median_rank(n) {
        let below = binom.cdf(l as u64 - 1);
        if below <= tail {
            best = Some((l, below));
        } else {
            break;
        }
    }
    let (l, below) = best.unwrap_or((1, binom.cdf(0)));
    (l, n + 1 - l, 1.0 - 2.0 * below)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MedianInterval {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    /// Exact coverage probability of `[lower, upper]`.
    pub coverage: f64,
}

impl MedianInterval {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(BenchError::EmptyInput);
        }
        let v = sorted(values);
        let (l, u, coverage) = median_interval_ranks(v.len(), CONFIDENCE);
        Ok(MedianInterval {
            median: v[median_rank(v.len()) - 1],
            lower: v[l - 1],
            upper: v[u - 1],
            coverage,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannerSummary {
    pub planner: String,
    pub env: String,
    pub dimension: usize,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub t_init: MedianInterval,
    pub c_init: MedianInterval,
    pub c_final: MedianInterval,
}

/// One summary per `(env, dimension, planner)`, sorted by that key, so the
/// result does not depend on record order.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<PlannerSummary>> {
    if records.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let mut groups: BTreeMap<(String, usize, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.env.clone(), r.dimension, r.planner.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((env, dimension, planner), rs)| {
            let column = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let successes = rs.iter().filter(|r| r.success).count();
            Ok(PlannerSummary {
                planner,
                env,
                dimension,
                runs: rs.len(),
                successes,
                success_rate: successes as f64 / rs.len() as f64,
                t_init: MedianInterval::of(&column(|r| r.t_init))?,
                c_init: MedianInterval::of(&column(|r| r.c_init))?,
                c_final: MedianInterval::of(&column(|r| r.c_final))?,
            })
        })
        .collect()
}

/// Relative reduction of the variant's median initial cost against the
/// baseline, in percent. `None` when either median is infinite.
pub fn improvement_percent(baseline: f64, variant: f64) -> Option<f64> {
    (baseline.is_finite() && variant.is_finite() && baseline > 0.0)
        .then(|| (baseline - variant) / baseline * 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub env: String,
    pub dimension: usize,
    pub baseline: f64,
    pub variant: f64,
    pub improvement: Option<f64>,
}

/// Pairs every variant summary with the baseline summary of the same
/// problem.
pub fn compare(summaries: &[PlannerSummary], baseline: &str, variant: &str) -> Vec<Comparison> {
    let find = |planner: &str, env: &str, dim: usize| {
        summaries
            .iter()
            .find(|s| s.planner == planner && s.env == env && s.dimension == dim)
    };
    summaries
        .iter()
        .filter(|s| s.planner == variant)
        .filter_map(|v| {
            let b = find(baseline, &v.env, v.dimension)?;
            Some(Comparison {
                env: v.env.clone(),
                dimension: v.dimension,
                baseline: b.c_init.median,
                variant: v.c_init.median,
                improvement: improvement_percent(b.c_init.median, v.c_init.median),
            })
        })
        .collect()
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "inf".into()
    }
}

fn median_cell(m: &MedianInterval) -> String {
    if m.median.is_finite() {
        format!("{} [{}, {}]", cell(m.median), cell(m.lower), cell(m.upper))
    } else {
        "no median solution".into()
    }
}

/// Plain-text table of summaries followed by the improvement column.
pub fn format_table(summaries: &[PlannerSummary], comparisons: &[Comparison]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>3} {:<10} {:>5} {:>8}  {:<28} {:<28} {:<28}",
        "env",
        "dim",
        "planner",
        "runs",
        "success",
        "t_init med [99% CI]",
        "c_init med [99% CI]",
        "c_final med [99% CI]"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<8} {:>3} {:<10} {:>5} {:>7.0}%  {:<28} {:<28} {:<28}",
            s.env,
            s.dimension,
            s.planner,
            s.runs,
            100.0 * s.success_rate,
            median_cell(&s.t_init),
            median_cell(&s.c_init),
            median_cell(&s.c_final),
        );
    }
    for c in comparisons {
        let imp = c
            .improvement
            .map_or("n/a".to_string(), |p| format!("{p:.2}%"));
        let _ = writeln!(
            out,
            "c_init improvement {} dim {}: {imp}",
            c.env, c.dimension
        );
    }
    out
}
