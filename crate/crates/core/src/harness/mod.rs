//! Monte-Carlo orchestration: configuration files, figure presets, seeded
//! parallel trials, aggregation and CSV/SVG output.

pub mod config_file;
pub mod output;
pub mod scenario;
pub mod trial;

pub use config_file::ConfigFile;
pub use output::{LeakageRow, LeakageTable, ResultRow, ResultTable};
pub use scenario::{preset, Axis, Scenario, Strategy, PRESETS};
pub use trial::{trial_rng, TrialContext, TrialOutcome, TrialRecord};

use crate::analysis::rate_lower_bound;
use crate::error::Result;

/// How trials are spread over threads. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    /// Rayon work stealing; sequential when built without `parallel`.
    Parallel,
}

impl Default for Executor {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Executor::Parallel
        } else {
            Executor::Sequential
        }
    }
}

impl Executor {
    /// `f(0), …, f(n-1)` in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            Executor::Parallel => (0..n).map(f).collect(),
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn mean(values: &[f64]) -> f64 {
    mean_se(values).0
}

/// Aggregated outcome of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub table: ResultTable,
    /// Per-symbol leakage of the first predictive strategy (time-index axis only).
    pub leakage: Option<LeakageTable>,
    pub attempted: usize,
    pub rejected: usize,
    /// (axis value, strategy, reason) for strategies that could not run.
    pub skipped: Vec<(f64, Strategy, String)>,
}

impl ScenarioReport {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempted as f64
        }
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport> {
    run_scenario_with(scenario, Executor::default())
}

pub fn run_scenario_with(scenario: &Scenario, executor: Executor) -> Result<ScenarioReport> {
    scenario.validate()?;
    let mut report = ScenarioReport {
        table: ResultTable::default(),
        leakage: None,
        attempted: 0,
        rejected: 0,
        skipped: Vec::new(),
    };
    let points = match scenario.axis {
        Axis::TimeIndex => vec![None],
        _ => scenario.grid.iter().map(|&v| Some(v)).collect(),
    };
    for point in points {
        let cfg = match point {
            Some(v) => scenario.axis.apply(&scenario.base, v)?,
            None => scenario.base.clone(),
        };
        let ctx = TrialContext::new(&cfg, &scenario.strategies)?;
        for (s, why) in &ctx.skipped {
            report.skipped.push((point.unwrap_or(f64::NAN), *s, why.clone()));
        }
        let outcomes = executor.map(cfg.trials, |t| ctx.run_trial(t));
        let mut records = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            report.attempted += 1;
            match o? {
                TrialOutcome::Done(r) => records.push(r),
                TrialOutcome::Rejected(_) => report.rejected += 1,
            }
        }
        if records.is_empty() {
            log::warn!("{}: every trial rejected at {point:?}", scenario.name);
            continue;
        }
        match point {
            Some(v) => aggregate_point(&scenario.name, v, &ctx, &records, &mut report.table),
            None => {
                aggregate_time(&scenario.name, &ctx, &records, &mut report.table);
                report.leakage = aggregate_leakage(&scenario.name, &ctx, &records);
            }
        }
    }
    Ok(report)
}

fn aggregate_point(name: &str, axis: f64, ctx: &TrialContext, records: &[TrialRecord], table: &mut ResultTable) {
    let perfect = mean(&records.iter().map(|r| r.perfect.mean_rate()).collect::<Vec<_>>());
    for (si, &s) in ctx.strategies.iter().enumerate() {
        let per = |f: &dyn Fn(&trial::Series) -> f64| records.iter().map(|r| f(&r.records[si].series)).collect::<Vec<_>>();
        let (rate_mean, rate_se) = mean_se(&per(&|s| s.mean_rate()));
        let dimension = ctx.dimension_of(s);
        let dr_ub = dimension.and_then(|d| ctx.bound_model(d)).map(|m| m.rate_loss_upper_bound(ctx.cfg.bits));
        table.rows.push(ResultRow {
            scenario: name.to_string(),
            axis,
            strategy: s,
            rate_mean,
            rate_se,
            i1_mean: mean(&per(&|s| mean(&s.i1))),
            i2_mean: mean(&per(&|s| mean(&s.i2))),
            dr_ub,
            r_lb: dr_ub.map(|l| rate_lower_bound(perfect, l)),
            d_chosen: dimension,
            trials: records.len(),
        });
    }
}

fn aggregate_time(name: &str, ctx: &TrialContext, records: &[TrialRecord], table: &mut ResultTable) {
    for (si, &s) in ctx.strategies.iter().enumerate() {
        for (idx, m) in ctx.cfg.payload().enumerate() {
            let per = |f: &dyn Fn(&trial::Series) -> f64| records.iter().map(|r| f(&r.records[si].series)).collect::<Vec<_>>();
            let (rate_mean, rate_se) = mean_se(&per(&|s| s.rate[idx]));
            table.rows.push(ResultRow {
                scenario: name.to_string(),
                axis: m as f64,
                strategy: s,
                rate_mean,
                rate_se,
                i1_mean: mean(&per(&|s| s.i1[idx])),
                i2_mean: mean(&per(&|s| s.i2[idx])),
                dr_ub: None,
                r_lb: None,
                d_chosen: ctx.dimension_of(s),
                trials: records.len(),
            });
        }
    }
}

fn aggregate_leakage(name: &str, ctx: &TrialContext, records: &[TrialRecord]) -> Option<LeakageTable> {
    let si = ctx.strategies.iter().position(|s| s.is_predictive())?;
    let mut table = LeakageTable { scenario: name.to_string(), rows: Vec::new() };
    for (idx, m) in ctx.cfg.payload().enumerate() {
        let avg = |f: &dyn Fn(&trial::LeakageSeries) -> &Vec<f64>| {
            mean(&records.iter().map(|r| f(r.records[si].leakage.as_ref().expect("predictive leakage"))[idx]).collect::<Vec<_>>())
        };
        table.rows.push(LeakageRow {
            time_index: m,
            mc_prediction: avg(&|l| &l.mc_prediction),
            bound_prediction: avg(&|l| &l.bound_prediction),
            mc_quantization: avg(&|l| &l.mc_quantization),
            bound_quantization: avg(&|l| &l.bound_quantization),
            mc_unreduced: avg(&|l| &l.mc_unreduced),
            bound_unreduced: avg(&|l| &l.bound_unreduced),
            q_energy: avg(&|l| &l.q_energy),
        });
    }
    Some(table)
}
