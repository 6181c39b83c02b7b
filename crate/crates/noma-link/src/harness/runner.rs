//! Experiment dispatch: deterministic sharded Monte Carlo loops feeding
//! typed result tables.
//!
//! Trials are split into fixed-size chunks; chunk results are collected in
//! index order and folded sequentially, so floating-point accumulation is
//! identical for every worker count.

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{
    draw_mimo_channel, draw_scalar_channel, Position, StreamFactory, LINK_BS_TO_STRONG,
    LINK_BS_TO_WEAK,
};
use crate::cooperative::{
    cooperative_outcome, draw_trial, noncooperative_outcome, paired_outage_counts, CoopError,
    CoopScenario, OutageEstimate,
};
use crate::mimo::{sm_rates, MimoError, SmConfig};
use crate::must::{link_gain_experiment, MustError, SuperpositionSpec};
use crate::rates::{
    cr_power_allocation, noma_rates, oma_rates, sum_rate, LinkBudget, PowerAllocation,
};
use crate::stats::MeanAccumulator;

use super::scenario::{AllocationSpec, Experiment, Scenario};
use super::table::{Column, ResultTable, TableError, Value};

const TRIAL_CHUNK: u64 = 8192;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("failed to build worker pool: {0}")]
    Pool(String),
    #[error("{experiment} at {coordinate}: {source}")]
    At {
        experiment: &'static str,
        coordinate: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

fn at(
    experiment: Experiment,
    coordinate: impl Into<String>,
) -> impl FnOnce(Box<dyn std::error::Error + Send + Sync>) -> RunError {
    move |source| RunError::At {
        experiment: experiment.name(),
        coordinate: coordinate.into(),
        source,
    }
}

/// Run the scenario on a dedicated pool of `workers` threads.
///
/// The result is independent of `workers`: trials shard into fixed chunks
/// and partial results combine in chunk order.
pub fn run(scenario: &Scenario, workers: usize) -> Result<ResultTable, RunError> {
    if workers == 0 {
        return Err(RunError::InvalidWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let mut table = pool.install(|| dispatch(scenario))?;

    let mut metadata = vec![
        ("scenario_hash".to_string(), scenario.hash_hex()),
        ("experiment".to_string(), scenario.experiment().name().to_string()),
        ("seed".to_string(), scenario.seed().to_string()),
        ("trials".to_string(), scenario.trials().to_string()),
        (
            "artifact_version".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        ),
    ];
    for d in scenario.applied_defaults() {
        metadata.push(("default".to_string(), d.clone()));
    }
    // metadata renders ahead of existing rows regardless of push order
    for (k, v) in metadata.into_iter() {
        table.push_meta(k, v);
    }
    Ok(table)
}

fn dispatch(scenario: &Scenario) -> Result<ResultTable, RunError> {
    match scenario.experiment() {
        Experiment::Fig4OutageMap => fig4_outage_map(scenario),
        Experiment::Fig4SnrSweep => fig4_snr_sweep(scenario),
        Experiment::Fig5FixedAlloc => fig5_fixed_alloc(scenario),
        Experiment::Fig5CrAlloc => fig5_cr_alloc(scenario),
        Experiment::Fig3Scaling => fig3_scaling(scenario),
        Experiment::MustLink => must_link(scenario),
        Experiment::Custom => custom_point(scenario),
    }
}

/// Fixed-chunk parallel accumulation with in-order sequential fold.
fn accumulate<A, F>(trials: u64, per_chunk: F) -> A
where
    A: Default + Send,
    F: Fn(u64, u64) -> A + Sync,
    A: Merge,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * TRIAL_CHUNK;
            let hi = (lo + TRIAL_CHUNK).min(trials);
            per_chunk(lo, hi)
        })
        .collect();
    let mut total = A::default();
    for part in parts {
        total.merge(part);
    }
    total
}

trait Merge {
    fn merge(&mut self, other: Self);
}

fn fixed_alloc(scenario: &Scenario) -> PowerAllocation {
    match scenario.allocation() {
        Some(AllocationSpec::Fixed(a)) => a,
        _ => unreachable!("validated: experiment uses a fixed allocation"),
    }
}

fn coop_scenario(scenario: &Scenario, rho: f64, pos_strong: Position) -> CoopScenario {
    CoopScenario {
        bs: scenario.bs().expect("validated: geometry present"),
        pos_weak: scenario.user_weak().expect("validated: geometry present"),
        pos_strong,
        pathloss: scenario.pathloss().expect("validated: pathloss present"),
        rho,
        alloc: fixed_alloc(scenario),
        targets: scenario.targets().expect("validated: targets present"),
        trials: scenario.trials(),
        seed: scenario.seed(),
    }
}

fn coop_err(e: CoopError) -> Box<dyn std::error::Error + Send + Sync> {
    Box::new(e)
}

// ---------------------------------------------------------------------------
// fig4_outage_map
// ---------------------------------------------------------------------------

fn fig4_outage_map(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::float("x"),
        Column::float("y"),
        Column::float("outage_pair_coop"),
        Column::float("outage_pair_noncoop"),
        Column::float("outage_weak_coop"),
        Column::float("outage_weak_noncoop"),
        Column::float("halfwidth_pair_coop"),
        Column::float("halfwidth_pair_noncoop"),
        Column::float("halfwidth_weak_coop"),
        Column::float("halfwidth_weak_noncoop"),
    ]);
    let grid = scenario.grid().expect("validated: grid present");
    let rho = scenario.snr()[0].linear;
    for (unit, &pos) in grid.iter().enumerate() {
        let scn = coop_scenario(scenario, rho, pos);
        let counts = paired_outage_counts(&scn, unit as u32)
            .map_err(coop_err)
            .map_err(at(
                scenario.experiment(),
                format!("grid point (x={}, y={})", pos.x, pos.y),
            ))?;
        let n = counts.trials;
        let est = |c: u64| OutageEstimate::from_counts(c, n);
        let pair_coop = est(counts.pair_coop);
        let pair_noncoop = est(counts.pair_noncoop);
        let weak_coop = est(counts.weak_coop);
        let weak_noncoop = est(counts.weak_noncoop);
        table.push_row(vec![
            Value::Float(pos.x),
            Value::Float(pos.y),
            Value::Float(pair_coop.probability),
            Value::Float(pair_noncoop.probability),
            Value::Float(weak_coop.probability),
            Value::Float(weak_noncoop.probability),
            Value::Float(pair_coop.half_width),
            Value::Float(pair_noncoop.half_width),
            Value::Float(weak_coop.half_width),
            Value::Float(weak_noncoop.half_width),
        ])?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// fig4_snr_sweep
// ---------------------------------------------------------------------------

fn fig4_snr_sweep(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::float("snr_db"),
        Column::float("outage_weak_noncoop"),
        Column::float("outage_weak_coop"),
        Column::float("outage_pair_noncoop"),
        Column::float("outage_pair_coop"),
        Column::float("halfwidth_weak_noncoop"),
        Column::float("halfwidth_weak_coop"),
        Column::float("halfwidth_pair_noncoop"),
        Column::float("halfwidth_pair_coop"),
    ]);
    let pos_strong = scenario
        .user_strong()
        .expect("validated: user_strong present");
    for (unit, snr) in scenario.snr().iter().enumerate() {
        let scn = coop_scenario(scenario, snr.linear, pos_strong);
        let counts = paired_outage_counts(&scn, unit as u32)
            .map_err(coop_err)
            .map_err(at(scenario.experiment(), format!("snr_db={}", snr.db)))?;
        let n = counts.trials;
        let est = |c: u64| OutageEstimate::from_counts(c, n);
        let weak_noncoop = est(counts.weak_noncoop);
        let weak_coop = est(counts.weak_coop);
        let pair_noncoop = est(counts.pair_noncoop);
        let pair_coop = est(counts.pair_coop);
        table.push_row(vec![
            Value::Float(snr.db),
            Value::Float(weak_noncoop.probability),
            Value::Float(weak_coop.probability),
            Value::Float(pair_noncoop.probability),
            Value::Float(pair_coop.probability),
            Value::Float(weak_noncoop.half_width),
            Value::Float(weak_coop.half_width),
            Value::Float(pair_noncoop.half_width),
            Value::Float(pair_coop.half_width),
        ])?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// fig5_fixed_alloc
// ---------------------------------------------------------------------------

#[derive(Default)]
struct FixedRateAcc {
    sum_noma: MeanAccumulator,
    sum_oma: MeanAccumulator,
    weak_noma: MeanAccumulator,
    strong_noma: MeanAccumulator,
}

impl Merge for FixedRateAcc {
    fn merge(&mut self, other: Self) {
        self.sum_noma.merge(&other.sum_noma);
        self.sum_oma.merge(&other.sum_oma);
        self.weak_noma.merge(&other.weak_noma);
        self.strong_noma.merge(&other.strong_noma);
    }
}

fn fig5_fixed_alloc(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::float("x"),
        Column::float("y"),
        Column::float("sum_rate_noma"),
        Column::float("sum_rate_oma"),
        Column::float("rate_weak_noma"),
        Column::float("rate_strong_noma"),
        Column::float("halfwidth_sum_noma"),
        Column::float("halfwidth_sum_oma"),
    ]);
    let grid = scenario.grid().expect("validated: grid present");
    let rho = scenario.snr()[0].linear;
    let alloc = fixed_alloc(scenario);
    let bs = scenario.bs().expect("validated");
    let pos_weak = scenario.user_weak().expect("validated");
    let pathloss = scenario.pathloss().expect("validated");
    let factory = StreamFactory::new(scenario.seed());

    for (unit, &pos) in grid.iter().enumerate() {
        let acc = accumulate(scenario.trials(), |lo, hi| {
            let mut acc = FixedRateAcc::default();
            for trial in lo..hi {
                let mut rng_w = factory.stream(unit as u32, trial, LINK_BS_TO_WEAK);
                let mut rng_s = factory.stream(unit as u32, trial, LINK_BS_TO_STRONG);
                let h_w = draw_scalar_channel(&mut rng_w, &pathloss, pos_weak, bs);
                let h_s = draw_scalar_channel(&mut rng_s, &pathloss, pos, bs);
                let budget = LinkBudget {
                    rho,
                    h_weak_sq: h_w.gain_sq(),
                    h_strong_sq: h_s.gain_sq(),
                };
                let noma = noma_rates(&budget, &alloc);
                let oma = oma_rates(&budget);
                acc.sum_noma.push(sum_rate(&noma));
                acc.sum_oma.push(sum_rate(&oma));
                acc.weak_noma.push(noma.rate_weak);
                acc.strong_noma.push(noma.rate_strong);
            }
            acc
        });
        table.push_row(vec![
            Value::Float(pos.x),
            Value::Float(pos.y),
            Value::Float(acc.sum_noma.mean()),
            Value::Float(acc.sum_oma.mean()),
            Value::Float(acc.weak_noma.mean()),
            Value::Float(acc.strong_noma.mean()),
            Value::Float(acc.sum_noma.half_width()),
            Value::Float(acc.sum_oma.half_width()),
        ])?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// fig5_cr_alloc
// ---------------------------------------------------------------------------

#[derive(Default)]
struct CrRateAcc {
    weak_feasible: MeanAccumulator,
    strong: MeanAccumulator,
    sum: MeanAccumulator,
    outages: u64,
}

impl Merge for CrRateAcc {
    fn merge(&mut self, other: Self) {
        self.weak_feasible.merge(&other.weak_feasible);
        self.strong.merge(&other.strong);
        self.sum.merge(&other.sum);
        self.outages += other.outages;
    }
}

fn fig5_cr_alloc(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::float("x"),
        Column::float("y"),
        Column::float("rate_weak_feasible"),
        Column::float("rate_strong_mean"),
        Column::float("sum_rate_mean"),
        Column::float("primary_outage_prob"),
        Column::int("feasible_trials"),
        Column::float("halfwidth_rate_strong"),
    ]);
    let grid = scenario.grid().expect("validated: grid present");
    let rho = scenario.snr()[0].linear;
    let r_target = match scenario.allocation() {
        Some(AllocationSpec::CrTarget(r)) => r,
        _ => unreachable!("validated: fig5_cr_alloc uses cr_target"),
    };
    let bs = scenario.bs().expect("validated");
    let pos_weak = scenario.user_weak().expect("validated");
    let pathloss = scenario.pathloss().expect("validated");
    let factory = StreamFactory::new(scenario.seed());

    for (unit, &pos) in grid.iter().enumerate() {
        let acc = accumulate(scenario.trials(), |lo, hi| {
            let mut acc = CrRateAcc::default();
            for trial in lo..hi {
                let mut rng_w = factory.stream(unit as u32, trial, LINK_BS_TO_WEAK);
                let mut rng_s = factory.stream(unit as u32, trial, LINK_BS_TO_STRONG);
                let h_w = draw_scalar_channel(&mut rng_w, &pathloss, pos_weak, bs);
                let h_s = draw_scalar_channel(&mut rng_s, &pathloss, pos, bs);
                let budget = LinkBudget {
                    rho,
                    h_weak_sq: h_w.gain_sq(),
                    h_strong_sq: h_s.gain_sq(),
                };
                let alloc = cr_power_allocation(&budget, r_target);
                let rates = noma_rates(&budget, &alloc);
                if alloc.primary_outage() {
                    acc.outages += 1;
                } else {
                    acc.weak_feasible.push(rates.rate_weak);
                }
                acc.strong.push(rates.rate_strong);
                acc.sum.push(sum_rate(&rates));
            }
            acc
        });
        let n = scenario.trials() as f64;
        table.push_row(vec![
            Value::Float(pos.x),
            Value::Float(pos.y),
            Value::Float(acc.weak_feasible.mean()),
            Value::Float(acc.strong.mean()),
            Value::Float(acc.sum.mean()),
            Value::Float(acc.outages as f64 / n),
            Value::Int(acc.weak_feasible.n as i64),
            Value::Float(acc.strong.half_width()),
        ])?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// fig3_scaling
// ---------------------------------------------------------------------------

#[derive(Default)]
struct SmAcc {
    sum_noma: MeanAccumulator,
    sum_oma: MeanAccumulator,
    weak_noma: MeanAccumulator,
    strong_noma: MeanAccumulator,
    error: Option<MimoError>,
}

impl Merge for SmAcc {
    fn merge(&mut self, other: Self) {
        self.sum_noma.merge(&other.sum_noma);
        self.sum_oma.merge(&other.sum_oma);
        self.weak_noma.merge(&other.weak_noma);
        self.strong_noma.merge(&other.strong_noma);
        if self.error.is_none() {
            self.error = other.error;
        }
    }
}

fn fig3_scaling(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::int("antennas"),
        Column::float("sum_rate_noma"),
        Column::float("sum_rate_oma"),
        Column::float("rate_weak_noma"),
        Column::float("rate_strong_noma"),
        Column::float("halfwidth_sum_noma"),
        Column::float("halfwidth_sum_oma"),
    ]);
    let params = scenario.mimo().expect("validated: mimo present").clone();
    let factory = StreamFactory::new(scenario.seed());

    for (unit, &m) in params.antennas.iter().enumerate() {
        let config = SmConfig::new(
            m,
            params.power_strong.linear,
            params.power_weak.linear,
            params.weak_gain_scale,
        )
        .map_err(|e| Box::new(e) as Box<dyn std::error::Error + Send + Sync>)
        .map_err(at(scenario.experiment(), format!("antennas={m}")))?;

        let acc = accumulate(scenario.trials(), |lo, hi| {
            let mut acc = SmAcc::default();
            for trial in lo..hi {
                let mut rng_s = factory.stream(unit as u32, trial, 0);
                let mut rng_w = factory.stream(unit as u32, trial, 1);
                let drawn = draw_mimo_channel(&mut rng_s, m, 1.0)
                    .and_then(|hs| {
                        draw_mimo_channel(&mut rng_w, m, params.weak_gain_scale)
                            .map(|hw| (hs, hw))
                    });
                let (hs, hw) = match drawn {
                    Ok(pair) => pair,
                    Err(_) => unreachable!("validated antenna count and gain scale"),
                };
                match sm_rates(&config, &hs, &hw) {
                    Ok(rates) => {
                        acc.sum_noma.push(sum_rate(&rates.noma));
                        acc.sum_oma.push(sum_rate(&rates.oma));
                        acc.weak_noma.push(rates.noma.rate_weak);
                        acc.strong_noma.push(rates.noma.rate_strong);
                    }
                    Err(e) => {
                        if acc.error.is_none() {
                            acc.error = Some(e);
                        }
                    }
                }
            }
            acc
        });
        if let Some(e) = acc.error {
            return Err(at(scenario.experiment(), format!("antennas={m}"))(Box::new(e)));
        }
        table.push_row(vec![
            Value::Int(m as i64),
            Value::Float(acc.sum_noma.mean()),
            Value::Float(acc.sum_oma.mean()),
            Value::Float(acc.weak_noma.mean()),
            Value::Float(acc.strong_noma.mean()),
            Value::Float(acc.sum_noma.half_width()),
            Value::Float(acc.sum_oma.half_width()),
        ])?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// must_link
// ---------------------------------------------------------------------------

fn must_link(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::text("category"),
        Column::float("snr_db"),
        Column::float("ber_far"),
        Column::float("ber_near"),
        Column::float("goodput_far"),
        Column::float("goodput_near"),
        Column::float("oma_goodput_far"),
        Column::float("oma_goodput_near"),
    ]);
    let params = scenario.must().expect("validated: must present").clone();
    let spec = SuperpositionSpec::new(
        params.far.build(),
        params.near.build(),
        params.power_ratio,
        crate::must::Category::Cat1,
    )
    .map_err(must_err)
    .map_err(at(scenario.experiment(), "superposition spec".to_string()))?;
    let dbs: Vec<f64> = scenario.snr().iter().map(|s| s.db).collect();
    let rows = link_gain_experiment(&spec, &dbs, scenario.trials(), scenario.seed())
        .map_err(must_err)
        .map_err(at(scenario.experiment(), "link experiment".to_string()))?;
    for row in rows {
        table.push_row(vec![
            Value::Text(row.category.name().to_string()),
            Value::Float(row.snr_db),
            Value::Float(row.ber_far),
            Value::Float(row.ber_near),
            Value::Float(row.goodput_far),
            Value::Float(row.goodput_near),
            Value::Float(row.oma_goodput_far),
            Value::Float(row.oma_goodput_near),
        ])?;
    }
    Ok(table)
}

fn must_err(e: MustError) -> Box<dyn std::error::Error + Send + Sync> {
    Box::new(e)
}

// ---------------------------------------------------------------------------
// custom
// ---------------------------------------------------------------------------

#[derive(Default)]
struct CustomAcc {
    trials: u64,
    weak_noncoop: u64,
    strong_noncoop: u64,
    pair_noncoop: u64,
    weak_coop: u64,
    strong_coop: u64,
    pair_coop: u64,
    sum_noma: MeanAccumulator,
    sum_oma: MeanAccumulator,
}

impl Merge for CustomAcc {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        self.weak_noncoop += other.weak_noncoop;
        self.strong_noncoop += other.strong_noncoop;
        self.pair_noncoop += other.pair_noncoop;
        self.weak_coop += other.weak_coop;
        self.strong_coop += other.strong_coop;
        self.pair_coop += other.pair_coop;
        self.sum_noma.merge(&other.sum_noma);
        self.sum_oma.merge(&other.sum_oma);
    }
}

fn custom_point(scenario: &Scenario) -> Result<ResultTable, RunError> {
    let mut table = ResultTable::new(vec![
        Column::float("snr_db"),
        Column::float("outage_weak_noncoop"),
        Column::float("outage_strong_noncoop"),
        Column::float("outage_pair_noncoop"),
        Column::float("outage_weak_coop"),
        Column::float("outage_strong_coop"),
        Column::float("outage_pair_coop"),
        Column::float("sum_rate_noma_mean"),
        Column::float("sum_rate_oma_mean"),
    ]);
    let pos_strong = scenario
        .user_strong()
        .expect("validated: user_strong present");
    let alloc = fixed_alloc(scenario);
    for (unit, snr) in scenario.snr().iter().enumerate() {
        let scn = coop_scenario(scenario, snr.linear, pos_strong);
        let acc = accumulate(scenario.trials(), |lo, hi| {
            let mut acc = CustomAcc::default();
            for trial in lo..hi {
                let t = draw_trial(&scn, unit as u32, trial);
                let noncoop = noncooperative_outcome(&t, &scn.alloc, &scn.targets);
                let coop = cooperative_outcome(&t, &scn.alloc, &scn.targets);
                acc.trials += 1;
                acc.weak_noncoop += noncoop.weak_outage as u64;
                acc.strong_noncoop += noncoop.strong_outage as u64;
                acc.pair_noncoop += noncoop.pair_outage as u64;
                acc.weak_coop += coop.weak_outage as u64;
                acc.strong_coop += coop.strong_outage as u64;
                acc.pair_coop += coop.pair_outage as u64;
                let budget = LinkBudget {
                    rho: snr.linear,
                    h_weak_sq: t.bs_to_weak.gain_sq(),
                    h_strong_sq: t.bs_to_strong.gain_sq(),
                };
                acc.sum_noma.push(sum_rate(&noma_rates(&budget, &alloc)));
                acc.sum_oma.push(sum_rate(&oma_rates(&budget)));
            }
            acc
        });
        let n = acc.trials as f64;
        table.push_row(vec![
            Value::Float(snr.db),
            Value::Float(acc.weak_noncoop as f64 / n),
            Value::Float(acc.strong_noncoop as f64 / n),
            Value::Float(acc.pair_noncoop as f64 / n),
            Value::Float(acc.weak_coop as f64 / n),
            Value::Float(acc.strong_coop as f64 / n),
            Value::Float(acc.pair_coop as f64 / n),
            Value::Float(acc.sum_noma.mean()),
            Value::Float(acc.sum_oma.mean()),
        ])?;
    }
    Ok(table)
}
