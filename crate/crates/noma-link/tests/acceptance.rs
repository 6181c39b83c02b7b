//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities (run with `--nocapture` to see
//! them). Criteria marked with runtime budgets assert the elapsed time.

use std::sync::Mutex;
use std::time::Instant;

use noma_link::channel::{complex_gaussian, PathLossModel, Position, StreamFactory};
use noma_link::cooperative::{
    fit_diversity_order, outage_map, paired_outage_counts, paired_outage_sweep, CoopScenario,
    FitWindow, Metric, Mode, OutageEstimate,
};
use noma_link::harness::{parse_scenario, run, Value};
use noma_link::mimo::{cluster_noma_rates, zf_cluster_beams, ClusterScenario};
use noma_link::must::{
    build_composite, gray_check, link_gain_experiment, qpsk, Category, SuperpositionSpec,
};
use noma_link::rates::{
    cr_power_allocation, high_snr_sum_rates, noma_rates, sum_rate, LinkBudget, PowerAllocation,
    TargetRates,
};
use noma_link::stats::linear_fit;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Criteria run one at a time so the elapsed-time budgets are meaningful.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn fig4_scenario(trials: u64, seed: u64) -> CoopScenario {
    CoopScenario {
        bs: Position::new(0.0, 0.0),
        pos_weak: Position::new(5.0, 0.0),
        pos_strong: Position::new(2.5, 0.0),
        pathloss: PathLossModel::new(3.0, 1.0).unwrap(),
        rho: 1e3,
        alloc: PowerAllocation::fixed_strict(0.8, 0.2).unwrap(),
        targets: TargetRates::new(0.5, 0.5).unwrap(),
        trials,
        seed,
    }
}

fn float(v: &Value) -> f64 {
    match v {
        Value::Float(f) => *f,
        _ => panic!("expected float value"),
    }
}

/// Closed-form Rayleigh weak-user outage: `1 - exp(-eps / ((a_w - eps a_s) rho lambda))`.
fn rayleigh_weak_outage(rho: f64, a_w: f64, a_s: f64, r: f64, lambda: f64) -> f64 {
    let eps = r.exp2() - 1.0;
    1.0 - (-eps / ((a_w - eps * a_s) * rho * lambda)).exp()
}

#[test]
fn c01_rayleigh_outage_oracle() {
    let _g = gate();
    let start = Instant::now();
    let scn = fig4_scenario(1_000_000, 0xAC01);
    let grid_db = [20.0, 25.0, 30.0];
    let counts = paired_outage_sweep(&scn, &grid_db).unwrap();
    let lambda = 0.008;
    let mut detail = String::new();
    for (&db, c) in grid_db.iter().zip(&counts) {
        let rho = 10f64.powf(db / 10.0);
        let est = c.estimate(Mode::NonCooperative, Metric::WeakUser);
        let p = rayleigh_weak_outage(rho, 0.8, 0.2, 0.5, lambda);
        let se = (p * (1.0 - p) / est.trials as f64).sqrt();
        assert!(
            (est.probability - p).abs() < 3.0 * se,
            "{db} dB: empirical {} vs closed form {p} (3 SE = {})",
            est.probability,
            3.0 * se
        );
        detail.push_str(&format!("{db}dB:{:.5}~{p:.5} ", est.probability));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s exceeds 30s");
    println!("ACCEPTANCE 01 rayleigh-outage-oracle: PASS ({detail}in {elapsed:.1}s)");
}

#[test]
fn c02_diversity_order() {
    let _g = gate();
    let start = Instant::now();
    let scn = fig4_scenario(10_000_000, 0xAC02);
    let grid_db = [20.0, 25.0, 30.0, 35.0, 40.0, 45.0];
    let counts = paired_outage_sweep(&scn, &grid_db).unwrap();
    let points = |mode: Mode, from: usize| -> Vec<(f64, OutageEstimate)> {
        grid_db[from..]
            .iter()
            .zip(&counts[from..])
            .map(|(&db, c)| (10f64.powf(db / 10.0), c.estimate(mode, Metric::WeakUser)))
            .collect()
    };

    // the 25 dB non-cooperative estimate sits near 0.20 by the closed
    // form, so the default 0.1 ceiling cannot hold on this grid; the
    // widened window keeps the fit bias below 0.03 of a diversity order
    let wide = FitWindow {
        min_count: 10,
        max_p: 0.25,
    };
    let noncoop = fit_diversity_order(&points(Mode::NonCooperative, 1), wide).unwrap();
    assert!(
        (0.8..=1.2).contains(&noncoop),
        "non-cooperative slope {noncoop} outside [0.8, 1.2]"
    );

    let coop = fit_diversity_order(&points(Mode::Cooperative, 1), FitWindow::default()).unwrap();
    assert!(
        (1.7..=2.3).contains(&coop),
        "cooperative slope {coop} outside [1.7, 2.3]"
    );

    // slope separation over the full 20-45 dB grid
    let saturated = FitWindow {
        min_count: 10,
        max_p: 0.6,
    };
    let coop_full = fit_diversity_order(&points(Mode::Cooperative, 0), saturated).unwrap();
    let noncoop_full = fit_diversity_order(&points(Mode::NonCooperative, 0), saturated).unwrap();
    assert!(
        coop_full - noncoop_full >= 0.7,
        "slope separation {} below 0.7",
        coop_full - noncoop_full
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "runtime {elapsed:.1}s exceeds 10min");
    println!(
        "ACCEPTANCE 02 diversity-order: PASS (noncoop {noncoop:.3}, coop {coop:.3}, \
         separation {:.3}, in {elapsed:.1}s)",
        coop_full - noncoop_full
    );
}

#[test]
fn c03_fig4_qualitative_reproduction() {
    let _g = gate();
    let start = Instant::now();

    // cooperative beats non-cooperative for the pair at B = (2.5, 0)
    let scn = fig4_scenario(1_000_000, 0xAC03);
    let counts = paired_outage_counts(&scn, 0).unwrap();
    let coop = counts.estimate(Mode::Cooperative, Metric::Pair);
    let noncoop = counts.estimate(Mode::NonCooperative, Metric::Pair);
    assert!(
        coop.probability + coop.half_width < noncoop.probability - noncoop.half_width,
        "cooperative {} +- {} does not separate from non-cooperative {} +- {}",
        coop.probability,
        coop.half_width,
        noncoop.probability,
        noncoop.half_width
    );

    // weak-user outage is homogeneous over the strong user's location
    let xs = [0.5, 1.375, 2.25, 3.125, 4.0];
    let ys = [0.0, 0.5, 1.0, 1.5, 2.0];
    let mut grid = Vec::new();
    for &y in &ys {
        for &x in &xs {
            grid.push(Position::new(x, y));
        }
    }
    let map = outage_map(&scn, &grid, Mode::NonCooperative, Metric::WeakUser).unwrap();
    let n = scn.trials as f64;
    let total_outages: f64 = map.iter().map(|(_, e)| e.probability * n).sum();
    let pooled = total_outages / (n * map.len() as f64);
    let mut stat = 0.0;
    for (_, est) in &map {
        let k = est.probability * n;
        let e1 = n * pooled;
        let e0 = n * (1.0 - pooled);
        stat += (k - e1) * (k - e1) / e1 + ((n - k) - e0) * ((n - k) - e0) / e0;
    }
    let df = (map.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    assert!(
        p_value > 0.01,
        "chi-square homogeneity rejected: stat {stat:.1}, p {p_value:.4}"
    );

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "runtime {elapsed:.1}s exceeds 2min");
    println!(
        "ACCEPTANCE 03 fig4-qualitative: PASS (pair {:.4} < {:.4}, chi2 p {p_value:.3}, \
         in {elapsed:.1}s)",
        coop.probability, noncoop.probability
    );
}

#[test]
fn c04_cr_allocation_exactness() {
    let _g = gate();
    let start = Instant::now();

    // bisection oracle for the smallest feasible a_weak
    let bisect = |budget: &LinkBudget, r: f64| -> Option<f64> {
        let achieved = |a: f64| {
            let x = budget.rho * budget.h_weak_sq;
            (1.0 + a * x / (1.0 + (1.0 - a) * x)).log2()
        };
        if achieved(1.0) < r {
            return None;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if achieved(mid) >= r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xAC04);
    let mut feasible = 0u32;
    let mut infeasible = 0u32;
    for _ in 0..10_000 {
        let rho = 10f64.powf(rng.gen_range(0.0..4.0));
        let h = 10f64.powf(rng.gen_range(-4.0..1.0));
        let r = rng.gen_range(0.05..3.0);
        let budget = LinkBudget::new(rho, h, 1.0).unwrap();
        let alloc = cr_power_allocation(&budget, r);
        match bisect(&budget, r) {
            Some(oracle) => {
                assert!(!alloc.primary_outage(), "marker disagrees with oracle");
                assert!(
                    (alloc.a_weak() - oracle).abs() <= 1e-9,
                    "closed form {} vs bisection {oracle}",
                    alloc.a_weak()
                );
                let achieved = noma_rates(&budget, &alloc).rate_weak;
                assert!(
                    (achieved - r).abs() <= 1e-9,
                    "achieved {achieved} target {r}"
                );
                feasible += 1;
            }
            None => {
                assert!(alloc.primary_outage());
                assert_eq!(alloc.a_weak(), 1.0);
                infeasible += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
    println!(
        "ACCEPTANCE 04 cr-allocation-exactness: PASS ({feasible} feasible, \
         {infeasible} infeasible, in {elapsed:.2}s)"
    );
}

#[test]
fn c05_fig5_sum_rate_ordering() {
    let _g = gate();
    let start = Instant::now();
    // the fixed strict split only beats OMA in ergodic mean once the
    // strong user's received SNR is large enough; at 20 dB the crossover
    // sits near 1.5 m, so the stock grid keeps the strong user inside
    // that regime
    let grid_json = r#""grid": {"x": [0.2, 0.45, 0.7, 0.95, 1.2],
                               "y": [0.0, 0.125, 0.25, 0.375, 0.5]}"#;

    let fixed = parse_scenario(&format!(
        r#"{{
            "experiment": "fig5_fixed_alloc",
            {grid_json},
            "trials": 100000,
            "seed": 44205
        }}"#
    ))
    .unwrap();
    let table = run(&fixed, 2).unwrap();
    let loss = PathLossModel::new(3.0, 1.0).unwrap();
    let lambda_weak = loss.loss(5.0);
    let (ix, iy) = (
        table.column_index("x").unwrap(),
        table.column_index("y").unwrap(),
    );
    let noma_col = table.column_index("sum_rate_noma").unwrap();
    let oma_col = table.column_index("sum_rate_oma").unwrap();
    let hw_noma = table.column_index("halfwidth_sum_noma").unwrap();
    let hw_oma = table.column_index("halfwidth_sum_oma").unwrap();
    for row in table.rows() {
        let d = float(&row[ix]).hypot(float(&row[iy]));
        assert!(
            loss.loss(d) > lambda_weak,
            "grid point at distance {d} does not dominate the weak user"
        );
        let noma = float(&row[noma_col]);
        let oma = float(&row[oma_col]);
        assert!(
            noma - float(&row[hw_noma]) > oma + float(&row[hw_oma]),
            "NOMA {noma} does not separate from OMA {oma} at distance {d}"
        );
    }

    let cr = parse_scenario(&format!(
        r#"{{
            "experiment": "fig5_cr_alloc",
            {grid_json},
            "trials": 100000,
            "seed": 44206
        }}"#
    ))
    .unwrap();
    let table = run(&cr, 2).unwrap();
    let weak_col = table.column_index("rate_weak_feasible").unwrap();
    let feas_col = table.column_index("feasible_trials").unwrap();
    let outage_col = table.column_index("primary_outage_prob").unwrap();
    for row in table.rows() {
        let feasible = match row[feas_col] {
            Value::Int(v) => v,
            _ => unreachable!(),
        };
        if feasible > 0 && float(&row[outage_col]) < 1.0 {
            let pinned = float(&row[weak_col]);
            assert!(
                (pinned - 0.5).abs() <= 1e-6,
                "conditional weak rate {pinned} not pinned at 0.5"
            );
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "runtime {elapsed:.1}s exceeds 2min");
    println!("ACCEPTANCE 05 fig5-sum-rate-ordering: PASS (25 grid points, in {elapsed:.1}s)");
}

#[test]
fn c06_high_snr_approximation() {
    let _g = gate();
    let start = Instant::now();
    let budget = LinkBudget::new(1e6, 0.008, 1.0).unwrap();
    let alloc = PowerAllocation::fixed_strict(0.8, 0.2).unwrap();
    assert!(alloc.a_strong() * budget.h_strong_sq * budget.rho > 1e4);
    let exact = sum_rate(&noma_rates(&budget, &alloc));
    let approx = high_snr_sum_rates(&budget).unwrap().noma;
    let gap = (exact - approx).abs();
    assert!(gap < 0.1, "gap {gap} not below 0.1 BPCU");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0);
    println!("ACCEPTANCE 06 high-snr-approximation: PASS (gap {gap:.5} BPCU, in {elapsed:.3}s)");
}

#[test]
fn c07_fig3_scaling() {
    let _g = gate();
    let start = Instant::now();
    let scn = parse_scenario(
        r#"{
            "experiment": "fig3_scaling",
            "mimo": {"antennas": [1, 2, 4, 8]},
            "trials": 100000,
            "seed": 44207
        }"#,
    )
    .unwrap();
    let table = run(&scn, 2).unwrap();
    let m_col = table.column_index("antennas").unwrap();
    let noma_col = table.column_index("sum_rate_noma").unwrap();
    let oma_col = table.column_index("sum_rate_oma").unwrap();
    let hw_noma = table.column_index("halfwidth_sum_noma").unwrap();
    let hw_oma = table.column_index("halfwidth_sum_oma").unwrap();

    let mut ms = Vec::new();
    let mut sums = Vec::new();
    let mut last = f64::NEG_INFINITY;
    let mut last_hw = 0.0;
    for row in table.rows() {
        let m = match row[m_col] {
            Value::Int(v) => v as f64,
            _ => unreachable!(),
        };
        let noma = float(&row[noma_col]);
        let oma = float(&row[oma_col]);
        assert!(
            noma - float(&row[hw_noma]) > oma + float(&row[hw_oma]),
            "M={m}: NOMA {noma} does not separate from OMA {oma}"
        );
        assert!(
            noma > last - last_hw - float(&row[hw_noma]),
            "M={m}: ergodic NOMA sum rate decreased"
        );
        last = noma;
        last_hw = float(&row[hw_noma]);
        ms.push(m);
        sums.push(noma);
    }
    let fit = linear_fit(&ms, &sums).unwrap();
    assert!(
        fit.r_squared > 0.99,
        "linear fit R^2 {} below 0.99",
        fit.r_squared
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.1}s exceeds 5min");
    println!(
        "ACCEPTANCE 07 fig3-scaling: PASS (R^2 {:.4}, slope {:.3} BPCU/antenna, \
         in {elapsed:.1}s)",
        fit.r_squared, fit.slope
    );
}

#[test]
fn c08_zero_forcing_beams() {
    let _g = gate();
    let start = Instant::now();
    let factory = StreamFactory::new(0xAC08);
    let alloc = PowerAllocation::fixed(0.8, 0.2).unwrap();
    let mut checked = 0u32;
    for (unit, &m) in [2usize, 4, 8].iter().enumerate() {
        for trial in 0..1000u64 {
            let mut rng = factory.stream(unit as u32, trial, 0);
            let h1 = DVector::from_iterator(m, (0..m).map(|_| complex_gaussian(&mut rng, 1.0)));
            let h4 = DVector::from_iterator(m, (0..m).map(|_| complex_gaussian(&mut rng, 1.0)));
            let c = Complex64::new(1.0 + rng.gen::<f64>(), rng.gen::<f64>());
            let cp = Complex64::new(1.0 + rng.gen::<f64>(), -rng.gen::<f64>());
            let scn = ClusterScenario::aligned(h1, h4, c, cp).unwrap();
            let beams = zf_cluster_beams(&scn).unwrap();
            for (w, victims) in [
                (&beams.beams()[0], [1usize, 3]),
                (&beams.beams()[1], [0, 2]),
            ] {
                for &k in &victims {
                    let h = &scn.channels()[k];
                    let residual = w.dotc(h).norm();
                    assert!(
                        residual < 1e-10 * h.norm(),
                        "M={m} trial {trial}: residual {residual}"
                    );
                }
            }

            let rates = cluster_noma_rates(&scn, &beams, &alloc, 100.0).unwrap();
            // independent SINR assembly from raw inner products
            let p = 50.0;
            for (mi, (u, v)) in [(0usize, (0usize, 2usize)), (1, (1, 3))] {
                let w_own = &beams.beams()[mi];
                let w_other = &beams.beams()[1 - mi];
                let dot = |w: &DVector<Complex64>, h: &DVector<Complex64>| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..w.len() {
                        acc += w[i].conj() * h[i];
                    }
                    acc
                };
                let gu = dot(w_own, &scn.channels()[u]).norm_sqr();
                let gv = dot(w_own, &scn.channels()[v]).norm_sqr();
                let (far, near, g_far, g_near) =
                    if gu <= gv { (u, v, gu, gv) } else { (v, u, gv, gu) };
                let leak_far = p * dot(w_other, &scn.channels()[far]).norm_sqr();
                let leak_near = p * dot(w_other, &scn.channels()[near]).norm_sqr();
                let r_far =
                    (1.0 + p * 0.8 * g_far / (1.0 + p * 0.2 * g_far + leak_far)).log2();
                let r_near = (1.0 + p * 0.2 * g_near / (1.0 + leak_near)).log2();
                assert!((rates[far] - r_far).abs() <= 1e-9 * r_far.abs().max(1.0));
                assert!((rates[near] - r_near).abs() <= 1e-9 * r_near.abs().max(1.0));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.1}s exceeds 10s");
    println!("ACCEPTANCE 08 zero-forcing-beams: PASS ({checked} scenarios, in {elapsed:.1}s)");
}

#[test]
fn c09_must_gray_properties() {
    let _g = gate();
    let start = Instant::now();
    for beta in [0.64, 0.8, 0.9] {
        let composites: Vec<_> = Category::ALL
            .iter()
            .map(|&cat| {
                let spec = SuperpositionSpec::new(qpsk(), qpsk(), beta, cat).unwrap();
                build_composite(&spec).unwrap()
            })
            .collect();
        assert!(
            !gray_check(&composites[0]).unwrap().is_gray(),
            "beta {beta}: category 1 should not be Gray"
        );
        assert!(gray_check(&composites[1]).unwrap().is_gray());
        assert!(gray_check(&composites[2]).unwrap().is_gray());
        for c in &composites {
            assert!(
                (c.average_power() - 1.0).abs() < 1e-12,
                "beta {beta}: power {}",
                c.average_power()
            );
        }
        let sorted = |c: &noma_link::must::LabeledConstellation| {
            let mut pts: Vec<(f64, f64)> = c.points().iter().map(|p| (p.re, p.im)).collect();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts
        };
        let reference = sorted(&composites[0]);
        for c in &composites[1..] {
            for (a, b) in sorted(c).iter().zip(&reference) {
                assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
            }
        }

        // labeling comparison on the shared geometry: Gray mapping cannot
        // increase far-user bit errors under minimum-distance reception
        let spec = SuperpositionSpec::new(qpsk(), qpsk(), beta, Category::Cat1).unwrap();
        let rows = link_gain_experiment(&spec, &[0.0, 5.0, 10.0, 15.0], 100_000, 0xAC09).unwrap();
        for chunk in rows.chunks(3) {
            let cat1 = &chunk[0];
            let cat2 = &chunk[1];
            assert_eq!(cat1.category, Category::Cat1);
            assert_eq!(cat2.category, Category::Cat2);
            assert!(
                cat2.ber_far <= cat1.ber_far,
                "beta {beta} at {} dB: cat2 far BER {} above cat1 {}",
                cat1.snr_db,
                cat2.ber_far,
                cat1.ber_far
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.1}s exceeds 1min");
    println!("ACCEPTANCE 09 must-gray-properties: PASS (3 power ratios, in {elapsed:.1}s)");
}

#[test]
fn c10_determinism() {
    let _g = gate();
    let start = Instant::now();
    let scn = parse_scenario(
        r#"{
            "experiment": "fig4_outage_map",
            "grid": {"x": [1.0, 2.0, 3.0], "y": [0.0, 1.0, 2.0]},
            "trials": 20000,
            "seed": 4242
        }"#,
    )
    .unwrap();
    let first = run(&scn, 1).unwrap().to_csv_string();
    let second = run(&scn, 1).unwrap().to_csv_string();
    let eight = run(&scn, 8).unwrap().to_csv_string();
    assert_eq!(first, second, "same seed, same workers: bytes differ");
    assert_eq!(first, eight, "worker count changed the bytes");
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 10 determinism: PASS ({} bytes identical across reruns and \
         worker counts, in {elapsed:.1}s)",
        first.len()
    );
}
