use peltier_core::calibration::{
    bench_dataset, calibrated_params, fit, loss, predict, select_optimal_voltage, sweep, FitOptions, Observation,
    SweepRow,
};
use peltier_core::thermal::{run_constant_voltage, LifetimeResult, PeltierParams};
use proptest::prelude::*;

#[test]
fn shipped_parameters_reproduce_the_bench() {
    let p = calibrated_params();
    for pr in predict(&p, &bench_dataset()).unwrap() {
        assert!(pr.relative_error.abs() <= 0.05, "{pr:?}");
        assert_eq!(pr.predicted_target_reached, pr.observed_target_reached, "{pr:?}");
    }
}

#[test]
fn sweep_over_the_bench_range_is_monotone_and_picks_two_volts() {
    let rows = sweep(&calibrated_params(), 1.5, 3.0, 0.5).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.voltage).collect::<Vec<_>>(),
        vec![1.5, 2.0, 2.5, 3.0]
    );
    let lifetimes: Vec<f64> = rows
        .iter()
        .map(|r| r.result.as_ref().unwrap().lifetime.unwrap())
        .collect();
    assert!(lifetimes.windows(2).all(|w| w[0] > w[1]), "{lifetimes:?}");
    assert_eq!(select_optimal_voltage(&rows), Some(2.0));
}

#[test]
fn single_point_sweep() {
    let rows = sweep(&calibrated_params(), 2.0, 2.0, 0.5).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(sweep(&calibrated_params(), 3.0, 2.0, 0.5).is_err());
    assert!(sweep(&calibrated_params(), 1.0, 2.0, 0.0).is_err());
}

fn row(voltage: f64, reached: bool) -> SweepRow {
    SweepRow {
        voltage,
        result: Ok(LifetimeResult {
            lifetime: Some(100.0),
            time_to_target: reached.then_some(50.0),
            target_reached_within_lifetime: reached,
            max_warm_temp: 45.0,
        }),
    }
}

proptest! {
    #[test]
    fn optimal_voltage_ignores_row_order(
        entries in prop::collection::vec((1u32..50, any::<bool>(), any::<bool>()), 0..20),
        seed in any::<u64>(),
    ) {
        let rows: Vec<SweepRow> = entries
            .iter()
            .map(|&(k, reached, failed)| {
                let mut r = row(k as f64 / 10.0, reached);
                if failed {
                    r.result = Err("blow-up".into());
                }
                r
            })
            .collect();
        let mut shuffled = rows.clone();
        // deterministic Fisher-Yates driven by the seed
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let expected = entries
            .iter()
            .filter(|&&(_, reached, failed)| reached && !failed)
            .map(|&(k, _, _)| k as f64 / 10.0)
            .min_by(f64::total_cmp);
        prop_assert_eq!(select_optimal_voltage(&rows), expected);
        prop_assert_eq!(select_optimal_voltage(&shuffled), expected);
    }
}

fn quick() -> FitOptions {
    FitOptions {
        max_iters: 30,
        restarts: 2,
        seed: 11,
    }
}

#[test]
fn fitting_never_makes_the_loss_worse() {
    let obs = bench_dataset();
    let start = calibrated_params();
    let starts = [
        start,
        PeltierParams {
            seebeck_alpha: start.seebeck_alpha * 1.3,
            ..start
        },
        PeltierParams {
            resistance: start.resistance * 0.7,
            ..start
        },
    ];
    for initial in starts {
        let r = fit(&obs, &initial, &quick()).unwrap();
        assert!(r.final_loss <= r.initial_loss, "{} > {}", r.final_loss, r.initial_loss);
        assert!((r.final_loss - loss(&r.params, &obs)).abs() <= 1e-12 * r.final_loss.max(1.0));
    }
}

#[test]
fn fits_are_deterministic_for_a_seed() {
    let obs = bench_dataset();
    let initial = PeltierParams {
        resistance: 25.0,
        ..calibrated_params()
    };
    let a = fit(&obs, &initial, &quick()).unwrap();
    let b = fit(&obs, &initial, &quick()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fitting_recovers_synthetic_lifetimes() {
    // lifetimes generated by a known parameter set; the fit only has to match them, not the set
    let truth = calibrated_params();
    let obs: Vec<Observation> = [1.5, 2.0, 2.5, 3.0]
        .iter()
        .map(|&v| {
            let r = run_constant_voltage(&truth, v, 600.0, 0.05).unwrap();
            Observation {
                voltage: v,
                lifetime_mean: r.lifetime.unwrap(),
                lifetime_sd: 2.0,
                target_reached: r.target_reached_within_lifetime,
            }
        })
        .collect();
    let initial = PeltierParams {
        internal_conductance: truth.internal_conductance * 1.5,
        ..truth
    };
    let r = fit(
        &obs,
        &initial,
        &FitOptions {
            max_iters: 200,
            restarts: 1,
            seed: 1,
        },
    )
    .unwrap();
    assert!(r.final_loss < r.initial_loss);
    for p in &r.predictions {
        assert!(p.relative_error.abs() < 0.05, "{p:?}");
    }
}

#[test]
fn bad_observations_are_rejected() {
    let mut obs = bench_dataset();
    obs[1].lifetime_mean = -3.0;
    assert!(fit(&obs, &calibrated_params(), &quick()).is_err());
    assert!(fit(&[], &calibrated_params(), &quick()).is_err());
    assert!(fit(
        &bench_dataset(),
        &calibrated_params(),
        &FitOptions { restarts: 0, ..quick() }
    )
    .is_err());
}
