//! Fits the bench dataset (optionally a voltage subset) and prints the report.
//!
//! `cargo run --release --example fit_bench -- [restarts] [max_iters] [v1,v2,...]`

use peltier_core::calibration::{bench_dataset, fit, predict, FitOptions};
use peltier_core::thermal::PeltierParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let restarts = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let max_iters = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let subset: Option<Vec<f64>> = args
        .get(3)
        .map(|s| s.split(',').map(|v| v.parse().expect("voltage")).collect());
    let all = bench_dataset();
    let train: Vec<_> = match &subset {
        Some(vs) => all.iter().copied().filter(|o| vs.contains(&o.voltage)).collect(),
        None => all.clone(),
    };
    let t = std::time::Instant::now();
    let report = fit(
        &train,
        &PeltierParams::initial_guess(),
        &FitOptions {
            max_iters,
            restarts,
            seed: 7,
        },
    )
    .unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if subset.is_some() {
        println!(
            "{}",
            serde_json::to_string_pretty(&predict(&report.params, &all)).unwrap()
        );
    }
    eprintln!("elapsed {:?}", t.elapsed());
}
