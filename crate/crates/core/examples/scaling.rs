//! Per-step and per-decision cost at several network sizes, at constant density.

use mwsn_marl::config::RunConfig;
use mwsn_marl::scale::{loglog_slope, scale_run, ScaleConfig};

fn main() -> mwsn_marl::Result<()> {
    let mut cfg = RunConfig::desk();
    cfg.train.episodes = 4;
    let sc = ScaleConfig { sensor_counts: vec![10, 20, 40], keep_density: true, ..ScaleConfig::default() };
    let rows = scale_run(&cfg.env, &cfg.train, &cfg.reward, &sc)?;
    for r in &rows {
        println!(
            "n {:>3}  field {:>5.0} m  step {:>7.2} ms  decision {:>6.1} us/agent",
            r.n_sensors, r.field_width, r.step_ms, r.decision_us_per_agent
        );
    }
    let n: Vec<f64> = rows.iter().map(|r| r.n_sensors as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.step_ms).collect();
    println!("step time ~ n^{:.2}", loglog_slope(&n, &t));
    Ok(())
}
