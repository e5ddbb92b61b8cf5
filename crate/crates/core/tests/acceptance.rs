//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Reports only by default; set `ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

use std::f64::consts::PI;
use std::time::Instant;

use clap::Parser;
use mwsn_marl::baselines::{baseline_random, baseline_static_grid, RandomWalk, Stationary};
use mwsn_marl::cli::{run, Cli};
use mwsn_marl::config::RunConfig;
use mwsn_marl::env::EnvConfig;
use mwsn_marl::geometry::{build_coverage_map, coverage_fraction, monte_carlo_coverage, redundancy_rate, Field, Point};
use mwsn_marl::metrics::{recovery_time, RecoveryConfig};
use mwsn_marl::nn::{double_dqn_target, Architecture, QNetwork, TargetMode, OBS_DIM};
use mwsn_marl::replay::{PrioritizedReplay, SumTree};
use mwsn_marl::reward::{compute_reward, RewardBranch, RewardConfig, RewardInputs};
use mwsn_marl::rollout::{simulate, Deployment, EpisodeLog, Perception, SimConfig};
use mwsn_marl::scale::{loglog_slope, scale_run, ScaleConfig};
use mwsn_marl::trainer::{detect_convergence, TrainConfig, TrainedPolicy, Trainer};
use mwsn_marl::vision::{vision_selftest, NoiseConfig, VisionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn lens(r: f64, d: f64) -> f64 {
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

fn c1_geometry() -> Outcome {
    let field = Field::new(250.0, 250.0, 1.0).unwrap();
    let one = build_coverage_map(&[Point::new(125.0, 125.0)], &[true], 20.0, &field).unwrap();
    let exact_one = PI * 400.0 / field.area();
    let grid_err = (coverage_fraction(&one) - exact_one).abs() / exact_one;

    let pts = [Point::new(115.0, 125.0), Point::new(135.0, 125.0)];
    let union = (2.0 * PI * 400.0 - lens(20.0, 20.0)) / field.area();
    let n = 1_000_000;
    let mc = monte_carlo_coverage(&pts, &[true, true], 20.0, &field, n, 1);
    let sigma = (union * (1.0 - union) / n as f64).sqrt();
    let mc_z = (mc - union).abs() / sigma;

    let twin = build_coverage_map(&pts, &[true, true], 20.0, &field).unwrap();
    let red = redundancy_rate(&twin);
    let red_err = (red - 0.243).abs() / 0.243;
    outcome(
        grid_err <= 0.02 && mc_z <= 3.0 && red_err <= 0.02,
        format!("grid rel err {grid_err:.4}, MC |z| {mc_z:.2}, twin redundancy {red:.4}"),
    )
}

fn c2_gradient() -> Outcome {
    let arch = Architecture { obs_dim: OBS_DIM, trunk: vec![8, 6], head_hidden: 5, n_actions: 9 };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..10u64 {
        let mut net = QNetwork::new(arch.clone(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        // Off the ReLU kinks that zero biases create.
        for p in net.params_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        let batch = 4;
        let obs: Vec<f64> = (0..batch * OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..9)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..batch).map(|_| rng.gen_range(0.2..1.0)).collect();
        let loss = |n: &QNetwork| {
            let q = n.forward_batch(&obs, batch).q;
            (0..batch).map(|b| weights[b] * (targets[b] - q[b * 9 + actions[b]]).powi(2)).sum::<f64>() / batch as f64
        };
        let (grad, _) = net.batch_gradient(&obs, &actions, &targets, &weights);
        let h = 1e-6;
        #[allow(clippy::needless_range_loop)]
        for k in 0..net.params().len() {
            let mut p = net.clone();
            p.params_mut()[k] += h;
            let mut m = net.clone();
            m.params_mut()[k] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
            checked += 1;
        }
    }
    outcome(worst <= 1e-4, format!("worst relative error {worst:.2e} over {checked} parameter checks, 10 seeds"))
}

fn c3_overestimation() -> Outcome {
    let arch = Architecture::default();
    let draws = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut diffs = Vec::with_capacity(draws);
    for i in 0..draws as u64 {
        let online = QNetwork::new(arch.clone(), 2 * i);
        let target = QNetwork::new(arch.clone(), 2 * i + 1);
        let next: Vec<f64> = (0..OBS_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vanilla = double_dqn_target(&online, &target, 0.0, &next, false, 0.99, TargetMode::VanillaMax);
        let double = double_dqn_target(&online, &target, 0.0, &next, false, 0.99, TargetMode::Double);
        diffs.push(vanilla - double);
    }
    let m = mean(diffs.iter().copied());
    let var = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let z = m / (var / draws as f64).sqrt();
    let never_below = diffs.iter().all(|d| *d >= 0.0);
    // One-sided p < 0.01.
    outcome(
        never_below && z > 2.326,
        format!("{draws} draws, mean gap {m:.4}, z {z:.1}, vanilla >= double in all: {never_below}"),
    )
}

fn c4_replay() -> Outcome {
    let alpha = 0.6;
    let mut buf = PrioritizedReplay::new(16, alpha);
    let raw: Vec<f64> = (0..16).map(|i| 0.05 + 0.3 * i as f64).collect();
    for (i, p) in raw.iter().enumerate() {
        buf.push(i, *p);
    }
    let z: f64 = raw.iter().map(|p| p.powf(alpha)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0usize; 16];
    let draws = 1_000_000;
    for _ in 0..draws / 16 {
        for &j in &buf.sample(16, 0.4, &mut rng).unwrap().indices {
            counts[j] += 1;
        }
    }
    let worst_sigma = (0..16)
        .map(|i| {
            let p = raw[i].powf(alpha) / z;
            (counts[i] as f64 - p * draws as f64).abs() / (draws as f64 * p * (1.0 - p)).sqrt()
        })
        .fold(0.0, f64::max);

    let mut tree = SumTree::new(512);
    let mut shadow = vec![0.0; 512];
    let mut worst_tree: f64 = 0.0;
    for op in 0..100_000 {
        let i = rng.gen_range(0..512);
        let v = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..5.0) };
        tree.set(i, v);
        shadow[i] = v;
        if op % 100 == 0 {
            let s: f64 = shadow.iter().sum();
            worst_tree = worst_tree.max(tree.consistency_error()).max((tree.total() - s).abs() / s.max(1.0));
        }
    }
    outcome(
        worst_sigma <= 3.0 && worst_tree < 1e-9,
        format!(
            "largest deviation {worst_sigma:.2} sigma over 1e6 draws; sum tree error {worst_tree:.1e} after 1e5 ops"
        ),
    )
}

fn c5_reward_table() -> Outcome {
    use RewardBranch::*;
    let cfg = RewardConfig::default();
    let row = |db: f64, da: f64, cb: f64, ca: f64, battery: f64| RewardInputs {
        distance_before: db,
        distance_after: da,
        coverage_before: cb,
        coverage_after: ca,
        battery_after: battery,
        battery_threshold: 20.0,
        position_after: Point::new(10.0, 10.0),
        local_overlap: 0.0,
        energy_spent: 0.0,
        coverage_floor: 0.0,
    };
    let delta = RewardConfig { delta_w: 0.25, ..RewardConfig::default() };
    let table: Vec<(RewardInputs, &RewardConfig, RewardBranch, f64)> = vec![
        (row(10.0, 2.0, 0.3, 0.3, 80.0), &cfg, Arrived, 1.0),
        (row(8.0, 3.6, 0.3, 0.3, 80.0), &cfg, Arrived, 1.0),
        (row(10.0, 2.0, 0.3, 0.3, 5.0), &cfg, Arrived, 0.5),
        (row(10.0, 2.0, 0.3, 0.5, 80.0), &cfg, Arrived, 1.0),
        (row(30.0, 25.0, 0.3, 0.31, 80.0), &cfg, CoverageGain, 2.0),
        (row(25.0, 30.0, 0.3, 0.31, 80.0), &cfg, CoverageGain, 2.0),
        (row(25.0, 30.0, 0.3, 0.31, 5.0), &cfg, CoverageGain, 1.5),
        (row(30.0, 25.0, 0.3, 0.3, 80.0), &cfg, Approach, 3.0),
        (row(30.0, 25.0, 0.3, 0.3, 5.0), &cfg, Approach, 2.5),
        (row(25.0, 30.0, 0.3, 0.3, 80.0), &cfg, Penalty, -1.0),
        (row(25.0, 25.0, 0.3, 0.3, 80.0), &cfg, Penalty, -1.0),
        (row(25.0, 30.0, 0.3, 0.2, 5.0), &cfg, Penalty, -1.5),
        (row(10.0, 2.0, 0.3, 0.3, 80.0), &delta, Arrived, 1.25),
        (row(25.0, 30.0, 0.3, 0.3, 5.0), &delta, Penalty, -1.25),
    ];
    let bad: Vec<usize> = table
        .iter()
        .enumerate()
        .filter(|(_, (inp, c, b, v))| {
            let r = compute_reward(inp, c);
            r.branch != *b || (r.value - v).abs() > 1e-12
        })
        .map(|(i, _)| i)
        .collect();
    outcome(table.len() >= 12 && bad.is_empty(), format!("{} cases, mismatches {bad:?}", table.len()))
}

fn c6_epsilon() -> Outcome {
    let t = TrainConfig::default();
    let raw = t.epsilon_start * t.epsilon_decay.powi(200);
    let after = t.epsilon_after(200);
    let later = t.epsilon_after(500);
    outcome(
        (0.0995..=0.1005).contains(&raw) && (0.0995..=0.1005).contains(&after) && later == t.epsilon_min,
        format!("unclamped {raw:.5}, scheduled {after:.5}, after 500 decays {later}"),
    )
}

struct DeskRun {
    seed: u64,
    logs: Vec<EpisodeLog>,
    policy: TrainedPolicy,
    convergence: Option<usize>,
}

fn train_desk(cfg: &RunConfig) -> Vec<DeskRun> {
    DESK_SEEDS
        .iter()
        .map(|&seed| {
            let started = Instant::now();
            let train = TrainConfig { seed, ..cfg.train.clone() };
            let mut t = Trainer::new(cfg.env.clone(), train, cfg.reward.clone(), cfg.vision).unwrap();
            t.run().unwrap();
            let rewards: Vec<f64> = t.logs.iter().map(|l| l.mean_reward).collect();
            let convergence =
                detect_convergence(&rewards, cfg.train.convergence_window, cfg.train.convergence_threshold);
            eprintln!("  desk seed {seed} trained in {:.0} s", started.elapsed().as_secs_f64());
            DeskRun { seed, policy: t.policy(), logs: t.logs, convergence }
        })
        .collect()
}

fn c7_learning(runs: &[DeskRun]) -> Outcome {
    let window = |r: &DeskRun, f: fn(&EpisodeLog) -> f64, last: bool| {
        let n = r.logs.len();
        let slice = if last { &r.logs[n.saturating_sub(10)..] } else { &r.logs[..10.min(n)] };
        mean(slice.iter().map(f))
    };
    let avg = |f: fn(&EpisodeLog) -> f64, last: bool| mean(runs.iter().map(|r| window(r, f, last)));
    let (c0, c1) = (avg(|l| l.coverage, false), avg(|l| l.coverage, true));
    let (r0, r1) = (avg(|l| l.redundancy, false), avg(|l| l.redundancy, true));
    let (e0, e1) = (avg(|l| l.energy, false), avg(|l| l.energy, true));
    outcome(
        c1 - c0 >= 0.15 && r1 < r0 && e1 < e0,
        format!(
            "coverage {:.1}% -> {:.1}% (+{:.1} pp), redundancy {r0:.3} -> {r1:.3}, energy {e0:.0} -> {e1:.0}",
            100.0 * c0,
            100.0 * c1,
            100.0 * (c1 - c0)
        ),
    )
}

fn c8_baselines(cfg: &RunConfig, runs: &mut [DeskRun]) -> Outcome {
    let (mut beat_random, mut beat_grid, mut less_redundant) = (0, 0, 0);
    let mut rows = Vec::new();
    for r in runs.iter_mut() {
        let sim = SimConfig { seed: r.seed, ..cfg.eval };
        let trained = simulate(&cfg.env, &cfg.reward, &mut r.policy, &sim, Perception::GroundTruth).unwrap();
        let random = baseline_random(&cfg.env, &cfg.reward, &sim).unwrap();
        let grid = baseline_static_grid(&cfg.env, &cfg.reward, &sim).unwrap();
        let cov = |l: &[EpisodeLog]| mean(l.iter().map(|e| e.coverage));
        let red = |l: &[EpisodeLog]| mean(l.iter().map(|e| e.redundancy));
        let (ct, cr, cg) = (cov(&trained), cov(&random), cov(&grid));
        beat_random += usize::from(ct > cr);
        beat_grid += usize::from(ct > cg);
        less_redundant += usize::from(red(&trained) < red(&random));
        rows.push(format!("s{} {:.2}/{:.2}/{:.2}", r.seed, ct, cr, cg));
    }
    outcome(
        beat_random >= 4 && beat_grid >= 4 && less_redundant >= 4,
        format!(
            "coverage > random in {beat_random}/5, > static grid in {beat_grid}/5, redundancy < random in {less_redundant}/5 [trained/random/grid: {}]",
            rows.join(", ")
        ),
    )
}

fn c9_recovery(cfg: &RunConfig) -> Outcome {
    // Dense field, so that the survivors can in principle restore coverage.
    let env = EnvConfig { field: Field::new(120.0, 120.0, 1.0).unwrap(), ..cfg.env.clone() };
    let started = Instant::now();
    let mut t = Trainer::new(env.clone(), TrainConfig { seed: 9, ..cfg.train.clone() }, cfg.reward.clone(), cfg.vision)
        .unwrap();
    t.run().unwrap();
    eprintln!("  recovery scenario trained in {:.0} s", started.elapsed().as_secs_f64());
    let rc = RecoveryConfig { trials: 12, failures: 6, clustered: true, ..RecoveryConfig::default() };
    let trained = recovery_time(&mut t.policy(), &env, &cfg.reward, &rc, 9).unwrap();
    let random = recovery_time(&mut RandomWalk::new(9), &env, &cfg.reward, &rc, 9).unwrap();
    let grid_cfg = RecoveryConfig { deployment: Deployment::Grid, ..rc.clone() };
    let grid = recovery_time(&mut Stationary, &env, &cfg.reward, &grid_cfg, 9).unwrap();
    let (mt, mr) = (trained.median_or_inf(), random.median_or_inf());
    outcome(
        trained.times.len() >= 10 && mt < mr && grid.censored_fraction() == 1.0,
        format!(
            "{} clustered failure events on 120 x 120 m; median trained {mt} s vs random {mr} s; static grid censored {:.0}%",
            trained.times.len(),
            100.0 * grid.censored_fraction()
        ),
    )
}

fn c10_vision(cfg: &RunConfig) -> Outcome {
    let clean = VisionConfig { noise: NoiseConfig::noiseless(), ..cfg.vision };
    let a = vision_selftest(&cfg.env, &clean, 5, 10).unwrap();
    let b = vision_selftest(&cfg.env, &cfg.vision, 5, 10).unwrap();
    let half_px = 0.5 * a.meters_per_pixel;
    outcome(
        a.detection_rate == 1.0 && a.max_error_m < half_px && b.within_1m >= 0.95,
        format!(
            "noiseless detection {:.3}, max error {:.3} m (limit {half_px} m); default noise within 1 m {:.3}",
            a.detection_rate, a.max_error_m, b.within_1m
        ),
    )
}

fn c11_convergence(cfg: &RunConfig, runs: &[DeskRun]) -> Outcome {
    let mut fixture: Vec<f64> = (0..60).map(|i| 5.0 * (1.0 - (-(i as f64) / 8.0).exp())).collect();
    fixture.extend(std::iter::repeat_n(5.0, 40));
    let fixture_hit = detect_convergence(&fixture, 20, 0.01);
    let fixture_ok = matches!(fixture_hit, Some(e) if e < fixture.len() - 1);
    let last = cfg.train.episodes - 1;
    let hits: Vec<String> = runs.iter().map(|r| r.convergence.map_or("-".into(), |e| e.to_string())).collect();
    let converged = runs.iter().filter(|r| matches!(r.convergence, Some(e) if e < last)).count();
    outcome(
        fixture_ok && converged >= 3,
        format!(
            "plateau fixture detected at {fixture_hit:?}; desk seeds converged {converged}/5 at [{}]",
            hits.join(", ")
        ),
    )
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap().to_string();
    let go = |name: &str| {
        let args = ["mwsn", "train", "--seed", "12", "--episodes", "6", "--out", &out, "--run-name", name];
        run(Cli::try_parse_from(args).unwrap()).unwrap()
    };
    let (a, b) = (go("a"), go("b"));
    let la = std::fs::read(a.join("logs.jsonl")).unwrap();
    let lb = std::fs::read(b.join("logs.jsonl")).unwrap();
    outcome(
        !la.is_empty() && la == lb,
        format!("two train runs, logs.jsonl {} bytes, identical: {}", la.len(), la == lb),
    )
}

fn c13_scaling(cfg: &RunConfig) -> Outcome {
    let train = TrainConfig { episodes: 5, ..cfg.train.clone() };
    let sc = ScaleConfig { sensor_counts: vec![10, 20, 40], keep_density: true, decision_repeats: 500 };
    let rows = scale_run(&cfg.env, &train, &cfg.reward, &sc).unwrap();
    let n: Vec<f64> = rows.iter().map(|r| r.n_sensors as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.step_ms).collect();
    let slope = loglog_slope(&n, &t);
    let ratio = rows[2].decision_us_per_agent / rows[0].decision_us_per_agent;
    outcome(
        ratio <= 2.0 && slope <= 1.3,
        format!(
            "decision {:.1} us (n=10) vs {:.1} us (n=40), ratio {ratio:.2}; step ms {:?}, exponent {slope:.2}",
            rows[0].decision_us_per_agent,
            rows[2].decision_us_per_agent,
            t.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let cfg = RunConfig::desk();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "coverage geometry", c1_geometry()),
        (2, "finite-difference gradient", c2_gradient()),
        (3, "target overestimation", c3_overestimation()),
        (4, "prioritized replay", c4_replay()),
        (5, "reward table", c5_reward_table()),
        (6, "epsilon schedule", c6_epsilon()),
    ];
    eprintln!("training {} desk seeds of {} episodes", DESK_SEEDS.len(), cfg.train.episodes);
    let mut runs = train_desk(&cfg);
    results.push((7, "desk learning curve", c7_learning(&runs)));
    results.push((8, "trained vs baselines", c8_baselines(&cfg, &mut runs)));
    results.push((9, "failure recovery", c9_recovery(&cfg)));
    results.push((10, "vision localization", c10_vision(&cfg)));
    results.push((11, "convergence detection", c11_convergence(&cfg, &runs)));
    results.push((12, "reproducible logs", c12_determinism()));
    results.push((13, "scaling", c13_scaling(&cfg)));

    let mut failed = 0;
    for (id, name, o) in &results {
        failed += usize::from(!o.pass);
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
