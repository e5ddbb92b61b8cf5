//! Forward pass, a finite-difference gradient spot check and a Double-DQN target.

use mwsn_marl::nn::{double_dqn_target, Architecture, QNetwork, TargetMode};

fn main() -> mwsn_marl::Result<()> {
    let arch = Architecture::default();
    println!("architecture {}", arch.describe());
    let mut net = QNetwork::new(arch, 5);
    let target = QNetwork::new(Architecture::default(), 6);
    let obs = [0.2, 0.7, 0.9, 1.0, 0.4, -0.3, 0.1];
    println!("q {:?}", net.forward(&obs)?.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let y = double_dqn_target(&net, &target, 1.0, &obs, false, 0.99, TargetMode::Double);
    let (grad, _) = net.batch_gradient(&obs, &[3], &[y], &[1.0]);
    let loss = |n: &QNetwork| (y - n.forward(&obs).unwrap()[3]).powi(2);
    let k = 17;
    let h = 1e-6;
    net.params_mut()[k] += h;
    let up = loss(&net);
    net.params_mut()[k] -= 2.0 * h;
    let down = loss(&net);
    println!("param {k}: analytic {:.6e} numeric {:.6e}", grad[k], (up - down) / (2.0 * h));
    Ok(())
}
