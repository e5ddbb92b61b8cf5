use mwsn_marl::env::EnvConfig;
use mwsn_marl::vision::{vision_selftest, NoiseConfig, VisionConfig};

fn main() -> mwsn_marl::Result<()> {
    let env = EnvConfig::default();
    for (label, noise) in [("noiseless", NoiseConfig::noiseless()), ("default", NoiseConfig::default())] {
        let cfg = VisionConfig { noise, ..VisionConfig::default() };
        let r = vision_selftest(&env, &cfg, 5, 42)?;
        println!("{label:>9}: {r:?}");
    }
    Ok(())
}
