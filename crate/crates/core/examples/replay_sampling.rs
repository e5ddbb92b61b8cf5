//! Prioritized replay: empirical sampling frequencies against p^alpha / sum.

use mwsn_marl::replay::PrioritizedReplay;
use rand::SeedableRng;

fn main() -> mwsn_marl::Result<()> {
    let mut buf = PrioritizedReplay::new(8, 0.6);
    for i in 0..8 {
        buf.push(i, 1.0 + i as f64);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut hits = [0usize; 8];
    let draws = 200_000;
    for _ in 0..draws / 8 {
        for &i in &buf.sample(8, 0.4, &mut rng)?.indices {
            hits[i] += 1;
        }
    }
    for (i, h) in hits.iter().enumerate() {
        println!("item {i}: expected {:.4} observed {:.4}", buf.probability(i), *h as f64 / (draws / 8 * 8) as f64);
    }
    Ok(())
}
