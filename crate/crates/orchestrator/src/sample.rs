use breakscan_bridge::order_anchors;
use breakscan_common::sha256_hex;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The longest same-site anchors, at most `n`.
pub fn select_inner_pages(anchors: &[String], n: usize) -> Vec<String> {
    order_anchors(anchors.to_vec()).into_iter().take(n).collect()
}

/// Uniform sample without replacement; survivors keep their input order.
pub fn sample_targets<T: Clone>(targets: &[T], k: usize, seed: u64) -> Vec<T> {
    if targets.len() <= k {
        return targets.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, targets.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| targets[i].clone()).collect()
}

/// Seed for one site and purpose, independent of scheduling order.
pub fn site_seed(seed: u64, site: &str, salt: &str) -> u64 {
    let h = sha256_hex(format!("{seed}\n{site}\n{salt}").as_bytes());
    u64::from_str_radix(&h[..16], 16).expect("hex digest")
}

pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
