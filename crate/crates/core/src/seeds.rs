//! Seed derivation and per-purpose random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. Each purpose draws from its own ChaCha
/// stream so that, for instance, probing never shifts traffic arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    Shadowing = 2,
    Fading = 3,
    Traffic = 4,
    Probes = 5,
    Backoff = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the parts into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_B005_7000_0001, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of drop `drop_index` in the cell with `n_ues` UEs. The mode is not
/// part of the seed: every configuration sees the same placement, shadowing
/// and traffic for a given drop.
pub fn drop_seed(master_seed: u64, n_ues: usize, drop_index: usize) -> u64 {
    mix(&[master_seed, n_ues as u64, drop_index as u64])
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Seed for an individual sub-entity, e.g. the fading of one link.
pub fn sub_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    mix(&[seed, purpose as u64, index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_repeatable() {
        let a: u64 = stream(42, Purpose::Traffic).gen();
        let b: u64 = stream(42, Purpose::Traffic).gen();
        let c: u64 = stream(42, Purpose::Probes).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(drop_seed(1, 4, 0), drop_seed(1, 4, 1));
        assert_ne!(drop_seed(1, 4, 0), drop_seed(1, 20, 0));
    }
}
