use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer over `global ⊕ rotl(epoch, 17) ⊕ rotl(index, 31)`.
pub fn derive_seed(global: u64, epoch: u64, index: u64) -> u64 {
    let mut z = global ^ epoch.rotate_left(17) ^ index.rotate_left(31);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator behind every random stream in the crate.
pub fn seeded_rng(global: u64, epoch: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global, epoch, index))
}
