use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used by every sampler: xoshiro256++ expanded from a 64-bit
/// seed with SplitMix64.
pub type McRng = Xoshiro256PlusPlus;

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a tag (replica index or stream id).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub fn replica_rng(master: u64, replica: u64) -> McRng {
    McRng::seed_from_u64(derive_seed(master, replica))
}
