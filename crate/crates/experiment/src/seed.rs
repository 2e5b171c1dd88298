//! Per-trial seed derivation.
//!
//! A seed is a splitmix64-style hash folded over the master seed and a list
//! of coordinates. Coordinates are grid *values* (k, L, SNR bits, variant)
//! and the trial index, never positions in a grid, so extending a grid or
//! raising the trial count leaves every existing trial untouched.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(mix(master.wrapping_add(GOLDEN)), |h, &c| mix(h.wrapping_add(GOLDEN) ^ mix(c)))
}

/// Coordinate for an SNR grid value; the noiseless point has its own code.
pub fn snr_coord(snr_db: Option<f64>) -> u64 {
    snr_db.map_or(u64::MAX, f64::to_bits)
}
