use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-a..a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_seeded() {
        let w = glorot_uniform(6, 10, &mut seeded_rng(3));
        let a = (6.0f64 / 16.0).sqrt();
        assert!(w.iter().all(|x| x.abs() < a));
        assert_eq!(w, glorot_uniform(6, 10, &mut seeded_rng(3)));
        assert_ne!(w, glorot_uniform(6, 10, &mut seeded_rng(4)));
    }
}
