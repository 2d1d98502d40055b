use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MpcError;
use crate::constraints::BoxBounds;
use crate::Real;

const INITIAL_STATE_STREAM: u64 = 0;
const DISTURBANCE_STREAM: u64 = 1;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `t_sim` i.i.d. draws, uniform on `[-sigma, sigma]` in every coordinate.
pub fn generate_disturbance<T: Real>(seed: u64, sigma: T, n: usize, t_sim: usize) -> Vec<DVector<T>> {
    let s = sigma.as_f64();
    if s == 0.0 {
        return vec![DVector::zeros(n); t_sim];
    }
    let mut rng = rng(seed, DISTURBANCE_STREAM);
    (0..t_sim)
        .map(|_| DVector::from_fn(n, |_, _| T::lit(rng.random_range(-s..=s))))
        .collect()
}

/// Uniform draw from the interior of the state box, optionally intersected
/// with `[-half_width, half_width]`. A zero width pins the state at 0.
pub fn draw_initial_state<T: Real>(seed: u64, bounds: &BoxBounds<T>, half_width: Option<T>) -> Result<DVector<T>, MpcError> {
    let mut rng = rng(seed, INITIAL_STATE_STREAM);
    let mut x = DVector::zeros(bounds.x_min.len());
    let cap = half_width.map_or(f64::INFINITY, |b| b.as_f64());
    for (k, (lo, hi)) in bounds.x_min.iter().zip(&bounds.x_max).enumerate() {
        let (lo, hi) = (lo.as_f64().max(-cap), hi.as_f64().min(cap));
        if lo == hi {
            x[k] = T::lit(lo);
            continue;
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(MpcError::Config(format!("state {k} has no bounded interior to sample x0 from")));
        }
        x[k] = T::lit(rng.random_range(lo..hi));
    }
    Ok(x)
}
