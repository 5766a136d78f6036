use crate::numeric::{Real, SeededRng, Tensor};

/// Uniform on `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real>(rng: &mut SeededRng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.uniform_range(-limit, limit))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}
