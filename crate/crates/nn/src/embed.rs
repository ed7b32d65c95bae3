use crate::error::{NnError, Result};
use crate::tensor::Scalar;

/// Interleaved `[sin(t·ω₀), cos(t·ω₀), sin(t·ω₁), …]` with
/// `ωᵢ = 10000^(−2i/dim)`.
pub fn sinusoidal_embedding<T: Scalar>(t: usize, dim: usize) -> Result<Vec<T>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(NnError::Config(format!(
            "sinusoidal embedding dim must be even and positive, got {dim}"
        )));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = 10000f64.powf(-(2.0 * i as f64) / dim as f64);
        let arg = t as f64 * freq;
        out.push(T::of(arg.sin()));
        out.push(T::of(arg.cos()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_sin0_cos1() {
        let e = sinusoidal_embedding::<f64>(0, 16).unwrap();
        for pair in e.chunks(2) {
            assert_eq!(pair[0], 0.0);
            assert_eq!(pair[1], 1.0);
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - (8.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(matches!(
            sinusoidal_embedding::<f32>(3, 7),
            Err(NnError::Config(_))
        ));
    }

    #[test]
    fn distinct_steps_give_distinct_embeddings() {
        let all: Vec<Vec<f64>> = (0..50)
            .map(|t| sinusoidal_embedding(t, 32).unwrap())
            .collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let d: f64 = all[i]
                    .iter()
                    .zip(&all[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                assert!(d > 1e-6, "t={i} and t={j} collide");
            }
        }
    }
}
