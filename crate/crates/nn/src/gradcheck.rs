//! Finite-difference verification of reverse-mode gradients.

use crate::error::{NnError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-3;

fn eval<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    Ok(g.value(out).item())
}

/// Worst element-wise relative error between the reverse-mode gradient of the
/// scalar function `f` and a fourth-order central difference with step
/// [`FD_STEP`]. The relative error uses `max(|a|, |b|, 1e-8)` as denominator.
///
/// Runs in `f64` regardless of the training precision.
pub fn gradcheck<F>(f: F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(NnError::Contract(format!(
            "gradcheck needs a scalar function, got shape {:?}",
            g.shape(out)
        )));
    }
    let grads = g.backward(out)?;

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        for e in 0..inputs[i].len() {
            let x0 = inputs[i].data()[e];
            let mut at = |dx: f64| -> Result<f64> {
                probe[i].data_mut()[e] = x0 + dx;
                eval(&f, &probe)
            };
            let fp1 = at(FD_STEP)?;
            let fm1 = at(-FD_STEP)?;
            let fp2 = at(2.0 * FD_STEP)?;
            let fm2 = at(-2.0 * FD_STEP)?;
            probe[i].data_mut()[e] = x0;
            let numeric = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * FD_STEP);
            let a = analytic.data()[e];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let x = Tensor::row(vec![1.0, 2.0, 3.0]);
        let mut g = Graph::<f64>::new();
        let v = g.leaf(x.clone());
        let sq = g.square(v);
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(v).unwrap().data(), &[2.0, 4.0, 6.0]);

        let err = gradcheck(
            |g, v| {
                let sq = g.square(v[0]);
                Ok(g.sum(sq))
            },
            &[x],
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn non_scalar_is_contract_error() {
        let err = gradcheck(|g, v| Ok(g.square(v[0])), &[Tensor::row(vec![1.0, 2.0])]);
        assert!(matches!(err, Err(NnError::Contract(_))));
    }
}
