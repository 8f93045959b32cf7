use candle_core::{Device, Tensor, Var};

use crate::error::Result;

/// Central finite difference of a scalar loss w.r.t. one flat element of
/// `var`. The loss closure is re-evaluated with the element shifted by ±h;
/// the original value is restored afterwards.
pub fn fd_gradient(
    var: &Var,
    flat_index: usize,
    h: f64,
    loss_fn: &mut dyn FnMut() -> Result<Tensor>,
) -> Result<f64> {
    let dims = var.as_tensor().dims().to_vec();
    let orig = var.as_tensor().flatten_all()?.to_vec1::<f64>()?;
    let mut eval = |shift: f64| -> Result<f64> {
        let mut data = orig.clone();
        data[flat_index] += shift;
        var.set(&Tensor::from_vec(data, dims.as_slice(), &Device::Cpu)?)?;
        Ok(loss_fn()?.to_scalar::<f64>()?)
    };
    let plus = eval(h);
    let minus = eval(-h);
    var.set(&Tensor::from_vec(orig, dims.as_slice(), &Device::Cpu)?)?;
    Ok((plus? - minus?) / (2.0 * h))
}

/// One flat element of the stored gradient for `var`, or 0 if the parameter
/// received no gradient.
pub fn stored_gradient(
    grads: &candle_core::backprop::GradStore,
    var: &Var,
    flat_index: usize,
) -> Result<f64> {
    match grads.get(var.as_tensor()) {
        Some(g) => Ok(g.flatten_all()?.to_vec1::<f64>()?[flat_index]),
        None => Ok(0.0),
    }
}

/// Relative error with an absolute floor so near-zero pairs compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        // loss = sum(w^2) so d/dw_i = 2 w_i.
        let var = Var::from_tensor(
            &Tensor::from_vec(vec![1.5f64, -2.0, 0.25], &[3], &Device::Cpu).unwrap(),
        )
        .unwrap();
        let v2 = var.clone();
        let mut loss_fn = move || -> Result<Tensor> {
            Ok(v2.as_tensor().sqr()?.sum_all()?)
        };
        let loss = loss_fn().unwrap();
        let grads = loss.backward().unwrap();
        for (i, expect) in [(0usize, 3.0), (1, -4.0), (2, 0.5)] {
            let fd = fd_gradient(&var, i, 1e-5, &mut loss_fn).unwrap();
            let an = stored_gradient(&grads, &var, i).unwrap();
            assert!(rel_err(fd, expect) < 1e-8, "fd {fd} vs {expect}");
            assert!(rel_err(an, expect) < 1e-12, "analytic {an} vs {expect}");
        }
        // Restoration: the var is back to its original values.
        assert_eq!(
            var.as_tensor().to_vec1::<f64>().unwrap(),
            vec![1.5, -2.0, 0.25]
        );
    }
}
