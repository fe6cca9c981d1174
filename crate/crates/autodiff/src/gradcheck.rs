//! Central finite-difference gradient checking, kept independent of the
//! reverse-mode path it is used to verify.

use crate::tape::Arr;

/// Central finite-difference gradient of a scalar function of several arrays.
pub fn finite_diff_grad(
    f: &mut dyn FnMut(&[Arr]) -> f64,
    inputs: &[Arr],
    step: f64,
) -> Vec<Arr> {
    let mut work: Vec<Arr> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Arr::zeros(inputs[i].raw_dim());
        for j in 0..inputs[i].len() {
            let orig = work[i].as_slice_mut().unwrap()[j];
            work[i].as_slice_mut().unwrap()[j] = orig + step;
            let fp = f(&work);
            work[i].as_slice_mut().unwrap()[j] = orig - step;
            let fm = f(&work);
            work[i].as_slice_mut().unwrap()[j] = orig;
            g.as_slice_mut().unwrap()[j] = (fp - fm) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

/// Max over elements of |a-b| / max(|a|, |b|, floor).
pub fn max_rel_error(a: &Arr, b: &Arr, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
