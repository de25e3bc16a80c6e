//! Central finite-difference gradients, used to validate the tape.

use super::params::ParameterSet;
use super::tensor::Tensor;

/// Default step for central differences in f64.
pub const STEP: f64 = 1e-5;

/// Estimates `∂f/∂p` for every parameter element by central differences.
pub fn finite_difference<F>(params: &ParameterSet, step: f64, mut f: F) -> Vec<Tensor>
where
    F: FnMut(&ParameterSet) -> f64,
{
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut out = Vec::with_capacity(names.len());
    for name in &names {
        let shape = params.get(name).unwrap().shape().to_vec();
        let n = params.get(name).unwrap().len();
        let mut grad = Tensor::zeros(&shape);
        for i in 0..n {
            let orig = probe.get(name).unwrap().data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = orig + step;
            let plus = f(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig - step;
            let minus = f(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig;
            grad.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        out.push(grad);
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all elements.
///
/// The floor keeps near-zero entries from amplifying rounding noise in the
/// numerical estimate.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
