//! Central finite differences, the independent oracle for gradient tests.

use crate::matrix::Matrix;

/// `∂f/∂θ` for every entry of every parameter by `(f(θ+h) − f(θ−h)) / 2h`.
/// `f` only evaluates the forward value; it never touches the tape's
/// backward pass.
pub fn central_differences(params: &[Matrix], h: f64, mut f: impl FnMut(&[Matrix]) -> f64) -> Vec<Matrix> {
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut grad = Matrix::zeros(params[p].rows(), params[p].cols());
        for i in 0..params[p].as_slice().len() {
            let orig = params[p].as_slice()[i];
            work[p].as_mut_slice()[i] = orig + h;
            let up = f(&work);
            work[p].as_mut_slice()[i] = orig - h;
            let down = f(&work);
            work[p].as_mut_slice()[i] = orig;
            grad.as_mut_slice()[i] = (up - down) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)` per tensor.
pub fn relative_error(analytic: &Matrix, numeric: &Matrix, floor: f64) -> f64 {
    let diff = analytic.sub(numeric).frobenius();
    diff / analytic.frobenius().max(numeric.frobenius()).max(floor)
}
