//! Central-difference gradient oracle.

use super::{Param, Result, Tape, Tensor, TensorError, Var};

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn scalar_of(v: Var<'_>) -> Result<f64> {
    if v.len() != 1 {
        return Err(TensorError::NonScalarLoss { shape: v.shape() });
    }
    Ok(v.item())
}

/// Compare the tape gradient of the scalar `f(x)` at `point` with central
/// differences of width `step`. Returns the largest relative error over all
/// coordinates.
pub fn finite_diff_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let p = Param::new(Tensor::new(point.shape().to_vec(), point.values().to_vec())?);
    let analytic = {
        let tape = Tape::new();
        let x = tape.param(&p);
        let y = f(&tape, x)?;
        tape.backward(y)?;
        let g = p.borrow().grad().map(<[f64]>::to_vec);
        g.unwrap_or_else(|| vec![0.0; point.len()])
    };
    let eval = |values: Vec<f64>| -> Result<f64> {
        let tape = Tape::new();
        let x = tape.constant(&Tensor::new(point.shape().to_vec(), values)?);
        scalar_of(f(&tape, x)?)
    };
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        let mut plus = point.values().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// Like [`finite_diff_check`], but perturbs a param used inside `f`.
/// `coords` limits the check to a subset of flat indices.
pub fn finite_diff_check_param<F>(f: F, param: &Param, step: f64, coords: Option<&[usize]>) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape) -> Result<Var<'t>>,
{
    let saved_flag = param.borrow().requires_grad();
    let original = param.borrow().values().to_vec();
    param.zero_grad();
    param.set_requires_grad(true);
    let result = (|| {
        let analytic = {
            let tape = Tape::new();
            let y = f(&tape)?;
            tape.backward(y)?;
            let g = param.borrow().grad().map(<[f64]>::to_vec);
            g.unwrap_or_else(|| vec![0.0; original.len()])
        };
        let all: Vec<usize>;
        let coords = match coords {
            Some(c) => c,
            None => {
                all = (0..original.len()).collect();
                &all
            }
        };
        let mut worst: f64 = 0.0;
        for &i in coords {
            let mut shifted = original.clone();
            shifted[i] += step;
            param.assign(&shifted)?;
            let up = scalar_of(f(&Tape::new())?);
            shifted[i] = original[i] - step;
            param.assign(&shifted)?;
            let down = scalar_of(f(&Tape::new())?);
            param.assign(&original)?;
            let numeric = (up? - down?) / (2.0 * step);
            worst = worst.max(relative_error(analytic[i], numeric));
        }
        Ok(worst)
    })();
    param.assign(&original)?;
    param.zero_grad();
    param.set_requires_grad(saved_flag);
    result
}
