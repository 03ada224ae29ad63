use rayon::prelude::*;

use crate::error::{domain_err, Error, Result};
use crate::network::Theta;
use crate::training::{GradientBundle, Provenance};

pub const MIN_STEP: f64 = 1e-7;
pub const MAX_STEP: f64 = 1e-3;

fn check_step(h: f64) -> Result<()> {
    if (MIN_STEP..=MAX_STEP).contains(&h) {
        Ok(())
    } else {
        Err(domain_err(format!("finite-difference step must lie in [1e-7, 1e-3], got {h}")))
    }
}

fn central<F>(f: &F, theta: &Theta, k: usize, h: f64) -> Result<f64>
where
    F: Fn(&Theta) -> f64,
{
    let mut probe = theta.clone();
    let x = theta.coordinate(k);
    *probe.coordinate_mut(k) = x + h;
    let up = f(&probe);
    *probe.coordinate_mut(k) = x - h;
    let down = f(&probe);
    if !(up.is_finite() && down.is_finite()) {
        let coordinate = match theta.locate(k) {
            Some((id, r, c)) => format!("{id}[{r},{c}]"),
            None => k.to_string(),
        };
        return Err(Error::NonFinite {
            coordinate,
            msg: format!("f(θ+h) = {up}, f(θ−h) = {down}"),
        });
    }
    Ok((up - down) / (2.0 * h))
}

/// Central differences `(f(θ+h·e_k) − f(θ−h·e_k)) / 2h` for every coordinate.
///
/// The result is the plain derivative `∂f/∂θ`, not an update direction.
pub fn finite_diff<F>(f: F, theta: &Theta, h: f64) -> Result<GradientBundle>
where
    F: Fn(&Theta) -> f64 + Sync,
{
    check_step(h)?;
    let values: Vec<f64> = (0..theta.len())
        .into_par_iter()
        .map(|k| central(&f, theta, k, h))
        .collect::<Result<_>>()?;
    let mut out = theta.zeros_like();
    for (k, v) in values.into_iter().enumerate() {
        *out.coordinate_mut(k) = v;
    }
    Ok(GradientBundle::new(out, Provenance::FiniteDifference))
}

/// Central differences at the listed flat coordinates only.
pub fn finite_diff_at<F>(f: F, theta: &Theta, h: f64, coords: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&Theta) -> f64 + Sync,
{
    check_step(h)?;
    if let Some(&k) = coords.iter().find(|&&k| k >= theta.len()) {
        return Err(domain_err(format!("coordinate {k} out of range")));
    }
    coords.par_iter().map(|&k| central(&f, theta, k, h)).collect()
}
