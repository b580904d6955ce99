use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    /// Samples at `0`, `h` and `h/2` only: for paths defined for `t >= 0`.
    OneSided,
    /// Samples at `±h` and `0`.
    Central,
}

/// Richardson-extrapolated difference quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Size of the last extrapolation correction.
    pub error: f64,
    /// Convergence order seen in the unextrapolated quotients.
    pub observed_order: Option<f64>,
    pub steps: Vec<f64>,
    pub base: Vec<f64>,
}

/// Derivative of order 1 or 2 at `t = 0` from a decreasing step sequence.
pub fn fd_derivative(
    f: impl Fn(f64) -> Result<f64>,
    order: u32,
    stencil: Stencil,
    steps: &[f64],
) -> Result<FdEstimate> {
    if !(1..=2).contains(&order) {
        return Err(Error::Stencil(format!(
            "derivative order {order} not supported"
        )));
    }
    if steps.len() < 2 {
        return Err(Error::Stencil("need at least two steps".into()));
    }
    if steps.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::Stencil("steps must be positive and finite".into()));
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Stencil("steps must be strictly decreasing".into()));
    }
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let mut sample = |t: f64| -> Result<f64> {
        if let Some(v) = cache.get(&t.to_bits()) {
            return Ok(*v);
        }
        let v = f(t)?;
        if !v.is_finite() {
            return Err(Error::Stencil(format!("non-finite sample at t = {t:e}")));
        }
        cache.insert(t.to_bits(), v);
        Ok(v)
    };
    let f0 = sample(0.0)?;
    let mut base = Vec::with_capacity(steps.len());
    for &h in steps {
        let d = match (stencil, order) {
            (Stencil::OneSided, 1) => (sample(h)? - f0) / h,
            (Stencil::OneSided, _) => 4.0 * (f0 - 2.0 * sample(0.5 * h)? + sample(h)?) / (h * h),
            (Stencil::Central, 1) => (sample(h)? - sample(-h)?) / (2.0 * h),
            (Stencil::Central, _) => (sample(h)? - 2.0 * f0 + sample(-h)?) / (h * h),
        };
        base.push(d);
    }
    let powers: Vec<f64> = match stencil {
        Stencil::OneSided => (1..steps.len()).map(|k| k as f64).collect(),
        Stencil::Central => (1..steps.len()).map(|k| 2.0 * k as f64).collect(),
    };
    let (value, error) = richardson(steps, &base, &powers);
    Ok(FdEstimate {
        value,
        error,
        observed_order: observed_order(steps, &base),
        steps: steps.to_vec(),
        base,
    })
}

/// Richardson tableau eliminating the given error powers in turn; exact
/// for a geometric step sequence. Returns the final estimate and the size
/// of the last correction.
pub fn richardson(steps: &[f64], base: &[f64], powers: &[f64]) -> (f64, f64) {
    let n = base.len();
    let mut table: Vec<Vec<f64>> = base.iter().map(|b| vec![*b]).collect();
    for i in 1..n {
        for k in 1..=i.min(powers.len()) {
            let r = (steps[i - 1] / steps[i]).powf(powers[k - 1]);
            let a = table[i][k - 1];
            let b = table[i - 1][k - 1];
            table[i].push(a + (a - b) / (r - 1.0));
        }
    }
    let last = &table[n - 1];
    let best = *last.last().unwrap();
    let prev_diag = *table[n - 2].last().unwrap();
    let err = (best - last[last.len() - 2])
        .abs()
        .max((best - prev_diag).abs());
    (best, err)
}

fn observed_order(steps: &[f64], base: &[f64]) -> Option<f64> {
    let n = base.len();
    if n < 3 {
        return None;
    }
    let d1 = base[n - 2] - base[n - 3];
    let d2 = base[n - 1] - base[n - 2];
    if d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    let ratio = steps[n - 2] / steps[n - 1];
    Some((d1 / d2).abs().ln() / ratio.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn one_sided_first_derivative_of_exponential() {
        let e = fd_derivative(|t| Ok(t.exp()), 1, Stencil::OneSided, &STEPS).unwrap();
        assert!((e.value - 1.0).abs() < 1e-7, "{e:?}");
        assert!((e.observed_order.unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn one_sided_second_derivative_of_sine() {
        let e = fd_derivative(|t| Ok((t + 0.3).sin()), 2, Stencil::OneSided, &STEPS).unwrap();
        assert!((e.value + 0.3f64.sin()).abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn central_second_derivative() {
        let e = fd_derivative(|t| Ok((2.0 * t).cos()), 2, Stencil::Central, &STEPS).unwrap();
        assert!((e.value + 4.0).abs() < 1e-9, "{e:?}");
        assert!((e.observed_order.unwrap() - 2.0).abs() < 0.1);
    }

    #[test]
    fn one_sided_never_samples_negative_times() {
        let f = |t: f64| {
            if t < 0.0 {
                Err(Error::Invalid("negative".into()))
            } else {
                Ok(t * t)
            }
        };
        assert!(fd_derivative(f, 2, Stencil::OneSided, &STEPS).is_ok());
    }

    #[test]
    fn rejects_bad_step_sequences() {
        assert!(fd_derivative(Ok, 1, Stencil::Central, &[0.1, 0.2]).is_err());
        assert!(fd_derivative(Ok, 1, Stencil::Central, &[0.1]).is_err());
        assert!(fd_derivative(Ok, 3, Stencil::Central, &STEPS).is_err());
    }
}
