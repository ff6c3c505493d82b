use super::{integrate, ProblemKind, RunSpec};
use crate::error::HarnessError;
use crate::problems::harmonic;

/// Observed convergence order from a sequence of halved step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub step_sizes: Vec<f64>,
    /// Error per step size against the exact solution when one is known,
    /// otherwise the difference to the next finer run (one entry shorter).
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})`.
    pub slopes: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`.
    pub fitted_order: f64,
    pub exact_reference: bool,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn fit_slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs `base` with `h, h/2, …, h/2^halvings` and measures the order at
/// `base.t_end`. The harmonic oscillator is compared to its exact flow;
/// other problems use Richardson differences of successive runs.
pub fn order_check(base: &RunSpec, halvings: usize) -> Result<OrderReport, HarnessError> {
    if halvings < 2 {
        return Err(HarnessError::InvalidSpec(
            "order check needs at least two halvings".into(),
        ));
    }
    let mut hs = Vec::with_capacity(halvings + 1);
    let mut finals = Vec::with_capacity(halvings + 1);
    for i in 0..=halvings {
        let spec = RunSpec {
            h: base.h / f64::from(1u32 << i),
            thin: usize::MAX,
            phase_out: None,
            energy_out: None,
            ..base.clone()
        };
        let (traj, report) = integrate(&spec)?;
        if !report.status.is_completed() {
            return Err(HarnessError::InvalidSpec(format!(
                "run with h = {} did not converge",
                spec.h
            )));
        }
        hs.push(spec.h);
        finals.push(traj.last_state().to_vec());
    }

    let exact = (base.problem == ProblemKind::Harmonic).then(|| {
        let (mut q, p) = harmonic().exact(base.t_end);
        q.extend(p);
        q
    });
    let (errors, err_hs): (Vec<f64>, Vec<f64>) = match &exact {
        Some(y) => finals
            .iter()
            .map(|f| max_abs_diff(f, y))
            .zip(hs.iter().copied())
            .unzip(),
        None => finals
            .windows(2)
            .map(|w| max_abs_diff(&w[0], &w[1]))
            .zip(hs.iter().copied())
            .unzip(),
    };
    let slopes = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(OrderReport {
        fitted_order: fit_slope(&err_hs, &errors),
        step_sizes: hs,
        errors,
        slopes,
        exact_reference: exact.is_some(),
    })
}
