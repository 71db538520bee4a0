use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::{z_approximate, z_full_hessian, ControlKind, ControlSpec, ControlState};
use crate::functions::make_test_function;
use crate::{Error, Result, Vector};

/// Per-evaluation cost of both control rules at one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub full_hessian_flops: u64,
    pub approximate_flops: u64,
    pub full_hessian_secs: f64,
    pub approximate_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Fitted exponent of flops against n; `None` with fewer than two
    /// distinct n.
    pub full_hessian_exponent: Option<f64>,
    pub approximate_exponent: Option<f64>,
}

impl ScalingTable {
    pub fn render(&self) -> String {
        let mut out = String::from("n,full_hessian_flops,approximate_flops,full_hessian_secs,approximate_secs\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.3e},{:.3e}\n",
                r.n, r.full_hessian_flops, r.approximate_flops, r.full_hessian_secs, r.approximate_secs
            ));
        }
        let fmt = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        out.push_str(&format!(
            "exponent,{},{},,\n",
            fmt(self.full_hessian_exponent),
            fmt(self.approximate_exponent)
        ));
        out
    }
}

/// Least-squares slope of `log y` against `log n`.
pub fn fit_exponent(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, y)| *n > 0 && *y > 0.0)
        .map(|&(n, y)| ((n as f64).ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn time_secs(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..reps {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

/// Measures the cost of one control evaluation with a dense Hessian versus
/// the finite-difference rule on extended Wood of each dimension.
pub fn run_scaling_bench(n_values: &[usize]) -> Result<ScalingTable> {
    if n_values.is_empty() {
        return Err(Error::usage("scaling bench needs at least one n"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let (obj, spec) = make_test_function("extended_wood", n)?;
        let x = Vector::from_vec(spec.default_inits[0].clone());
        let x_prev = x.map(|v| v + 0.1);
        let grad = obj.eval_grad(&x)?;
        let state = ControlState::with_history(obj.eval_grad(&x_prev)?, 0.1)?;
        let hess = obj.eval_hess(&x)?;
        let full = ControlSpec::new(ControlKind::FullHessian);
        let approx = ControlSpec::new(ControlKind::Approximate);

        let full_hessian_flops = z_full_hessian(&grad, &hess, &full)?.flops;
        let approximate_flops = z_approximate(&grad, &state, &approx)?.flops;
        let reps = (1 << 22) / (n * n).max(1) + 1;
        let full_hessian_secs = time_secs(reps, || z_full_hessian(&grad, &hess, &full).map(drop))?;
        let approximate_secs = time_secs(reps * n, || z_approximate(&grad, &state, &approx).map(drop))?;
        rows.push(ScalingRow {
            n,
            full_hessian_flops,
            approximate_flops,
            full_hessian_secs,
            approximate_secs,
        });
    }
    let fit = |f: fn(&ScalingRow) -> u64| {
        fit_exponent(&rows.iter().map(|r| (r.n, f(r) as f64)).collect::<Vec<_>>())
    };
    Ok(ScalingTable {
        full_hessian_exponent: fit(|r| r.full_hessian_flops),
        approximate_exponent: fit(|r| r.approximate_flops),
        rows,
    })
}
