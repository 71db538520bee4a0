//! Benchmark objectives with analytic derivatives and known minimizers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::objective::{Function, Objective};
use crate::{Error, Matrix, Result, Vector};

/// Names accepted by [`make_test_function`], in a stable order.
pub const TEST_FUNCTION_NAMES: [&str; 7] = [
    "scalar_quadratic",
    "booth",
    "rosenbrock",
    "himmelblau",
    "three_hump",
    "extended_wood",
    "rastrigin",
];

/// Metadata describing a shipped test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub name: String,
    pub dim: usize,
    pub known_minimizers: Vec<Vec<f64>>,
    /// Per-coordinate `(lower, upper)` bounds used for random probing.
    pub domain_box: Vec<(f64, f64)>,
    pub default_inits: Vec<Vec<f64>>,
}

/// Dimension used when the caller does not specify one.
pub fn default_dim(name: &str) -> Option<usize> {
    match name {
        "scalar_quadratic" => Some(1),
        "booth" | "rosenbrock" | "himmelblau" | "three_hump" | "rastrigin" => Some(2),
        "extended_wood" => Some(4),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    ScalarQuadratic,
    Booth,
    Rosenbrock,
    Himmelblau,
    ThreeHump,
    ExtendedWood,
    Rastrigin,
}

#[derive(Clone, Debug)]
struct TestFunction {
    kind: Kind,
    name: &'static str,
    dim: usize,
}

/// Builds the named objective and its metadata.
pub fn make_test_function(name: &str, dim: usize) -> Result<(Objective, TestFunctionSpec)> {
    let (kind, name) = match name {
        "scalar_quadratic" => (Kind::ScalarQuadratic, "scalar_quadratic"),
        "booth" => (Kind::Booth, "booth"),
        "rosenbrock" => (Kind::Rosenbrock, "rosenbrock"),
        "himmelblau" => (Kind::Himmelblau, "himmelblau"),
        "three_hump" => (Kind::ThreeHump, "three_hump"),
        "extended_wood" => (Kind::ExtendedWood, "extended_wood"),
        "rastrigin" => (Kind::Rastrigin, "rastrigin"),
        other => {
            return Err(Error::usage(format!(
                "unknown test function '{other}' (expected one of {})",
                TEST_FUNCTION_NAMES.join(", ")
            )))
        }
    };
    let dim_ok = match kind {
        Kind::ScalarQuadratic => dim == 1,
        Kind::Booth | Kind::Himmelblau | Kind::ThreeHump => dim == 2,
        Kind::Rosenbrock => dim >= 2,
        Kind::ExtendedWood => dim >= 4 && dim.is_multiple_of(4),
        Kind::Rastrigin => dim >= 1,
    };
    if !dim_ok {
        return Err(Error::usage(format!("{name} does not support dimension {dim}")));
    }
    let spec = spec_for(kind, name, dim);
    Ok((Objective::new(TestFunction { kind, name, dim }), spec))
}

fn spec_for(kind: Kind, name: &str, n: usize) -> TestFunctionSpec {
    let (known_minimizers, default_inits): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match kind {
        Kind::ScalarQuadratic => (vec![vec![-0.2]], vec![vec![1.0]]),
        Kind::Booth => (
            vec![vec![1.0, 3.0]],
            vec![vec![5.0, 5.0], vec![5.0, -5.0], vec![-2.0, -2.0]],
        ),
        Kind::Rosenbrock => {
            let inits = if n == 2 {
                vec![vec![-2.0, -2.0], vec![0.0, 0.0], vec![-5.0, -5.0]]
            } else {
                vec![vec![-2.0; n], vec![0.0; n]]
            };
            (vec![vec![1.0; n]], inits)
        }
        Kind::Himmelblau => (
            vec![
                vec![3.0, 2.0],
                vec![-2.805_118_086_952_745, 3.131_312_518_250_573],
                vec![-3.779_310_253_377_747, -3.283_185_991_286_169],
                vec![3.584_428_340_330_492, -1.848_126_526_964_404],
            ],
            vec![vec![1.0, 1.0], vec![20.0, 20.0], vec![-5.0, -5.0]],
        ),
        Kind::ThreeHump => (
            vec![vec![0.0, 0.0]],
            vec![vec![1.0, 1.0], vec![0.0, -1.0], vec![-1.0, -1.0]],
        ),
        Kind::ExtendedWood => (vec![vec![1.0; n]], vec![vec![2.0; n], vec![10.0; n]]),
        Kind::Rastrigin => (vec![vec![0.0; n]], vec![vec![0.5; n]]),
    };
    TestFunctionSpec {
        name: name.to_string(),
        dim: n,
        known_minimizers,
        domain_box: vec![(-5.0, 5.0); n],
        default_inits,
    }
}

impl Function for TestFunction {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        match self.kind {
            Kind::ScalarQuadratic => 2.5 * x[0] * x[0] + x[0],
            Kind::Booth => {
                let (a, b) = (x[0], x[1]);
                (a + 2.0 * b - 7.0).powi(2) + (2.0 * a + b - 5.0).powi(2)
            }
            Kind::Rosenbrock => x
                .as_slice()
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            Kind::Himmelblau => {
                let (a, b) = (x[0], x[1]);
                (a * a + b - 11.0).powi(2) + (a + b * b - 7.0).powi(2)
            }
            Kind::ThreeHump => {
                let (a, b) = (x[0], x[1]);
                let a2 = a * a;
                2.0 * a2 - 1.05 * a2 * a2 + a2 * a2 * a2 / 6.0 + a * b + b * b
            }
            Kind::ExtendedWood => x
                .as_slice()
                .chunks_exact(4)
                .map(|c| {
                    let (a, b, cc, d) = (c[0], c[1], c[2], c[3]);
                    100.0 * (a * a - b).powi(2)
                        + (a - 1.0).powi(2)
                        + 90.0 * (cc * cc - d).powi(2)
                        + (1.0 - cc).powi(2)
                        + 10.1 * ((b - 1.0).powi(2) + (d - 1.0).powi(2))
                        + 19.8 * (b - 1.0) * (d - 1.0)
                })
                .sum(),
            Kind::Rastrigin => {
                10.0 * self.dim as f64
                    + x.iter()
                        .map(|&v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let n = self.dim;
        let mut g = Vector::zeros(n);
        match self.kind {
            Kind::ScalarQuadratic => g[0] = 5.0 * x[0] + 1.0,
            Kind::Booth => {
                g[0] = 10.0 * x[0] + 8.0 * x[1] - 34.0;
                g[1] = 8.0 * x[0] + 10.0 * x[1] - 38.0;
            }
            Kind::Rosenbrock => {
                for i in 0..n - 1 {
                    let r = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * r;
                }
            }
            Kind::Himmelblau => {
                let (a, b) = (x[0], x[1]);
                let p = a * a + b - 11.0;
                let q = a + b * b - 7.0;
                g[0] = 4.0 * a * p + 2.0 * q;
                g[1] = 2.0 * p + 4.0 * b * q;
            }
            Kind::ThreeHump => {
                let (a, b) = (x[0], x[1]);
                g[0] = 4.0 * a - 4.2 * a.powi(3) + a.powi(5) + b;
                g[1] = a + 2.0 * b;
            }
            Kind::ExtendedWood => {
                for k in (0..n).step_by(4) {
                    let (a, b, c, d) = (x[k], x[k + 1], x[k + 2], x[k + 3]);
                    g[k] = 400.0 * a * (a * a - b) + 2.0 * (a - 1.0);
                    g[k + 1] = -200.0 * (a * a - b) + 20.2 * (b - 1.0) + 19.8 * (d - 1.0);
                    g[k + 2] = 360.0 * c * (c * c - d) - 2.0 * (1.0 - c);
                    g[k + 3] = -180.0 * (c * c - d) + 20.2 * (d - 1.0) + 19.8 * (b - 1.0);
                }
            }
            Kind::Rastrigin => {
                for i in 0..n {
                    g[i] = 2.0 * x[i] + 20.0 * PI * (2.0 * PI * x[i]).sin();
                }
            }
        }
        g
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let n = self.dim;
        let mut h = Matrix::zeros(n, n);
        match self.kind {
            Kind::ScalarQuadratic => h[(0, 0)] = 5.0,
            Kind::Booth => {
                h[(0, 0)] = 10.0;
                h[(0, 1)] = 8.0;
                h[(1, 0)] = 8.0;
                h[(1, 1)] = 10.0;
            }
            Kind::Rosenbrock => {
                for i in 0..n - 1 {
                    h[(i, i)] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
                    h[(i, i + 1)] = -400.0 * x[i];
                    h[(i + 1, i)] = -400.0 * x[i];
                    h[(i + 1, i + 1)] += 200.0;
                }
            }
            Kind::Himmelblau => {
                let (a, b) = (x[0], x[1]);
                h[(0, 0)] = 12.0 * a * a + 4.0 * b - 42.0;
                h[(0, 1)] = 4.0 * (a + b);
                h[(1, 0)] = 4.0 * (a + b);
                h[(1, 1)] = 12.0 * b * b + 4.0 * a - 26.0;
            }
            Kind::ThreeHump => {
                let a2 = x[0] * x[0];
                h[(0, 0)] = 4.0 - 12.6 * a2 + 5.0 * a2 * a2;
                h[(0, 1)] = 1.0;
                h[(1, 0)] = 1.0;
                h[(1, 1)] = 2.0;
            }
            Kind::ExtendedWood => {
                for k in (0..n).step_by(4) {
                    let (a, b, c, d) = (x[k], x[k + 1], x[k + 2], x[k + 3]);
                    h[(k, k)] = 1200.0 * a * a - 400.0 * b + 2.0;
                    h[(k, k + 1)] = -400.0 * a;
                    h[(k + 1, k)] = -400.0 * a;
                    h[(k + 1, k + 1)] = 220.2;
                    h[(k + 1, k + 3)] = 19.8;
                    h[(k + 3, k + 1)] = 19.8;
                    h[(k + 2, k + 2)] = 1080.0 * c * c - 360.0 * d + 2.0;
                    h[(k + 2, k + 3)] = -360.0 * c;
                    h[(k + 3, k + 2)] = -360.0 * c;
                    h[(k + 3, k + 3)] = 200.2;
                }
            }
            Kind::Rastrigin => {
                for i in 0..n {
                    h[(i, i)] = 2.0 + 40.0 * PI * PI * (2.0 * PI * x[i]).cos();
                }
            }
        }
        Some(h)
    }
}
