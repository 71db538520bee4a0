//! Benchmark harness: trace files, convergence plots, experiment and sweep
//! runners, and the control cost-scaling bench.

mod csv;
mod experiment;
mod scaling;
mod svg;
mod sweep;

pub use csv::{emit_trace_csv, read_trace_csv, write_trace_csv, CsvRow, TRACE_CSV_HEADER};
pub use experiment::{
    run_experiment, ExperimentSpec, Method, MethodSpec, Perturbation, ProblemSpec, RunSummary,
    Summary, OUTPUT_DIR_ENV,
};
pub use scaling::{fit_exponent, run_scaling_bench, ScalingRow, ScalingTable};
pub use svg::{emit_convergence_svg, render_convergence_svg};
pub use sweep::{
    perturb, run_robustness_sweep, HyperBounds, MethodSweep, SweepSample, SweepSummary,
};
