//! Glass-box probes and representation-collapse diagnostics.

mod collapse;
mod probe;

pub use collapse::{collapse_metrics, jacobi_eigenvalues, CollapseMetrics, SetMetrics};
pub use probe::{write_pgm, Probe, ProbeSpec, PROBE_LEARNING_RATE};
