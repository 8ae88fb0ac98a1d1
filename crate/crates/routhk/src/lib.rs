//! Example registry, file formats and command-line front end for `routhk-core`.
//!
//! Systems are described in JSON (see [`descriptor`]) with coefficients and
//! analytic solutions written in a small expression language ([`expr`]). The
//! built-in examples live in `descriptors/` and load through [`registry`].

pub mod case;
pub mod certificates;
pub mod cli;
pub mod descriptor;
pub mod error;
pub mod expr;
pub mod io;
pub mod registry;

pub use case::{AnalyticSolution, ExampleCase};
pub use certificates::{run_certificates, Check, Report, ReportRow, Tolerances};
pub use error::{AppError, AppResult};
pub use registry::{example_names, load_example};
