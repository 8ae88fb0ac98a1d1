//! Built-in examples.

use std::collections::BTreeMap;

use crate::case::{build_case, ExampleCase};
use crate::descriptor::SystemDescriptor;
use crate::error::{AppError, AppResult};

const BUILTIN: &[(&str, &str)] = &[
    ("laplace", include_str!("../descriptors/laplace.json")),
    ("navier", include_str!("../descriptors/navier.json")),
    (
        "complex_scalar",
        include_str!("../descriptors/complex_scalar.json"),
    ),
    (
        "harmonic_a410",
        include_str!("../descriptors/harmonic_a410.json"),
    ),
    (
        "harmonic_generic",
        include_str!("../descriptors/harmonic_generic.json"),
    ),
];

pub fn example_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn descriptor(name: &str) -> AppResult<SystemDescriptor> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| AppError::UnknownExample(name.into()))?;
    Ok(SystemDescriptor::from_json(text).expect("built-in descriptors parse"))
}

pub fn load_example(name: &str, overrides: &BTreeMap<String, f64>) -> AppResult<ExampleCase> {
    build_case(&descriptor(name)?, overrides)
}

pub fn load_system_file(
    path: &std::path::Path,
    overrides: &BTreeMap<String, f64>,
) -> AppResult<ExampleCase> {
    let text =
        std::fs::read_to_string(path).map_err(|e| AppError::io(path.display().to_string(), e))?;
    build_case(&SystemDescriptor::from_json(&text)?, overrides)
}
