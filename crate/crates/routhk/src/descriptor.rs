//! JSON schema for systems. Built-in examples and user files share it.
//!
//! Field indices in descriptors are 1-based, matching the `q1 … qn` names used in
//! expressions. Momentum lists are flat with entry `β·k + a`.

use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
    /// Quantities computed from the parameters, usable wherever parameters are.
    #[serde(default)]
    pub derived: Vec<DerivedSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    /// Configuration dimension `n`.
    pub fields: usize,
    /// Parameter dimension: a number or the name of an integer parameter.
    pub k: DimSpec,
    pub lagrangian: LagrangianSpec,
    /// Sampling box per field coordinate for jet-level checks; `[-1, 1]` by default.
    #[serde(default)]
    pub sample_box: Option<Vec<[f64; 2]>>,
    pub symmetry: SymmetrySpec,
    #[serde(default)]
    pub reduction: Option<ReductionSpec>,
    /// Default momentum value; zero when absent.
    #[serde(default)]
    pub mu: Option<Vec<String>>,
    #[serde(default)]
    pub system_checks: Vec<String>,
    #[serde(default)]
    pub solutions: Vec<SolutionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpec {
    pub name: String,
    pub default: f64,
    #[serde(default)]
    pub integer: bool,
    #[serde(default)]
    pub min: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedSpec {
    pub name: String,
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Nonzero,
    Positive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub expr: String,
    pub rule: Rule,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    Fixed(usize),
    Parameter(String),
}

/// `L = ½ vᵀ K(q) v − V(q)` with `v` flattened as `i + n·a`.
///
/// `K` is either given in full (`kinetic`, `nk × nk`) or as `g(q) ⊗ η` from a
/// field metric `g` (`n × n`) and a diagonal parameter metric `η` (all ones
/// when omitted).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    #[serde(default)]
    pub kinetic: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub parameter_metric: Option<Vec<f64>>,
    #[serde(default)]
    pub potential: Option<String>,
}

/// Lie-algebra model: `[e_α, e_β] = Σ c e_γ` for each entry `[α, β, γ, c]`
/// (0-based), antisymmetric partners implied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieAlgebraDescriptor {
    pub m: usize,
    #[serde(default)]
    pub structure: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    /// Translations along these (1-based) field coordinates.
    #[serde(default)]
    pub translations: Option<Vec<usize>>,
    #[serde(default)]
    pub algebra: Option<LieAlgebraDescriptor>,
    /// `m × n` generator components in `q1 … qn`.
    #[serde(default)]
    pub generators: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConnectionSpec {
    /// `"mechanical"`: the metric-orthogonal connection; needs `lagrangian.metric`.
    Named(String),
    /// `m × n` components in `q1 … qn`.
    Components(Vec<Vec<String>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    /// Field coordinates (1-based) kept on the reduced base.
    pub base: Vec<usize>,
    /// Values of all field coordinates; the group coordinates are held here when lifting.
    pub anchor: Vec<f64>,
    pub connection: ConnectionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub label: String,
    pub space: Space,
    /// Components in `t1 … tk` (`x`, `y`, `z` also name the first three).
    pub field: Vec<String>,
    #[serde(default)]
    pub mu: Option<Vec<String>>,
    /// Closed form of the group coordinates after reconstruction.
    #[serde(default)]
    pub reference: Option<Vec<String>>,
    #[serde(default)]
    pub requires_k: Option<usize>,
    pub checks: Vec<String>,
}

impl SystemDescriptor {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The two accepted shapes of [`SymmetrySpec`].
pub enum SymmetryDescriptorParts<'a> {
    Translations(&'a [usize]),
    General(&'a LieAlgebraDescriptor, &'a [Vec<String>]),
}

impl SymmetrySpec {
    pub fn parts(&self) -> Result<SymmetryDescriptorParts<'_>, AppError> {
        match (&self.translations, &self.algebra, &self.generators) {
            (Some(t), None, None) => Ok(SymmetryDescriptorParts::Translations(t)),
            (None, Some(a), Some(g)) => Ok(SymmetryDescriptorParts::General(a, g)),
            _ => Err(AppError::Descriptor(
                "symmetry needs either `translations` or both `algebra` and `generators`".into(),
            )),
        }
    }
}
