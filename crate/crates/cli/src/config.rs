use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nblab_core::criteria::CriteriaConfig;
use nblab_core::ode::OdeKind;
use nblab_core::pde::SolverConfig;
use nblab_core::supersolutions::SuperConfig;
use nblab_core::ProblemSpec;

/// A run configuration. Every section is optional; a document without a
/// `problem` key but with the problem fields at top level is read as a bare
/// problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<Value>,
    pub nodes: usize,
    pub solver: SolverConfig,
    pub criteria: CriteriaConfig,
    pub supersolution: SuperConfig,
    pub verify: VerifySection,
    pub localization: LocalizeSection,
    pub sweep: Option<SweepSection>,
    pub boundedness: BoundednessSection,
    pub ode: OdeSection,
    pub counterexample: CounterexampleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: None,
            nodes: 201,
            solver: SolverConfig::default(),
            criteria: CriteriaConfig::default(),
            supersolution: SuperConfig::default(),
            verify: VerifySection::default(),
            localization: LocalizeSection::default(),
            sweep: None,
            boundedness: BoundednessSection::default(),
            ode: OdeSection::default(),
            counterexample: CounterexampleSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// `ε` for P1_EXP.
    pub epsilon: Option<f64>,
    pub shift: Option<f64>,
    pub k_bound: Option<f64>,
    /// Endpoint kernel bounds for L1_PG1.
    pub k2: Option<[f64; 2]>,
    /// Initial datum of the auxiliary heat problem (SUPERLINEAR, P1_BOUNDED).
    pub v0: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeSection {
    pub eps_dist: Option<f64>,
    pub nodes: Option<usize>,
    pub u_max: Option<f64>,
    pub dt_min: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    P,
    L,
    /// Factor applied to `u0`.
    U0Scale,
    /// Rate `r` in the factor `exp(-r t)` applied to `c` and `k`.
    Decay,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub axis: AxisKind,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

pub const MAX_AXIS: usize = 64;

impl Axis {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let values = match (&self.values, self.min, self.max, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    bail!("axis count must be positive");
                }
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => bail!("an axis needs either `values` or all of `min`, `max`, `count`"),
        };
        if values.is_empty() || values.len() > MAX_AXIS {
            bail!("an axis needs between 1 and {MAX_AXIS} values, got {}", values.len());
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!("axis values must be finite");
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Varies along each row.
    pub x: Axis,
    /// Varies between rows; a single row when absent.
    #[serde(default)]
    pub y: Option<Axis>,
    #[serde(default = "SweepSection::default_nodes")]
    pub nodes: usize,
    #[serde(default = "SweepSection::default_t_end")]
    pub t_end: f64,
    /// Varying the data generally breaks compatibility, so sweeps waive
    /// the check unless told otherwise.
    #[serde(default = "SweepSection::default_waive")]
    pub waive_compatibility: bool,
}

impl SweepSection {
    fn default_nodes() -> usize {
        51
    }
    fn default_t_end() -> f64 {
        10.0
    }
    fn default_waive() -> bool {
        true
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundednessSection {
    /// Flux `g(t)`.
    pub g: String,
    #[serde(rename = "L")]
    pub length: f64,
    pub t0: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub simulate: bool,
    pub v0: String,
    pub nodes: usize,
    /// Sup-norm growth is measured between these two times.
    pub growth_window: [f64; 2],
}

impl Default for BoundednessSection {
    fn default() -> Self {
        BoundednessSection {
            g: "exp(-t)".into(),
            length: 1.0,
            t0: 0.5,
            alpha: 1.0,
            horizon: 128.0,
            simulate: true,
            v0: "1".into(),
            nodes: 51,
            growth_window: [25.0, 50.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSection {
    /// Chosen from the exponents when absent.
    pub kind: Option<OdeKind>,
    pub t_end: f64,
    /// Also run the PDE and compare its mass with the ODE solution.
    pub simulate: bool,
}

impl Default for OdeSection {
    fn default() -> Self {
        OdeSection {
            kind: None,
            t_end: 10.0,
            simulate: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub alpha: f64,
    pub t0: f64,
    pub window_alpha: f64,
    pub horizon: f64,
    /// Times `t = n` at which the window integral is reported.
    pub n: Vec<f64>,
    /// Exponent of the Hölder-type condition.
    pub holder_q: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            alpha: 0.75,
            t0: 0.5,
            window_alpha: 1.0,
            horizon: 128.0,
            n: vec![4.0, 8.0, 16.0, 32.0],
            holder_q: 2.0,
        }
    }
}

const PROBLEM_KEYS: [&str; 6] = ["L", "p", "l", "c", "k", "u0"];

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let Some(obj) = doc.as_object_mut() else {
            bail!("config must be a JSON object");
        };
        if !obj.contains_key("problem") && PROBLEM_KEYS.iter().any(|k| obj.contains_key(*k)) {
            let mut problem = serde_json::Map::new();
            for k in PROBLEM_KEYS {
                if let Some(v) = obj.remove(k) {
                    problem.insert(k.to_string(), v);
                }
            }
            obj.insert("problem".into(), Value::Object(problem));
        }
        serde_json::from_value(doc).context("config does not match the expected layout")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let Some(p) = &self.problem else {
            bail!("config has no problem section");
        };
        Ok(ProblemSpec::from_json(&p.to_string())?)
    }

    /// The configuration with the problem in canonical form, as recorded in
    /// the manifest.
    pub fn resolved(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        if self.problem.is_some() {
            let canonical: Value = serde_json::from_str(&self.spec()?.to_json())?;
            v["problem"] = canonical;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_problem_is_accepted() {
        let c = RunConfig::from_str(r#"{"L": 1, "p": 2, "l": 2, "c": "1", "k": 0, "u0": "2"}"#).unwrap();
        let spec = c.spec().unwrap();
        assert_eq!(spec.exponents.p, 2.0);
        assert_eq!(c.nodes, 201);
    }

    #[test]
    fn nested_sections_fill_defaults() {
        let c = RunConfig::from_str(
            r#"{"problem": {"L": 1, "p": 2, "l": 2, "c": "1", "k": "0", "u0": "2"},
                "solver": {"t_end": 3.0}, "nodes": 51}"#,
        )
        .unwrap();
        assert_eq!(c.solver.t_end, 3.0);
        assert_eq!(c.solver.u_max, SolverConfig::default().u_max);
        assert_eq!(c.nodes, 51);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_str(r#"{"problme": {}}"#).is_err());
        assert!(RunConfig::from_str("[1, 2]").is_err());
        assert!(RunConfig::from_str("{ not json").is_err());
    }

    #[test]
    fn axis_ranges() {
        let a = Axis {
            axis: AxisKind::P,
            values: None,
            min: Some(1.0),
            max: Some(2.0),
            count: Some(3),
        };
        assert_eq!(a.resolve().unwrap(), vec![1.0, 1.5, 2.0]);
        let too_many = Axis {
            values: Some(vec![1.0; 65]),
            min: None,
            max: None,
            count: None,
            ..a
        };
        assert!(too_many.resolve().is_err());
    }
}
