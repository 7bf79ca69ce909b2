//! TOML experiment configuration with dotted-key overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion_oracle::ModelCase;
use crate::lattice::{Boundary, LatticeSpec};
use crate::mappings::MappingKind;
use crate::model::Model;
use crate::recipe::{Recipe, RecipeStep};
use crate::statevector::DEFAULT_BUDGET;
use crate::validation::Fault;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "tV", alias = "tv", alias = "t_v")]
    TV,
    #[serde(rename = "fermi_hubbard", alias = "fh", alias = "hubbard")]
    FermiHubbard,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default, alias = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, alias = "V", skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, alias = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, alias = "U", skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub lx: usize,
    pub ly: usize,
    #[serde(default = "open")]
    pub boundary: Boundary,
}

fn open() -> Boundary {
    Boundary::Open
}

/// Either a named reference state or an explicit recipe.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<RecipeStep>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToricConfig {
    /// Path of a V2..V6 gate assignment; the built-in placement when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    #[serde(default)]
    pub parameters: Parameters,
    pub lattice: LatticeConfig,
    pub mapping: String,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub n_steps: usize,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub outputs: Outputs,
    /// Statevector budget in bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget: Option<u64>,
    #[serde(default)]
    pub monitor_invariants: bool,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub toric: ToricConfig,
}

fn default_tau() -> f64 {
    0.05
}

/// Sets `key` (dotted path) in a TOML table; the value is parsed as TOML, falling back to a string.
fn set_dotted(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

impl ExperimentConfig {
    /// Parses and validates a config.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Applies `key=value` overrides on the raw table before validation.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_dotted(&mut table, &k, &v)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mapping_kind(&self) -> Result<MappingKind> {
        MappingKind::parse(&self.mapping)
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.lattice.lx, self.lattice.ly, self.lattice.boundary)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<Model> {
        let p = &self.parameters;
        let need = |v: Option<f64>, name: &str| {
            let x = v.ok_or_else(|| Error::Config(format!("parameter `{name}` is required")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Config(format!("parameter `{name}` must be finite")))
            }
        };
        let stray = |v: Option<f64>, name: &str| {
            if v.is_some() {
                Err(Error::Config(format!(
                    "parameter `{name}` does not belong to this model"
                )))
            } else {
                Ok(())
            }
        };
        match self.model {
            ModelName::TV => {
                stray(p.j, "j")?;
                stray(p.u, "u")?;
                Ok(Model::TV {
                    t: need(p.t, "t")?,
                    v: need(p.v, "v")?,
                })
            }
            ModelName::FermiHubbard => {
                stray(p.t, "t")?;
                stray(p.v, "v")?;
                Ok(Model::FermiHubbard {
                    j: need(p.j, "j")?,
                    u: need(p.u, "u")?,
                })
            }
        }
    }

    /// Initial-state recipe; empty when none is configured.
    pub fn recipe(&self) -> Result<Recipe> {
        match (&self.initial_state.preset, &self.initial_state.steps) {
            (Some(_), Some(_)) => Err(Error::Config(
                "initial_state takes either `preset` or `steps`, not both".into(),
            )),
            (Some(name), None) => {
                let case = ModelCase::parse(name).map_err(|e| Error::Config(e.to_string()))?;
                if case.spec() != self.spec()? {
                    return Err(Error::Config(format!(
                        "preset `{name}` needs a {}x{} open lattice",
                        case.spec().lx,
                        case.spec().ly
                    )));
                }
                Ok(Recipe::preset(case))
            }
            (None, Some(steps)) => Ok(Recipe { steps: steps.clone() }),
            (None, None) => Ok(Recipe::default()),
        }
    }

    pub fn budget(&self) -> u128 {
        self.memory_budget.map(u128::from).unwrap_or(DEFAULT_BUDGET)
    }

    /// Checks that every name resolves and every number is in range.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        let spec = self.spec()?;
        let kind = self.mapping_kind()?;
        let model = self.model()?;
        if !kind.supports(&model) {
            return Err(Error::Config(format!(
                "mapping `{}` does not support model `{}`",
                kind.name(),
                model.name()
            )));
        }
        if self.memory_budget == Some(0) {
            return Err(Error::Config("memory_budget must be positive".into()));
        }
        self.recipe()?
            .validate(&spec, model.is_spinful())
            .map_err(|e| Error::Config(format!("initial_state: {e}")))?;
        if let Some(Fault::FlipEdgeSign { edge } | Fault::WrongFactor { edge }) = self.validation.fault {
            let n = crate::lattice::all_edges(&spec).len();
            if edge >= n {
                return Err(Error::Config(format!("fault edge {edge} out of range for {n} edges")));
            }
        }
        Ok(())
    }

    /// The config as JSON, embedded in every JSON output.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TV: &str = r#"
model = "tV"
mapping = "spinless_local"
tau = 0.05
n_steps = 10

[parameters]
T = 1.0
V = 0.5

[lattice]
lx = 3
ly = 2

[initial_state]
preset = "tv_2x3"
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml(TV).unwrap();
        assert_eq!(cfg.model().unwrap(), Model::TV { t: 1.0, v: 0.5 });
        assert_eq!(cfg.mapping_kind().unwrap(), MappingKind::SpinlessLocal);
        assert_eq!(cfg.recipe().unwrap(), Recipe::preset(ModelCase::TV2x3));
        assert_eq!(cfg.budget(), DEFAULT_BUDGET);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_apply_before_validation() {
        let o = |s: &str| s.to_string();
        let cfg = ExperimentConfig::from_toml_with_overrides(
            TV,
            &[o("tau=0.025"), o("n_steps = 200"), o("parameters.V=1.5")],
        )
        .unwrap();
        assert_eq!(cfg.tau, 0.025);
        assert_eq!(cfg.n_steps, 200);
        assert_eq!(cfg.model().unwrap(), Model::TV { t: 1.0, v: 1.5 });
        let cfg = ExperimentConfig::from_toml_with_overrides(TV, &[o("outputs.csv=run.csv")]).unwrap();
        assert_eq!(cfg.outputs.csv.as_deref(), Some("run.csv"));
        assert!(ExperimentConfig::from_toml_with_overrides(TV, &[o("tau=-1")]).is_err());
        assert!(ExperimentConfig::from_toml_with_overrides(TV, &[o("tau")]).is_err());
        assert!(ExperimentConfig::from_toml_with_overrides(TV, &[o("tau.x=1")]).is_err());
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let o = |s: &str| s.to_string();
        for bad in [
            vec![o("mapping=spin_split")],
            vec![o("mapping=nope")],
            vec![o("lattice.lx=2")],
            vec![o("parameters.J=1.0")],
            vec![o("initial_state.preset=fh_2x3")],
            vec![o("unknown=1")],
            vec![o("validation.fault={kind=\"flip_edge_sign\", edge=99}")],
        ] {
            assert!(ExperimentConfig::from_toml_with_overrides(TV, &bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn explicit_recipe_and_fault() {
        let text = r#"
model = "fermi_hubbard"
mapping = "aux"
[parameters]
j = 1.0
u = 0.5
[lattice]
lx = 2
ly = 2
[validation]
fault = { kind = "flip_edge_sign", edge = 1 }
[[initial_state.steps]]
op = "pair_create"
a = { x = 0, y = 0 }
b = { x = 1, y = 0 }
spin = "up"
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.mapping_kind().unwrap(), MappingKind::AuxiliaryParity);
        assert_eq!(cfg.recipe().unwrap().steps.len(), 1);
        assert_eq!(cfg.validation.fault, Some(Fault::FlipEdgeSign { edge: 1 }));
    }
}
