//! JSON scenarios: model selection, path, requested computations and the
//! machine-readable report.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eigenbundle::{track_branch, SpectralTolerances};
use crate::error::{Error, Result};
use crate::gauge::{
    classify_bundle, eigenframe_section, planar_section, rotate_to_pole_section, ClassifyOptions, LocalSection, Pole,
    TopologyReport,
};
use crate::geometry::{make_path, PathPreset};
use crate::models::{
    make_lambda_system, make_planar_spin, make_spin_dipole, BranchDescriptor, HamiltonianFamily, ParameterPoint,
    SharedModel, Spin, TabulatedModel, TabulatedSpec,
};
use crate::path::ParameterPath;
use crate::transport::{connection_at, connection_csv, holonomy, HolonomyResult, Method, TransportOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Nodes { nodes: Vec<Vec<f64>> },
    Preset(PathPreset),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Ode,
    Wilson,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Holonomy,
    Topology,
    ConnectionCsv,
    TrackCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub gap_rel: f64,
    pub degeneracy_rel: f64,
    pub richardson_tol: f64,
    pub max_refinements: usize,
    pub equator_samples: usize,
    pub fd_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SpectralTolerances::default();
        let t = TransportOptions::default();
        Self {
            gap_rel: s.gap_rel,
            degeneracy_rel: s.degeneracy_rel,
            richardson_tol: t.richardson_tol,
            max_refinements: t.max_refinements,
            equator_samples: ClassifyOptions::default().samples,
            fd_step: None,
        }
    }
}

impl Tolerances {
    pub fn spectral(&self) -> SpectralTolerances {
        SpectralTolerances { gap_rel: self.gap_rel, degeneracy_rel: self.degeneracy_rel }
    }
}

fn default_method() -> MethodChoice {
    MethodChoice::Ode
}
fn default_steps() -> usize {
    1024
}
fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Holonomy]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub branch: String,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default = "default_method")]
    pub method: MethodChoice,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Schema("steps must be at least 2".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::Schema("outputs must not be empty".into()));
        }
        let needs_path = self.outputs.iter().any(|o| *o != OutputKind::Topology);
        if needs_path && self.path.is_none() {
            return Err(Error::Schema("a path is required for holonomy, connection_csv and track_csv".into()));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinParams {
    s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanarParams {
    s: f64,
    #[serde(rename = "J")]
    j: i64,
    #[serde(default = "one")]
    eps: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileParams {
    file: String,
}

fn params<T: for<'de> Deserialize<'de>>(spec: &ModelSpec) -> Result<T> {
    serde_json::from_value(spec.params.clone()).map_err(|e| Error::Schema(format!("model `{}` params: {e}", spec.name)))
}

pub fn build_model(spec: &ModelSpec) -> Result<SharedModel> {
    match spec.name.as_str() {
        "spin_dipole" => {
            let p: SpinParams = params(spec)?;
            Ok(Arc::new(make_spin_dipole(Spin::new(p.s)?)))
        }
        "lambda_system" => {
            if spec.params.as_object().is_some_and(|o| !o.is_empty()) {
                return Err(Error::Schema("lambda_system takes no params".into()));
            }
            Ok(Arc::new(make_lambda_system()))
        }
        "planar_spin" => {
            let p: PlanarParams = params(spec)?;
            Ok(Arc::new(make_planar_spin(Spin::new(p.s)?, p.j, p.eps)?))
        }
        "tabulated" => {
            let table: TabulatedSpec = match params::<FileParams>(spec) {
                Ok(f) => serde_json::from_str(&std::fs::read_to_string(&f.file)?)?,
                Err(_) => params(spec)?,
            };
            Ok(Arc::new(TabulatedModel::new(table)?))
        }
        other => Err(Error::Schema(format!("unknown model `{other}`"))),
    }
}

pub fn build_path(spec: &PathSpec) -> Result<ParameterPath> {
    match spec {
        PathSpec::Nodes { nodes } => ParameterPath::from_nodes(nodes.iter().cloned().map(ParameterPoint).collect()),
        PathSpec::Preset(p) => make_path(p),
    }
}

/// Natural section for connection export: rotate-to-pole (north patch),
/// the planar global section, or the gauge-fixed eigenframe.
pub fn default_section(
    model: &SharedModel,
    branch: &BranchDescriptor,
    tol: &SpectralTolerances,
) -> Result<LocalSection> {
    if model.rotation().is_some() {
        rotate_to_pole_section(Arc::clone(model), branch, Pole::North, tol)
    } else if model.planar().is_some() {
        planar_section(Arc::clone(model), branch, tol)
    } else {
        Ok(eigenframe_section(Arc::clone(model), branch, tol))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holonomy: Option<Vec<HolonomyResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connection_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub berry_core: String,
    pub schema: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { berry_core: env!("CARGO_PKG_VERSION").into(), schema: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub results: Results,
    pub versions: Versions,
    pub timing: Timing,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Execute every requested output of a validated scenario.
pub fn execute(scenario: &Scenario) -> Result<Report> {
    let clock = Instant::now();
    let model = build_model(&scenario.model)?;
    let branch = model.branch(&scenario.branch)?;
    let tol = scenario.tolerances;
    let spectral = tol.spectral();
    let path = scenario.path.as_ref().map(build_path).transpose()?;
    if let Some(p) = &path {
        if p.dim() != model.param_dim() {
            return Err(Error::Schema(format!(
                "path dimension {} does not match model parameter dimension {}",
                p.dim(),
                model.param_dim()
            )));
        }
    }
    let mut results = Results::default();
    let opts = TransportOptions {
        steps: scenario.steps,
        richardson_tol: tol.richardson_tol,
        max_refinements: tol.max_refinements,
        spectral,
    };
    for kind in &scenario.outputs {
        match kind {
            OutputKind::Holonomy => {
                let p = path.as_ref().expect("validated");
                let methods: &[Method] = match scenario.method {
                    MethodChoice::Ode => &[Method::Ode],
                    MethodChoice::Wilson => &[Method::Wilson],
                    MethodChoice::Both => &[Method::Ode, Method::Wilson],
                };
                let hs = methods
                    .iter()
                    .map(|&m| holonomy(model.as_ref(), p, &branch, m, &opts))
                    .collect::<Result<Vec<_>>>()?;
                results.holonomy = Some(hs);
            }
            OutputKind::Topology => {
                let copts = ClassifyOptions { samples: tol.equator_samples, spectral, ..Default::default() };
                results.topology = Some(classify_bundle(&model, &branch, &copts)?);
            }
            OutputKind::ConnectionCsv => {
                let p = path.as_ref().expect("validated");
                let section = default_section(&model, &branch, &spectral)?;
                let nodes = p.nodes();
                let count = if p.is_closed() { nodes.len() - 1 } else { nodes.len() };
                let samples = nodes[..count]
                    .iter()
                    .map(|b| connection_at(&section, b, tol.fd_step))
                    .collect::<Result<Vec<_>>>()?;
                results.connection_csv = Some(connection_csv(&samples));
            }
            OutputKind::TrackCsv => {
                let p = path.as_ref().expect("validated");
                results.track_csv = Some(track_branch(model.as_ref(), p, &branch, &spectral)?.to_csv());
            }
        }
    }
    Ok(Report {
        scenario: scenario.clone(),
        results,
        versions: Versions::default(),
        timing: Timing { elapsed_ms: clock.elapsed().as_secs_f64() * 1e3 },
    })
}

/// Process exit code for an error: 2 schema, 3 domain, 4 numerical.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_domain() {
        3
    } else if err.is_numerical() {
        4
    } else {
        match err {
            Error::NonUnitary { .. }
            | Error::NonHermitianInput { .. }
            | Error::NonAntiHermitian { .. }
            | Error::NonFinite => 4,
            _ => 2,
        }
    }
}

/// Parse and run a scenario document.
pub fn run_scenario_str(text: &str) -> Result<Report> {
    execute(&Scenario::from_json(text)?)
}

pub fn run_scenario(file: &std::path::Path) -> Result<Report> {
    run_scenario_str(&std::fs::read_to_string(file)?)
}

/// One row of the zoo listing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZooEntry {
    pub name: String,
    pub params: Vec<ParamDoc>,
    pub param_dim: usize,
    pub base: crate::models::BaseTopology,
    pub branches: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDoc {
    pub name: String,
    pub doc: String,
    pub default: Option<serde_json::Value>,
}

fn param(name: &str, doc: &str, default: Option<serde_json::Value>) -> ParamDoc {
    ParamDoc { name: name.into(), doc: doc.into(), default }
}

pub fn list_models() -> Vec<ZooEntry> {
    let spin = make_spin_dipole(Spin::new(0.5).expect("valid spin"));
    let lambda = make_lambda_system();
    let planar = make_planar_spin(Spin::new(0.5).expect("valid spin"), 1, 1.0).expect("valid model");
    let entry = |m: &dyn HamiltonianFamily, params: Vec<ParamDoc>, branches: &str| ZooEntry {
        name: m.name().into(),
        params,
        param_dim: m.param_dim(),
        base: m.base_topology(),
        branches: branches.into(),
        description: m.description(),
    };
    vec![
        entry(
            &spin,
            vec![param("s", "spin, a positive multiple of 1/2", None)],
            "one per projection m = -s..s, labelled like \"+1/2\" or \"1\"",
        ),
        entry(&lambda, vec![], "minus, dark (K=2), plus"),
        entry(
            &planar,
            vec![
                param("s", "spin, a positive multiple of 1/2", None),
                param("J", "winding index, 1 or 2", None),
                param("eps", "nonzero coupling", Some(serde_json::json!(1.0))),
            ],
            "one per projection m = -s..s along the in-plane field",
        ),
    ]
}

pub fn models_text() -> String {
    let mut out = String::new();
    for e in list_models() {
        out.push_str(&format!("{}  (params: {}, base: {:?})\n", e.name, e.param_dim, e.base));
        out.push_str(&format!("    {}\n", e.description));
        for p in &e.params {
            let d = p.default.as_ref().map(|v| format!(" [default {v}]")).unwrap_or_default();
            out.push_str(&format!("    param {}: {}{}\n", p.name, p.doc, d));
        }
        out.push_str(&format!("    branches: {}\n", e.branches));
    }
    out.push_str("user models: name \"tabulated\" with inline table params or {\"file\": PATH}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_defaults_and_round_trip() {
        let s = Scenario::from_json(
            r#"{"model": {"name": "spin_dipole", "params": {"s": 0.5}}, "branch": "+1/2",
                "path": {"preset": "spherical_cap", "params": {"theta": 1.5707963267948966}}}"#,
        )
        .unwrap();
        assert_eq!(s.method, MethodChoice::Ode);
        assert_eq!(s.steps, 1024);
        let echo = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&echo).unwrap(), s);
    }

    #[test]
    fn explicit_nodes_parse() {
        let s = Scenario::from_json(
            r#"{"model": {"name": "planar_spin", "params": {"s": 0.5, "J": 1}}, "branch": "+1/2",
                "path": {"nodes": [[1,0],[0,1],[-1,0],[0,-1],[1,0]]}, "method": "both"}"#,
        )
        .unwrap();
        assert!(matches!(s.path, Some(PathSpec::Nodes { .. })));
    }

    #[test]
    fn schema_errors() {
        assert!(Scenario::from_json("{").is_err());
        assert!(Scenario::from_json(r#"{"model": {"name": "x"}, "branch": "a", "bogus": 1}"#).is_err());
        let e = run_scenario_str(r#"{"model": {"name": "nope"}, "branch": "a", "outputs": ["topology"]}"#).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e =
            run_scenario_str(r#"{"model": {"name": "lambda_system"}, "branch": "bright", "outputs": ["topology"]}"#)
                .unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn zoo_listing() {
        let names: Vec<String> = list_models().into_iter().map(|e| e.name).collect();
        assert_eq!(names, ["spin_dipole", "lambda_system", "planar_spin"]);
        assert!(models_text().contains("lambda_system"));
    }
}
