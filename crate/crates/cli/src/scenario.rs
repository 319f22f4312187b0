//! Scenario files: versioned TOML describing a grid, offer distributions, a
//! utility, search parameters and per-command options.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use multisearch_core::statics::ClosureOperator;
use multisearch_core::{
    tabulate_family, Family, FunctionClass, Grid, Pmf, SearchParams, TabulatedUtility, TheoremId, UtilitySource,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PmfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<PmfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSpec>,
    #[serde(default, skip_serializing_if = "OptionsSpec::is_empty")]
    pub options: OptionsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ExpectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<Vec<f64>>,
}

/// Either `masses` in canonical node order or a list of `points`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfSpec {
    /// Own grid; defaults to the scenario grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointMass>>,
    /// Rescale nonnegative weights to sum to one.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMass {
    pub at: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<FunctionClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<ClosureOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl OptionsSpec {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Generated theorem cases for `verify` when no explicit pair is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySource>,
    /// Fixed parameters for every case; drawn per case when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSpec>,
}

/// Expected results; a mismatch is reported as a failed verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl Scenario {
    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: None,
            f: None,
            g: None,
            utility: None,
            params: None,
            options: OptionsSpec::default(),
            suite: None,
            expect: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| anyhow!("invalid TOML: {e}"))?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                anyhow!("{}", inner.message().trim())
            } else {
                anyhow!("{path}: {}", inner.message().trim())
            }
        })?;
        if scenario.schema_version != SCHEMA_VERSION {
            bail!("schema_version: unsupported version {} (expected {SCHEMA_VERSION})", scenario.schema_version);
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let spec = self.grid.as_ref().ok_or_else(|| anyhow!("grid: missing section"))?;
        Ok(Arc::new(Grid::new(spec.axes.clone()).map_err(|e| anyhow!("grid.axes: {e}"))?))
    }

    pub fn pmf(&self, name: &str) -> Result<Pmf> {
        let spec = match name {
            "f" => self.f.as_ref(),
            _ => self.g.as_ref(),
        }
        .ok_or_else(|| anyhow!("{name}: missing section"))?;
        let grid = match &spec.axes {
            Some(axes) => Arc::new(Grid::new(axes.clone()).map_err(|e| anyhow!("{name}.axes: {e}"))?),
            None => self.grid().with_context(|| format!("{name} has no axes of its own"))?,
        };
        match (&spec.masses, &spec.points) {
            (Some(masses), None) => {
                let built = if spec.normalize {
                    Pmf::normalized(grid, masses.clone())
                } else {
                    Pmf::new(grid, masses.clone())
                };
                built.map_err(|e| anyhow!("{name}.masses: {e}"))
            }
            (None, Some(points)) => {
                let pairs: Vec<(Vec<f64>, f64)> = points.iter().map(|p| (p.at.clone(), p.mass)).collect();
                let pmf = Pmf::from_points(Arc::clone(&grid), &pairs).map_err(|e| anyhow!("{name}.points: {e}"))?;
                if spec.normalize {
                    Pmf::normalized(grid, pmf.masses().to_vec()).map_err(|e| anyhow!("{name}.points: {e}"))
                } else {
                    Ok(pmf)
                }
            }
            _ => bail!("{name}: give exactly one of `masses` or `points`"),
        }
    }

    /// Utility tabulated on `grid`.
    pub fn utility_on(&self, grid: &Arc<Grid>) -> Result<TabulatedUtility> {
        let family = self.utility.as_ref().ok_or_else(|| anyhow!("utility: missing section"))?;
        tabulate_family(family, Arc::clone(grid)).map_err(|e| anyhow!("utility: {e}"))
    }
}

/// Values given on the command line; each one replaces the scenario value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
}

pub fn resolve_params(file: Option<&ParamsSpec>, flags: &Overrides, field: &str) -> Result<SearchParams> {
    let file = file.cloned().unwrap_or_default();
    let beta = flags.beta.or(file.beta).ok_or_else(|| anyhow!("{field}.beta: missing (or pass --beta)"))?;
    let gamma = flags.gamma.or(file.gamma).ok_or_else(|| anyhow!("{field}.gamma: missing (or pass --gamma)"))?;
    let tol = flags.tol.or(file.tol).unwrap_or(SearchParams::DEFAULT_TOL);
    SearchParams::with_tol(beta, gamma, tol).map_err(|e| anyhow!("{field}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TemplateKind {
    Solve,
    Dominate,
    Verify,
    Suite,
    Closure,
    Simulate,
}

fn two_point_grid() -> GridSpec {
    GridSpec { axes: vec![vec![0.0, 2.0]] }
}

fn masses(m: &[f64]) -> PmfSpec {
    PmfSpec { masses: Some(m.to_vec()), ..PmfSpec::default() }
}

fn params(beta: f64, gamma: f64) -> ParamsSpec {
    ParamsSpec { beta: Some(beta), gamma: Some(gamma), tol: Some(SearchParams::DEFAULT_TOL) }
}

/// Ready-to-run scenario for each command.
pub fn template(kind: TemplateKind) -> Scenario {
    let mut s = Scenario::empty();
    let identity = Family::Linear { weights: vec![1.0] };
    match kind {
        TemplateKind::Solve => {
            s.grid = Some(two_point_grid());
            s.f = Some(masses(&[0.5, 0.5]));
            s.utility = Some(identity);
            s.params = Some(params(0.5, 0.5));
        }
        TemplateKind::Dominate => {
            s.grid = Some(two_point_grid());
            s.f = Some(masses(&[0.25, 0.75]));
            s.g = Some(masses(&[0.5, 0.5]));
            s.options.class = Some(FunctionClass::Increasing);
        }
        TemplateKind::Verify => {
            s.grid = Some(GridSpec { axes: vec![vec![1.0, 2.0], vec![1.0, 2.0]] });
            s.f = Some(masses(&[0.5, 0.0, 0.0, 0.5]));
            s.g = Some(masses(&[0.25, 0.25, 0.25, 0.25]));
            s.utility = Some(Family::Product);
            s.params = Some(params(0.5, 1.0));
            s.options.theorem = Some(TheoremId::T3);
            s.expect = Some(ExpectSpec { verdict: Some("pass".into()), ..ExpectSpec::default() });
        }
        TemplateKind::Suite => {
            s.options.seed = Some(1);
            s.suite = Some(SuiteSection {
                theorem: Some(TheoremId::T2a),
                shape: Some(vec![6]),
                cases: Some(100),
                transfers: Some(1),
                utility: Some(UtilitySource::RandomMember),
                params: None,
            });
        }
        TemplateKind::Closure => {
            s.options.class = Some(FunctionClass::IncreasingSupermodular);
            s.options.operator = Some(ClosureOperator::Truncate);
            s.options.samples = Some(50);
            s.options.seed = Some(1);
        }
        TemplateKind::Simulate => {
            s.grid = Some(two_point_grid());
            s.f = Some(masses(&[0.5, 0.5]));
            s.utility = Some(identity);
            s.params = Some(params(0.5, 0.5));
            s.options.seed = Some(1);
            s.options.episodes = Some(100_000);
            s.options.thresholds = vec![0.5, 1.5];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_round_trip() {
        for kind in [
            TemplateKind::Solve,
            TemplateKind::Dominate,
            TemplateKind::Verify,
            TemplateKind::Suite,
            TemplateKind::Closure,
            TemplateKind::Simulate,
        ] {
            let s = template(kind);
            let text = s.to_toml().unwrap();
            assert_eq!(Scenario::parse(&text).unwrap(), s, "{kind:?}:\n{text}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = Scenario::parse("schema_version = 1\n[grid]\naxes = [[1.0, \"x\"]]\n").unwrap_err();
        assert!(err.to_string().starts_with("grid.axes"), "{err}");
        let err = Scenario::parse("schema_version = 1\n[params]\nbeta = 0.5\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("params"), "{err}");
        let err = Scenario::parse("schema_version = 2\n").unwrap_err();
        assert!(err.to_string().starts_with("schema_version"), "{err}");
        let err = Scenario::parse("[grid]\naxes = [[1.0]]\n").unwrap_err();
        assert!(err.to_string().contains("schema_version"), "{err}");

        let s = Scenario::parse("schema_version = 1\n[grid]\naxes = [[0.0, 1.0]]\n[f]\nmasses = [0.5, 0.6]\n").unwrap();
        let err = s.pmf("f").unwrap_err();
        assert!(err.to_string().starts_with("f.masses"), "{err}");
        assert!(s.pmf("g").unwrap_err().to_string().starts_with("g: missing"));
        let err = resolve_params(None, &Overrides::default(), "params").unwrap_err();
        assert!(err.to_string().starts_with("params.beta"), "{err}");
    }

    #[test]
    fn points_and_own_axes() {
        let text = r#"
schema_version = 1
[grid]
axes = [[0.0, 1.0]]
[f]
axes = [[0.0, 1.0, 3.0]]
points = [{ at = [3.0], mass = 0.25 }, { at = [0.0], mass = 0.75 }]
"#;
        let s = Scenario::parse(text).unwrap();
        let f = s.pmf("f").unwrap();
        assert_eq!(f.masses(), &[0.75, 0.0, 0.25]);
    }

    #[test]
    fn flags_override_file_params() {
        let file = params(0.5, 1.0);
        let p = resolve_params(Some(&file), &Overrides { gamma: Some(2.0), ..Overrides::default() }, "params").unwrap();
        assert_eq!((p.beta, p.gamma), (0.5, 2.0));
        let err = resolve_params(Some(&file), &Overrides { beta: Some(1.5), ..Overrides::default() }, "params");
        assert!(err.is_err());
    }
}
