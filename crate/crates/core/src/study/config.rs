//! JSON run configuration.
//!
//! ```json
//! {"dim": 1, "extents": [1.0], "N": 2049, "M": 256, "My": 256,
//!  "eps_list": [0.125, 0.0625],
//!  "coefficient": {"kind": "catalog", "id": "cosine1d", "base": 2, "amp": 1, "freq": 1},
//!  "source": {"kind": "constant", "value": 1.0},
//!  "cg_tol": 1e-10, "out": "report.json"}
//! ```

use serde::{Deserialize, Serialize};

use crate::cell_problems::DEFAULT_CG_TOL;
use crate::coefficients::{CoefficientField, CoefficientKind, Expr, Profile};
use crate::error::{HomogError, Result};
use crate::pde_solvers::{ProblemSpec, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// `catalog` or `expr`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<Profile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// `constant`, `sine_product` or `expr`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

fn default_tol() -> f64 {
    DEFAULT_CG_TOL
}

/// The configuration document as written; echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Defaults to the number of cell nodes, `M^dim`.
    #[serde(rename = "My", default, skip_serializing_if = "Option::is_none")]
    pub my: Option<usize>,
    pub eps_list: Vec<f64>,
    pub coefficient: CoefficientConfig,
    pub source: SourceConfig,
    #[serde(default = "default_tol")]
    pub cg_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn need<T: Copy>(v: Option<T>, key: &str, id: &str) -> Result<T> {
    v.ok_or_else(|| HomogError::Config(format!("`{id}` needs parameter `{key}`")))
}

fn profile(c: &CoefficientConfig, id: &str) -> Result<Profile> {
    Ok(Profile {
        base: need(c.base, "base", id)?,
        amp: need(c.amp, "amp", id)?,
        freq: c.freq.unwrap_or(1),
    })
}

fn parse_expr(text: &str) -> Result<Expr> {
    Expr::parse(text)
}

impl CoefficientConfig {
    pub fn to_kind(&self) -> Result<CoefficientKind> {
        match self.kind.as_str() {
            "expr" => {
                let text = self
                    .text
                    .clone()
                    .ok_or_else(|| HomogError::Config("expr coefficient needs `text`".into()))?;
                let expr = parse_expr(&text)?;
                Ok(CoefficientKind::Expression { text, expr })
            }
            "catalog" => {
                let id = self
                    .id
                    .as_deref()
                    .ok_or_else(|| HomogError::Config("catalog coefficient needs `id`".into()))?;
                match id {
                    "constant" => Ok(CoefficientKind::Constant {
                        value: need(self.value, "value", id)?,
                    }),
                    "cosine1d" => Ok(CoefficientKind::Cosine1d(profile(self, id)?)),
                    "laminate2d" => Ok(CoefficientKind::Laminate2d(profile(self, id)?)),
                    "product" => Ok(CoefficientKind::Product(
                        self.profiles
                            .clone()
                            .ok_or_else(|| HomogError::Config("`product` needs `profiles`".into()))?,
                    )),
                    "checkerboard_smooth" => Ok(CoefficientKind::CheckerboardSmooth {
                        base: need(self.base, "base", id)?,
                        amp: need(self.amp, "amp", id)?,
                    }),
                    other => Err(HomogError::Config(format!(
                        "unknown catalog id `{other}` (expected constant, cosine1d, laminate2d, \
                         product or checkerboard_smooth)"
                    ))),
                }
            }
            other => Err(HomogError::Config(format!(
                "unknown coefficient kind `{other}` (expected catalog or expr)"
            ))),
        }
    }
}

impl SourceConfig {
    pub fn to_source(&self) -> Result<Source> {
        match self.kind.as_str() {
            "constant" => Ok(Source::Constant {
                value: need(self.value, "value", "constant")?,
            }),
            "sine_product" => Ok(Source::SineProduct {
                amp: need(self.amp, "amp", "sine_product")?,
            }),
            "expr" => {
                let text = self
                    .text
                    .clone()
                    .ok_or_else(|| HomogError::Config("expr source needs `text`".into()))?;
                let expr = parse_expr(&text)?;
                if expr.uses_y() {
                    return Err(HomogError::Config("source may only depend on x1, x2".into()));
                }
                Ok(Source::Expression { text, expr })
            }
            other => Err(HomogError::Config(format!(
                "unknown source kind `{other}` (expected constant, sine_product or expr)"
            ))),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HomogError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        if !(1..=2).contains(&self.dim) {
            return Err(HomogError::Config(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        let coefficient = CoefficientField::new(self.dim, self.coefficient.to_kind()?, &self.extents)?;
        let spec = ProblemSpec {
            dim: self.dim,
            extents: self.extents.clone(),
            source: self.source.to_source()?,
            coefficient,
            eps_list: self.eps_list.clone(),
            n: self.n,
            m: self.m,
            my: self.my.unwrap_or(self.m.pow(self.dim as u32)),
            cg_tol: self.cg_tol,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ProblemSpec> {
    RunConfig::from_json(text)?.to_spec()
}
