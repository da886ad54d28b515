//! JSON market file: sources, shift model, claim and experiment settings.

use std::path::Path;

use apt_core::market::reparametrize;
use apt_core::scenario::{build_product_space, gauss_quantize};
use apt_core::{AptModel, Asset, AssetSubset, Claim, ScenarioSpace, ShiftVector, SourceMarginal, UtilityFamily};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub spec_version: u32,
    pub sources: Vec<SourceSpec>,
    pub model: ModelSpec,
    #[serde(default)]
    pub claim: Option<ClaimSpec>,
    #[serde(default)]
    pub wealth: Option<f64>,
    #[serde(default)]
    pub utility: Option<UtilitySpec>,
    /// 1-based source indices a strategy may trade; all sources if absent.
    #[serde(default)]
    pub subset: Option<Vec<usize>>,
    /// Truncation levels `n` for the truncation curve.
    #[serde(default)]
    pub truncation: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub moment: Option<MomentSpec>,
    #[serde(default)]
    pub alpha: Option<AlphaSpec>,
}

/// One source law, repeated `count` times.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default)]
    pub points: Option<Vec<f64>>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    #[serde(default)]
    pub gauss_quantize: Option<usize>,
    #[serde(default)]
    pub rademacher: Option<bool>,
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub assets: Option<Vec<AssetSpec>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub mu: f64,
    pub beta_bar: f64,
    #[serde(default)]
    pub loadings: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    #[serde(default)]
    pub series: Option<Vec<f64>>,
    #[serde(default)]
    pub call_on_sum: Option<CallSpec>,
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
    #[serde(default)]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallSpec {
    pub weights: Vec<f64>,
    pub strike: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub family: String,
    #[serde(default)]
    pub param: Option<f64>,
    #[serde(default)]
    pub param_chain: Option<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub gamma: f64,
    pub n_h: usize,
    pub n_mc: usize,
    #[serde(default)]
    pub tail_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSpec {
    #[serde(default)]
    pub directions: Option<usize>,
}

/// A validated market ready for the solvers.
#[derive(Debug, Clone)]
pub struct Market {
    pub marginals: Vec<SourceMarginal>,
    pub space: ScenarioSpace,
    pub shift: ShiftVector,
    pub subset: AssetSubset,
}

impl MarketSpec {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let spec: MarketSpec = serde_json::from_str(text)?;
        if spec.spec_version != SPEC_VERSION {
            return Err(CliError::validation(format!(
                "unsupported spec_version {}, expected {SPEC_VERSION}",
                spec.spec_version
            )));
        }
        Ok(spec)
    }

    pub fn marginals(&self) -> CliResult<Vec<SourceMarginal>> {
        let mut out = Vec::new();
        for (i, s) in self.sources.iter().enumerate() {
            let chosen = [s.points.is_some() || s.probs.is_some(), s.gauss_quantize.is_some(), s.rademacher.is_some()];
            if chosen.iter().filter(|&&c| c).count() != 1 {
                return Err(CliError::validation(format!(
                    "source {}: give exactly one of points/probs, gauss_quantize, rademacher",
                    i + 1
                )));
            }
            let m = if let Some(k) = s.gauss_quantize {
                gauss_quantize(k)?
            } else if let Some(r) = s.rademacher {
                if !r {
                    return Err(CliError::validation(format!("source {}: rademacher must be true", i + 1)));
                }
                SourceMarginal::rademacher()
            } else {
                match (&s.points, &s.probs) {
                    (Some(p), Some(q)) => SourceMarginal::new(p.clone(), q.clone())?,
                    _ => {
                        return Err(CliError::validation(format!(
                            "source {}: points and probs go together",
                            i + 1
                        )))
                    }
                }
            };
            let count = s.count.unwrap_or(1);
            if count == 0 {
                return Err(CliError::validation(format!("source {}: count must be positive", i + 1)));
            }
            out.extend(std::iter::repeat_n(m, count));
        }
        if out.is_empty() {
            return Err(CliError::validation("no sources"));
        }
        Ok(out)
    }

    pub fn shift(&self, n_sources: usize) -> CliResult<ShiftVector> {
        let m = &self.model;
        match (&m.b, &m.assets) {
            (Some(b), None) if m.m.is_none() => {
                if b.len() != n_sources {
                    return Err(CliError::validation(format!(
                        "model.b has {} entries for {n_sources} sources",
                        b.len()
                    )));
                }
                Ok(ShiftVector::new(b.clone())?)
            }
            (None, Some(assets)) => {
                let factors = m.m.ok_or_else(|| CliError::validation("model.m is required with assets"))?;
                let assets = assets
                    .iter()
                    .map(|a| Asset::loaded(a.mu, a.beta_bar, a.loadings.clone()))
                    .collect();
                let model = AptModel::new(factors, assets)?;
                if model.n_assets() != n_sources {
                    return Err(CliError::validation(format!(
                        "model has {} assets for {n_sources} sources",
                        model.n_assets()
                    )));
                }
                Ok(reparametrize(&model))
            }
            _ => Err(CliError::validation("model must be either {b} or {m, assets}")),
        }
    }

    pub fn subset(&self, n_sources: usize) -> CliResult<AssetSubset> {
        match &self.subset {
            None => Ok(AssetSubset::all(n_sources)),
            Some(idx) => {
                if idx.contains(&0) {
                    return Err(CliError::validation("subset indices are 1-based"));
                }
                Ok(AssetSubset::new(idx.iter().map(|i| i - 1).collect(), n_sources)?)
            }
        }
    }

    pub fn market(&self) -> CliResult<Market> {
        let marginals = self.marginals()?;
        let space = build_product_space(&marginals)?;
        let shift = self.shift(marginals.len())?;
        let subset = self.subset(marginals.len())?;
        Ok(Market {
            marginals,
            space,
            shift,
            subset,
        })
    }

    pub fn claim(&self, space: &ScenarioSpace) -> CliResult<Claim> {
        let c = self
            .claim
            .as_ref()
            .ok_or_else(|| CliError::validation("this command needs a claim"))?;
        let given = [c.series.is_some(), c.call_on_sum.is_some(), c.vector.is_some(), c.constant.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::validation(
                "claim must be exactly one of series, call_on_sum, vector, constant",
            ));
        }
        let claim = if let Some(s) = &c.series {
            Claim::series(space, s)?
        } else if let Some(call) = &c.call_on_sum {
            Claim::call_on_sum(space, &call.weights, call.strike)?
        } else if let Some(v) = &c.vector {
            Claim::new(v.clone())?
        } else {
            Claim::constant(space, c.constant.expect("checked above"))?
        };
        if claim.len() != space.len() {
            return Err(CliError::validation(format!(
                "claim vector has {} entries for {} outcomes",
                claim.len(),
                space.len()
            )));
        }
        Ok(claim)
    }

    pub fn wealth(&self) -> CliResult<f64> {
        match self.wealth {
            Some(x) if x.is_finite() => Ok(x),
            Some(_) => Err(CliError::validation("wealth must be finite")),
            None => Err(CliError::validation("this command needs wealth")),
        }
    }

    pub fn utility(&self) -> CliResult<&UtilitySpec> {
        self.utility
            .as_ref()
            .ok_or_else(|| CliError::validation("this command needs a utility"))
    }
}

impl UtilitySpec {
    pub fn family(&self) -> CliResult<UtilityFamily> {
        Ok(self.family.parse()?)
    }

    pub fn param(&self) -> CliResult<f64> {
        match (self.family()?, self.param) {
            (UtilityFamily::Log, p) => Ok(p.unwrap_or(1.0)),
            (_, Some(p)) => Ok(p),
            (_, None) => Err(CliError::validation("utility.param is required")),
        }
    }
}
