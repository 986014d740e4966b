//! Mixture specifications, model assembly, and the mixture likelihood.
//!
//! The density of a response given features is
//! `Σ_m π_m(x) f_m(y | θ_m(x))`, with every parameter `θ_{m,k}` and every
//! gating logit driven by its own additive predictor. Component 1 is the
//! gating reference category: its logit is fixed at zero and has no
//! parameters.

mod likelihood;
mod model;

pub use likelihood::MixtureStats;
pub use model::{assemble, MixtureModel, PredictorId, Segment, SegmentKind};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::deepnet::NetworkDecl;
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::formula::{parse_formula, Formula};

/// One mixture component: its family and one formula per family parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub family: Family,
    pub formulas: Vec<Formula>,
}

impl ComponentSpec {
    pub fn new(family: Family, formulas: Vec<Formula>) -> ComponentSpec {
        ComponentSpec { family, formulas }
    }

    pub fn point_mass(at: f64) -> ComponentSpec {
        ComponentSpec { family: Family::PointMass { at }, formulas: Vec::new() }
    }
}

/// A full model declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpecDecl", into = "MixtureSpecDecl")]
pub struct MixtureSpec {
    pub components: Vec<ComponentSpec>,
    pub gating: Formula,
    pub networks: Vec<NetworkDecl>,
}

impl MixtureSpec {
    pub fn new(
        components: Vec<ComponentSpec>,
        gating: Formula,
        networks: Vec<NetworkDecl>,
    ) -> Result<MixtureSpec> {
        let spec = MixtureSpec { components, gating, networks };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn families(&self) -> Vec<Family> {
        self.components.iter().map(|c| c.family).collect()
    }

    pub fn network(&self, name: &str) -> Option<&NetworkDecl> {
        self.networks.iter().find(|n| n.name == name)
    }

    /// Structural checks that do not need data.
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        for (m, c) in self.components.iter().enumerate() {
            if c.formulas.len() != c.family.n_params() {
                return Err(Error::Spec(format!(
                    "component {} ({}) needs {} formulas, got {}",
                    m + 1,
                    c.family.name(),
                    c.family.n_params(),
                    c.formulas.len()
                )));
            }
            if let Some(at) = c.family.point_location() {
                if !at.is_finite() {
                    return Err(Error::Spec(format!(
                        "component {} point mass location must be finite",
                        m + 1
                    )));
                }
            }
        }
        for (i, net) in self.networks.iter().enumerate() {
            net.validate()?;
            if self.networks[..i].iter().any(|o| o.name == net.name) {
                return Err(Error::Spec(format!("network `{}` declared twice", net.name)));
            }
        }
        Ok(())
    }
}

/// Ordered component families: point masses first, in the given order,
/// followed by the parametric families.
pub fn make_mixture(families: &[Family], point_locations: &[f64]) -> Result<Vec<Family>> {
    if families.is_empty() && point_locations.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let mut out: Vec<Family> = point_locations.iter().map(|&at| Family::PointMass { at }).collect();
    out.extend_from_slice(families);
    Ok(out)
}

/// One formula or several summed into the same predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FormulaText {
    One(String),
    Many(Vec<String>),
}

impl FormulaText {
    fn parse(&self) -> Result<Formula> {
        match self {
            FormulaText::One(s) => parse_formula(s),
            FormulaText::Many(list) => {
                let mut it = list.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::Spec("empty formula list".into()))?;
                it.try_fold(parse_formula(first)?, |acc, s| acc.combine(&parse_formula(s)?))
            }
        }
    }
}

/// JSON form of a component: `{"family":"normal","formulas":{"mean":"~1+x","scale":"~1"}}`
/// or `{"family":"pointmass","at":0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDecl {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub formulas: IndexMap<String, FormulaText>,
}

impl ComponentDecl {
    pub fn to_component(&self, index: usize) -> Result<ComponentSpec> {
        let label = |msg: String| Error::Spec(format!("component {} ({}): {msg}", index + 1, self.family));
        let family = match (self.family.as_str(), self.at) {
            ("pointmass", Some(at)) => Family::PointMass { at },
            ("pointmass", None) => return Err(label("point mass needs `at`".into())),
            (name, None) => Family::from_name(name).map_err(|e| label(e.to_string()))?,
            (_, Some(_)) => return Err(label("`at` is only valid for pointmass".into())),
        };
        let names = family.param_names();
        if let Some(extra) = self.formulas.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(label(format!(
                "unknown parameter `{extra}` (expected {})",
                if names.is_empty() { "none".to_string() } else { names.join(", ") }
            )));
        }
        let formulas = names
            .iter()
            .map(|name| {
                let text = self
                    .formulas
                    .get(*name)
                    .ok_or_else(|| label(format!("missing formula for `{name}`")))?;
                text.parse().map_err(|e| label(format!("`{name}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ComponentSpec { family, formulas })
    }

    pub fn from_component(c: &ComponentSpec) -> ComponentDecl {
        ComponentDecl {
            family: c.family.name().to_string(),
            at: c.family.point_location(),
            formulas: c
                .family
                .param_names()
                .iter()
                .zip(&c.formulas)
                .map(|(n, f)| (n.to_string(), FormulaText::One(f.to_string())))
                .collect(),
        }
    }
}

/// JSON form of [`MixtureSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpecDecl {
    pub components: Vec<ComponentDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gating: Option<String>,
    #[serde(default)]
    pub networks: Vec<NetworkDecl>,
}

impl TryFrom<MixtureSpecDecl> for MixtureSpec {
    type Error = Error;

    fn try_from(d: MixtureSpecDecl) -> Result<MixtureSpec> {
        let components = d
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_component(i))
            .collect::<Result<Vec<_>>>()?;
        let gating = match &d.gating {
            Some(g) => parse_formula(g).map_err(|e| Error::Spec(format!("gating: {e}")))?,
            None => Formula::intercept_only(),
        };
        MixtureSpec::new(components, gating, d.networks)
    }
}

impl From<MixtureSpec> for MixtureSpecDecl {
    fn from(s: MixtureSpec) -> MixtureSpecDecl {
        MixtureSpecDecl {
            components: s.components.iter().map(ComponentDecl::from_component).collect(),
            gating: Some(s.gating.to_string()),
            networks: s.networks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_mixture_orders_point_masses_first() {
        let pm = |at| Family::PointMass { at };
        assert_eq!(make_mixture(&[Family::Normal], &[0.0]).unwrap(), vec![pm(0.0), Family::Normal]);
        assert_eq!(
            make_mixture(&[Family::Normal], &[0.0, 1.0]).unwrap(),
            vec![pm(0.0), pm(1.0), Family::Normal]
        );
        assert_eq!(
            make_mixture(&[Family::Normal, Family::Laplace], &[]).unwrap(),
            vec![Family::Normal, Family::Laplace]
        );
        assert_eq!(make_mixture(&[], &[]), Err(Error::EmptyMixture));
    }

    #[test]
    fn formula_count_mismatch_names_component() {
        let err = MixtureSpec::new(
            vec![
                ComponentSpec::new(Family::Normal, vec![Formula::intercept_only(); 2]),
                ComponentSpec::new(Family::Laplace, vec![Formula::intercept_only()]),
            ],
            Formula::intercept_only(),
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("component 2 (laplace)"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{
            "components": [
                {"family": "pointmass", "at": 0},
                {"family": "normal", "formulas": {"scale": "~1 + x", "mean": ["~ 1 + x + xsq", "~1 + dm(x)"]}}
            ],
            "gating": "~1",
            "networks": [{"name": "dm", "layers": [{"units": 4, "activation": "relu"}, {"units": 1, "activation": "identity"}]}]
        }"#;
        let spec: MixtureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.components[0].family, Family::PointMass { at: 0.0 });
        assert_eq!(spec.components[1].formulas[0].to_string(), "~1 + x + xsq + dm(x)");
        assert_eq!(spec.components[1].formulas[1].to_string(), "~1 + x");
        let text = serde_json::to_string(&spec).unwrap();
        let back: MixtureSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn json_rejects_bad_components() {
        let bad = [
            r#"{"components":[{"family":"normal","formulas":{"mean":"~1"}}]}"#,
            r#"{"components":[{"family":"normal","formulas":{"mean":"~1","scale":"~1","shape":"~1"}}]}"#,
            r#"{"components":[{"family":"pointmass"}]}"#,
            r#"{"components":[{"family":"gamma","formulas":{}}]}"#,
            r#"{"components":[{"family":"poisson","formulas":{"rate":"~1"},"colour":1}]}"#,
            r#"{"components":[]}"#,
            r#"{"components":[{"family":"poisson","formulas":{"rate":"~1"}}],"extra":true}"#,
        ];
        for b in bad {
            assert!(serde_json::from_str::<MixtureSpec>(b).is_err(), "{b}");
        }
    }

    #[test]
    fn gating_defaults_to_intercept() {
        let spec: MixtureSpec =
            serde_json::from_str(r#"{"components":[{"family":"poisson","formulas":{"rate":"~1"}}]}"#).unwrap();
        assert_eq!(spec.gating, Formula::intercept_only());
    }
}
