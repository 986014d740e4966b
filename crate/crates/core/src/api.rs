//! High-level constructors and fitted-model queries.
//!
//! `mixdistreg` is the general entry point; `sammer` repeats one family,
//! and `inflareg` (with `zinreg`, `oinreg`, `zoinreg`) prepends point masses
//! to a single family. Each constructor has a `*_spec` twin that only builds
//! the [`MixtureSpec`].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::deepnet::NetworkDecl;
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::mixture::{assemble, make_mixture, ComponentSpec, MixtureModel, MixtureSpec, MixtureStats, SegmentKind};
use crate::train::{train, History, TrainConfig};

/// A trained model with its loss history. Queries never mutate it.
#[derive(Debug, Clone)]
pub struct FittedModel {
    model: MixtureModel,
    history: History,
    config: TrainConfig,
}

impl FittedModel {
    pub fn new(model: MixtureModel, history: History, config: TrainConfig) -> FittedModel {
        FittedModel { model, history, config }
    }

    pub fn model(&self) -> &MixtureModel {
        &self.model
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn spec(&self) -> &MixtureSpec {
        self.model.spec()
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn coef(&self) -> Coefficients {
        coefficients(&self.model)
    }

    /// Expected response per component on `data`, `N × M`.
    pub fn component_means(&self, data: &Dataset) -> Result<Array2<f64>> {
        self.model.on_data(data)?.component_means()
    }

    /// Posterior component probabilities on `data`, which must carry the
    /// response.
    pub fn get_pis(&self, data: &Dataset) -> Result<Array2<f64>> {
        self.model.on_data(data)?.posteriors()
    }

    /// Gating weights on `data`.
    pub fn gates(&self, data: &Dataset) -> Result<Array2<f64>> {
        let m = self.model.on_data(data)?;
        m.gating_weights(&m.all_rows())
    }

    pub fn get_stats(&self, data: &Dataset) -> Result<MixtureStats> {
        self.model.on_data(data)?.mixture_stats()
    }

    /// Penalized mean NLL on `data`.
    pub fn nll(&self, data: &Dataset) -> Result<f64> {
        let m = self.model.on_data(data)?;
        m.penalized_nll(&m.all_rows())
    }
}

/// Coefficients of one structured term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefGroup {
    /// 1-based component index.
    pub component: usize,
    /// Parameter name, or `"gate"` for gating coefficients.
    pub parameter: String,
    pub term: String,
    pub values: Vec<f64>,
}

/// Structured coefficients grouped by component, parameter and term.
/// Network weights are not listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub groups: Vec<CoefGroup>,
    /// The gating reference: its logit is fixed at 0 and has no coefficients.
    pub reference_component: usize,
}

impl Coefficients {
    pub fn get(&self, component: usize, parameter: &str, term: &str) -> Option<&[f64]> {
        self.groups
            .iter()
            .find(|g| g.component == component && g.parameter == parameter && g.term == term)
            .map(|g| g.values.as_slice())
    }

    pub fn gating(&self) -> impl Iterator<Item = &CoefGroup> {
        self.groups.iter().filter(|g| g.parameter == "gate")
    }
}

pub fn coefficients(model: &MixtureModel) -> Coefficients {
    let groups = model
        .segments()
        .iter()
        .filter(|s| s.kind == SegmentKind::Coefficients)
        .map(|s| CoefGroup {
            component: s.component,
            parameter: s.parameter.clone(),
            term: s.term.clone(),
            values: model.theta()[s.range()].to_vec(),
        })
        .collect();
    Coefficients { groups, reference_component: 1 }
}

/// Spec for components `families` with formulas listed component by
/// component, parameter by parameter.
pub fn mixdistreg_spec(
    families: &[Family],
    nr_comps: usize,
    formulas: &[Formula],
    gating: Option<Formula>,
    networks: Vec<NetworkDecl>,
) -> Result<MixtureSpec> {
    if nr_comps != families.len() {
        return Err(Error::Spec(format!(
            "nr_comps is {nr_comps} but {} families were given",
            families.len()
        )));
    }
    let mut rest = formulas;
    let mut components = Vec::with_capacity(families.len());
    for (m, &family) in families.iter().enumerate() {
        let k = family.n_params();
        if rest.len() < k {
            return Err(Error::Spec(format!(
                "component {} ({}) needs {k} formulas ({}), only {} left",
                m + 1,
                family.name(),
                family.param_names().join(", "),
                rest.len()
            )));
        }
        components.push(ComponentSpec::new(family, rest[..k].to_vec()));
        rest = &rest[k..];
    }
    if !rest.is_empty() {
        return Err(Error::Spec(format!(
            "{} formulas left over after the last component",
            rest.len()
        )));
    }
    MixtureSpec::new(components, gating.unwrap_or_else(Formula::intercept_only), networks)
}

/// Spec with `family` repeated `nr_comps` times, each component using the
/// same `formulas`.
pub fn sammer_spec(family: Family, nr_comps: usize, formulas: &[Formula]) -> Result<MixtureSpec> {
    if nr_comps == 0 {
        return Err(Error::EmptyMixture);
    }
    let families = vec![family; nr_comps];
    let all: Vec<Formula> = (0..nr_comps).flat_map(|_| formulas.iter().cloned()).collect();
    if formulas.len() != family.n_params() {
        return Err(Error::Spec(format!(
            "{} needs {} formulas ({}), got {}",
            family.name(),
            family.n_params(),
            family.param_names().join(", "),
            formulas.len()
        )));
    }
    mixdistreg_spec(&families, nr_comps, &all, None, Vec::new())
}

/// Point masses at `values` followed by `family`.
pub fn inflareg_spec(family: Family, values: &[f64], formulas: &[Formula]) -> Result<MixtureSpec> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Spec(format!("inflation value {v} is not finite")));
        }
        if values[..i].contains(&v) {
            return Err(Error::DuplicateInflation(v));
        }
    }
    let families = make_mixture(&[family], values)?;
    mixdistreg_spec(&families, families.len(), formulas, None, Vec::new())
}

pub fn zinreg_spec(family: Family, formulas: &[Formula]) -> Result<MixtureSpec> {
    inflareg_spec(family, &[0.0], formulas)
}

pub fn oinreg_spec(family: Family, formulas: &[Formula]) -> Result<MixtureSpec> {
    inflareg_spec(family, &[1.0], formulas)
}

pub fn zoinreg_spec(family: Family, formulas: &[Formula]) -> Result<MixtureSpec> {
    inflareg_spec(family, &[0.0, 1.0], formulas)
}

/// Assembles `spec` on `data` (seeded by `config.seed`) and trains it.
pub fn fit(spec: &MixtureSpec, data: &Dataset, config: &TrainConfig) -> Result<FittedModel> {
    config.validate()?;
    let mut model = assemble(spec, data, config.seed)?;
    let history = train(&mut model, config)?;
    Ok(FittedModel::new(model, history, config.clone()))
}

#[allow(clippy::too_many_arguments)]
pub fn mixdistreg(
    data: &Dataset,
    families: &[Family],
    nr_comps: usize,
    formulas: &[Formula],
    gating: Option<Formula>,
    networks: Vec<NetworkDecl>,
    config: &TrainConfig,
) -> Result<FittedModel> {
    fit(&mixdistreg_spec(families, nr_comps, formulas, gating, networks)?, data, config)
}

pub fn sammer(
    data: &Dataset,
    family: Family,
    nr_comps: usize,
    formulas: &[Formula],
    config: &TrainConfig,
) -> Result<FittedModel> {
    fit(&sammer_spec(family, nr_comps, formulas)?, data, config)
}

pub fn inflareg(
    data: &Dataset,
    family: Family,
    values: &[f64],
    formulas: &[Formula],
    config: &TrainConfig,
) -> Result<FittedModel> {
    fit(&inflareg_spec(family, values, formulas)?, data, config)
}

pub fn zinreg(data: &Dataset, family: Family, formulas: &[Formula], config: &TrainConfig) -> Result<FittedModel> {
    fit(&zinreg_spec(family, formulas)?, data, config)
}

pub fn oinreg(data: &Dataset, family: Family, formulas: &[Formula], config: &TrainConfig) -> Result<FittedModel> {
    fit(&oinreg_spec(family, formulas)?, data, config)
}

pub fn zoinreg(data: &Dataset, family: Family, formulas: &[Formula], config: &TrainConfig) -> Result<FittedModel> {
    fit(&zoinreg_spec(family, formulas)?, data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::PredictorId;
    use crate::simulate::{simulate, Scenario};
    use crate::train::OptimizerConfig;
    use indexmap::IndexMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn f(s: &str) -> Formula {
        s.parse().unwrap()
    }

    #[test]
    fn sammer_equals_explicit_mixdistreg() {
        let forms = [f("~1 + x + xsq"), f("~1")];
        let a = sammer_spec(Family::Normal, 2, &forms).unwrap();
        let b = mixdistreg_spec(
            &[Family::Normal, Family::Normal],
            2,
            &[f("~1 + x + xsq"), f("~1"), f("~1 + x + xsq"), f("~1")],
            Some(f("~1")),
            vec![],
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(sammer_spec(Family::Normal, 1, &forms).unwrap().n_components(), 1);
    }

    #[test]
    fn sammer_three_components_segments() {
        let spec = sammer_spec(Family::Normal, 3, &[f("~1 + x + xsq"), f("~1")]).unwrap();
        let sim = simulate(Scenario::Npreg, 20, 0).unwrap();
        let model = assemble(&spec, &sim.to_dataset().unwrap(), 0).unwrap();
        let segs = model.segments();
        let count = |p: &str| segs.iter().filter(|s| s.parameter == p).count();
        assert_eq!(count("mean"), 9);
        assert_eq!(count("scale"), 3);
        assert_eq!(count("gate"), 2);
        for m in 0..3 {
            assert_eq!(model.predictor_segments(PredictorId::Param { component: m, param: 0 }).len(), 3);
        }
        assert_eq!(model.theta().len(), 9 + 3 + 2);
    }

    #[test]
    fn mixed_families() {
        let spec = mixdistreg_spec(
            &[Family::Normal, Family::Laplace],
            2,
            &[f("~1 + x + xsq"), f("~1"), f("~1 + x + xsq"), f("~1")],
            None,
            vec![],
        )
        .unwrap();
        assert_eq!(spec.families(), vec![Family::Normal, Family::Laplace]);
    }

    #[test]
    fn formula_count_errors_name_component() {
        let err = mixdistreg_spec(
            &[Family::Normal, Family::Laplace],
            2,
            &[f("~1"), f("~1"), f("~1")],
            None,
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("component 2 (laplace)"), "{err}");
        assert!(mixdistreg_spec(&[Family::Normal], 2, &[f("~1"), f("~1")], None, vec![]).is_err());
        assert!(mixdistreg_spec(&[Family::Normal], 1, &[f("~1"), f("~1"), f("~1")], None, vec![]).is_err());
        assert!(sammer_spec(Family::Normal, 2, &[f("~1")]).is_err());
    }

    #[test]
    fn inflation_wrappers() {
        let forms = [f("~1 + x"), f("~1")];
        let zin = zinreg_spec(Family::Normal, &forms).unwrap();
        assert_eq!(zin.families(), vec![Family::PointMass { at: 0.0 }, Family::Normal]);
        assert_eq!(zin, inflareg_spec(Family::Normal, &[0.0], &forms).unwrap());
        let zoin = zoinreg_spec(Family::Normal, &forms).unwrap();
        assert_eq!(
            zoin.families(),
            vec![Family::PointMass { at: 0.0 }, Family::PointMass { at: 1.0 }, Family::Normal]
        );
        assert_eq!(zoin, inflareg_spec(Family::Normal, &[0.0, 1.0], &forms).unwrap());
        assert_eq!(oinreg_spec(Family::Normal, &forms).unwrap().families()[0], Family::PointMass { at: 1.0 });
        let neg = inflareg_spec(Family::Normal, &[-1.0], &forms).unwrap();
        assert_eq!(neg.families(), vec![Family::PointMass { at: -1.0 }, Family::Normal]);
        assert_eq!(
            inflareg_spec(Family::Normal, &[0.0, 0.0], &forms),
            Err(Error::DuplicateInflation(0.0))
        );
        assert!(inflareg_spec(Family::Normal, &[f64::NAN], &forms).is_err());
    }

    #[test]
    fn coef_labels_and_gating_pin() {
        let spec = sammer_spec(Family::Normal, 2, &[f("~1 + x"), f("~1")]).unwrap();
        let sim = simulate(Scenario::Npreg, 30, 0).unwrap();
        let model = assemble(&spec, &sim.to_dataset().unwrap(), 0).unwrap();
        let c = coefficients(&model);
        assert_eq!(c.gating().count(), 1);
        assert_eq!(c.gating().next().unwrap().component, 2);
        assert_eq!(c.reference_component, 1);
        // untrained: initialization echoed
        assert_eq!(c.get(1, "mean", "x"), Some(&[0.0][..]));
        let intercept = c.get(1, "mean", "1").unwrap()[0];
        assert_eq!(intercept, model.theta()[model.segments()[0].start]);
        assert_ne!(intercept, 0.0);
    }

    #[test]
    fn intercept_only_normal_recovers_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dist = Normal::new(5.0, 1.0).unwrap();
        let y: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        let data = Dataset::new(IndexMap::new(), y).unwrap();
        let cfg = TrainConfig {
            optimizer: OptimizerConfig::adam(0.05),
            epochs: 30,
            batch_size: 256,
            validation_split: 0.1,
            patience: 10,
            early_stopping: true,
            seed: 1,
        };
        let fitted = sammer(&data, Family::Normal, 1, &[f("~1"), f("~1")], &cfg).unwrap();
        let mu = fitted.coef().get(1, "mean", "1").unwrap()[0];
        assert!((mu - 5.0).abs() < 0.05, "{mu}");
        assert!((mu - ybar).abs() < 0.05);
    }

    #[test]
    fn queries_on_training_data_match_in_sample() {
        let sim = simulate(Scenario::Npreg, 50, 3).unwrap();
        let data = sim.to_dataset().unwrap();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let fitted = sammer(&data, Family::Normal, 2, &[f("~1 + x"), f("~1")], &cfg).unwrap();
        assert_eq!(fitted.component_means(&data).unwrap(), fitted.model().component_means().unwrap());
        let pis = fitted.get_pis(&data).unwrap();
        for row in pis.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-10);
        }
        let stats = fitted.get_stats(&data).unwrap();
        assert_eq!(stats.component_means, fitted.model().component_means().unwrap());
        let mut cols = IndexMap::new();
        cols.insert("xsq".to_string(), sim.xsq.clone());
        let missing = Dataset::new(cols, sim.yn.clone()).unwrap();
        assert!(matches!(fitted.component_means(&missing), Err(Error::MissingColumn(_))));
    }
}
