use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::MixtureSpec;
use crate::data::Dataset;
use crate::deepnet::{init_network, param_count, LayerSpec};
use crate::distributions::{default_transforms, ResponseTransform};
use crate::error::{Error, Result};
use crate::formula::{build_design_with_ranges, variable_ranges, DesignBlock, Formula, Term, VarRanges};
use crate::numerics::sorted_quantile;

/// Which quantity an additive predictor drives. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorId {
    Param { component: usize, param: usize },
    Gate { component: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Coefficients,
    Network,
}

/// A contiguous slice of the flat parameter vector owned by one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// 1-based component number.
    pub component: usize,
    /// Parameter name, or `gate` for gating predictors.
    pub parameter: String,
    pub term: String,
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NetArch {
    pub layers: Vec<LayerSpec>,
    pub input_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TermSlot {
    pub term: Term,
    pub segment: usize,
    pub net: Option<NetArch>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Predictor {
    pub id: PredictorId,
    pub formula: Formula,
    pub slots: Vec<TermSlot>,
}

/// Per-dataset inputs for one term.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TermData {
    Block(DesignBlock),
    Deep(Array2<f64>),
}

/// An assembled mixture model: structure, parameters, and design matrices
/// for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub(crate) spec: MixtureSpec,
    pub(crate) ranges: VarRanges,
    pub(crate) predictors: Vec<Predictor>,
    /// `param_predictor[m][k]` indexes `predictors`.
    pub(crate) param_predictor: Vec<Vec<usize>>,
    /// `None` for the reference component.
    pub(crate) gate_predictor: Vec<Option<usize>>,
    pub(crate) transforms: Vec<Vec<ResponseTransform>>,
    pub(crate) segments: Vec<Segment>,
    pub(crate) theta: Vec<f64>,
    pub(crate) design: Vec<Vec<TermData>>,
    pub(crate) y: Vec<f64>,
}

/// Builds the model for `spec` on `data` and initializes its parameters.
///
/// Coefficients start at zero except the location intercept of component
/// `m`, which starts at the `m/(M+1)` quantile of the response. Networks get
/// Glorot-uniform weights derived from `seed`.
pub fn assemble(spec: &MixtureSpec, data: &Dataset, seed: u64) -> Result<MixtureModel> {
    spec.validate()?;
    let all_formulas = spec
        .components
        .iter()
        .flat_map(|c| c.formulas.iter())
        .chain((spec.n_components() > 1).then_some(&spec.gating));
    let ranges = variable_ranges(all_formulas, data)?;
    let mut model = MixtureModel::skeleton(spec, ranges)?;

    for c in &spec.components {
        if !c.family.is_point_mass() {
            for &y in data.response() {
                c.family.check_support(y)?;
            }
        }
    }

    let mut net_counter = 0u64;
    for p in 0..model.predictors.len() {
        for s in 0..model.predictors[p].slots.len() {
            let slot = &model.predictors[p].slots[s];
            if let Some(arch) = &slot.net {
                let net_seed = seed.wrapping_add((net_counter + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                net_counter += 1;
                let net = init_network(&arch.layers, arch.input_dim, net_seed)?;
                let range = model.segments[slot.segment].range();
                model.theta[range].copy_from_slice(net.params());
            }
        }
    }

    let mut sorted = data.response().to_vec();
    sorted.sort_by(f64::total_cmp);
    let m_total = spec.n_components();
    if !sorted.is_empty() {
        for (m, c) in spec.components.iter().enumerate() {
            let Some(k) = c.family.location_index() else { continue };
            let p = model.param_predictor[m][k];
            let q = sorted_quantile(&sorted, (m + 1) as f64 / (m_total + 1) as f64);
            let Some(eta) = model.transforms[m][k].inverse(q) else { continue };
            if let Some(slot) = model.predictors[p].slots.iter().find(|s| s.term == Term::Intercept) {
                model.theta[model.segments[slot.segment].start] = eta;
            }
        }
    }

    model.attach(data)?;
    Ok(model)
}

impl MixtureModel {
    /// Structure and zero parameters, without data attached.
    pub(crate) fn skeleton(spec: &MixtureSpec, ranges: VarRanges) -> Result<MixtureModel> {
        spec.validate()?;
        let mut predictors = Vec::new();
        let mut param_predictor = Vec::new();
        let mut transforms = Vec::new();
        for (m, c) in spec.components.iter().enumerate() {
            let mut idx = Vec::new();
            for (k, f) in c.formulas.iter().enumerate() {
                idx.push(predictors.len());
                predictors.push((PredictorId::Param { component: m, param: k }, f.clone()));
            }
            param_predictor.push(idx);
            transforms.push(default_transforms(&c.family));
        }
        let mut gate_predictor = vec![None];
        for m in 1..spec.n_components() {
            gate_predictor.push(Some(predictors.len()));
            predictors.push((PredictorId::Gate { component: m }, spec.gating.clone()));
        }

        let mut segments = Vec::new();
        let mut offset = 0;
        let mut built = Vec::new();
        for (id, formula) in predictors {
            let (component, parameter) = match id {
                PredictorId::Param { component, param } => {
                    (component, spec.components[component].family.param_names()[param].to_string())
                }
                PredictorId::Gate { component } => (component, "gate".to_string()),
            };
            let mut slots = Vec::new();
            for term in formula.terms() {
                let (len, kind, net) = match term {
                    Term::Intercept | Term::Linear(_) | Term::L1Linear { .. } => {
                        (1, SegmentKind::Coefficients, None)
                    }
                    Term::Smooth(s) => (s.n_basis, SegmentKind::Coefficients, None),
                    Term::Deep { net, vars } => {
                        let decl = spec
                            .network(net)
                            .ok_or_else(|| Error::UnknownNetwork(net.clone()))?;
                        let arch = NetArch { layers: decl.layers.clone(), input_dim: vars.len() };
                        (param_count(&arch.layers, arch.input_dim), SegmentKind::Network, Some(arch))
                    }
                };
                slots.push(TermSlot { term: term.clone(), segment: segments.len(), net });
                segments.push(Segment {
                    component: component + 1,
                    parameter: parameter.clone(),
                    term: term.to_string(),
                    kind,
                    start: offset,
                    len,
                });
                offset += len;
            }
            built.push(Predictor { id, formula, slots });
        }

        Ok(MixtureModel {
            spec: spec.clone(),
            ranges,
            predictors: built,
            param_predictor,
            gate_predictor,
            transforms,
            segments,
            theta: vec![0.0; offset],
            design: Vec::new(),
            y: Vec::new(),
        })
    }

    /// Rebuilds a model from stored parts, e.g. when loading a saved fit.
    pub fn from_parts(
        spec: &MixtureSpec,
        ranges: VarRanges,
        theta: Vec<f64>,
        data: &Dataset,
    ) -> Result<MixtureModel> {
        let mut model = MixtureModel::skeleton(spec, ranges)?;
        model.set_theta(&theta)?;
        model.attach(data)?;
        Ok(model)
    }

    /// The same fitted model evaluated on new data. Smooth inputs are
    /// clamped to the fit-time range.
    pub fn on_data(&self, data: &Dataset) -> Result<MixtureModel> {
        let mut model = self.clone();
        model.attach(data)?;
        Ok(model)
    }

    fn attach(&mut self, data: &Dataset) -> Result<()> {
        let mut design = Vec::with_capacity(self.predictors.len());
        for p in &self.predictors {
            let (blocks, deep) = build_design_with_ranges(&p.formula, data, &self.ranges)?;
            let mut blocks = blocks.into_iter();
            let mut deep = deep.into_iter();
            let per_term = p
                .slots
                .iter()
                .map(|s| {
                    if s.term.is_deep() {
                        TermData::Deep(deep.next().expect("one input per deep term").inputs)
                    } else {
                        TermData::Block(blocks.next().expect("one block per structured term"))
                    }
                })
                .collect();
            design.push(per_term);
        }
        self.design = design;
        self.y = data.response().to_vec();
        Ok(())
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn ranges(&self) -> &VarRanges {
        &self.ranges
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::Dimension(format!(
                "model has {} parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn transforms(&self) -> &[Vec<ResponseTransform>] {
        &self.transforms
    }

    pub fn n_components(&self) -> usize {
        self.spec.n_components()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n_obs()).collect()
    }

    /// Segments belonging to predictor `id`, in term order.
    pub fn predictor_segments(&self, id: PredictorId) -> Vec<&Segment> {
        self.predictors
            .iter()
            .find(|p| p.id == id)
            .map(|p| p.slots.iter().map(|s| &self.segments[s.segment]).collect())
            .unwrap_or_default()
    }

    /// Design blocks of the structured terms of predictor `id` on the
    /// attached data.
    pub fn design_blocks(&self, id: PredictorId) -> Vec<&DesignBlock> {
        self.predictors
            .iter()
            .position(|p| p.id == id)
            .map(|p| {
                self.design[p]
                    .iter()
                    .filter_map(|d| match d {
                        TermData::Block(b) => Some(b),
                        TermData::Deep(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}
