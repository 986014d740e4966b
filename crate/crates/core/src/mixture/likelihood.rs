use ndarray::{Array2, ArrayView1};

use super::model::{MixtureModel, TermData};
use crate::deepnet::{backward_with, forward_with, ForwardCache};
use crate::distributions::{log_density_grad, log_density_unchecked, Family};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, softmax_into};

/// Objective value and optional gradient on one batch.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BatchEval {
    pub loss: f64,
    pub penalty: f64,
    pub grad: Option<Vec<f64>>,
}

/// Per-row parameter and weight summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureStats {
    /// One `N × k_m` matrix per component.
    pub params: Vec<Array2<f64>>,
    /// Gating weights, `N × M`.
    pub gates: Array2<f64>,
    /// Expected response per component, `N × M`.
    pub component_means: Array2<f64>,
    /// `Σ_m π_m(x) E[Y | m, x]` per row.
    pub mixture_mean: Vec<f64>,
}

struct Forward {
    /// Predictor values per predictor, per batch row.
    eta: Vec<Vec<f64>>,
    /// Network caches per predictor, per term slot.
    caches: Vec<Vec<Option<ForwardCache>>>,
}

fn sorted_rows(rows: &[usize]) -> Vec<usize> {
    let mut r = rows.to_vec();
    r.sort_unstable();
    r
}

impl MixtureModel {
    fn forward(&self, rows: &[usize], keep_cache: bool) -> Result<Forward> {
        let nb = rows.len();
        let mut eta = Vec::with_capacity(self.predictors.len());
        let mut caches = Vec::with_capacity(self.predictors.len());
        for (p, pred) in self.predictors.iter().enumerate() {
            let mut e = vec![0.0; nb];
            let mut pc = Vec::with_capacity(pred.slots.len());
            for (slot, data) in pred.slots.iter().zip(&self.design[p]) {
                let params = &self.theta[self.segments[slot.segment].range()];
                match data {
                    TermData::Block(block) => {
                        let beta = ArrayView1::from(params);
                        for (b, &i) in rows.iter().enumerate() {
                            e[b] += block.matrix.row(i).dot(&beta);
                        }
                        pc.push(None);
                    }
                    TermData::Deep(inputs) => {
                        let arch = slot.net.as_ref().expect("deep slot has an architecture");
                        let x = inputs.select(ndarray::Axis(0), rows);
                        let cache = forward_with(&arch.layers, arch.input_dim, params, &x)?;
                        for (v, o) in e.iter_mut().zip(cache.output()) {
                            *v += o;
                        }
                        pc.push(keep_cache.then_some(cache));
                    }
                }
            }
            eta.push(e);
            caches.push(pc);
        }
        Ok(Forward { eta, caches })
    }

    fn log_gates_row(&self, eta: &[Vec<f64>], b: usize, out: &mut [f64]) {
        for (m, g) in self.gate_predictor.iter().enumerate() {
            out[m] = g.map_or(0.0, |p| eta[p][b]);
        }
        let lse = log_sum_exp(out);
        for v in out.iter_mut() {
            *v -= lse;
        }
    }

    fn params_row(&self, eta: &[Vec<f64>], m: usize, b: usize, out: &mut [f64]) {
        for (k, &p) in self.param_predictor[m].iter().enumerate() {
            out[k] = self.transforms[m][k].apply(eta[p][b]);
        }
    }

    /// `log π_m + log f_m` for every component of batch row `b`.
    fn joint_row(&self, eta: &[Vec<f64>], b: usize, y: f64, params: &mut [f64], out: &mut [f64]) {
        self.log_gates_row(eta, b, out);
        for (m, c) in self.spec.components.iter().enumerate() {
            let k = c.family.n_params();
            self.params_row(eta, m, b, &mut params[..k]);
            let ell = log_density_unchecked(&c.family, &params[..k], y);
            out[m] = if ell == f64::NEG_INFINITY { f64::NEG_INFINITY } else { out[m] + ell };
        }
    }

    fn penalty_total(&self, grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        let mut grad = grad;
        for (p, pred) in self.predictors.iter().enumerate() {
            for (slot, data) in pred.slots.iter().zip(&self.design[p]) {
                if let TermData::Block(block) = data {
                    let range = self.segments[slot.segment].range();
                    total += block.penalty_value(&self.theta[range.clone()]);
                    if let Some(g) = grad.as_deref_mut() {
                        block.add_penalty_grad(&self.theta[range.clone()], &mut g[range]);
                    }
                }
            }
        }
        total
    }

    /// Penalized mean negative log-likelihood on `rows`, optionally with its
    /// exact gradient.
    pub(crate) fn evaluate(&self, rows: &[usize], with_grad: bool) -> Result<BatchEval> {
        if rows.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let rows = sorted_rows(rows);
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_obs()) {
            return Err(Error::Dimension(format!("row {bad} out of range")));
        }
        let nb = rows.len();
        let m_total = self.n_components();
        let fwd = self.forward(&rows, with_grad)?;
        let max_k = self.spec.components.iter().map(|c| c.family.n_params()).max().unwrap_or(0);

        let mut d_eta: Vec<Vec<f64>> = if with_grad {
            fwd.eta.iter().map(|e| vec![0.0; e.len()]).collect()
        } else {
            Vec::new()
        };
        let mut joint = vec![0.0; m_total];
        let mut log_pi = vec![0.0; m_total];
        let mut params = vec![0.0; max_k];
        let mut dparams = vec![0.0; max_k];
        let mut ll_sum = 0.0;
        let scale = 1.0 / nb as f64;

        for (b, &i) in rows.iter().enumerate() {
            let y = self.y[i];
            self.joint_row(&fwd.eta, b, y, &mut params, &mut joint);
            let ll = log_sum_exp(&joint);
            ll_sum += ll;
            if !with_grad {
                continue;
            }
            if !ll.is_finite() {
                return Err(Error::NonFiniteObjective(format!(
                    "log-likelihood of row {i} is {ll}"
                )));
            }
            self.log_gates_row(&fwd.eta, b, &mut log_pi);
            for (m, c) in self.spec.components.iter().enumerate() {
                let r = if joint[m] == f64::NEG_INFINITY { 0.0 } else { (joint[m] - ll).exp() };
                if let Some(p) = self.gate_predictor[m] {
                    d_eta[p][b] = -scale * (r - log_pi[m].exp());
                }
                let k = c.family.n_params();
                if k == 0 || r == 0.0 {
                    continue;
                }
                self.params_row(&fwd.eta, m, b, &mut params[..k]);
                log_density_grad(&c.family, &params[..k], y, &mut dparams[..k]);
                for (kk, &p) in self.param_predictor[m].iter().enumerate() {
                    let dtheta = self.transforms[m][kk].derivative(fwd.eta[p][b]);
                    d_eta[p][b] = -scale * r * dparams[kk] * dtheta;
                }
            }
        }

        let nll = -ll_sum * scale;
        let mut grad = with_grad.then(|| vec![0.0; self.theta.len()]);
        if let Some(g) = grad.as_mut() {
            for (p, pred) in self.predictors.iter().enumerate() {
                for (s, (slot, data)) in pred.slots.iter().zip(&self.design[p]).enumerate() {
                    let range = self.segments[slot.segment].range();
                    match data {
                        TermData::Block(block) => {
                            let out = &mut g[range];
                            for (b, &i) in rows.iter().enumerate() {
                                let d = d_eta[p][b];
                                if d == 0.0 {
                                    continue;
                                }
                                for (o, x) in out.iter_mut().zip(block.matrix.row(i)) {
                                    *o += d * x;
                                }
                            }
                        }
                        TermData::Deep(_) => {
                            let arch = slot.net.as_ref().expect("deep slot has an architecture");
                            let cache = fwd.caches[p][s].as_ref().expect("cache kept for gradient");
                            let ng = backward_with(
                                &arch.layers,
                                arch.input_dim,
                                &self.theta[range.clone()],
                                cache,
                                &d_eta[p],
                            )?;
                            for (o, v) in g[range].iter_mut().zip(&ng.params) {
                                *o += v;
                            }
                        }
                    }
                }
            }
        }
        let penalty = self.penalty_total(grad.as_deref_mut());
        Ok(BatchEval { loss: nll + penalty, penalty, grad })
    }

    /// Gating weights `π` for `rows`, one row per entry of `rows`.
    pub fn gating_weights(&self, rows: &[usize]) -> Result<Array2<f64>> {
        let fwd = self.forward(rows, false)?;
        let m_total = self.n_components();
        let mut out = Array2::zeros((rows.len(), m_total));
        let mut buf = vec![0.0; m_total];
        for b in 0..rows.len() {
            self.log_gates_row(&fwd.eta, b, &mut buf);
            for m in 0..m_total {
                out[[b, m]] = buf[m].exp();
            }
        }
        Ok(out)
    }

    /// Transformed parameters of every component for `rows`.
    pub fn component_params(&self, rows: &[usize]) -> Result<Vec<Array2<f64>>> {
        let fwd = self.forward(rows, false)?;
        Ok(self
            .spec
            .components
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let k = c.family.n_params();
                let mut mat = Array2::zeros((rows.len(), k));
                let mut buf = vec![0.0; k];
                for b in 0..rows.len() {
                    self.params_row(&fwd.eta, m, b, &mut buf);
                    for kk in 0..k {
                        mat[[b, kk]] = buf[kk];
                    }
                }
                mat
            })
            .collect())
    }

    /// Mixture log-likelihood of observation `i`.
    pub fn log_likelihood_obs(&self, i: usize) -> Result<f64> {
        Ok(self.log_joint(&[i])?.1[0])
    }

    /// Per-row `log π_m + log f_m` and the row log-likelihoods.
    fn log_joint(&self, rows: &[usize]) -> Result<(Array2<f64>, Vec<f64>)> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_obs()) {
            return Err(Error::Dimension(format!("row {bad} out of range")));
        }
        let fwd = self.forward(rows, false)?;
        let m_total = self.n_components();
        let max_k = self.spec.components.iter().map(|c| c.family.n_params()).max().unwrap_or(0);
        let mut params = vec![0.0; max_k];
        let mut joint = vec![0.0; m_total];
        let mut out = Array2::zeros((rows.len(), m_total));
        let mut ll = Vec::with_capacity(rows.len());
        for (b, &i) in rows.iter().enumerate() {
            self.joint_row(&fwd.eta, b, self.y[i], &mut params, &mut joint);
            ll.push(log_sum_exp(&joint));
            for m in 0..m_total {
                out[[b, m]] = joint[m];
            }
        }
        Ok((out, ll))
    }

    /// `-(1/|rows|) Σ log L_i` plus smoothing and L1 penalties.
    pub fn penalized_nll(&self, rows: &[usize]) -> Result<f64> {
        Ok(self.evaluate(rows, false)?.loss)
    }

    /// Total penalty at the current parameters.
    pub fn penalty(&self) -> f64 {
        self.penalty_total(None)
    }

    /// Posterior component probabilities for every attached observation.
    pub fn posteriors(&self) -> Result<Array2<f64>> {
        let rows = self.all_rows();
        let (joint, ll) = self.log_joint(&rows)?;
        let mut out = joint;
        let mut buf = vec![0.0; self.n_components()];
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            if !ll[i].is_finite() {
                return Err(Error::DegenerateRow { row: i });
            }
            // normalizing the shifted row directly keeps the sum at 1 even
            // when the log-terms are huge in magnitude
            for (b, &a) in buf.iter_mut().zip(row.iter()) {
                *b = a;
            }
            softmax_into(&buf, row.as_slice_mut().expect("rows are contiguous"));
        }
        Ok(out)
    }

    /// Parameters, gating weights, and expected responses per row.
    pub fn mixture_stats(&self) -> Result<MixtureStats> {
        let rows = self.all_rows();
        let params = self.component_params(&rows)?;
        let gates = self.gating_weights(&rows)?;
        let n = rows.len();
        let m_total = self.n_components();
        let mut component_means = Array2::zeros((n, m_total));
        let mut mixture_mean = vec![0.0; n];
        for (m, c) in self.spec.components.iter().enumerate() {
            for i in 0..n {
                let mean = c.family.mean(params[m].row(i).as_slice().unwrap_or(&[]));
                component_means[[i, m]] = mean;
                mixture_mean[i] += gates[[i, m]] * mean;
            }
        }
        Ok(MixtureStats { params, gates, component_means, mixture_mean })
    }

    /// Expected response of every component, `N × M`.
    pub fn component_means(&self) -> Result<Array2<f64>> {
        let rows = self.all_rows();
        let params = self.component_params(&rows)?;
        let mut out = Array2::zeros((rows.len(), self.n_components()));
        for (m, c) in self.spec.components.iter().enumerate() {
            for i in 0..rows.len() {
                out[[i, m]] = match c.family {
                    Family::PointMass { at } => at,
                    _ => params[m][[i, 0]],
                };
            }
        }
        Ok(out)
    }
}
