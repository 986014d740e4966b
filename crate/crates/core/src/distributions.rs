//! Parametric response families and the transforms that map unconstrained
//! additive predictors onto valid distribution parameters.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::LN_2;
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing a response to a point-mass atom.
pub const POINT_TOLERANCE: f64 = 1e-9;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A response distribution family.
///
/// Serialized with a `family` tag: `{"family":"normal"}` or
/// `{"family":"pointmass","at":0.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Family {
    Normal,
    Laplace,
    Poisson,
    Bernoulli,
    #[serde(rename = "pointmass")]
    PointMass { at: f64 },
}

impl Family {
    /// Parses a lowercase family name. Point masses need a location and are
    /// not constructible from a bare name.
    pub fn from_name(name: &str) -> Result<Family> {
        match name {
            "normal" => Ok(Family::Normal),
            "laplace" => Ok(Family::Laplace),
            "poisson" => Ok(Family::Poisson),
            "bernoulli" => Ok(Family::Bernoulli),
            other => Err(Error::Spec(format!("unknown family `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Laplace => "laplace",
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
            Family::PointMass { .. } => "pointmass",
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// Parameter names in predictor order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Normal => &["mean", "scale"],
            Family::Laplace => &["location", "scale"],
            Family::Poisson => &["rate"],
            Family::Bernoulli => &["prob"],
            Family::PointMass { .. } => &[],
        }
    }

    /// Index of the parameter that carries the component's location, if the
    /// family has an unconstrained location parameter.
    pub fn location_index(&self) -> Option<usize> {
        match self {
            Family::Normal | Family::Laplace => Some(0),
            _ => None,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, Family::PointMass { .. })
    }

    pub fn point_location(&self) -> Option<f64> {
        match self {
            Family::PointMass { at } => Some(*at),
            _ => None,
        }
    }

    /// Expected value of the response given the family parameters.
    pub fn mean(&self, params: &[f64]) -> f64 {
        match self {
            Family::Normal | Family::Laplace | Family::Poisson | Family::Bernoulli => params[0],
            Family::PointMass { at } => *at,
        }
    }

    /// Checks that `y` lies in the support of a discrete family.
    pub fn check_support(&self, y: f64) -> Result<()> {
        let ok = match self {
            Family::Poisson => y >= 0.0 && y.fract() == 0.0,
            Family::Bernoulli => y == 0.0 || y == 1.0,
            Family::Normal | Family::Laplace => y.is_finite(),
            Family::PointMass { .. } => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Support { family: self.name(), value: y })
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        let bad = |reason: String| Error::InvalidParameter { family: self.name(), reason };
        if params.len() != self.n_params() {
            return Err(bad(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        match self {
            Family::Normal | Family::Laplace => {
                if !params[0].is_finite() {
                    return Err(bad(format!("location {} is not finite", params[0])));
                }
                if !(params[1] > 0.0 && params[1].is_finite()) {
                    return Err(bad(format!("scale {} must be positive", params[1])));
                }
            }
            Family::Poisson => {
                if !(params[0] > 0.0 && params[0].is_finite()) {
                    return Err(bad(format!("rate {} must be positive", params[0])));
                }
            }
            Family::Bernoulli => {
                if !(params[0] > 0.0 && params[0] < 1.0) {
                    return Err(bad(format!("probability {} must lie in (0,1)", params[0])));
                }
            }
            Family::PointMass { at } => {
                if !at.is_finite() {
                    return Err(bad(format!("location {at} is not finite")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::PointMass { at } => write!(f, "pointmass({at})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Log-density (or log-mass) of `y` under `family` with parameters `params`.
///
/// Point masses return `0` at the atom and negative infinity elsewhere.
pub fn log_density(family: &Family, params: &[f64], y: f64) -> Result<f64> {
    family.check_params(params)?;
    match family {
        Family::Poisson | Family::Bernoulli => family.check_support(y)?,
        _ => {}
    }
    Ok(log_density_unchecked(family, params, y))
}

/// Unvalidated log-density used on the hot path.
pub(crate) fn log_density_unchecked(family: &Family, params: &[f64], y: f64) -> f64 {
    match family {
        Family::Normal => {
            let (mu, sigma) = (params[0], params[1]);
            let z = (y - mu) / sigma;
            -HALF_LN_2PI - sigma.ln() - 0.5 * z * z
        }
        Family::Laplace => {
            let (mu, b) = (params[0], params[1]);
            -LN_2 - b.ln() - (y - mu).abs() / b
        }
        Family::Poisson => {
            let rate = params[0];
            y * rate.ln() - rate - ln_gamma(y + 1.0)
        }
        Family::Bernoulli => {
            let p = params[0];
            if y == 1.0 {
                p.ln()
            } else {
                (-p).ln_1p()
            }
        }
        Family::PointMass { at } => {
            if (y - at).abs() <= POINT_TOLERANCE {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Writes d log f / d params into `out`.
pub(crate) fn log_density_grad(family: &Family, params: &[f64], y: f64, out: &mut [f64]) {
    match family {
        Family::Normal => {
            let (mu, sigma) = (params[0], params[1]);
            let r = y - mu;
            let s2 = sigma * sigma;
            out[0] = r / s2;
            out[1] = -1.0 / sigma + r * r / (s2 * sigma);
        }
        Family::Laplace => {
            let (mu, b) = (params[0], params[1]);
            let r = y - mu;
            out[0] = sign(r) / b;
            out[1] = -1.0 / b + r.abs() / (b * b);
        }
        Family::Poisson => {
            out[0] = y / params[0] - 1.0;
        }
        Family::Bernoulli => {
            let p = params[0];
            out[0] = if y == 1.0 { 1.0 / p } else { -1.0 / (1.0 - p) };
        }
        Family::PointMass { .. } => {}
    }
}

/// Sign with `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monotone map from an additive predictor to a parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseTransform {
    Identity,
    Softplus,
    Exp,
    Sigmoid,
}

impl ResponseTransform {
    pub fn apply(self, eta: f64) -> f64 {
        match self {
            ResponseTransform::Identity => eta,
            ResponseTransform::Softplus => softplus(eta),
            ResponseTransform::Exp => eta.exp(),
            ResponseTransform::Sigmoid => sigmoid(eta),
        }
    }

    /// Derivative of [`apply`](Self::apply) with respect to `eta`.
    pub fn derivative(self, eta: f64) -> f64 {
        match self {
            ResponseTransform::Identity => 1.0,
            ResponseTransform::Softplus => sigmoid(eta),
            ResponseTransform::Exp => eta.exp(),
            ResponseTransform::Sigmoid => {
                let s = sigmoid(eta);
                s * (1.0 - s)
            }
        }
    }

    /// Predictor value mapping to `theta`, when `theta` is in the codomain.
    pub fn inverse(self, theta: f64) -> Option<f64> {
        match self {
            ResponseTransform::Identity => Some(theta),
            ResponseTransform::Softplus if theta > 0.0 => {
                // log(exp(theta) - 1), rearranged to avoid overflow
                Some(theta + (-(-theta).exp_m1()).ln())
            }
            ResponseTransform::Exp if theta > 0.0 => Some(theta.ln()),
            ResponseTransform::Sigmoid if theta > 0.0 && theta < 1.0 => {
                Some((theta / (1.0 - theta)).ln())
            }
            _ => None,
        }
    }
}

pub fn apply_transform(t: ResponseTransform, eta: f64) -> f64 {
    t.apply(eta)
}

/// Default parameter transforms for `family`, in parameter order.
pub fn default_transforms(family: &Family) -> Vec<ResponseTransform> {
    use ResponseTransform::*;
    match family {
        Family::Normal | Family::Laplace => vec![Identity, Softplus],
        Family::Poisson => vec![Exp],
        Family::Bernoulli => vec![Sigmoid],
        Family::PointMass { .. } => Vec::new(),
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ALL: [Family; 5] = [
        Family::Normal,
        Family::Laplace,
        Family::Poisson,
        Family::Bernoulli,
        Family::PointMass { at: 0.0 },
    ];

    #[test]
    fn parameter_counts() {
        let counts: Vec<usize> = ALL.iter().map(|f| f.n_params()).collect();
        assert_eq!(counts, vec![2, 2, 1, 1, 0]);
        for f in ALL {
            assert_eq!(default_transforms(&f).len(), f.n_params());
        }
    }

    #[test]
    fn log_density_examples() {
        let v = log_density(&Family::Normal, &[0.0, 1.0], 0.0).unwrap();
        assert!((v + 0.918_938_5).abs() < 1e-7);
        let v = log_density(&Family::Laplace, &[0.0, 1.0], 0.0).unwrap();
        assert!((v + 0.693_147_2).abs() < 1e-7);
        // closed form -1/2 log(2 pi) - y^2 / 2
        let expected = -0.5 * (2.0 * PI).ln() - 0.5;
        let v = log_density(&Family::Normal, &[0.0, 1.0], 1.0).unwrap();
        assert!((v - expected).abs() < 1e-14);
        assert!((v + 1.418_938_5).abs() < 1e-7);

        let pm = Family::PointMass { at: 0.0 };
        assert_eq!(log_density(&pm, &[], 0.0).unwrap(), 0.0);
        assert_eq!(log_density(&pm, &[], 0.5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_density(&pm, &[], 5e-10).unwrap(), 0.0);
    }

    #[test]
    fn discrete_densities() {
        // P(Y=2 | rate 3) = 9/2 e^-3
        let v = log_density(&Family::Poisson, &[3.0], 2.0).unwrap();
        assert!((v - (4.5f64.ln() - 3.0)).abs() < 1e-12);
        let v = log_density(&Family::Bernoulli, &[0.25], 1.0).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        let v = log_density(&Family::Bernoulli, &[0.25], 0.0).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_and_support() {
        assert!(matches!(
            log_density(&Family::Normal, &[0.0, 0.0], 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            log_density(&Family::Laplace, &[0.0, -1.0], 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            log_density(&Family::Bernoulli, &[1.0], 1.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            log_density(&Family::Normal, &[0.0], 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            log_density(&Family::Poisson, &[1.0], 1.5),
            Err(Error::Support { .. })
        ));
        assert!(matches!(
            log_density(&Family::Poisson, &[1.0], -1.0),
            Err(Error::Support { .. })
        ));
        assert!(matches!(
            log_density(&Family::Bernoulli, &[0.5], 2.0),
            Err(Error::Support { .. })
        ));
    }

    #[test]
    fn tiny_scale_stays_finite() {
        for fam in [Family::Normal, Family::Laplace] {
            for y in [0.0, 1e-9, 1.0] {
                let v = log_density(&fam, &[0.0, 1e-8], y).unwrap();
                assert!(!v.is_nan(), "{fam} y={y}");
            }
        }
    }

    #[test]
    fn default_transform_choices() {
        use ResponseTransform::*;
        assert_eq!(default_transforms(&Family::Normal), vec![Identity, Softplus]);
        assert_eq!(default_transforms(&Family::Laplace), vec![Identity, Softplus]);
        assert_eq!(default_transforms(&Family::Poisson), vec![Exp]);
        assert_eq!(default_transforms(&Family::Bernoulli), vec![Sigmoid]);
        assert!(default_transforms(&Family::PointMass { at: 0.0 }).is_empty());
    }

    #[test]
    fn transform_values() {
        use ResponseTransform::*;
        assert!((apply_transform(Softplus, 0.0) - 0.693_147_2).abs() < 1e-7);
        assert_eq!(apply_transform(Identity, -3.5), -3.5);
        assert!((apply_transform(Softplus, 50.0) - 50.0).abs() < 1e-12);
        assert!(apply_transform(Softplus, 1000.0).is_finite());
        assert!(apply_transform(Softplus, -1000.0) >= 0.0);
        let s = apply_transform(Sigmoid, -1000.0);
        assert!((0.0..1.0).contains(&s));
        assert_eq!(apply_transform(Sigmoid, 0.0), 0.5);
    }

    #[test]
    fn transform_derivatives_match_finite_differences() {
        use ResponseTransform::*;
        let h = 1e-6;
        for t in [Identity, Softplus, Exp, Sigmoid] {
            for eta in [-10.0, -1.0, 0.0, 1.0, 10.0] {
                let fd = if t == Sigmoid && eta > 0.0 {
                    // σ(a) - σ(b) = σ(-b) - σ(-a); avoids cancellation near 1
                    (t.apply(-eta + h) - t.apply(-eta - h)) / (2.0 * h)
                } else {
                    (t.apply(eta + h) - t.apply(eta - h)) / (2.0 * h)
                };
                let an = t.derivative(eta);
                let rel = (fd - an).abs() / an.abs().max(1e-300);
                assert!(rel < 1e-6, "{t:?} at {eta}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn transform_inverse_round_trip() {
        use ResponseTransform::*;
        for t in [Identity, Softplus, Exp, Sigmoid] {
            for eta in [-5.0, -0.3, 0.0, 2.0, 7.5] {
                let back = t.inverse(t.apply(eta)).unwrap();
                assert!((back - eta).abs() < 1e-9, "{t:?} {eta} {back}");
            }
        }
        assert_eq!(Softplus.inverse(0.0), None);
    }

    #[test]
    fn family_serialization() {
        let s = serde_json::to_string(&Family::PointMass { at: 0.0 }).unwrap();
        assert_eq!(s, r#"{"family":"pointmass","at":0.0}"#);
        let f: Family = serde_json::from_str(r#"{"family":"laplace"}"#).unwrap();
        assert_eq!(f, Family::Laplace);
        let f: Family = serde_json::from_str(r#"{"family":"pointmass","at":1}"#).unwrap();
        assert_eq!(f, Family::PointMass { at: 1.0 });
        assert!(serde_json::from_str::<Family>(r#"{"family":"gamma"}"#).is_err());
    }
}
