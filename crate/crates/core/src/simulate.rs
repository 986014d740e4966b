//! Generators for the two-class benchmark data sets.
//!
//! Every scenario draws `x ~ U(0, 10)` for `2n` rows; rows `0..n` belong to
//! class 1 and rows `n..2n` to class 2.
//!
//! | scenario  | class 1                         | class 2                  |
//! |-----------|---------------------------------|--------------------------|
//! | `npreg`   | `5x + 3ε`                       | `40 − (x−5)² + 3ε`       |
//! | `hetero`  | `5x + 3ε·exp(−1 + x/5)`         | `40 − (x−5)² + 3ε`       |
//! | `zeroinf` | `5x + 3ε·exp(−1 + x/5)`         | `0`                      |

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Npreg,
    Hetero,
    Zeroinf,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Npreg, Scenario::Hetero, Scenario::Zeroinf];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Npreg => "npreg",
            Scenario::Hetero => "hetero",
            Scenario::Zeroinf => "zeroinf",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scenario> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (expected npreg, hetero or zeroinf)")))
    }
}

/// Noise standard deviation of the heteroscedastic class at `x`.
pub fn hetero_sd(x: f64) -> f64 {
    3.0 * (-1.0 + x / 5.0).exp()
}

/// A simulated sample in column form.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub x: Vec<f64>,
    pub xsq: Vec<f64>,
    pub yn: Vec<f64>,
    /// 1 or 2.
    pub true_class: Vec<u8>,
}

impl Simulated {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Features `x`, `xsq` with `yn` as response.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let mut cols = IndexMap::new();
        cols.insert("x".to_string(), self.x.clone());
        cols.insert("xsq".to_string(), self.xsq.clone());
        Dataset::new(cols, self.yn.clone())
    }
}

/// Draws `n_per_class` rows per class.
pub fn simulate(scenario: Scenario, n_per_class: usize, seed: u64) -> Result<Simulated> {
    if n_per_class == 0 {
        return Err(Error::Config("need at least one row per class".into()));
    }
    let n = n_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unif = Uniform::new(0.0, 10.0).expect("valid bounds");
    let x: Vec<f64> = (0..2 * n).map(|_| rng.sample(unif)).collect();
    let eps = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let mut yn = Vec::with_capacity(2 * n);
    for &xi in &x[..n] {
        let e = eps(&mut rng);
        yn.push(match scenario {
            Scenario::Npreg => 5.0 * xi + 3.0 * e,
            Scenario::Hetero | Scenario::Zeroinf => 5.0 * xi + hetero_sd(xi) * e,
        });
    }
    for &xi in &x[n..] {
        yn.push(match scenario {
            Scenario::Npreg | Scenario::Hetero => 40.0 - (xi - 5.0).powi(2) + 3.0 * eps(&mut rng),
            Scenario::Zeroinf => 0.0,
        });
    }
    let xsq = x.iter().map(|v| v * v).collect();
    let true_class = (0..2 * n).map(|i| if i < n { 1 } else { 2 }).collect();
    Ok(Simulated { x, xsq, yn, true_class })
}
