//! Simulation designs for the screening and structure-identification
//! benchmarks.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with a 64-bit seed via
//! `SeedableRng::seed_from_u64`. Replication `r` of a run seeded with `s`
//! uses seed `s ^ r`. Normal draws use the ziggurat sampler of `rand_distr`
//! and Student-t draws are `N(0,1) / sqrt(chi2_v / v)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SimRng = ChaCha8Rng;

/// Noise variance of the linear design.
pub const EX1_NOISE_VARIANCE: f64 = 6.83;
/// Noise variance of the four-function additive design.
pub const EX2_NOISE_VARIANCE: f64 = 1.74;
pub const EX1_BETA: [f64; 5] = [1.0, 0.8, 0.6, 0.4, 0.2];
pub const EX3_COEFFICIENTS: [f64; 8] = [1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5];
pub const AR1_RHO: f64 = 0.8;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("n must be at least 30, got {0}")]
    SmallN(usize),
    #[error("p must be at least 10, got {0}")]
    SmallP(usize),
    #[error("{0}")]
    Invalid(String),
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replication `rep` within a run seeded with `seed`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    seed ^ rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

impl Example {
    pub fn number(self) -> u8 {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 => 2,
            Example::Ex3 => 3,
            Example::Ex4 => 4,
        }
    }

    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(Example::Ex1),
            2 => Some(Example::Ex2),
            3 => Some(Example::Ex3),
            4 => Some(Example::Ex4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorLaw {
    Normal,
    T5,
    T1,
}

impl ErrorLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLaw::Normal => "normal",
            ErrorLaw::T5 => "t5",
            ErrorLaw::T1 => "t1",
        }
    }

    pub fn sample(self, rng: &mut SimRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let dof = match self {
            ErrorLaw::Normal => return z,
            ErrorLaw::T5 => 5.0,
            ErrorLaw::T1 => 1.0,
        };
        let chi2: f64 = ChiSquared::new(dof).expect("positive dof").sample(rng);
        z / (chi2 / dof).sqrt()
    }
}

impl fmt::Display for ErrorLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorLaw {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "n" | "gaussian" => Ok(ErrorLaw::Normal),
            "t5" | "t(5)" => Ok(ErrorLaw::T5),
            "t1" | "t(1)" | "cauchy" => Ok(ErrorLaw::T1),
            other => Err(ScenarioError::Invalid(format!("unknown error law `{other}`"))),
        }
    }
}

/// Full description of one simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    /// Signal multiplier, linear design only.
    pub signal_c: Option<f64>,
    /// Noise scale. Linear design: defaults to `sqrt(6.83)`. Copula design:
    /// the noise standard deviation (required). Not allowed otherwise.
    pub sigma: Option<f64>,
    pub error_law: ErrorLaw,
    pub seed: u64,
}

impl Scenario {
    pub fn ex1(n: usize, p: usize, c: f64, law: ErrorLaw) -> Self {
        Self {
            example: Example::Ex1,
            n,
            p,
            signal_c: Some(c),
            sigma: None,
            error_law: law,
            seed: 0,
        }
    }

    pub fn ex2(n: usize, p: usize, law: ErrorLaw) -> Self {
        Self {
            example: Example::Ex2,
            n,
            p,
            signal_c: None,
            sigma: None,
            error_law: law,
            seed: 0,
        }
    }

    pub fn ex3(n: usize, p: usize, law: ErrorLaw) -> Self {
        Self {
            example: Example::Ex3,
            ..Self::ex2(n, p, law)
        }
    }

    pub fn ex4(n: usize, p: usize, sigma: f64) -> Self {
        Self {
            example: Example::Ex4,
            n,
            p,
            signal_c: None,
            sigma: Some(sigma),
            error_law: ErrorLaw::Normal,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Short identifier used in tables, e.g. `ex1-n200-p2000-c0.5-normal`.
    pub fn label(&self) -> String {
        let mut s = format!("ex{}-n{}-p{}", self.example.number(), self.n, self.p);
        if let Some(c) = self.signal_c {
            s.push_str(&format!("-c{c}"));
        }
        if self.example == Example::Ex4 {
            if let Some(sigma) = self.sigma {
                s.push_str(&format!("-sigma{sigma}"));
            }
        }
        s.push('-');
        s.push_str(self.error_law.as_str());
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n < 30 {
            return Err(ScenarioError::SmallN(self.n));
        }
        if self.p < 10 {
            return Err(ScenarioError::SmallP(self.p));
        }
        let active = self.active_count();
        if self.p <= active {
            return Err(ScenarioError::Invalid(format!(
                "p = {} must exceed the {active} active covariates",
                self.p
            )));
        }
        match self.example {
            Example::Ex1 => match self.signal_c {
                Some(c) if c.is_finite() && c > 0.0 => {}
                _ => {
                    return Err(ScenarioError::Invalid(
                        "example 1 needs a positive signal constant c".into(),
                    ))
                }
            },
            _ if self.signal_c.is_some() => {
                return Err(ScenarioError::Invalid(format!(
                    "signal constant c only applies to example 1, not example {}",
                    self.example.number()
                )))
            }
            _ => {}
        }
        match (self.example, self.sigma) {
            (Example::Ex4, None) => {
                return Err(ScenarioError::Invalid("example 4 needs a noise sd sigma".into()))
            }
            (Example::Ex2 | Example::Ex3, Some(_)) => {
                return Err(ScenarioError::Invalid(format!(
                    "sigma is fixed for example {}",
                    self.example.number()
                )))
            }
            (_, Some(s)) if !(s.is_finite() && s >= 0.0) => {
                return Err(ScenarioError::Invalid(format!("invalid sigma {s}")))
            }
            _ => {}
        }
        Ok(())
    }

    fn active_count(&self) -> usize {
        match self.example {
            Example::Ex1 | Example::Ex4 => 5,
            Example::Ex2 => 4,
            Example::Ex3 => 8,
        }
    }

    /// Noise scale multiplying the error draws.
    pub fn noise_scale(&self) -> f64 {
        match self.example {
            Example::Ex1 => self.sigma.unwrap_or(EX1_NOISE_VARIANCE.sqrt()),
            Example::Ex2 => EX2_NOISE_VARIANCE.sqrt(),
            Example::Ex3 => 1.0,
            Example::Ex4 => self.sigma.unwrap_or(0.0),
        }
    }
}

/// Simulated dataset with ground truth. Index sets are zero-based and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Noise-free part of `y`.
    pub signal: Vec<f64>,
    pub true_active: Vec<usize>,
    pub true_linear: Vec<usize>,
    pub true_nonlinear: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFunction {
    G1,
    G2,
    G3,
    G4,
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        let s = (2.0 * PI * x).sin();
        match self {
            TestFunction::G1 => x,
            TestFunction::G2 => (2.0 * x - 1.0).powi(2),
            TestFunction::G3 => s / (2.0 - s),
            TestFunction::G4 => {
                let c = (2.0 * PI * x).cos();
                0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c.powi(3) + 0.5 * s.powi(3)
            }
            TestFunction::F1 => 5.0 * s,
            TestFunction::F2 => 10.0 * x * (1.0 - x),
            TestFunction::F3 => 3.0 * x,
            TestFunction::F4 => 2.0 * x,
            TestFunction::F5 => -2.0 * x,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            TestFunction::G1 | TestFunction::F3 | TestFunction::F4 | TestFunction::F5
        )
    }
}

const EX2_TERMS: [(f64, TestFunction); 4] = [
    (5.0, TestFunction::G1),
    (3.0, TestFunction::G2),
    (4.0, TestFunction::G3),
    (6.0, TestFunction::G4),
];
const G_CYCLE: [TestFunction; 4] = [
    TestFunction::G1,
    TestFunction::G2,
    TestFunction::G3,
    TestFunction::G4,
];
const EX4_TERMS: [TestFunction; 5] = [
    TestFunction::F1,
    TestFunction::F2,
    TestFunction::F3,
    TestFunction::F4,
    TestFunction::F5,
];

/// Rows i.i.d. `N(0, Σ)` with `Σ_ij = rho^|i-j|`, by the AR(1) recursion.
pub fn mvn_ar1(n: usize, p: usize, rho: f64, rng: &mut SimRng) -> DMatrix<f64> {
    assert!(rho.abs() < 1.0, "AR(1) coefficient must satisfy |rho| < 1");
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = if j == 0 { e } else { rho * prev + innovation * e };
            x[(i, j)] = prev;
        }
    }
    x
}

/// Equicorrelated two-block design: correlation `within` inside the active
/// block and inside its complement, `between` across the blocks.
///
/// Built from a shared factor, one factor per block and idiosyncratic noise:
/// `x_j = sqrt(between) g + sqrt(within - between) h_block(j) + sqrt(1 - within) e_j`.
pub fn mvn_block(
    n: usize,
    p: usize,
    active: &[usize],
    within: f64,
    between: f64,
    rng: &mut SimRng,
) -> DMatrix<f64> {
    assert!(
        0.0 <= between && between <= within && within < 1.0,
        "need 0 <= between <= within < 1"
    );
    let mut in_active = vec![false; p];
    for &j in active {
        in_active[j] = true;
    }
    let (a_g, a_h, a_e) = (between.sqrt(), (within - between).sqrt(), (1.0 - within).sqrt());
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        let h_active: f64 = rng.sample(StandardNormal);
        let h_inactive: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            let h = if in_active[j] { h_active } else { h_inactive };
            x[(i, j)] = a_g * g + a_h * h + a_e * e;
        }
    }
    x
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Generates a dataset from `scenario` using its own seed.
pub fn gen_example(scenario: &Scenario) -> Result<GeneratedData, ScenarioError> {
    let mut rng = rng_from_seed(scenario.seed);
    gen_example_with_rng(scenario, &mut rng)
}

pub fn gen_example_with_rng(
    scenario: &Scenario,
    rng: &mut SimRng,
) -> Result<GeneratedData, ScenarioError> {
    scenario.validate()?;
    let (n, p) = (scenario.n, scenario.p);
    let range = |k: usize| (0..k).collect::<Vec<usize>>();

    let (x, signal, linear, nonlinear) = match scenario.example {
        Example::Ex1 => {
            let x = mvn_ar1(n, p, AR1_RHO, rng);
            let c = scenario.signal_c.unwrap_or(1.0);
            let signal: Vec<f64> = (0..n)
                .map(|i| c * EX1_BETA.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum::<f64>())
                .collect();
            (x, signal, range(5), vec![])
        }
        Example::Ex2 => {
            let x = mvn_ar1(n, p, AR1_RHO, rng);
            let signal = (0..n)
                .map(|i| {
                    EX2_TERMS
                        .iter()
                        .enumerate()
                        .map(|(j, (w, f))| w * f.eval(x[(i, j)]))
                        .sum()
                })
                .collect();
            (x, signal, vec![0], vec![1, 2, 3])
        }
        Example::Ex3 => {
            let active = range(8);
            let x = mvn_block(n, p, &active, 0.5, 0.1, rng);
            let signal = (0..n)
                .map(|i| {
                    EX3_COEFFICIENTS
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * G_CYCLE[j % 4].eval(x[(i, j)]))
                        .sum()
                })
                .collect();
            (x, signal, vec![0, 4], vec![1, 2, 3, 5, 6, 7])
        }
        Example::Ex4 => {
            let mut x = mvn_ar1(n, p, AR1_RHO, rng);
            x.apply(|v| *v = normal_cdf(*v));
            let signal = (0..n)
                .map(|i| EX4_TERMS.iter().enumerate().map(|(j, f)| f.eval(x[(i, j)])).sum())
                .collect();
            (x, signal, vec![2, 3, 4], vec![0, 1])
        }
    };

    let scale = scenario.noise_scale();
    let y = signal
        .iter()
        .map(|s: &f64| s + scale * scenario.error_law.sample(rng))
        .collect();
    let mut true_active: Vec<usize> = linear.iter().chain(&nonlinear).copied().collect();
    true_active.sort_unstable();
    Ok(GeneratedData {
        x,
        y,
        signal,
        true_active,
        true_linear: linear,
        true_nonlinear: nonlinear,
    })
}
