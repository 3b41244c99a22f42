//! Function classes with boundary singularities on `[-1,1]^l`, their derived
//! exponents, and singular test functions with exact derivatives.

pub(crate) mod membership;
mod profile;

pub use membership::{check_membership, MembershipReport, ProbeGrid};
pub use profile::{Profile, Term};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ClassError {
    #[error("r must be at least 1 (got {0})")]
    InvalidR(u32),
    #[error("u must be at least 1 (got {0})")]
    InvalidU(u32),
    #[error("dimension must be at least 1 (got {0})")]
    InvalidDimension(usize),
    #[error("gamma must be positive and finite (got {0})")]
    InvalidGamma(f64),
    #[error("class barQ_u requires an integer gamma (got {0})")]
    GammaNotInteger(f64),
    #[error("class Q_u requires a non-integer gamma (got {0})")]
    GammaInteger(f64),
    #[error("point {0:?} lies outside [-1,1]^l")]
    OutsideCube(Vec<f64>),
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("family {family} is not compatible with class {kind}")]
    IncompatibleFamily { family: Family, kind: ClassKind },
    #[error("probe point {0:?} lies on the boundary")]
    ProbeOnBoundary(Vec<f64>),
    #[error("derivative of f is not finite at probe point {point:?}, multi-index {order:?}")]
    NonFiniteDerivative { point: Vec<f64>, order: Vec<u32> },
}

/// Which class of singular functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    /// Bounded derivatives to order `r`, then growth `d^-(|v|-r)` up to `2r+1`.
    #[serde(rename = "Q_r")]
    Qr,
    /// Growth `d^-(|v|-r-zeta)` for `r < |v| <= r + ceil(gamma)`.
    #[serde(rename = "Q_rgamma")]
    QrGamma,
    /// Integer `gamma`, logarithmic growth at order `r` and `ln^(u-1)`-weighted
    /// power growth above.
    #[serde(rename = "barQ_u")]
    BarQu,
    /// Non-integer `gamma`, `ln^u`-weighted power growth above order `r`.
    #[serde(rename = "Q_u")]
    Qu,
}

impl ClassKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassKind::Qr => "Q_r",
            ClassKind::QrGamma => "Q_rgamma",
            ClassKind::BarQu => "barQ_u",
            ClassKind::Qu => "Q_u",
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Q_r" | "qr" => Ok(ClassKind::Qr),
            "Q_rgamma" | "qrgamma" => Ok(ClassKind::QrGamma),
            "barQ_u" | "barqu" => Ok(ClassKind::BarQu),
            "Q_u" | "qu" => Ok(ClassKind::Qu),
            other => Err(format!("unknown class `{other}`")),
        }
    }
}

/// The tuple `(kind, r, gamma, u, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSpec {
    pub kind: ClassKind,
    pub r: u32,
    pub gamma: f64,
    pub u: u32,
    pub l: usize,
}

/// Exponents derived from a [`FunctionClassSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Approximation order.
    pub s: u32,
    /// Mesh grading exponent `s / (s - gamma)`.
    pub v: f64,
    /// `ceil(gamma) - gamma`.
    pub zeta: f64,
    /// `1 - zeta`.
    pub mu: f64,
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0
}

impl FunctionClassSpec {
    /// Validated constructor.
    pub fn new(kind: ClassKind, r: u32, gamma: f64, u: u32, l: usize) -> Result<Self, ClassError> {
        let spec = Self { kind, r, gamma, u, l };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ClassError> {
        if self.r < 1 {
            return Err(ClassError::InvalidR(self.r));
        }
        if self.u < 1 {
            return Err(ClassError::InvalidU(self.u));
        }
        if self.l < 1 {
            return Err(ClassError::InvalidDimension(self.l));
        }
        if self.kind != ClassKind::Qr && !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ClassError::InvalidGamma(self.gamma));
        }
        match self.kind {
            ClassKind::BarQu if !is_integer(self.gamma) => Err(ClassError::GammaNotInteger(self.gamma)),
            ClassKind::Qu if is_integer(self.gamma) => Err(ClassError::GammaInteger(self.gamma)),
            _ => Ok(()),
        }
    }

    /// `gamma` as used by the class inequalities. For `Q_r` the growth orders
    /// run to `2r+1`, which is `Q_rgamma` with `gamma = r + 1`.
    pub fn effective_gamma(&self) -> f64 {
        match self.kind {
            ClassKind::Qr => (self.r + 1) as f64,
            _ => self.gamma,
        }
    }

    /// Whether `log` factors take part in the class bounds.
    pub fn has_log(&self) -> bool {
        matches!(self.kind, ClassKind::BarQu | ClassKind::Qu)
    }

    pub fn with_dimension(mut self, l: usize) -> Self {
        self.l = l;
        self
    }
}

/// Compute `s`, `v`, `zeta`, `mu`.
pub fn derive_params(spec: &FunctionClassSpec) -> Result<DerivedParams, ClassError> {
    spec.validate()?;
    let gamma = spec.effective_gamma();
    let ceil = gamma.ceil();
    let (s, zeta) = match spec.kind {
        ClassKind::BarQu => (spec.r + gamma as u32, 0.0),
        ClassKind::Qr | ClassKind::QrGamma | ClassKind::Qu => (spec.r + ceil as u32, ceil - gamma),
    };
    let sf = s as f64;
    Ok(DerivedParams { s, v: sf / (sf - gamma), zeta, mu: 1.0 - zeta })
}

/// `l_inf` distance from `t` to the boundary of `[-1,1]^l`.
pub fn distance_to_boundary(t: &[f64]) -> Result<f64, ClassError> {
    if t.iter().any(|x| !(x.abs() <= 1.0)) {
        return Err(ClassError::OutsideCube(t.to_vec()));
    }
    Ok(t.iter().map(|x| 1.0 - x.abs()).fold(f64::INFINITY, f64::min))
}

/// Something with exact partial derivatives that can be checked against a class.
pub trait ClassFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: &[f64]) -> f64;
    /// `D^order f(t)`; only defined off the boundary for high orders.
    fn derivative(&self, t: &[f64], order: &[u32]) -> f64;
}

/// Built-in one-dimensional prototypes. In `l > 1` dimensions the test
/// function is the product `g(t_1) ... g(t_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `(1-x^2)^(r+zeta)` for fractional `gamma`; `(1-x^2)^(r+gamma) (1 + x/3)`
    /// for integer `gamma`.
    Power,
    /// `(1-x^2)^r ln^u(e(1-x^2)/2)`.
    LogPower,
    /// `(1-x^2)^(r+zeta) ln^u(e(1-x^2)/2)`.
    FracLogPower,
    /// Caller-supplied profile.
    Custom(String),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Power => f.write_str("power"),
            Family::LogPower => f.write_str("log-power"),
            Family::FracLogPower => f.write_str("frac-log-power"),
            Family::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power" => Ok(Family::Power),
            "log-power" => Ok(Family::LogPower),
            "frac-log-power" => Ok(Family::FracLogPower),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

impl Family {
    /// The built-in family matching a class.
    pub fn default_for(kind: ClassKind) -> Family {
        match kind {
            ClassKind::Qr | ClassKind::QrGamma => Family::Power,
            ClassKind::BarQu => Family::LogPower,
            ClassKind::Qu => Family::FracLogPower,
        }
    }

    fn compatible(&self, kind: ClassKind) -> bool {
        match self {
            Family::Power => matches!(kind, ClassKind::Qr | ClassKind::QrGamma),
            Family::LogPower => kind == ClassKind::BarQu,
            Family::FracLogPower => kind == ClassKind::Qu,
            Family::Custom(_) => true,
        }
    }
}

/// Evaluatable test function with exact derivatives up to order `s` in each
/// variable.
#[derive(Debug, Clone)]
pub struct SingularFunction {
    spec: FunctionClassSpec,
    family: Family,
    /// `derivs[j]` is the `j`-th derivative of the 1D profile.
    derivs: Vec<Profile>,
    scale: f64,
}

impl SingularFunction {
    pub fn spec(&self) -> &FunctionClassSpec {
        &self.spec
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Highest available derivative order per variable.
    pub fn max_order(&self) -> usize {
        self.derivs.len() - 1
    }

    /// Product extension of an arbitrary 1D profile.
    pub fn from_profile(spec: FunctionClassSpec, name: &str, profile: Profile, max_order: usize) -> Self {
        Self { spec, family: Family::Custom(name.to_string()), derivs: profile.derivatives(max_order), scale: 1.0 }
    }

    /// Same function multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// Divide by the membership constant so the function satisfies the class
    /// inequalities on the probe grid.
    pub fn normalized(&self, report: &MembershipReport) -> Self {
        self.scaled(1.0 / report.epsilon_star)
    }

    /// The 1D profile derivative of order `j` at `x` (unscaled).
    pub fn profile_derivative(&self, j: usize, x: f64) -> f64 {
        self.derivs[j].eval(x)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.scale * t.iter().map(|&x| self.derivs[0].eval(x)).product::<f64>()
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.scale * self.derivs[0].eval(x)
    }
}

impl ClassFunction for SingularFunction {
    fn dim(&self) -> usize {
        self.spec.l
    }

    fn value(&self, t: &[f64]) -> f64 {
        self.eval(t)
    }

    fn derivative(&self, t: &[f64], order: &[u32]) -> f64 {
        self.scale
            * t.iter()
                .zip(order)
                .map(|(&x, &j)| match self.derivs.get(j as usize) {
                    Some(p) => p.eval(x),
                    None => f64::NAN,
                })
                .product::<f64>()
    }
}

/// Build the family's member (unnormalized) for `spec`.
pub fn test_function(spec: &FunctionClassSpec, family: Family) -> Result<SingularFunction, ClassError> {
    let params = derive_params(spec)?;
    if !family.compatible(spec.kind) {
        return Err(ClassError::IncompatibleFamily { family, kind: spec.kind });
    }
    let r = spec.r as f64;
    let u = spec.u;
    let profile = match &family {
        Family::Power => {
            if params.zeta == 0.0 {
                let gamma = spec.effective_gamma();
                Profile::new(vec![Term::new(1.0, 0, r + gamma, 0), Term::new(1.0 / 3.0, 1, r + gamma, 0)])
            } else {
                Profile::new(vec![Term::new(1.0, 0, r + params.zeta, 0)])
            }
        }
        Family::LogPower => Profile::new(vec![Term::new(1.0, 0, r, u)]),
        Family::FracLogPower => Profile::new(vec![Term::new(1.0, 0, r + params.zeta, u)]),
        Family::Custom(_) => return Err(ClassError::IncompatibleFamily { family, kind: spec.kind }),
    };
    Ok(SingularFunction { spec: *spec, family, derivs: profile.derivatives(params.s as usize), scale: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(kind: ClassKind, r: u32, gamma: f64, u: u32) -> FunctionClassSpec {
        FunctionClassSpec::new(kind, r, gamma, u, 1).unwrap()
    }

    #[test]
    fn derived_params_examples() {
        let p = derive_params(&spec(ClassKind::BarQu, 2, 1.0, 1)).unwrap();
        assert_eq!(p.s, 3);
        assert_eq!(p.v, 1.5);
        assert_eq!(p.zeta, 0.0);
        assert_eq!(p.mu, 1.0);

        let p = derive_params(&spec(ClassKind::Qu, 1, 0.5, 1)).unwrap();
        assert_eq!(p.s, 2);
        assert_eq!(p.zeta, 0.5);
        assert_eq!(p.mu, 0.5);
        assert_abs_diff_eq!(p.v, 4.0 / 3.0, epsilon = 1e-15);

        let p = derive_params(&spec(ClassKind::BarQu, 1, 1.0, 1)).unwrap();
        assert_eq!(p.s, 2);
        assert_eq!(p.v, 2.0);
    }

    #[test]
    fn q_r_runs_to_order_2r_plus_1() {
        let p = derive_params(&spec(ClassKind::Qr, 2, 0.0, 1)).unwrap();
        assert_eq!(p.s, 5);
        assert_eq!(p.zeta, 0.0);
    }

    #[test]
    fn gamma_kind_pairing_is_enforced() {
        assert_eq!(FunctionClassSpec::new(ClassKind::BarQu, 1, 0.5, 1, 1), Err(ClassError::GammaNotInteger(0.5)));
        assert_eq!(FunctionClassSpec::new(ClassKind::Qu, 1, 2.0, 1, 1), Err(ClassError::GammaInteger(2.0)));
        assert!(FunctionClassSpec::new(ClassKind::QrGamma, 0, 1.0, 1, 1).is_err());
        assert!(FunctionClassSpec::new(ClassKind::QrGamma, 1, 1.0, 0, 1).is_err());
        assert!(FunctionClassSpec::new(ClassKind::QrGamma, 1, 1.0, 1, 0).is_err());
        assert!(FunctionClassSpec::new(ClassKind::QrGamma, 1, -1.0, 1, 1).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_to_boundary(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(distance_to_boundary(&[-1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(distance_to_boundary(&[0.5, -0.9]).unwrap(), 0.1, epsilon = 1e-15);
        assert!(matches!(distance_to_boundary(&[1.5]), Err(ClassError::OutsideCube(_))));
        assert!(distance_to_boundary(&[f64::NAN]).is_err());
    }

    #[test]
    fn family_values() {
        let f = test_function(&spec(ClassKind::QrGamma, 1, 1.0, 1), Family::Power).unwrap();
        assert_eq!(f.eval(&[0.0]), 1.0);

        let g = test_function(&spec(ClassKind::BarQu, 2, 1.0, 1), Family::LogPower).unwrap();
        assert_eq!(g.eval(&[1.0]), 0.0);
        assert_eq!(g.eval(&[-1.0]), 0.0);
        assert!(g.eval(&[0.3]).is_finite());
    }

    #[test]
    fn log_power_second_derivative_is_log_unbounded() {
        // (1-x^2)^2 L: the r-th derivative carries a bare L term, so it grows like |ln d|.
        let g = test_function(&spec(ClassKind::BarQu, 2, 1.0, 1), Family::LogPower).unwrap();
        let mut prev = 0.0;
        for &delta in &[1e-4, 1e-8, 1e-12] {
            let d2 = g.derivative(&[1.0 - delta], &[2]).abs();
            assert!(d2 > prev);
            prev = d2;
            let shape = d2 / (1.0 + delta.ln().abs());
            assert!(shape > 4.0 && shape < 10.0, "shape {shape} at {delta}");
        }
        // third derivative blows up like 1/d
        let c3 = g.derivative(&[1.0 - 1e-6], &[3]).abs() * 1e-6;
        assert!(c3 > 1.0 && c3 < 100.0);
    }

    #[test]
    fn incompatible_family_rejected() {
        let err = test_function(&spec(ClassKind::BarQu, 2, 1.0, 1), Family::FracLogPower).unwrap_err();
        assert!(matches!(err, ClassError::IncompatibleFamily { .. }));
    }

    #[test]
    fn product_extension_in_two_dimensions() {
        let s = FunctionClassSpec::new(ClassKind::Qu, 1, 0.5, 1, 2).unwrap();
        let f = test_function(&s, Family::FracLogPower).unwrap();
        let g1 = f.eval1(0.3);
        let g2 = f.eval1(-0.6);
        assert_abs_diff_eq!(f.eval(&[0.3, -0.6]), g1 * g2, epsilon = 1e-15);
        let d = f.derivative(&[0.3, -0.6], &[1, 2]);
        assert_abs_diff_eq!(d, f.profile_derivative(1, 0.3) * f.profile_derivative(2, -0.6), epsilon = 1e-14);
    }
}
