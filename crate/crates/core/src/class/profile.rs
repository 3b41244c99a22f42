//! One-dimensional closed-form profiles `x^i (1-x^2)^a ln^b(e(1-x^2)/2)`.
//!
//! Every built-in test function is a finite sum of such terms, and the set of
//! sums is closed under differentiation:
//!
//! ```text
//! d/dx [x^i w^a L^b] = i x^(i-1) w^a L^b - 2a x^(i+1) w^(a-1) L^b - 2b x^(i+1) w^(a-1) L^(b-1)
//! ```
//!
//! with `w = 1 - x^2` and `L = 1 + ln(w/2)`, so `dL/dx = -2x / w`. Derivatives
//! are produced symbolically and evaluated exactly (up to rounding).

use serde::{Deserialize, Serialize};

/// `coef * x^x_pow * w^w_pow * L^log_pow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub x_pow: u32,
    pub w_pow: f64,
    pub log_pow: u32,
}

impl Term {
    pub fn new(coef: f64, x_pow: u32, w_pow: f64, log_pow: u32) -> Self {
        Self { coef, x_pow, w_pow, log_pow }
    }

    fn same_shape(&self, other: &Term) -> bool {
        self.x_pow == other.x_pow && self.w_pow.to_bits() == other.w_pow.to_bits() && self.log_pow == other.log_pow
    }

    /// Value at `x`, using `w = (1-x)(1+x)` for accuracy near the endpoints.
    ///
    /// On `w = 0` the continuous extension is used: `w^a L^b -> 0` whenever
    /// `a > 0`. Terms with `a <= 0` and a logarithm or negative power are
    /// infinite there.
    pub fn eval(&self, x: f64) -> f64 {
        let w = (1.0 - x) * (1.0 + x);
        let xp = x.powi(self.x_pow as i32);
        if w <= 0.0 {
            if self.w_pow > 0.0 {
                return 0.0;
            }
            if self.w_pow == 0.0 && self.log_pow == 0 {
                return self.coef * xp;
            }
            return f64::INFINITY.copysign(self.coef);
        }
        let wp = if self.w_pow == 0.0 {
            1.0
        } else if self.w_pow.fract() == 0.0 {
            w.powi(self.w_pow as i32)
        } else {
            w.powf(self.w_pow)
        };
        let lp = if self.log_pow == 0 { 1.0 } else { (1.0 + (0.5 * w).ln()).powi(self.log_pow as i32) };
        self.coef * xp * wp * lp
    }
}

/// Sum of [`Term`]s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub terms: Vec<Term>,
}

impl Profile {
    pub fn new(terms: Vec<Term>) -> Self {
        let mut p = Self { terms: Vec::new() };
        for t in terms {
            p.push(t);
        }
        p
    }

    /// Plain polynomial `sum c_i x^i`.
    pub fn polynomial(coefs: &[f64]) -> Self {
        Self::new(coefs.iter().enumerate().map(|(i, &c)| Term::new(c, i as u32, 0.0, 0)).collect())
    }

    fn push(&mut self, t: Term) {
        if t.coef == 0.0 {
            return;
        }
        if let Some(existing) = self.terms.iter_mut().find(|e| e.same_shape(&t)) {
            existing.coef += t.coef;
        } else {
            self.terms.push(t);
        }
    }

    /// Product with another profile.
    pub fn mul(&self, other: &Profile) -> Profile {
        let mut out = Profile::default();
        for a in &self.terms {
            for b in &other.terms {
                out.push(Term::new(a.coef * b.coef, a.x_pow + b.x_pow, a.w_pow + b.w_pow, a.log_pow + b.log_pow));
            }
        }
        out
    }

    pub fn derivative(&self) -> Profile {
        let mut out = Profile::default();
        for t in &self.terms {
            if t.x_pow > 0 {
                out.push(Term::new(t.coef * t.x_pow as f64, t.x_pow - 1, t.w_pow, t.log_pow));
            }
            if t.w_pow != 0.0 {
                out.push(Term::new(-2.0 * t.coef * t.w_pow, t.x_pow + 1, t.w_pow - 1.0, t.log_pow));
            }
            if t.log_pow > 0 {
                out.push(Term::new(-2.0 * t.coef * t.log_pow as f64, t.x_pow + 1, t.w_pow - 1.0, t.log_pow - 1));
            }
        }
        out.terms.retain(|t| t.coef != 0.0);
        out
    }

    /// Derivatives of orders `0..=max_order`.
    pub fn derivatives(&self, max_order: usize) -> Vec<Profile> {
        let mut out = Vec::with_capacity(max_order + 1);
        out.push(self.clone());
        for j in 0..max_order {
            let next = out[j].derivative();
            out.push(next);
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Summing a finite zero with an infinite term keeps the infinity, which is the
        // right answer for derivatives on the boundary.
        self.terms.iter().map(|t| t.eval(x)).sum()
    }
}
