//! Reduction from 3SAT to the existence of a stationary point of a
//! ReLU-bilinear min-max objective.
//!
//! For a clause matrix `A` (row `i` holds `+1` for each positive and `−1`
//! for each negative literal of clause `i`) the objective is
//!
//! ```text
//! f(x, y) = φ(−Ax − 2𝟙)ᵀy₁ + (Σ_i φ(x_i) + φ(−x_i) − d) y₂
//!         + φ(x − 𝟙)ᵀy₃ + φ(−x − 𝟙)ᵀy₄,
//! ```
//!
//! with `φ` the ReLU and `y = (y₁, y₂, y₃, y₄)` of lengths `(m, 1, d, d)`.
//! `f` is linear in `y`, so a stationary point needs every bracket to vanish:
//! the box blocks confine `x` to `[−1, 1]^d`, the counting block then forces
//! `|x_i| = 1`, and the clause block asks `a_iᵀx ≥ −2`, which for binary `x`
//! says clause `i` has a true literal (an unsatisfied clause sums to `−3`).
//! Conversely a satisfying `x` with `y = 0` is stationary.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest variable count accepted by [`stationary_exists_bruteforce`].
pub const MAX_BRUTEFORCE_VARS: usize = 24;

/// A literal: zero-based variable index and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    /// From a DIMACS literal (`±(index + 1)`).
    pub fn from_dimacs(lit: i64) -> Result<Self> {
        if lit == 0 {
            return Err(Error::MalformedInstance("literal 0 is a clause terminator"));
        }
        Ok(Literal { var: (lit.unsigned_abs() - 1) as usize, positive: lit > 0 })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

/// 3SAT instance with at least four clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sat3Instance {
    num_vars: usize,
    clauses: Vec<[Literal; 3]>,
}

impl Sat3Instance {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::MalformedInstance("instance needs at least one variable"));
        }
        if clauses.len() < 4 {
            return Err(Error::MalformedInstance("instance needs at least four clauses"));
        }
        if clauses.iter().flatten().any(|l| l.var >= num_vars) {
            return Err(Error::MalformedInstance("literal refers to an undeclared variable"));
        }
        Ok(Sat3Instance { num_vars, clauses })
    }

    /// From DIMACS-style signed literals.
    pub fn from_dimacs(num_vars: usize, clauses: &[[i64; 3]]) -> Result<Self> {
        let cl = clauses
            .iter()
            .map(|c| Ok([Literal::from_dimacs(c[0])?, Literal::from_dimacs(c[1])?, Literal::from_dimacs(c[2])?]))
            .collect::<Result<Vec<_>>>()?;
        Sat3Instance::new(num_vars, cl)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    /// Whether a ±1 assignment (`+1` true) satisfies every clause.
    pub fn satisfied_by(&self, x: &[i8]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| (x[l.var] > 0) == l.positive))
    }
}

/// The min-max objective built from a 3SAT instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinMaxForm {
    d: usize,
    /// Clause matrix, `m × d`, row-major. A literal repeated within a clause
    /// adds up, so every row still sums three `±1` contributions.
    a: Vec<i32>,
    m: usize,
}

/// Term groups of [`MinMaxForm`] at a point `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGroups {
    /// `φ(−Ax − 2𝟙)`, length `m`.
    pub clause: Vec<f64>,
    /// `Σ_i φ(x_i) + φ(−x_i) − d`.
    pub counting: f64,
    /// `φ(x − 𝟙)`.
    pub upper: Vec<f64>,
    /// `φ(−x − 𝟙)`.
    pub lower: Vec<f64>,
}

impl TermGroups {
    /// Whether every bracket multiplying `y` vanishes.
    pub fn all_zero(&self) -> bool {
        self.counting == 0.0 && self.clause.iter().chain(&self.upper).chain(&self.lower).all(|v| *v == 0.0)
    }

    /// `∇_y f`, stacked as `(y₁, y₂, y₃, y₄)`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = self.clause.clone();
        out.push(self.counting);
        out.extend_from_slice(&self.upper);
        out.extend_from_slice(&self.lower);
        out
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    v.max(0.0)
}

pub fn build_minmax(sat: &Sat3Instance) -> MinMaxForm {
    let d = sat.num_vars;
    let m = sat.clauses.len();
    let mut a = vec![0i32; m * d];
    for (i, clause) in sat.clauses.iter().enumerate() {
        for lit in clause {
            a[i * d + lit.var] += if lit.positive { 1 } else { -1 };
        }
    }
    MinMaxForm { d, a, m }
}

impl MinMaxForm {
    pub fn num_vars(&self) -> usize {
        self.d
    }

    pub fn num_clauses(&self) -> usize {
        self.m
    }

    /// Length of the stacked `y`: `m + 1 + 2d`.
    pub fn y_len(&self) -> usize {
        self.m + 1 + 2 * self.d
    }

    pub fn clause_row(&self, i: usize) -> &[i32] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn term_groups(&self, x: &[f64]) -> Result<TermGroups> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { op: "term_groups", expected: (self.d, 1), found: (x.len(), 1) });
        }
        let clause = (0..self.m)
            .map(|i| {
                let ax: f64 = self.clause_row(i).iter().zip(x).map(|(&c, &xv)| c as f64 * xv).sum();
                relu(-ax - 2.0)
            })
            .collect();
        let counting = x.iter().map(|&v| relu(v) + relu(-v)).sum::<f64>() - self.d as f64;
        let upper = x.iter().map(|&v| relu(v - 1.0)).collect();
        let lower = x.iter().map(|&v| relu(-v - 1.0)).collect();
        Ok(TermGroups { clause, counting, upper, lower })
    }

    /// `f(x, y)` with `y` stacked as `(y₁, y₂, y₃, y₄)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.y_len() {
            return Err(Error::DimensionMismatch { op: "eval_form", expected: (self.y_len(), 1), found: (y.len(), 1) });
        }
        let t = self.term_groups(x)?;
        Ok(t.stacked().iter().zip(y).map(|(a, b)| a * b).sum())
    }
}

pub fn eval_form(form: &MinMaxForm, x: &[f64], y: &[f64]) -> Result<f64> {
    form.eval(x, y)
}

/// Decides whether `f` has a stationary point by enumerating `{−1, 1}^d`.
///
/// Only binary points can zero the counting and box blocks together, and
/// there the clause block reduces to the integer test `a_iᵀx ≥ −2`.
/// Returns the first witness found.
pub fn stationary_witness(form: &MinMaxForm) -> Result<Option<Vec<i8>>> {
    let d = form.d;
    if d > MAX_BRUTEFORCE_VARS {
        return Err(Error::BudgetExceeded { vars: d, max: MAX_BRUTEFORCE_VARS });
    }
    let mut x = vec![-1i8; d];
    for mask in 0u32..(1u32 << d) {
        for (j, xv) in x.iter_mut().enumerate() {
            *xv = if mask >> j & 1 == 1 { 1 } else { -1 };
        }
        let ok = (0..form.m).all(|i| {
            form.clause_row(i).iter().zip(&x).map(|(&c, &xv)| c * xv as i32).sum::<i32>() >= -2
        });
        if ok {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

pub fn stationary_exists_bruteforce(form: &MinMaxForm) -> Result<bool> {
    Ok(stationary_witness(form)?.is_some())
}
