//! Expansion coefficients of `f(t) = tanh(t/2) / (t/2)`.
//!
//! `f_n = 4 (4^(n/2+1) - 1) B_(n+2) / (n+2)!` for even `n` and zero for odd
//! `n`, with `B_m` the Bernoulli numbers. Everything is held as exact
//! rationals; the table is built once on first use.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest expansion order served by the coefficient table.
pub const MAX_SERIES_ORDER: usize = 60;

/// Below this magnitude `f` is evaluated from its Taylor polynomial.
pub const SMALL_ARGUMENT: f64 = 1e-4;

/// Cached table of `f_n` and the Bernoulli numbers backing it.
#[derive(Debug)]
pub struct SeriesCoefficients {
    bernoulli: Vec<BigRational>,
    exact: Vec<BigRational>,
    float: Vec<f64>,
}

impl SeriesCoefficients {
    fn build() -> Self {
        let bernoulli = bernoulli_table(MAX_SERIES_ORDER + 2);
        let mut exact = Vec::with_capacity(MAX_SERIES_ORDER + 1);
        let mut factorial = BigInt::one();
        let mut factorials = vec![BigInt::one()];
        for k in 1..=(MAX_SERIES_ORDER + 2) {
            factorial *= BigInt::from(k);
            factorials.push(factorial.clone());
        }
        for n in 0..=MAX_SERIES_ORDER {
            if n % 2 == 1 {
                exact.push(BigRational::zero());
                continue;
            }
            let four_pow = BigInt::from(4).pow((n / 2 + 1) as u32);
            let prefactor = BigInt::from(4) * (four_pow - BigInt::one());
            let value = BigRational::from_integer(prefactor) * &bernoulli[n + 2]
                / BigRational::from_integer(factorials[n + 2].clone());
            exact.push(value);
        }
        let float = exact.iter().map(rational_to_f64).collect();
        Self {
            bernoulli,
            exact,
            float,
        }
    }

    /// `f_n` as an exact rational.
    pub fn exact(&self, n: usize) -> Option<&BigRational> {
        self.exact.get(n)
    }

    /// `f_n` rounded to the nearest double.
    pub fn float(&self, n: usize) -> Option<f64> {
        self.float.get(n).copied()
    }

    pub fn floats(&self) -> &[f64] {
        &self.float
    }

    /// Bernoulli number `B_m` (with `B_1 = -1/2`).
    pub fn bernoulli(&self, m: usize) -> Option<&BigRational> {
        self.bernoulli.get(m)
    }
}

/// Process-wide coefficient table.
pub fn series_coefficients() -> &'static SeriesCoefficients {
    static TABLE: OnceLock<SeriesCoefficients> = OnceLock::new();
    TABLE.get_or_init(SeriesCoefficients::build)
}

/// `B_0 ..= B_max` from `sum_{k=0}^{m} C(m+1, k) B_k = 0`.
fn bernoulli_table(max: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(max + 1);
    b.push(BigRational::one());
    for m in 1..=max {
        // binomial(m + 1, k) built incrementally
        let mut binom = BigInt::one();
        let mut acc = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += BigRational::from_integer(binom.clone()) * bk;
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        b.push(-acc / BigRational::from_integer(BigInt::from(m + 1)));
    }
    b
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
    })
}

/// Exact `f_n`, `n <= 60`.
pub fn f_coefficient(n: usize) -> Result<BigRational> {
    series_coefficients()
        .exact(n)
        .cloned()
        .ok_or_else(|| Error::Argument(format!("coefficient order {n} exceeds {MAX_SERIES_ORDER}")))
}

/// `f(t) = tanh(t/2) / (t/2)`, even, with `f(0) = 1`.
pub fn f_scalar(t: f64) -> f64 {
    if t.abs() < SMALL_ARGUMENT {
        let t2 = t * t;
        // 1 - t²/12 + t⁴/120 - 17t⁶/20160 + 31t⁸/362880
        1.0 + t2 * (-1.0 / 12.0 + t2 * (1.0 / 120.0 + t2 * (-17.0 / 20160.0 + t2 * (31.0 / 362880.0))))
    } else {
        let half = 0.5 * t;
        half.tanh() / half
    }
}

/// `(e^t - 1) / t`, the divided difference of the exponential.
pub(crate) fn exp_divided_difference(t: f64) -> f64 {
    if t.abs() < 1e-5 {
        1.0 + t * (0.5 + t * (1.0 / 6.0 + t / 24.0))
    } else {
        t.exp_m1() / t
    }
}
