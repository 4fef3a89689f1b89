//! Chi-squared tail probabilities and the Cressie-Read power-divergence test.

use thiserror::Error;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least two cells with nonzero expectation, got {0}")]
    TooFewCells(usize),
    #[error("observed and expected tables differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    NoObservations,
    #[error("lambda must not be 0 or -1")]
    BadLambda,
}

/// Prefactor `exp(-x) x^a / Gamma(a)`, computed in log space.
fn gamma_prefactor(a: f64, x: f64) -> f64 {
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

/// Lower regularized incomplete gamma by its power series; converges fast
/// for `x < a + 1`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

/// Upper regularized incomplete gamma by its continued fraction (modified
/// Lentz); converges fast for `x >= a + 1`.
fn upper_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_fraction(a, x)
    }
}

/// Survival function of the chi-squared distribution.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if x.is_nan() {
        return f64::NAN;
    }
    gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerDivergence {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `O (O / (N E))^lambda - O`, with the `O = 0` limit taken.
pub(crate) fn divergence_term(observed: u64, expected: f64, total: f64, lambda: f64) -> f64 {
    if observed == 0 {
        return if lambda > -1.0 { 0.0 } else { f64::INFINITY };
    }
    let o = observed as f64;
    o * libm::expm1(lambda * libm::log(o / (total * expected)))
}

/// Scales the summed terms into the statistic and attaches the tail
/// probability for `retained - 1` degrees of freedom.
pub(crate) fn finish(
    sum: f64,
    total: f64,
    retained: usize,
    lambda: f64,
) -> Result<PowerDivergence, StatsError> {
    if retained < 2 {
        return Err(StatsError::TooFewCells(retained));
    }
    let df = retained - 1;
    let mut statistic = 2.0 / (lambda * (lambda + 1.0)) * sum;
    // Differences below the resolution of the inputs are an exact fit.
    let noise = 16.0 * f64::EPSILON * total * retained as f64;
    if statistic.is_nan() || statistic <= noise {
        statistic = 0.0;
    }
    Ok(PowerDivergence {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
    })
}

/// Cressie-Read power-divergence goodness-of-fit test.
///
/// Cells expected below `floor` are dropped when empty; an observation in
/// such a cell makes the fit impossible and yields `p = 0`.
pub fn power_divergence(
    observed: &[u64],
    expected: &[f64],
    lambda: f64,
    floor: f64,
) -> Result<PowerDivergence, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch(observed.len(), expected.len()));
    }
    if lambda == 0.0 || lambda == -1.0 {
        return Err(StatsError::BadLambda);
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::NoObservations);
    }
    let n = total as f64;
    let mut sum = 0.0;
    let mut retained = 0usize;
    let mut impossible = false;
    for (&o, &e) in observed.iter().zip(expected) {
        if e < floor {
            impossible |= o > 0;
            continue;
        }
        retained += 1;
        sum += divergence_term(o, e, n, lambda);
    }
    if impossible {
        return Ok(PowerDivergence {
            statistic: f64::INFINITY,
            df: retained.saturating_sub(1),
            p_value: 0.0,
        });
    }
    finish(sum, n, retained, lambda)
}
