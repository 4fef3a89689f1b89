//! Runtime verification of assertions from measurement counts.
//!
//! Expected distributions are mixed with the uniform distribution according to
//! the slice fidelity `f` and compared with the observed counts by a
//! power-divergence test. An equality assertion is rejected when `p <= alpha`.
//! A superposition assertion is rejected when the counts are consistent with
//! some computational basis state, i.e. when that hypothesis is *not*
//! rejected.

use alloc::{
    collections::BTreeMap,
    format,
    string::String,
    vec,
    vec::Vec,
};

use thiserror::Error;

use crate::circuit::AssertionClass;
use crate::optimize::Cancellation;
use crate::rng::derive_seed;
use crate::sim::{sample_histogram, SampleConfig};
use crate::stats::{divergence_term, finish, power_divergence, PowerDivergence, StatsError};
use crate::translate::{AssertionMetadata, Expectation};

/// Widest assertion the verifier enumerates outcomes for.
pub const MAX_VERIFY_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum VerifyError {
    #[error("outcome `{key}` does not match {bits} bit(s)")]
    BadKey { key: String, bits: usize },
    #[error("histogram has {got} entries, expected {expected}")]
    BadHistogram { expected: usize, got: usize },
    #[error("unknown bit `{0}`")]
    UnknownBit(String),
    #[error("bit order mismatch: expected ({expected}), found ({found})")]
    BitMismatch { expected: String, found: String },
    #[error("assertion {assertion} spans {bits} bits; at most {MAX_VERIFY_BITS} are supported")]
    TooManyBits { assertion: usize, bits: usize },
    #[error("no counts for slice {0}")]
    MissingCounts(usize),
    #[error("no shots recorded")]
    NoShots,
    #[error("no shot count up to {cap} meets the target")]
    CapExceeded { cap: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Outcome counts over named classical bits, first bit most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementCounts {
    bits: Vec<String>,
    counts: BTreeMap<String, u64>,
    shots: u64,
}

impl MeasurementCounts {
    pub fn new(bits: Vec<String>, counts: BTreeMap<String, u64>) -> Result<Self, VerifyError> {
        for key in counts.keys() {
            if key.len() != bits.len() || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(VerifyError::BadKey {
                    key: key.clone(),
                    bits: bits.len(),
                });
            }
        }
        let shots = counts.values().sum();
        let counts = counts.into_iter().filter(|(_, n)| *n > 0).collect();
        Ok(MeasurementCounts { bits, counts, shots })
    }

    /// Builds counts from a dense histogram indexed by outcome value.
    pub fn from_histogram(bits: Vec<String>, histogram: &[u64]) -> Result<Self, VerifyError> {
        let m = bits.len();
        if histogram.len() != 1usize << m {
            return Err(VerifyError::BadHistogram {
                expected: 1usize << m,
                got: histogram.len(),
            });
        }
        let counts = histogram
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, &n)| (outcome_key(i, m), n))
            .collect();
        Ok(MeasurementCounts {
            bits,
            counts,
            shots: histogram.iter().sum(),
        })
    }

    pub fn bits(&self) -> &[String] {
        &self.bits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Dense histogram, index = outcome value.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; 1usize << self.bits.len()];
        for (k, &n) in &self.counts {
            h[usize::from_str_radix(k, 2).unwrap_or(0)] += n;
        }
        h
    }

    /// Sums out every bit not in `bits`, reordering to the given order.
    pub fn marginalize(&self, bits: &[String]) -> Result<MeasurementCounts, VerifyError> {
        let positions: Vec<usize> = bits
            .iter()
            .map(|b| {
                self.bits
                    .iter()
                    .position(|x| x == b)
                    .ok_or_else(|| VerifyError::UnknownBit(b.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (key, &n) in &self.counts {
            let k: String = positions.iter().map(|&p| key.as_bytes()[p] as char).collect();
            *counts.entry(k).or_insert(0) += n;
        }
        Ok(MeasurementCounts {
            bits: bits.to_vec(),
            counts,
            shots: self.shots,
        })
    }
}

fn outcome_key(index: usize, m: usize) -> String {
    (0..m)
        .map(|j| if (index >> (m - 1 - j)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifierConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Expected probabilities below this count as zero.
    pub floor: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            alpha: 0.05,
            lambda: 2.0 / 3.0,
            floor: 1e-12,
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(VerifyError::Config(format!("alpha {} is not in (0, 1)", self.alpha)));
        }
        if self.lambda == 0.0 || self.lambda == -1.0 || !self.lambda.is_finite() {
            return Err(VerifyError::Config(format!("lambda {} is not allowed", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedDistribution {
    pub probabilities: Vec<f64>,
    pub noise_adjusted: bool,
    pub fidelity: f64,
}

/// Mixes `e` with the uniform distribution: `f * e + (1 - f) / 2^m`.
pub fn noise_adjust(e: &[f64], f: f64) -> ExpectedDistribution {
    let uniform = 1.0 / e.len() as f64;
    let probabilities = if f >= 1.0 {
        e.to_vec()
    } else {
        e.iter().map(|&p| f * p + (1.0 - f) * uniform).collect()
    };
    ExpectedDistribution {
        probabilities,
        noise_adjusted: f < 1.0,
        fidelity: f,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Rejected,
    ImpliedBy(usize),
}

impl Verdict {
    pub fn label(&self) -> String {
        match self {
            Verdict::Satisfied => "satisfied".into(),
            Verdict::Rejected => "rejected".into(),
            Verdict::ImpliedBy(id) => format!("implied-by {id}"),
        }
    }
}

/// Result of testing one assertion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub p_value: f64,
    pub statistic: f64,
    pub df: usize,
    pub verdict: Verdict,
}

/// A test whose only possible outcome was observed every time fits
/// perfectly; the chi-squared reference is undefined there.
fn test_or_exact(result: Result<PowerDivergence, StatsError>) -> Result<PowerDivergence, VerifyError> {
    match result {
        Ok(r) => Ok(r),
        Err(StatsError::TooFewCells(_)) => Ok(PowerDivergence {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        }),
        Err(e) => Err(e.into()),
    }
}

fn check_bits(meta: &AssertionMetadata, counts: &MeasurementCounts) -> Result<(), VerifyError> {
    if counts.bits() != meta.bits.as_slice() {
        return Err(VerifyError::BitMismatch {
            expected: meta.bits.join(", "),
            found: counts.bits().join(", "),
        });
    }
    if meta.bits.len() > MAX_VERIFY_BITS {
        return Err(VerifyError::TooManyBits {
            assertion: meta.assertion,
            bits: meta.bits.len(),
        });
    }
    if counts.shots() == 0 {
        return Err(VerifyError::NoShots);
    }
    Ok(())
}

/// Tests counts against an expected distribution (or the all-zero outcome).
pub fn verify_equality(
    meta: &AssertionMetadata,
    counts: &MeasurementCounts,
    f: f64,
    cfg: &VerifierConfig,
) -> Result<TestOutcome, VerifyError> {
    check_bits(meta, counts)?;
    let expected = meta
        .expectation
        .probabilities(meta.bits.len())
        .ok_or_else(|| VerifyError::Config("superposition metadata passed to the equality test".into()))?;
    let e = noise_adjust(&expected, f);
    let r = test_or_exact(power_divergence(&counts.histogram(), &e.probabilities, cfg.lambda, cfg.floor))?;
    Ok(TestOutcome {
        p_value: r.p_value,
        statistic: r.statistic,
        df: r.df,
        verdict: if r.p_value <= cfg.alpha {
            Verdict::Rejected
        } else {
            Verdict::Satisfied
        },
    })
}

/// Tests every basis-state hypothesis; the reported p-value is the largest.
pub fn verify_superposition(
    meta: &AssertionMetadata,
    counts: &MeasurementCounts,
    f: f64,
    cfg: &VerifierConfig,
) -> Result<TestOutcome, VerifyError> {
    check_bits(meta, counts)?;
    let hist = counts.histogram();
    let cells = hist.len();
    let n = counts.shots() as f64;
    let uniform = (1.0 - f) / cells as f64;
    let peak = f + uniform;

    // D_b puts `peak` on b and `uniform` elsewhere; split the statistic into
    // the b cell plus the shared off-peak sum.
    let off_retained = uniform >= cfg.floor;
    let off_terms: Vec<f64> = if off_retained {
        hist.iter().map(|&o| divergence_term(o, uniform, n, cfg.lambda)).collect()
    } else {
        Vec::new()
    };
    let off_sum: f64 = off_terms.iter().sum();
    let nonzero = hist.iter().filter(|&&o| o > 0).count();

    let mut best: Option<PowerDivergence> = None;
    for (b, &ob) in hist.iter().enumerate() {
        let r = if off_retained {
            let sum = off_sum - off_terms[b] + divergence_term(ob, peak, n, cfg.lambda);
            test_or_exact(finish(sum, n, cells, cfg.lambda))?
        } else if nonzero == usize::from(ob > 0) {
            // every shot landed on b and nothing else is possible under D_b
            test_or_exact(Err(StatsError::TooFewCells(1)))?
        } else {
            PowerDivergence {
                statistic: f64::INFINITY,
                df: 0,
                p_value: 0.0,
            }
        };
        if best.is_none_or(|x| r.p_value > x.p_value) {
            best = Some(r);
        }
    }
    let r = best.expect("at least one outcome");
    Ok(TestOutcome {
        p_value: r.p_value,
        statistic: r.statistic,
        df: r.df,
        verdict: if r.p_value > cfg.alpha {
            Verdict::Rejected
        } else {
            Verdict::Satisfied
        },
    })
}

/// Dispatches on the metadata's expectation.
pub fn verify_assertion(
    meta: &AssertionMetadata,
    counts: &MeasurementCounts,
    f: f64,
    cfg: &VerifierConfig,
) -> Result<TestOutcome, VerifyError> {
    match meta.expectation {
        Expectation::Superposition => verify_superposition(meta, counts, f, cfg),
        _ => verify_equality(meta, counts, f, cfg),
    }
}

/// Inputs for verifying one executed slice.
#[derive(Clone, Copy, Debug)]
pub struct SliceCheck<'a> {
    pub index: usize,
    pub metadata: &'a [AssertionMetadata],
    pub fidelity: f64,
    pub counts: &'a MeasurementCounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub assertion: usize,
    pub slice: Option<usize>,
    pub kind: AssertionClass,
    pub verdict: Verdict,
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub df: Option<usize>,
    pub shots: Option<u64>,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReportSummary {
    pub total: usize,
    pub satisfied: usize,
    pub rejected: usize,
    pub implied: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    /// Ordered by assertion id.
    pub entries: Vec<ReportEntry>,
    pub summary: ReportSummary,
}

impl VerificationReport {
    pub fn all_satisfied(&self) -> bool {
        self.summary.rejected == 0
    }

    pub fn entry(&self, assertion: usize) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.assertion == assertion)
    }

    /// Sorts entries by assertion id and tallies the verdicts.
    pub fn from_entries(mut entries: Vec<ReportEntry>) -> Self {
        entries.sort_by_key(|e| e.assertion);
        let mut summary = ReportSummary {
            total: entries.len(),
            ..ReportSummary::default()
        };
        for e in &entries {
            match e.verdict {
                Verdict::Satisfied => summary.satisfied += 1,
                Verdict::Rejected => summary.rejected += 1,
                Verdict::ImpliedBy(_) => summary.implied += 1,
            }
        }
        VerificationReport { entries, summary }
    }
}

/// Verifies every slice and reports canceled assertions as implied.
pub fn verify_all(
    checks: &[SliceCheck<'_>],
    cancellations: &[(Cancellation, AssertionClass)],
    cfg: &VerifierConfig,
) -> Result<VerificationReport, VerifyError> {
    cfg.validate()?;
    let mut entries = Vec::new();
    for check in checks {
        let expected: Vec<String> = check.metadata.iter().flat_map(|m| m.bits.iter().cloned()).collect();
        if check.counts.bits() != expected.as_slice() {
            return Err(VerifyError::BitMismatch {
                expected: expected.join(", "),
                found: check.counts.bits().join(", "),
            });
        }
        for meta in check.metadata {
            let marginal = check.counts.marginalize(&meta.bits)?;
            let outcome = verify_assertion(meta, &marginal, check.fidelity, cfg)?;
            entries.push(ReportEntry {
                assertion: meta.assertion,
                slice: Some(check.index),
                kind: meta.kind,
                verdict: outcome.verdict,
                p_value: Some(outcome.p_value),
                statistic: Some(outcome.statistic),
                df: Some(outcome.df),
                shots: Some(marginal.shots()),
                fidelity: Some(check.fidelity),
            });
        }
    }
    for (c, kind) in cancellations {
        entries.push(ReportEntry {
            assertion: c.canceled,
            slice: None,
            kind: *kind,
            verdict: Verdict::ImpliedBy(c.implied_by),
            p_value: None,
            statistic: None,
            df: None,
            shots: None,
            fidelity: None,
        });
    }
    Ok(VerificationReport::from_entries(entries))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloConfig {
    pub trials: usize,
    /// Required fraction of trials meeting the precision target.
    pub pass_rate: f64,
    pub start: u64,
    pub cap: u64,
    pub seed: u64,
    /// Largest acceptable total-variation distance between a sampled
    /// histogram and the expected distribution.
    pub tv_tolerance: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            trials: 200,
            pass_rate: 0.95,
            start: 16,
            cap: 65536,
            seed: 0,
            tv_tolerance: 0.1,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.trials == 0 {
            return Err(VerifyError::Config("trials must be positive".into()));
        }
        if !(self.pass_rate > 0.0 && self.pass_rate < 1.0) {
            return Err(VerifyError::Config("pass rate must lie in (0, 1)".into()));
        }
        if self.start == 0 || self.start > self.cap {
            return Err(VerifyError::Config("need 0 < start <= cap".into()));
        }
        if !(self.tv_tolerance > 0.0) {
            return Err(VerifyError::Config("total-variation tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Whether `shots` samples per execution meet the recommendation target.
///
/// Two conditions must hold over `mc.trials` simulated runs under the noisy
/// expected distribution: the test accepts the true hypothesis at a rate
/// consistent with `1 - alpha` (three standard errors of slack), and the
/// sampled histogram lies within `mc.tv_tolerance` of the expectation in at
/// least `mc.pass_rate` of the runs.
fn shots_suffice(
    e: &ExpectedDistribution,
    shots: u64,
    cfg: &VerifierConfig,
    mc: &MonteCarloConfig,
) -> Result<bool, VerifyError> {
    let trials = mc.trials as f64;
    let mut accepted = 0usize;
    let mut precise = 0usize;
    for t in 0..mc.trials {
        let sample = SampleConfig::ideal(shots, derive_seed(&[mc.seed, shots, t as u64]));
        let hist = sample_histogram(&e.probabilities, &sample);
        let r = test_or_exact(power_divergence(&hist, &e.probabilities, cfg.lambda, cfg.floor))?;
        if r.p_value > cfg.alpha {
            accepted += 1;
        }
        let n = shots as f64;
        let tv: f64 = hist
            .iter()
            .zip(&e.probabilities)
            .map(|(&o, &p)| (o as f64 / n - p).abs())
            .sum::<f64>()
            / 2.0;
        if tv <= mc.tv_tolerance {
            precise += 1;
        }
    }
    let a = cfg.alpha;
    let guard = (1.0 - a) - 3.0 * libm::sqrt(a * (1.0 - a) / trials);
    Ok(accepted as f64 / trials >= guard && precise as f64 / trials >= mc.pass_rate)
}

/// Smallest shot count on the doubling-then-bisection grid that meets the
/// target of [`shots_suffice`].
pub fn recommend_shots(
    e: &[f64],
    f: f64,
    cfg: &VerifierConfig,
    mc: &MonteCarloConfig,
) -> Result<u64, VerifyError> {
    cfg.validate()?;
    mc.validate()?;
    let adjusted = noise_adjust(e, f);
    let mut n = mc.start;
    let mut last_fail = None;
    loop {
        if shots_suffice(&adjusted, n, cfg, mc)? {
            break;
        }
        last_fail = Some(n);
        if n >= mc.cap {
            return Err(VerifyError::CapExceeded { cap: mc.cap });
        }
        n = (n * 2).min(mc.cap);
    }
    let (Some(mut lo), mut hi) = (last_fail, n) else {
        return Ok(n);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if shots_suffice(&adjusted, mid, cfg, mc)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Distribution the shot advisor plans for: the expectation itself, or the
/// uniform distribution for superposition assertions.
pub fn planning_distribution(meta: &AssertionMetadata) -> Vec<f64> {
    let m = meta.bits.len();
    meta.expectation
        .probabilities(m)
        .unwrap_or_else(|| vec![1.0 / (1usize << m) as f64; 1usize << m])
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label())
    }
}
