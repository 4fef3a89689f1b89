//! JSON documents exchanged between the subcommands.
//!
//! | file                | written by            | read by                 |
//! |---------------------|-----------------------|-------------------------|
//! | `slices.json`       | `translate`           | `simulate`, `verify`, `recommend` |
//! | `counts_<k>.json`   | `simulate` or a device | `verify`               |
//! | device model        | the user              | `simulate`, `verify`, `recommend` |
//! | report              | `verify`              | the user                |

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{anyhow, bail, ensure, Context, Result};
use qassert_core::circuit::AssertionClass;
use qassert_core::device::DeviceModel;
use qassert_core::translate::{AssertionMetadata, Expectation};
use qassert_core::verify::{MeasurementCounts, ReportEntry, VerificationReport, Verdict};
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "slices.json";

pub fn slice_file_name(index: usize) -> String {
    format!("slice_{index}.qasm")
}

pub fn counts_file_name(index: usize) -> String {
    format!("counts_{index}.json")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ExpectationRecord {
    Superposition,
    Zero,
    Distribution { probabilities: Vec<f64> },
}

impl From<&Expectation> for ExpectationRecord {
    fn from(e: &Expectation) -> Self {
        match e {
            Expectation::Superposition => ExpectationRecord::Superposition,
            Expectation::Zero => ExpectationRecord::Zero,
            Expectation::Distribution(p) => ExpectationRecord::Distribution {
                probabilities: p.clone(),
            },
        }
    }
}

impl From<&ExpectationRecord> for Expectation {
    fn from(e: &ExpectationRecord) -> Self {
        match e {
            ExpectationRecord::Superposition => Expectation::Superposition,
            ExpectationRecord::Zero => Expectation::Zero,
            ExpectationRecord::Distribution { probabilities } => Expectation::Distribution(probabilities.clone()),
        }
    }
}

fn parse_class(s: &str) -> Result<AssertionClass> {
    AssertionClass::parse(s).ok_or_else(|| anyhow!("unknown assertion kind `{s}`"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub assertion: usize,
    pub kind: String,
    pub bits: Vec<String>,
    pub labels: Vec<String>,
    pub expectation: ExpectationRecord,
    pub projective: bool,
}

impl From<&AssertionMetadata> for MetadataRecord {
    fn from(m: &AssertionMetadata) -> Self {
        MetadataRecord {
            assertion: m.assertion,
            kind: m.kind.as_str().into(),
            bits: m.bits.clone(),
            labels: m.labels.clone(),
            expectation: (&m.expectation).into(),
            projective: m.projective,
        }
    }
}

impl MetadataRecord {
    pub fn to_metadata(&self) -> Result<AssertionMetadata> {
        let expectation: Expectation = (&self.expectation).into();
        if let Expectation::Distribution(p) = &expectation {
            ensure!(
                p.len() == 1usize << self.bits.len(),
                "assertion {}: {} probabilities for {} bit(s)",
                self.assertion,
                p.len(),
                self.bits.len()
            );
        }
        Ok(AssertionMetadata {
            assertion: self.assertion,
            kind: parse_class(&self.kind)?,
            bits: self.bits.clone(),
            labels: self.labels.clone(),
            expectation,
            projective: self.projective,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionsRecord {
    pub reapply: bool,
    pub cancel: bool,
    pub concat: bool,
    #[serde(rename = "move")]
    pub move_assertions: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub id: usize,
    pub kind: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub index: usize,
    /// Slice listing, relative to the manifest.
    pub file: String,
    /// SHA-256 of the listing.
    pub digest: String,
    pub num_qubits: usize,
    pub bit_order: Vec<String>,
    pub covered: Vec<usize>,
    pub terminal: bool,
    pub metadata: Vec<MetadataRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanceledRecord {
    pub assertion: usize,
    pub implied_by: usize,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub source: String,
    /// SHA-256 of the source program.
    pub digest: String,
    pub options: OptionsRecord,
    pub assertions: Vec<AssertionRecord>,
    pub slices: Vec<SliceRecord>,
    pub canceled: Vec<CanceledRecord>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.version == MANIFEST_VERSION,
            "unsupported manifest version {} (expected {MANIFEST_VERSION})",
            self.version
        );
        let all: BTreeSet<usize> = self.assertions.iter().map(|a| a.id).collect();
        ensure!(all.len() == self.assertions.len(), "duplicate assertion id in manifest");
        let mut seen = BTreeSet::new();
        for (i, s) in self.slices.iter().enumerate() {
            ensure!(s.index == i + 1, "slice record {} has index {}", i + 1, s.index);
            let bits: Vec<String> = s.metadata.iter().flat_map(|m| m.bits.iter().cloned()).collect();
            ensure!(bits == s.bit_order, "slice {}: bit order does not match its metadata", s.index);
            let ids: Vec<usize> = s.metadata.iter().map(|m| m.assertion).collect();
            ensure!(ids == s.covered, "slice {}: covered ids do not match its metadata", s.index);
            for &id in &s.covered {
                ensure!(seen.insert(id), "assertion {id} is covered more than once");
            }
        }
        for c in &self.canceled {
            ensure!(seen.insert(c.assertion), "assertion {} is both covered and canceled", c.assertion);
            parse_class(&c.kind)?;
        }
        ensure!(
            seen == all,
            "covered and canceled ids {:?} do not partition the assertions {:?}",
            seen,
            all
        );
        Ok(())
    }

    pub fn canceled_classes(&self) -> Result<Vec<(qassert_core::optimize::Cancellation, AssertionClass)>> {
        self.canceled
            .iter()
            .map(|c| {
                Ok((
                    qassert_core::optimize::Cancellation {
                        canceled: c.assertion,
                        implied_by: c.implied_by,
                    },
                    parse_class(&c.kind)?,
                ))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsFile {
    pub slice: usize,
    pub shots: u64,
    /// Most significant bit first.
    pub bit_order: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CountsFile {
    pub fn from_counts(slice: usize, counts: &MeasurementCounts, seed: Option<u64>) -> Self {
        CountsFile {
            slice,
            shots: counts.shots(),
            bit_order: counts.bits().to_vec(),
            counts: counts.counts().iter().filter(|(_, &n)| n > 0).map(|(k, &n)| (k.clone(), n)).collect(),
            seed,
        }
    }

    pub fn to_counts(&self) -> Result<MeasurementCounts> {
        let counts = MeasurementCounts::new(self.bit_order.clone(), self.counts.clone())
            .with_context(|| format!("counts for slice {}", self.slice))?;
        ensure!(
            counts.shots() == self.shots,
            "counts for slice {} sum to {} but the file declares {} shots",
            self.slice,
            counts.shots(),
            self.shots
        );
        Ok(counts)
    }
}

/// Device model document. Both rate tables need a `default` entry.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    #[serde(default)]
    name: Option<String>,
    gate_error: BTreeMap<String, f64>,
    #[serde(default)]
    two_qubit_default: Option<f64>,
    measurement_error: BTreeMap<String, f64>,
}

/// Parses and validates a device model document. `fallback_name` is used
/// when the document has no `name`.
pub fn parse_device_model(text: &str, fallback_name: &str) -> Result<DeviceModel> {
    if text.trim().is_empty() {
        bail!("device model document is empty");
    }
    let doc: DeviceFile = serde_json::from_str(text).context("malformed device model")?;
    let mut gate_error = doc.gate_error;
    let mut measurement_error = doc.measurement_error;
    let gate_default = gate_error
        .remove("default")
        .ok_or_else(|| anyhow!("device model: `gate_error.default` is required"))?;
    let measurement_default = measurement_error
        .remove("default")
        .ok_or_else(|| anyhow!("device model: `measurement_error.default` is required"))?;
    let model = DeviceModel {
        name: doc.name.unwrap_or_else(|| fallback_name.into()),
        gate_default,
        gate_error,
        two_qubit_default: doc.two_qubit_default,
        measurement_default,
        measurement_error,
    };
    model.validate()?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub model: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub id: usize,
    pub slice: Option<usize>,
    pub kind: String,
    /// `satisfied`, `rejected` or `implied-by`.
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implied_by: Option<usize>,
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub df: Option<usize>,
    pub shots: Option<u64>,
    pub f: Option<f64>,
}

impl From<&ReportEntry> for ReportRecord {
    fn from(e: &ReportEntry) -> Self {
        let (verdict, implied_by) = match e.verdict {
            Verdict::Satisfied => ("satisfied", None),
            Verdict::Rejected => ("rejected", None),
            Verdict::ImpliedBy(id) => ("implied-by", Some(id)),
        };
        ReportRecord {
            id: e.assertion,
            slice: e.slice,
            kind: e.kind.as_str().into(),
            verdict: verdict.into(),
            implied_by,
            p_value: e.p_value,
            statistic: e.statistic,
            df: e.df,
            shots: e.shots,
            f: e.fidelity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub total: usize,
    pub satisfied: usize,
    pub rejected: usize,
    pub implied: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: ReportConfig,
    pub summary: SummaryRecord,
    pub assertions: Vec<ReportRecord>,
}

impl ReportFile {
    pub fn new(report: &VerificationReport, config: ReportConfig) -> Self {
        let s = report.summary;
        ReportFile {
            config,
            summary: SummaryRecord {
                total: s.total,
                satisfied: s.satisfied,
                rejected: s.rejected,
                implied: s.implied,
            },
            assertions: report.entries.iter().map(ReportRecord::from).collect(),
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.summary.rejected == 0
    }

    pub fn record(&self, id: usize) -> Option<&ReportRecord> {
        self.assertions.iter().find(|r| r.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub model: String,
    pub seed: u64,
    pub trials: usize,
    pub pass_rate: f64,
    pub tv_tolerance: f64,
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendRecord {
    pub id: usize,
    pub slice: usize,
    pub f: f64,
    /// `None` when the cap was reached without meeting the target.
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendFile {
    pub config: RecommendConfig,
    pub assertions: Vec<RecommendRecord>,
    /// Largest per-assertion recommendation.
    pub program: Option<u64>,
}
