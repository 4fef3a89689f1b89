use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{anyhow, bail, ensure, Context, Result};
use qassert_core::circuit::{FlatProgram, Qubit, Step};
use qassert_core::device::{slice_fidelity, DeviceModel};
use qassert_core::optimize::{optimize, OptimizationOptions};
use qassert_core::qasm::{format_complex, parse_flat, print_program};
use qassert_core::sim::{derive_seed, sample_slice, simulate as run_circuit, SampleConfig};
use qassert_core::translate::{AssertionMetadata, Expectation, Slice, TranslationOptions};
use qassert_core::verify::{
    planning_distribution, recommend_shots, verify_all, MonteCarloConfig, SliceCheck, VerificationReport,
    VerifierConfig, VerifyError,
};
use qassert_core::Complex64;

use crate::files::{atomic_write, read_json, read_text, sha256_hex, write_json};
use crate::formats::{
    counts_file_name, parse_device_model, slice_file_name, AssertionRecord, CanceledRecord, CountsFile, Manifest,
    MetadataRecord, OptionsRecord, RecommendConfig, RecommendFile, RecommendRecord, ReportConfig, ReportFile,
    SliceRecord, MANIFEST_NAME, MANIFEST_VERSION,
};

impl Default for OptionsRecord {
    fn default() -> Self {
        OptionsRecord {
            reapply: true,
            cancel: true,
            concat: true,
            move_assertions: true,
        }
    }
}

/// Six significant digits, printed in the shortest form.
fn sig6(x: f64) -> String {
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn assert_comment(m: &AssertionMetadata) -> String {
    let body = match &m.expectation {
        Expectation::Superposition => "superposition".to_string(),
        Expectation::Zero => "zero".to_string(),
        Expectation::Distribution(p) => p.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join(", "),
    };
    format!("// ASSERT {}: ({}) {{{}}}", m.assertion, m.bits.join(", "), body)
}

/// The executable listing of a slice followed by one `// ASSERT` comment
/// per checked assertion.
pub fn render_slice(slice: &Slice) -> String {
    let prog = FlatProgram {
        qregs: slice.qregs.clone(),
        cregs: slice.cregs.clone(),
        steps: slice.instructions.iter().cloned().map(Step::Instruction).collect(),
    };
    let mut out = print_program(&prog);
    out.push('\n');
    for m in &slice.metadata {
        out.push_str(&assert_comment(m));
        out.push('\n');
    }
    out
}

/// Rebuilds a slice from its listing and manifest record. The inserted
/// block ranges are not recorded, so `blocks` is empty.
fn rebuild_slice(record: &SliceRecord, text: &str) -> Result<Slice> {
    let prog = parse_flat(text).map_err(|e| anyhow!("{}:{e}", record.file))?;
    ensure!(
        prog.assertions().next().is_none(),
        "{}: slice listings must not contain assertions",
        record.file
    );
    let metadata = record
        .metadata
        .iter()
        .map(MetadataRecord::to_metadata)
        .collect::<Result<Vec<_>>>()?;
    let instructions: Vec<_> = prog.instructions().cloned().collect();
    let slice = Slice {
        index: record.index,
        qregs: prog.qregs,
        cregs: prog.cregs,
        prefix_len: instructions.len(),
        instructions,
        metadata,
        covered: record.covered.clone(),
        terminal: record.terminal,
        blocks: Vec::new(),
    };
    ensure!(
        slice.num_qubits() == record.num_qubits,
        "{}: {} qubits, manifest says {}",
        record.file,
        slice.num_qubits(),
        record.num_qubits
    );
    for bit in &record.bit_order {
        ensure!(slice.clbit_index(bit).is_some(), "{}: no classical bit `{bit}`", record.file);
    }
    Ok(slice)
}

/// Output of [`translate_source`]: the manifest and the slice listings it
/// refers to, not yet written anywhere.
#[derive(Clone, Debug)]
pub struct Translation {
    pub manifest: Manifest,
    pub listings: Vec<(String, String)>,
    pub slices: Vec<Slice>,
}

pub fn translate_source(src: &str, source: &str, opts: &OptionsRecord) -> Result<Translation> {
    let prog = parse_flat(src).map_err(|e| anyhow!("{source}:{e}"))?;
    let assertions: Vec<AssertionRecord> = prog
        .assertions()
        .map(|a| AssertionRecord {
            id: a.id,
            kind: a.class().as_str().into(),
            labels: a.labels.clone(),
        })
        .collect();
    if assertions.is_empty() {
        bail!("{source}: no assertions found");
    }
    let topts = TranslationOptions { reapply: opts.reapply };
    let oopts = OptimizationOptions {
        cancel: opts.cancel,
        concat: opts.concat,
        move_assertions: opts.move_assertions,
    };
    let optimized = optimize(&prog, &topts, &oopts)?;

    let mut listings = Vec::new();
    let mut records = Vec::new();
    for s in &optimized.slices {
        let file = slice_file_name(s.index);
        let text = render_slice(s);
        records.push(SliceRecord {
            index: s.index,
            file: file.clone(),
            digest: sha256_hex(text.as_bytes()),
            num_qubits: s.num_qubits(),
            bit_order: s.bit_order(),
            covered: s.covered.clone(),
            terminal: s.terminal,
            metadata: s.metadata.iter().map(MetadataRecord::from).collect(),
        });
        listings.push((file, text));
    }
    let canceled = optimized
        .cancellations
        .iter()
        .map(|c| CanceledRecord {
            assertion: c.canceled,
            implied_by: c.implied_by,
            kind: assertions
                .iter()
                .find(|a| a.id == c.canceled)
                .map(|a| a.kind.clone())
                .unwrap_or_default(),
        })
        .collect();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        source: source.into(),
        digest: sha256_hex(src.as_bytes()),
        options: *opts,
        assertions,
        slices: records,
        canceled,
    };
    manifest.validate()?;
    Ok(Translation {
        manifest,
        listings,
        slices: optimized.slices,
    })
}

/// Translates `input` and writes the slice listings and `slices.json` into
/// `out`. Returns the manifest path.
pub fn translate(input: &Path, out: &Path, opts: &OptionsRecord) -> Result<PathBuf> {
    let src = read_text(input)?;
    let t = translate_source(&src, &input.display().to_string(), opts)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (file, text) in &t.listings {
        atomic_write(&out.join(file), text.as_bytes())?;
    }
    let path = out.join(MANIFEST_NAME);
    write_json(&path, &t.manifest)?;
    Ok(path)
}

fn manifest_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = read_json(path)?;
    m.validate().with_context(|| format!("invalid manifest {}", path.display()))?;
    Ok(m)
}

/// Reads every slice listing of a manifest and checks it against its digest.
pub fn load_slices(manifest_path: &Path, manifest: &Manifest) -> Result<Vec<Slice>> {
    let dir = manifest_dir(manifest_path);
    manifest
        .slices
        .iter()
        .map(|r| {
            let text = read_text(&dir.join(&r.file))?;
            ensure!(
                sha256_hex(text.as_bytes()) == r.digest,
                "{} does not match the digest recorded in the manifest",
                r.file
            );
            rebuild_slice(r, &text)
        })
        .collect()
}

/// No path means the error-free device.
pub fn load_device(path: Option<&Path>) -> Result<DeviceModel> {
    let Some(path) = path else {
        return Ok(DeviceModel::ideal());
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("device");
    parse_device_model(&read_text(path)?, stem).with_context(|| format!("loading {}", path.display()))
}

/// Applies `f` to every item on up to `jobs` threads; results keep the
/// input order and the first error (by position) wins.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every item is processed"))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SimulateArgs {
    pub manifest: PathBuf,
    /// Defaults to the manifest's directory.
    pub out: Option<PathBuf>,
    pub shots: u64,
    pub seed: u64,
    /// Samples at each slice's fidelity under this model; `None` is ideal.
    pub device: Option<PathBuf>,
    pub jobs: usize,
}

/// Counts for one slice; the sampling seed is derived from `seed` and the
/// slice index so slices are independent of execution order.
pub fn simulate_slice(slice: &Slice, shots: u64, seed: u64, fidelity: f64) -> Result<CountsFile> {
    let cfg = SampleConfig {
        shots,
        seed: derive_seed(&[seed, slice.index as u64]),
        fidelity,
    };
    let counts = sample_slice(slice, &cfg).with_context(|| format!("simulating slice {}", slice.index))?;
    Ok(CountsFile::from_counts(slice.index, &counts, Some(seed)))
}

/// Writes `counts_<k>.json` for every slice and returns the paths.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    ensure!(args.shots > 0, "--shots must be positive");
    let manifest = load_manifest(&args.manifest)?;
    let slices = load_slices(&args.manifest, &manifest)?;
    let device = args.device.as_deref().map(|p| load_device(Some(p))).transpose()?;
    let out = args.out.clone().unwrap_or_else(|| manifest_dir(&args.manifest));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    par_map(&slices, args.jobs, |s| {
        let f = device.as_ref().map_or(1.0, |m| slice_fidelity(s, m).f);
        let counts = simulate_slice(s, args.shots, args.seed, f)?;
        let path = out.join(counts_file_name(s.index));
        write_json(&path, &counts)?;
        Ok(path)
    })
}

#[derive(Clone, Debug)]
pub struct VerifyArgs {
    pub manifest: PathBuf,
    /// Defaults to the manifest's directory.
    pub counts_dir: Option<PathBuf>,
    pub device: Option<PathBuf>,
    pub alpha: f64,
    pub lambda: f64,
    /// Defaults to `report.json` in the counts directory.
    pub report: Option<PathBuf>,
    pub jobs: usize,
}

/// Checks every slice's counts and writes the report. Verdicts are part of
/// the returned report; `Err` means the inputs were unusable.
pub fn verify(args: &VerifyArgs) -> Result<ReportFile> {
    let manifest = load_manifest(&args.manifest)?;
    let model = load_device(args.device.as_deref())?;
    let cfg = VerifierConfig {
        alpha: args.alpha,
        lambda: args.lambda,
        ..VerifierConfig::default()
    };
    cfg.validate()?;
    let counts_dir = args.counts_dir.clone().unwrap_or_else(|| manifest_dir(&args.manifest));
    let slices = if args.device.is_some() {
        Some(load_slices(&args.manifest, &manifest)?)
    } else {
        None
    };

    let mut files = Vec::with_capacity(manifest.slices.len());
    for r in &manifest.slices {
        let path = counts_dir.join(counts_file_name(r.index));
        let c: CountsFile = read_json(&path).with_context(|| format!("counts for slice {} are missing or unreadable", r.index))?;
        ensure!(c.slice == r.index, "{} is for slice {}, expected {}", path.display(), c.slice, r.index);
        ensure!(
            c.bit_order == r.bit_order,
            "slice {}: bit order mismatch, expected ({}), found ({})",
            r.index,
            r.bit_order.join(", "),
            c.bit_order.join(", ")
        );
        files.push(c);
    }

    let work: Vec<usize> = (0..manifest.slices.len()).collect();
    let per_slice = par_map(&work, args.jobs, |&i| {
        let record = &manifest.slices[i];
        let metadata = record
            .metadata
            .iter()
            .map(MetadataRecord::to_metadata)
            .collect::<Result<Vec<_>>>()?;
        let counts = files[i].to_counts()?;
        let fidelity = slices.as_ref().map_or(1.0, |s| slice_fidelity(&s[i], &model).f);
        let check = SliceCheck {
            index: record.index,
            metadata: &metadata,
            fidelity,
            counts: &counts,
        };
        let r = verify_all(&[check], &[], &cfg).with_context(|| format!("verifying slice {}", record.index))?;
        Ok(r.entries)
    })?;
    let mut entries: Vec<_> = per_slice.into_iter().flatten().collect();
    entries.extend(verify_all(&[], &manifest.canceled_classes()?, &cfg)?.entries);
    let report = VerificationReport::from_entries(entries);

    let seeds: Vec<Option<u64>> = files.iter().map(|c| c.seed).collect();
    let seed = match seeds.first() {
        Some(&s) if seeds.iter().all(|&x| x == s) => s,
        _ => None,
    };
    let file = ReportFile::new(
        &report,
        ReportConfig {
            alpha: cfg.alpha,
            lambda: cfg.lambda,
            model: model.name.clone(),
            seed,
        },
    );
    let path = args.report.clone().unwrap_or_else(|| counts_dir.join("report.json"));
    write_json(&path, &file)?;
    Ok(file)
}

fn format_p(p: f64) -> String {
    if p == 0.0 || p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

pub fn report_text(r: &ReportFile) -> String {
    let mut out = String::new();
    for a in &r.assertions {
        let slice = a.slice.map_or("-".to_string(), |s| s.to_string());
        let detail = match (a.implied_by, a.p_value) {
            (Some(by), _) => format!("implied by A{by}"),
            (None, Some(p)) => format!("p = {}  {}", format_p(p), a.verdict),
            (None, None) => a.verdict.clone(),
        };
        let _ = writeln!(out, "A{:<3} slice {:<3} {:<17} {detail}", a.id, slice, a.kind);
    }
    let s = r.summary;
    let _ = writeln!(
        out,
        "{} assertion(s): {} satisfied, {} rejected, {} implied",
        s.total, s.satisfied, s.rejected, s.implied
    );
    out
}

#[derive(Clone, Debug)]
pub struct RecommendArgs {
    pub manifest: PathBuf,
    pub device: Option<PathBuf>,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
    pub trials: usize,
    pub cap: u64,
    pub jobs: usize,
}

/// Per-assertion shot recommendations for the slices of a manifest.
pub fn recommend(args: &RecommendArgs) -> Result<RecommendFile> {
    let manifest = load_manifest(&args.manifest)?;
    let slices = load_slices(&args.manifest, &manifest)?;
    let model = load_device(args.device.as_deref())?;
    let cfg = VerifierConfig {
        alpha: args.alpha,
        lambda: args.lambda,
        ..VerifierConfig::default()
    };
    let mc = MonteCarloConfig {
        seed: args.seed,
        trials: args.trials,
        cap: args.cap,
        ..MonteCarloConfig::default()
    };
    cfg.validate()?;
    mc.validate()?;

    let work: Vec<(&Slice, &AssertionMetadata, f64)> = slices
        .iter()
        .flat_map(|s| {
            let f = slice_fidelity(s, &model).f;
            s.metadata.iter().map(move |m| (s, m, f))
        })
        .collect();
    let assertions = par_map(&work, args.jobs, |&(s, m, f)| {
        let (shots, warning) = match recommend_shots(&planning_distribution(m), f, &cfg, &mc) {
            Ok(n) => (Some(n), None),
            Err(VerifyError::CapExceeded { cap }) => (None, Some(format!("no shot count up to {cap} meets the target"))),
            Err(e) => return Err(e).with_context(|| format!("assertion {}", m.assertion)),
        };
        Ok(RecommendRecord {
            id: m.assertion,
            slice: s.index,
            f,
            shots,
            warning,
        })
    })?;
    let program = assertions.iter().filter_map(|a| a.shots).max();
    Ok(RecommendFile {
        config: RecommendConfig {
            alpha: cfg.alpha,
            lambda: cfg.lambda,
            model: model.name,
            seed: mc.seed,
            trials: mc.trials,
            pass_rate: mc.pass_rate,
            tv_tolerance: mc.tv_tolerance,
            cap: mc.cap,
        },
        assertions,
        program,
    })
}

pub fn recommend_text(r: &RecommendFile) -> String {
    let mut out = String::new();
    for a in &r.assertions {
        let shots = a.shots.map_or("-".to_string(), |n| n.to_string());
        let _ = write!(out, "A{:<3} slice {:<3} f = {:.5}  shots {shots}", a.id, a.slice, a.f);
        if let Some(w) = &a.warning {
            let _ = write!(out, "  warning: {w}");
        }
        out.push('\n');
    }
    match r.program {
        Some(n) => {
            let _ = writeln!(out, "program recommendation: {n} shots");
        }
        None => out.push_str("program recommendation: none (every assertion exceeded the cap)\n"),
    }
    out
}

#[derive(Clone, Debug)]
pub struct CheckArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub options: OptionsRecord,
    pub shots: u64,
    pub seed: u64,
    pub device: Option<PathBuf>,
    pub alpha: f64,
    pub lambda: f64,
    pub report: Option<PathBuf>,
    pub jobs: usize,
}

/// Translate, simulate and verify in one go, all inside `out`.
pub fn check(args: &CheckArgs) -> Result<ReportFile> {
    let manifest = translate(&args.input, &args.out, &args.options)?;
    simulate(&SimulateArgs {
        manifest: manifest.clone(),
        out: Some(args.out.clone()),
        shots: args.shots,
        seed: args.seed,
        device: args.device.clone(),
        jobs: args.jobs,
    })?;
    verify(&VerifyArgs {
        manifest,
        counts_dir: Some(args.out.clone()),
        device: args.device.clone(),
        alpha: args.alpha,
        lambda: args.lambda,
        report: args.report.clone(),
        jobs: args.jobs,
    })
}

/// The final state of a program (assertions ignored) as an amplitude list
/// that can be pasted into an `assert-eq` over all qubits in declaration
/// order.
pub fn amplitudes(input: &Path) -> Result<String> {
    let src = read_text(input)?;
    let prog = parse_flat(&src).map_err(|e| anyhow!("{}:{e}", input.display()))?;
    let instrs: Vec<_> = prog.instructions().cloned().collect();
    ensure!(
        !instrs.iter().any(|i| i.is_measurement()),
        "programs with measurements have no single final state"
    );
    let n = prog.num_qubits();
    let state = run_circuit(&instrs, n)?;
    let order: Vec<Qubit> = (0..n).map(Qubit).collect();
    let amps = state.amplitudes_in_order(&order)?;
    let clean = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
    let items: Vec<String> = amps
        .iter()
        .map(|a| format_complex(Complex64::new(clean(a.re), clean(a.im))))
        .collect();
    let names: Vec<String> = order.iter().map(|&q| prog.qubit_name(q)).collect();
    Ok(format!("// {}\n{{ {} }}\n", names.join(", "), items.join(", ")))
}
