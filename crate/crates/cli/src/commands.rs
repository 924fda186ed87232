//! The six verbs. Each one reads its inputs from a [`Workspace`], writes
//! its artifacts there and returns a short summary for the terminal.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use flowfactor::binio::{self, FileKind};
use flowfactor::data::{self, Factors, LatentCodec, ToyDataset, FACTOR_NAMES, NUM_FACTORS, NUM_SCENES, PIXELS};
use flowfactor::metrics::{
    self, dci_disentanglement, extract_attributes, swap_fidelity_attrs, MetricsError, MetricsReport,
    Representation, SwapSummary,
};
use flowfactor::model::ModelParams;
use flowfactor::odeint;
use flowfactor::ppm::ImageGrid;
use flowfactor::rng::{splitmix64, Rng};
use flowfactor::training::{self, LossTrace, TrainingSet};

use crate::config::RunConfig;

const PAD: usize = 2;
const GRID_COLUMNS: usize = 8;

/// Where a run reads and writes its files.
#[derive(Clone, Debug, PartialEq)]
pub struct Workspace {
    pub data_dir: PathBuf,
    pub run_dir: PathBuf,
}

impl Workspace {
    /// Relative config paths are resolved against `out`.
    pub fn new(out: &Path, cfg: &RunConfig, name: &str) -> Self {
        Self {
            data_dir: out.join(&cfg.paths.data_dir),
            run_dir: out.join(&cfg.paths.runs_dir).join(name),
        }
    }

    pub fn dataset(&self) -> PathBuf {
        self.data_dir.join("dataset.bin")
    }

    pub fn codec(&self) -> PathBuf {
        self.data_dir.join("codec.bin")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.run_dir.join("checkpoint.bin")
    }

    pub fn loss_csv(&self) -> PathBuf {
        self.run_dir.join("loss.csv")
    }

    pub fn metrics(&self) -> PathBuf {
        self.run_dir.join("metrics.txt")
    }

    pub fn snapshot(&self) -> PathBuf {
        self.run_dir.join("config.snapshot")
    }

    pub fn samples_dir(&self) -> PathBuf {
        self.run_dir.join("samples")
    }

    pub fn ablation_csv(&self) -> PathBuf {
        self.run_dir.join("ablation.csv")
    }
}

/// Writes through a temporary sibling so a crash never leaves a truncated
/// artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("partial");
    {
        let mut f = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        f.write_all(bytes)?;
        f.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

fn require(path: &Path, what: &str, verb: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found at {} (run `{verb}` first)", path.display());
    }
    Ok(())
}

pub fn load_codec(ws: &Workspace) -> Result<LatentCodec> {
    let path = ws.codec();
    require(&path, "latent codec", "generate-data")?;
    let mut r = BufReader::new(File::open(&path)?);
    LatentCodec::read_from(&mut r).with_context(|| format!("reading {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    require(path, "checkpoint", "train")?;
    let mut r = BufReader::new(File::open(path)?);
    ModelParams::read_from(&mut r).with_context(|| format!("reading {}", path.display()))
}

/// Checks that the dataset cache exists and carries a valid header.
fn check_dataset(ws: &Workspace) -> Result<()> {
    let path = ws.dataset();
    require(&path, "dataset cache", "generate-data")?;
    let mut r = BufReader::new(File::open(&path)?);
    binio::read_header(&mut r, FileKind::Dataset).with_context(|| format!("reading {}", path.display()))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileStatus {
    Written,
    VerifiedIdentical,
}

/// Writes `bytes` to `path`, or, if the file exists, checks it matches
/// them exactly.
fn write_or_verify(path: &Path, bytes: &[u8]) -> Result<FileStatus> {
    if !path.exists() {
        write_atomic(path, bytes)?;
        return Ok(FileStatus::Written);
    }
    let existing = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match binio::first_difference(&existing, bytes) {
        None => Ok(FileStatus::VerifiedIdentical),
        Some(offset) => bail!(
            "verification failed: {} differs from a fresh build at byte offset {offset} \
             ({} bytes on disk, {} expected)",
            path.display(),
            existing.len(),
            bytes.len()
        ),
    }
}

impl FileStatus {
    fn describe(self) -> &'static str {
        match self {
            FileStatus::Written => "written",
            FileStatus::VerifiedIdentical => "verified identical",
        }
    }
}

/// Renders every scene and fits the codec. On a rerun the existing files
/// are compared byte for byte, the dataset first so a damaged cache is
/// reported before the slower codec fit.
pub fn generate_data(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    fs::create_dir_all(&ws.data_dir).with_context(|| format!("creating {}", ws.data_dir.display()))?;
    let dataset = write_or_verify(&ws.dataset(), &data::dataset_cache_bytes())?;
    log::info!("dataset cache {}", dataset.describe());
    let codec = LatentCodec::fit(&ToyDataset, cfg.model_config().layout())?;
    let codec = write_or_verify(&ws.codec(), &codec.to_bytes())?;
    Ok(format!(
        "dataset.bin: {}\ncodec.bin: {}\n",
        dataset.describe(),
        codec.describe()
    ))
}

/// Trains from scratch, refreshing the checkpoint and loss CSV every
/// `checkpoint_every` steps and at the end.
pub fn train(cfg: &RunConfig, ws: &Workspace) -> Result<String> {
    check_dataset(ws)?;
    let codec = load_codec(ws)?;
    let tc = cfg.train_config();
    tc.validate()?;
    write_atomic(&ws.snapshot(), cfg.snapshot().as_bytes())?;
    let set = TrainingSet::new(&codec)?;
    let mut io_error = None;
    let (params, trace) = training::train(&tc, &set, |step, params, trace| {
        let r = write_atomic(&ws.checkpoint(), &params.to_bytes())
            .and_then(|_| write_atomic(&ws.loss_csv(), trace.to_csv().as_bytes()));
        if let Err(e) = r {
            log::warn!("checkpoint at step {step} not written: {e:#}");
            io_error.get_or_insert(e);
        }
    })
    .context("training aborted")?;
    if let Some(e) = io_error {
        return Err(e.context("writing intermediate checkpoint"));
    }
    write_atomic(&ws.checkpoint(), &params.to_bytes())?;
    write_atomic(&ws.loss_csv(), trace.to_csv().as_bytes())?;
    let last = trace.records.last().map(|r| r.fm).unwrap_or(f64::NAN);
    Ok(format!("trained {} steps, final fm_loss {last:.4}\n", tc.steps))
}

/// Full-dataset representation of a checkpoint, or the planted oracle.
pub fn representation(cfg: &RunConfig, ws: &Workspace, oracle: bool) -> Result<Representation> {
    if oracle {
        return Ok(Representation::planted());
    }
    let params = load_checkpoint(&ws.checkpoint())?;
    Ok(Representation::learned(&params, cfg.metrics.reduce)?)
}

/// Scores a representation, adding a per-dimension spread diagnostic when
/// it has collapsed.
pub fn score(rep: &Representation, cfg: &RunConfig) -> Result<MetricsReport> {
    metrics::evaluate(rep, &cfg.metrics_config(), cfg.seed).map_err(|e| match e {
        MetricsError::CollapsedRepresentation(_) => {
            let std = rep.std();
            let max = std.iter().copied().fold(0.0f64, f64::max);
            anyhow!(e).context(format!(
                "every one of the {} representation dimensions is (nearly) constant across the dataset \
                 (largest standard deviation {max:.3e}); the encoder has collapsed or the checkpoint is untrained",
                std.len()
            ))
        }
        other => anyhow!(other),
    })
}

pub fn evaluate(cfg: &RunConfig, ws: &Workspace, oracle: bool) -> Result<String> {
    let rep = representation(cfg, ws, oracle)?;
    let report = score(&rep, cfg)?;
    write_atomic(&ws.metrics(), report.to_text().as_bytes())?;
    Ok(format!(
        "factorvae_score {:.4}  dci_disentanglement {:.4}  mig {:.4}\n",
        report.factorvae_score, report.dci_disentanglement, report.mig
    ))
}

fn sample_rng(seed: u64, i: u64) -> Rng {
    Rng::new(splitmix64(seed ^ i).1)
}

fn failed_cell() -> Vec<f64> {
    vec![0.5; PIXELS]
}

/// Outcome of a command that keeps going past per-item failures.
#[derive(Debug, Default)]
pub struct Partial {
    pub summary: String,
    pub failures: Vec<String>,
}

/// Draws `count` conditioning scenes and one sample for each. The grid
/// interleaves rows of conditioning images with rows of samples.
pub fn sample(cfg: &RunConfig, ws: &Workspace, count: usize) -> Result<Partial> {
    let codec = load_codec(ws)?;
    let params = load_checkpoint(&ws.checkpoint())?;
    let solver = cfg.solver_spec()?;
    let ds = ToyDataset;
    let mut out = Partial::default();
    let mut conds = Vec::with_capacity(count);
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = sample_rng(cfg.seed, i as u64);
        let scene = rng.below(NUM_SCENES);
        let image = ds.image(scene);
        let result = {
            let tape = flowfactor::tensor::Tape::new();
            let factors = params.frozen(&tape).factor_set(&image)?;
            odeint::sample(&params, &factors, &codec, &solver, &mut rng)
        };
        match result {
            Ok(s) => samples.push(s.image),
            Err(e) => {
                log::warn!("sample {i}: {e}");
                out.failures.push(format!("sample {i} (scene {scene}): {e}"));
                samples.push(failed_cell());
            }
        }
        conds.push(image);
    }
    let mut rows = Vec::new();
    for (c, s) in conds.chunks(GRID_COLUMNS).zip(samples.chunks(GRID_COLUMNS)) {
        rows.push(c.to_vec());
        rows.push(s.to_vec());
    }
    let path = ws.samples_dir().join("samples.ppm");
    write_atomic(&path, &ImageGrid::from_rows(&rows, PAD).to_ppm())?;
    out.summary = format!(
        "{} of {count} samples written to {}\n",
        count - out.failures.len(),
        path.display()
    );
    Ok(out)
}

fn scene_image(index: usize) -> Result<Vec<f64>> {
    if index >= NUM_SCENES {
        bail!("scene index {index} out of range (0..{NUM_SCENES})");
    }
    Ok(ToyDataset.image(index))
}

/// Attributes of an image after an encode/decode round trip: the best any
/// sample decoded by this codec can reproduce.
fn round_trip_attrs(codec: &LatentCodec, image: &[f64]) -> Result<Result<Factors, MetricsError>> {
    let decoded = codec.decode(&codec.encode(image)?)?;
    Ok(extract_attributes(&decoded))
}

fn attr_cell(a: &Result<Factors, MetricsError>, k: usize) -> String {
    match a {
        Ok(f) => f.0[k].to_string(),
        Err(_) => "-".into(),
    }
}

/// Swaps factor token `token` (every token when `None`) from the target
/// scene into the source scene's factors. The grid rows are source, target
/// and swapped. Every sample starts from the same prior draw, so the report
/// can compare each swapped image's attributes with the unswapped sample
/// under the source's own factors, next to the round-tripped source and
/// target references.
pub fn swap(cfg: &RunConfig, ws: &Workspace, source: usize, target: usize, token: Option<usize>) -> Result<Partial> {
    let codec = load_codec(ws)?;
    let params = load_checkpoint(&ws.checkpoint())?;
    let solver = cfg.solver_spec()?;
    let n = params.config().factors;
    let tokens: Vec<usize> = match token {
        Some(i) if i >= n => bail!("factor token {i} out of range for {n} factor tokens"),
        Some(i) => vec![i],
        None => (0..n).collect(),
    };
    let (src, tgt) = (scene_image(source)?, scene_image(target)?);
    let src_attrs = round_trip_attrs(&codec, &src)?;
    let tgt_attrs = round_trip_attrs(&codec, &tgt)?;

    let mut out = Partial::default();
    let mut report = String::new();
    writeln!(report, "source: scene {source}").unwrap();
    writeln!(report, "target: scene {target}").unwrap();
    writeln!(report, "references: codec round trips of source and target").unwrap();
    let base = {
        let tape = flowfactor::tensor::Tape::new();
        let factors = params.frozen(&tape).factor_set(&src)?;
        odeint::sample(&params, &factors, &codec, &solver, &mut sample_rng(cfg.seed, 0))
    };
    let base_attrs = match &base {
        Ok(s) => extract_attributes(&s.image),
        Err(e) => {
            out.failures.push(format!("unswapped sample: {e}"));
            writeln!(report, "unswapped sample: integrator failed: {e}").unwrap();
            Err(MetricsError::NoObject)
        }
    };
    let mut swapped_row = Vec::with_capacity(tokens.len());
    let mut all_match = base.is_ok();
    for &i in &tokens {
        let swapped = odeint::swap_factors(&src, &tgt, i, &params, &codec, &solver, &mut sample_rng(cfg.seed, 0));
        let swapped = match swapped {
            Ok(s) => s.image,
            Err(e) => {
                log::warn!("swap token {i}: {e}");
                out.failures.push(format!("token {i}: {e}"));
                swapped_row.push(failed_cell());
                writeln!(report, "\n[token {i}]\nintegrator failed: {e}").unwrap();
                all_match = false;
                continue;
            }
        };
        let attrs = extract_attributes(&swapped);
        let identical = matches!(&base, Ok(b) if b.image == swapped);
        writeln!(report, "\n[token {i}]").unwrap();
        writeln!(report, "factor,source,target,unswapped,swapped,matches_unswapped").unwrap();
        for (k, name) in FACTOR_NAMES.iter().enumerate() {
            let cells = [&src_attrs, &tgt_attrs, &base_attrs, &attrs].map(|a| attr_cell(a, k));
            let m = identical || (cells[3] != "-" && cells[3] == cells[2]);
            all_match &= m;
            writeln!(report, "{name},{},{m}", cells.join(",")).unwrap();
        }
        swapped_row.push(swapped);
    }
    writeln!(report, "\nall_factors_match: {all_match}").unwrap();

    let columns = tokens.len();
    let rows = vec![vec![src; columns], vec![tgt; columns], swapped_row];
    let stem = format!("swap_{source}_{target}");
    let dir = ws.samples_dir();
    write_atomic(&dir.join(format!("{stem}.ppm")), &ImageGrid::from_rows(&rows, PAD).to_ppm())?;
    write_atomic(&dir.join(format!("{stem}.txt")), report.as_bytes())?;
    out.summary = format!("all factors match: {all_match}\n{}", report_location(&dir, &stem));
    Ok(out)
}

fn report_location(dir: &Path, stem: &str) -> String {
    format!("grid and report written to {}/{stem}.{{ppm,txt}}\n", dir.display())
}

/// For every ground-truth factor, the factor token carrying most of its
/// DCI importance (summed over the token's dimensions).
pub fn dominant_tokens(params: &ModelParams, cfg: &RunConfig) -> Result<([usize; NUM_FACTORS], Vec<Vec<f64>>)> {
    let c = *params.config();
    let rep = Representation::learned(params, false)?;
    let mut rng = Rng::new(cfg.seed ^ 0xd0a1);
    let (rows, factors) = rep.sample_rows(cfg.metrics.samples, &mut rng);
    let (_, importance) = dci_disentanglement(&rows, rep.dims(), &factors, cfg.metrics.l1_strength)?;
    let mut per_token = vec![vec![0.0; NUM_FACTORS]; c.factors];
    for (d, row) in importance.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            per_token[d / c.factor_dim][k] += v;
        }
    }
    let mut best = [0; NUM_FACTORS];
    for (k, b) in best.iter_mut().enumerate() {
        *b = (0..c.factors)
            .max_by(|&a, &z| per_token[a][k].total_cmp(&per_token[z][k]).then(z.cmp(&a)))
            .unwrap_or(0);
    }
    Ok((best, per_token))
}

/// Random single-factor swaps. Each trial picks an intended factor, a
/// source and a target whose round-tripped attributes are both readable
/// and differ in that factor, and swaps the factor's dominant token.
pub fn swap_sweep(cfg: &RunConfig, ws: &Workspace, trials: usize) -> Result<(SwapSummary, String)> {
    let codec = load_codec(ws)?;
    let params = load_checkpoint(&ws.checkpoint())?;
    let solver = cfg.solver_spec()?;
    let intended = cfg.swap_factor_indices()?;
    let (tokens, _) = dominant_tokens(&params, cfg)?;
    let ds = ToyDataset;

    let mut rng = Rng::new(cfg.seed ^ 0x5a5a);
    let mut summary = SwapSummary::default();
    let mut grid: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 3];
    let draw = |rng: &mut Rng| -> Result<(usize, Vec<f64>, Factors)> {
        loop {
            let scene = rng.below(NUM_SCENES);
            let image = ds.image(scene);
            if let Ok(a) = round_trip_attrs(&codec, &image)? {
                return Ok((scene, image, a));
            }
        }
    };
    for trial in 0..trials {
        let k = intended[rng.below(intended.len())];
        let (_, src, sa) = draw(&mut rng)?;
        let (tgt, ta) = loop {
            let (_, tgt, ta) = draw(&mut rng)?;
            if ta.0[k] != sa.0[k] {
                break (tgt, ta);
            }
        };
        let mut trial_rng = sample_rng(cfg.seed, trial as u64);
        let swapped = odeint::swap_factors(&src, &tgt, tokens[k], &params, &codec, &solver, &mut trial_rng);
        let (image, attrs) = match swapped {
            Ok(s) => {
                let a = extract_attributes(&s.image);
                (s.image, a)
            }
            Err(e) => {
                log::warn!("swap trial {trial}: {e}");
                (failed_cell(), Err(MetricsError::NoObject))
            }
        };
        summary.add(&swap_fidelity_attrs(&sa, &ta, attrs, k));
        if trial < GRID_COLUMNS {
            grid[0].push(src);
            grid[1].push(tgt);
            grid[2].push(image);
        }
    }

    let mut text = String::from("[dominant_tokens]\nfactor,token\n");
    for &k in &intended {
        writeln!(text, "{},{}", FACTOR_NAMES[k], tokens[k]).unwrap();
    }
    text.push('\n');
    text.push_str(&summary.to_text());
    let dir = ws.samples_dir();
    write_atomic(&dir.join("swap_sweep.txt"), text.as_bytes())?;
    if trials > 0 {
        write_atomic(&dir.join("swap_sweep.ppm"), &ImageGrid::from_rows(&grid, PAD).to_ppm())?;
    }
    Ok((summary, text))
}

/// One trained and evaluated ablation arm.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmResult {
    pub lambda_orth: f64,
    pub seed: u64,
    pub scores: Result<(f64, f64, f64), String>,
}

/// Trains and scores one arm entirely in memory.
pub fn run_arm(cfg: &RunConfig, codec: &LatentCodec, lambda_orth: f64, seed: u64) -> Result<(f64, f64, f64)> {
    let mut arm = cfg.clone();
    arm.seed = seed;
    arm.train.lambda_orth = lambda_orth;
    if cfg.ablate.steps > 0 {
        arm.train.steps = cfg.ablate.steps;
    }
    let set = TrainingSet::new(codec)?;
    let (params, _) = training::train(&arm.train_config(), &set, |_, _, _| {})?;
    let rep = Representation::learned(&params, arm.metrics.reduce)?;
    let r = score(&rep, &arm)?;
    Ok((r.factorvae_score, r.dci_disentanglement, r.mig))
}

/// Paired seeds for the ablation, drawn from the config seed's stream.
pub fn ablation_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = Rng::new(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// `mean ± std` with the sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const ABLATION_HEADER: &str = "arm,lambda_orth,seed,factorvae_score,dci_disentanglement,mig,status";

/// Per-seed rows for both arms followed by one `mean ± std` row per arm.
/// Failed arms keep their row, marked, and are left out of the summary.
pub fn ablation_csv(arms: &[ArmResult], lambdas: [f64; 2]) -> String {
    let mut out = format!("{ABLATION_HEADER}\n");
    for a in arms {
        let arm = if a.lambda_orth == lambdas[0] { "baseline" } else { "orth" };
        match &a.scores {
            Ok((fv, dci, mig)) => {
                writeln!(out, "{arm},{},{},{fv},{dci},{mig},ok", a.lambda_orth, a.seed).unwrap();
            }
            Err(e) => {
                let e = e.replace([',', '\n'], ";");
                writeln!(out, "{arm},{},{},NaN,NaN,NaN,failed: {e}", a.lambda_orth, a.seed).unwrap();
            }
        }
    }
    for (arm, &lambda) in ["baseline", "orth"].iter().zip(&lambdas) {
        let ok: Vec<(f64, f64, f64)> = arms
            .iter()
            .filter(|a| a.lambda_orth == lambda)
            .filter_map(|a| a.scores.clone().ok())
            .collect();
        let cell = |f: fn(&(f64, f64, f64)) -> f64| {
            let (m, s) = mean_std(&ok.iter().map(f).collect::<Vec<_>>());
            format!("{m:.4} ± {s:.4}")
        };
        writeln!(
            out,
            "{arm},{lambda},mean ± std,{},{},{},{} of {} ok",
            cell(|r| r.0),
            cell(|r| r.1),
            cell(|r| r.2),
            ok.len(),
            arms.iter().filter(|a| a.lambda_orth == lambda).count()
        )
        .unwrap();
    }
    out
}

/// Mean `(factorvae, dci, mig)` per arm from an ablation CSV.
pub fn ablation_means(csv: &str) -> Option<[(f64, f64, f64); 2]> {
    let mut means = Vec::new();
    for line in csv.lines().filter(|l| l.contains(",mean ± std,")) {
        let f: Vec<&str> = line.split(',').collect();
        let mean = |s: &str| s.split(" ± ").next()?.parse::<f64>().ok();
        means.push((mean(f[3])?, mean(f[4])?, mean(f[5])?));
    }
    (means.len() == 2).then(|| [means[0], means[1]])
}

/// Trains both arms (`λ = 0` and the configured `λ`) for each seed.
pub fn ablate(cfg: &RunConfig, ws: &Workspace) -> Result<Partial> {
    check_dataset(ws)?;
    let codec = load_codec(ws)?;
    if cfg.train.lambda_orth == 0.0 {
        bail!("ablation needs a non-zero train.lambda_orth to compare against 0");
    }
    write_atomic(&ws.snapshot(), cfg.snapshot().as_bytes())?;
    let lambdas = [0.0, cfg.train.lambda_orth];
    let mut arms = Vec::new();
    let mut out = Partial::default();
    for seed in ablation_seeds(cfg.seed, cfg.ablate.seeds) {
        for lambda in lambdas {
            log::info!("ablation arm lambda_orth={lambda} seed={seed}");
            let scores = run_arm(cfg, &codec, lambda, seed).map_err(|e| format!("{e:#}"));
            if let Err(e) = &scores {
                log::warn!("arm lambda_orth={lambda} seed={seed} failed: {e}");
                out.failures.push(format!("lambda_orth={lambda} seed={seed}: {e}"));
            }
            arms.push(ArmResult {
                lambda_orth: lambda,
                seed,
                scores,
            });
            // Keep partial results on disk as the sweep progresses.
            write_atomic(&ws.ablation_csv(), ablation_csv(&arms, lambdas).as_bytes())?;
        }
    }
    let csv = ablation_csv(&arms, lambdas);
    write_atomic(&ws.ablation_csv(), csv.as_bytes())?;
    out.summary = csv
        .lines()
        .filter(|l| l.contains("mean ± std"))
        .map(|l| format!("{l}\n"))
        .collect();
    Ok(out)
}

/// Reads a loss CSV written by `train`.
pub fn read_loss(path: &Path) -> Result<LossTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LossTrace::from_csv(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}
