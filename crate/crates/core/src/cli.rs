//! Command-line front end. `run` returns the process exit code:
//! `extract` exits 0 when the watermark is detected and 1 when it is not;
//! every error (including usage errors) exits 2.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attack::{
    averaging_attack, covariance_trial_scores, roc_auc, threshold_accuracy, AttackTrialConfig,
};
use crate::clwe::ClweParams;
use crate::error::{Error, Result};
use crate::experiments::{detection_auc, simulate_z_scores, DetectionSimConfig, ZScoreSource};
use crate::io::config::{CovarianceGrid, DetectRocGrid, RunConfig};
use crate::io::key::{read_key, write_key};
use crate::io::npy::{read_tensor, write_tensor};
use crate::io::table::{CsvTable, AVERAGE_HEADER, COVARIANCE_HEADER, DETECT_ROC_HEADER, ROSE_HEADER};
use crate::latent::{BlockShape, LatentDims, LatentTensor};
use crate::rayleigh::rayleigh_test;
use crate::stats::{derive_substream, rose_histogram, seeded_stream};
use crate::watermark::{extract_latent, mark_latent, setup, DEFAULT_THRESHOLD};

pub const EXIT_DETECTED: i32 = 0;
pub const EXIT_NOT_DETECTED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cluemark", version, about = "Undetectable latent watermarking toolkit")]
pub struct Cli {
    /// Seed for every random draw; runs with the same seed are bit-identical.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Decision threshold on the Rayleigh p-value.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// TOML run configuration (seed, trials, output_path, parameter grids).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Allow overwriting existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a secret key.
    Keygen(KeygenArgs),
    /// Watermark a base latent (or a freshly sampled one).
    Mark(MarkArgs),
    /// Test a latent for a key's watermark.
    Extract(ExtractArgs),
    /// Simulations.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Distinguishing attacks.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Histogram z-scores on the unit circle.
    Rose(RoseArgs),
}

#[derive(Debug, Args, Clone)]
struct SchemeArgs {
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    /// Block extent as CxHxW.
    #[arg(long, default_value = "2x4x4", value_parser = parse_triple)]
    block: [usize; 3],
    /// Latent shape as CxHxW.
    #[arg(long, default_value = "4x64x64", value_parser = parse_triple)]
    dims: [usize; 3],
}

impl SchemeArgs {
    fn resolve(&self) -> Result<(ClweParams<f64>, BlockShape, LatentDims)> {
        let block = BlockShape::new(self.block[0], self.block[1], self.block[2]);
        let dims = LatentDims::new(self.dims[0], self.dims[1], self.dims[2]);
        Ok((ClweParams::new(block.len(), self.gamma, self.beta)?, block, dims))
    }
}

#[derive(Debug, Args)]
struct KeygenArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MarkArgs {
    #[arg(long)]
    key: PathBuf,
    /// Base latent (NPY). Sampled from N(0, 1) with --seed when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the unmarked base latent here.
    #[arg(long)]
    base_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Detection AUC over a grid of additive latent noise levels.
    DetectRoc(DetectRocArgs),
}

#[derive(Debug, Args)]
struct DetectRocArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Noise standard deviations, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.2, 0.5])]
    noise: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AttackCommand {
    /// Covariance eigenvalue attack over an (n, m, γ) grid.
    Covariance(CovarianceArgs),
    /// Averaging attack on a directory of marked/unmarked pairs.
    Average(AverageArgs),
}

#[derive(Debug, Args)]
struct CovarianceArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![32])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1_000, 10_000, 100_000])]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 4.0, 8.0])]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    #[arg(long)]
    trials: Option<usize>,
    /// Add the m = 1,000,000 grid point.
    #[arg(long)]
    full: bool,
    /// Per-trial CSV (n,m,gamma,beta,trial,label,score).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AverageArgs {
    #[arg(long)]
    key: PathBuf,
    /// Directory with marked_<id>.npy / unmarked_<id>.npy pairs.
    #[arg(long)]
    pairs: PathBuf,
    /// Directory for cleaned_<id>.npy and mean_difference.npy.
    #[arg(long)]
    out_dir: PathBuf,
    /// Populate --pairs with this many fresh pairs (shared base latents) first.
    #[arg(long)]
    generate: Option<usize>,
    /// Per-latent scores CSV (file,statistic,p_value,label).
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RoseSource {
    Normal,
    Pancakes,
    Noisy,
}

#[derive(Debug, Args)]
struct RoseArgs {
    /// Text file with one z-score per line. Mutually exclusive with --simulate.
    #[arg(long, conflicts_with = "simulate")]
    input: Option<PathBuf>,
    #[arg(long)]
    simulate: Option<RoseSource>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Noise width for --simulate noisy (same units as beta).
    #[arg(long, default_value_t = 0.2)]
    noise_width: f64,
    #[arg(long, default_value_t = 36)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    if parts.len() != 3 {
        return Err(format!("expected CxHxW, got {s:?}"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| format!("bad extent {p:?} in {s:?}"))?;
    }
    Ok(out)
}

struct Globals {
    seed: u64,
    threshold: Option<f64>,
    force: bool,
    config: RunConfig,
}

impl Globals {
    fn trials(&self, flag: Option<usize>) -> usize {
        flag.or(self.config.trials).unwrap_or(100)
    }

    fn output(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.config.output_path.as_ref().map(PathBuf::from))
    }
}

/// Parse `args` (including the program name) and execute.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = match cli.seed.or(config.seed) {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            writeln!(err, "no --seed given; using seed {s}")?;
            s
        }
    };
    if let Some(t) = cli.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("threshold {t} outside [0, 1]")));
        }
    }
    let g = Globals {
        seed,
        threshold: cli.threshold,
        force: cli.force,
        config,
    };
    match cli.command {
        Command::Keygen(a) => keygen(&g, a, out),
        Command::Mark(a) => mark(&g, a, out),
        Command::Extract(a) => extract(&g, a, out),
        Command::Simulate(SimulateCommand::DetectRoc(a)) => detect_roc(&g, a, out),
        Command::Attack(AttackCommand::Covariance(a)) => covariance(&g, a, out),
        Command::Attack(AttackCommand::Average(a)) => average(&g, a, out),
        Command::Rose(a) => rose(&g, a, out),
    }
}

fn keygen(g: &Globals, a: KeygenArgs, out: &mut dyn Write) -> Result<i32> {
    let (params, block, dims) = a.scheme.resolve()?;
    let key = setup(&mut derive_substream(g.seed, 0), params, block, dims)?;
    write_key(&key, g.threshold.unwrap_or(DEFAULT_THRESHOLD), &a.out, g.force)?;
    writeln!(out, "wrote key {} (n={}, blocks per latent={})", a.out.display(), params.n(), key.samples_per_latent())?;
    Ok(0)
}

fn mark(g: &Globals, a: MarkArgs, out: &mut dyn Write) -> Result<i32> {
    let (key, _) = read_key(&a.key)?;
    let base: LatentTensor<f64> = match &a.input {
        Some(p) => read_tensor(p)?,
        None => LatentTensor::standard_normal(&mut derive_substream(g.seed, 1), key.latent_dims())?,
    };
    let marked = mark_latent(&base, &key, &mut derive_substream(g.seed, 2))?;
    write_tensor(&marked, &a.out, g.force)?;
    if let Some(p) = &a.base_out {
        write_tensor(&base, p, g.force)?;
    }
    writeln!(out, "wrote marked latent {}", a.out.display())?;
    Ok(0)
}

fn extract(g: &Globals, a: ExtractArgs, out: &mut dyn Write) -> Result<i32> {
    let (key, stored) = read_key(&a.key)?;
    let latent: LatentTensor<f64> = read_tensor(&a.input)?;
    let report = extract_latent(&latent, &key, g.threshold.unwrap_or(stored))?;
    writeln!(out, "m_samples={}", report.m_samples)?;
    writeln!(out, "mean_resultant={}", report.mean_resultant)?;
    writeln!(out, "statistic={}", report.statistic)?;
    writeln!(out, "p_value={:e}", report.p_value)?;
    writeln!(out, "log_p={}", report.log_p)?;
    writeln!(out, "threshold={}", report.threshold)?;
    writeln!(out, "decision={}", report.decision)?;
    let json = serde_json::json!({
        "m_samples": report.m_samples,
        "mean_resultant": report.mean_resultant,
        "statistic": report.statistic,
        "p_value": report.p_value,
        // JSON has no infinities
        "log_p": if report.log_p.is_finite() { Some(report.log_p) } else { None },
        "threshold": report.threshold,
        "decision": report.decision,
    });
    writeln!(out, "{json}")?;
    Ok(if report.decision { EXIT_DETECTED } else { EXIT_NOT_DETECTED })
}

fn detect_roc(g: &Globals, a: DetectRocArgs, out: &mut dyn Write) -> Result<i32> {
    let grid = match &g.config.detect_roc {
        Some(grid) => grid.clone(),
        None => DetectRocGrid {
            noise_sd: a.noise.clone(),
            gamma: a.scheme.gamma,
            beta: a.scheme.beta,
            block_shape: a.scheme.block,
            latent_dims: a.scheme.dims,
        },
    };
    grid.validate()?;
    let scheme = SchemeArgs {
        gamma: grid.gamma,
        beta: grid.beta,
        block: grid.block_shape,
        dims: grid.latent_dims,
    };
    let (params, block_shape, latent_dims) = scheme.resolve()?;
    let trials = g.trials(a.trials);
    let mut table = CsvTable::new(&DETECT_ROC_HEADER);
    for (i, &noise_sd) in grid.noise_sd.iter().enumerate() {
        let r = detection_auc(&DetectionSimConfig {
            params,
            block_shape,
            latent_dims,
            noise_sd,
            trials,
            seed: derive_seed(g.seed, i as u64),
        })?;
        writeln!(out, "noise_sd={noise_sd} trials={trials} auc={:.4}", r.auc)?;
        table.push_display(&[&noise_sd, &trials, &r.auc]);
    }
    if let Some(p) = g.output(&a.out) {
        table.write(p, g.force)?;
    }
    Ok(0)
}

fn covariance(g: &Globals, a: CovarianceArgs, out: &mut dyn Write) -> Result<i32> {
    let mut grid = match &g.config.covariance {
        Some(grid) => grid.clone(),
        None => CovarianceGrid {
            n: a.n.clone(),
            m: a.m.clone(),
            gamma: a.gamma.clone(),
            beta: a.beta,
        },
    };
    if a.full && !grid.m.contains(&1_000_000) {
        grid.m.push(1_000_000);
    }
    let trials = g.trials(a.trials);
    // Validate the whole grid before running any point.
    let mut points = Vec::new();
    for &n in &grid.n {
        for &gamma in &grid.gamma {
            for &m in &grid.m {
                let idx = points.len() as u64;
                let cfg = AttackTrialConfig {
                    n,
                    m,
                    gamma,
                    beta: grid.beta,
                    trials,
                    seed: derive_seed(g.seed, idx),
                };
                cfg.validate()?;
                points.push(cfg);
            }
        }
    }
    let mut table = CsvTable::new(&COVARIANCE_HEADER);
    for cfg in &points {
        let (pos, neg) = covariance_trial_scores(cfg)?;
        let auc = roc_auc(&pos, &neg)?;
        let gap = ClweParams::new(cfg.n, cfg.gamma, cfg.beta)?.covariance_gap();
        let acc = threshold_accuracy(&pos, &neg, gap);
        writeln!(
            out,
            "n={} m={} gamma={} beta={} auc={:.4} threshold_accuracy={:.4}",
            cfg.n, cfg.m, cfg.gamma, cfg.beta, auc, acc
        )?;
        for (label, scores) in [("clwe", &pos), ("normal", &neg)] {
            for (t, s) in scores.iter().enumerate() {
                table.push_display(&[&cfg.n, &cfg.m, &cfg.gamma, &cfg.beta, &t, &label, s]);
            }
        }
    }
    if let Some(p) = g.output(&a.out) {
        table.write(p, g.force)?;
    }
    Ok(0)
}

/// `(id, marked path, unmarked path)` for every complete pair in `dir`.
fn list_pairs(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let mut ids: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("marked_")
                .and_then(|r| r.strip_suffix(".npy"))
                .map(str::to_string)
        })
        .collect();
    ids.sort();
    let mut pairs = Vec::new();
    for id in ids {
        let unmarked = dir.join(format!("unmarked_{id}.npy"));
        if !unmarked.exists() {
            return Err(Error::InvalidInput(format!(
                "marked_{id}.npy has no matching unmarked_{id}.npy"
            )));
        }
        pairs.push((id.clone(), dir.join(format!("marked_{id}.npy")), unmarked));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no marked_*.npy files in {}",
            dir.display()
        )));
    }
    Ok(pairs)
}

fn average(g: &Globals, a: AverageArgs, out: &mut dyn Write) -> Result<i32> {
    let (key, stored) = read_key(&a.key)?;
    let threshold = g.threshold.unwrap_or(stored);
    if let Some(count) = a.generate {
        fs::create_dir_all(&a.pairs)?;
        let mut rng = derive_substream(g.seed, 3);
        let width = count.max(1).to_string().len();
        for i in 0..count {
            let base = LatentTensor::standard_normal(&mut rng, key.latent_dims())?;
            let marked = mark_latent(&base, &key, &mut rng)?;
            write_tensor(&marked, a.pairs.join(format!("marked_{i:0width$}.npy")), g.force)?;
            write_tensor(&base, a.pairs.join(format!("unmarked_{i:0width$}.npy")), g.force)?;
        }
    }
    let pairs = list_pairs(&a.pairs)?;
    let mut marked = Vec::with_capacity(pairs.len());
    let mut unmarked = Vec::with_capacity(pairs.len());
    for (_, m, u) in &pairs {
        marked.push(read_tensor::<f64>(m)?);
        unmarked.push(read_tensor::<f64>(u)?);
    }
    let outcome = averaging_attack(&marked, &unmarked)?;

    fs::create_dir_all(&a.out_dir)?;
    write_tensor(&outcome.mean_difference, a.out_dir.join("mean_difference.npy"), g.force)?;
    let mut table = CsvTable::new(&AVERAGE_HEADER);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for ((id, _, _), (cleaned, clean)) in pairs.iter().zip(outcome.cleaned.iter().zip(&unmarked)) {
        let name = format!("cleaned_{id}.npy");
        write_tensor(cleaned, a.out_dir.join(&name), g.force)?;
        let rc = extract_latent(cleaned, &key, threshold)?;
        let ru = extract_latent(clean, &key, threshold)?;
        table.push_display(&[&name, &rc.statistic, &rc.p_value, &"cleaned"]);
        table.push_display(&[&format!("unmarked_{id}.npy"), &ru.statistic, &ru.p_value, &"unmarked"]);
        pos.push(rc.statistic);
        neg.push(ru.statistic);
    }
    let auc = roc_auc(&pos, &neg)?;
    writeln!(out, "pairs={}", pairs.len())?;
    writeln!(out, "mean_difference_max_abs={}", outcome.mean_difference.max_abs())?;
    writeln!(out, "mean_difference_max_t={}", outcome.max_abs_t())?;
    writeln!(out, "post_attack_auc={auc:.4}")?;
    if let Some(p) = &a.table {
        table.write(p, g.force)?;
    }
    Ok(0)
}

fn rose(g: &Globals, a: RoseArgs, out: &mut dyn Write) -> Result<i32> {
    let z: Vec<f64> = match (&a.input, a.simulate) {
        (Some(p), _) => fs::read_to_string(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad z-score line {l:?}")))
            })
            .collect::<Result<_>>()?,
        (None, Some(src)) => {
            let params = ClweParams::new(a.n, a.gamma, a.beta)?;
            let source = match src {
                RoseSource::Normal => ZScoreSource::Normal,
                RoseSource::Pancakes => ZScoreSource::Pancakes,
                RoseSource::Noisy => ZScoreSource::NoisyPancakes { width: a.noise_width },
            };
            simulate_z_scores(source, &params, a.samples, &mut seeded_stream(g.seed))?
        }
        (None, None) => {
            return Err(Error::InvalidParameter("rose needs --input or --simulate".into()));
        }
    };
    let h = rose_histogram(&z, a.bins)?;
    let mut table = CsvTable::new(&ROSE_HEADER);
    for (i, c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(i);
        table.push_display(&[&i, &lo, &hi, c]);
    }
    if z.len() >= 2 {
        let r = rayleigh_test(&z)?;
        writeln!(out, "total={} mode_bin={} mean_resultant={:.6} p_value={:e}", h.total, h.mode_bin(), r.mean_resultant, r.p_value)?;
    }
    match g.output(&a.out) {
        Some(p) => table.write(p, g.force)?,
        None => write!(out, "{}", table.render())?,
    }
    Ok(0)
}

/// Seed for the `index`-th grid point of an experiment.
fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    derive_substream(seed, u64::MAX - index).next_u64()
}
