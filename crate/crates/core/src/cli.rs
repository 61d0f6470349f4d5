//! `lesionseg` command-line front end.
//!
//! Exit codes: 0 success, 1 processing error, 2 I/O error. Every output is
//! computed before the first file is written, and each file is written
//! atomically, so a failing run leaves no partial outputs behind.
//!
//! Relative output paths are resolved against `$LESIONSEG_OUT_DIR` when it is set.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::contour_init::{SeedSource, SeedStrategy};
use crate::error::Error;
use crate::evaluation::{batch_evaluate, BinaryMask};
use crate::features::region_stats;
use crate::io::{self, IoError};
use crate::otsu::{LesionRule, Roi};
use crate::pipeline::{keypoints_json, segment, trace_csv, GrayMode, Method, SegmentParams};
use crate::synth::{gen_lesion_image, synth20, synth20_manifest_json, SynthManifest, SynthParams};

pub const OUT_DIR_ENV: &str = "LESIONSEG_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Processing(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Processing(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn flatten<T>(r: std::result::Result<std::result::Result<T, Error>, IoError>) -> CliResult<T> {
    Ok(r??)
}

#[derive(Debug, Parser)]
#[command(name = "lesionseg", version, about = "Pigmented-lesion segmentation and scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Segment one image into a 0/255 lesion mask.
    Segment(SegmentArgs),
    /// Colour statistics of the lesion and healthy regions.
    Features(FeaturesArgs),
    /// Score predicted masks against reference masks.
    Eval(EvalArgs),
    /// Draw a mask boundary over an image in pure green.
    Overlay(OverlayArgs),
    /// Generate synthetic lesion images with exact masks.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Snake,
    Otsu,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GrayArg {
    Luma,
    Red,
    Green,
    Blue,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Hull,
    Random,
}

fn parse_lesion_rule(s: &str) -> std::result::Result<LesionRule, String> {
    match s {
        "darkest" => Ok(LesionRule::DarkestClass),
        "brightest" => Ok(LesionRule::BrightestClass),
        _ => s
            .parse()
            .map(LesionRule::ClassIndex)
            .map_err(|_| format!("expected darkest, brightest or a class index, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Input image (PNG, JPEG or PNM).
    input: PathBuf,
    /// Output mask PNG.
    #[arg(long)]
    mask: PathBuf,
    /// TOML file with `method`, `gray` and `[detector]`, `[init]`, `[snake]`, `[otsu]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Plane used by the gray-level stages of a colour image.
    #[arg(long, value_enum)]
    gray: Option<GrayArg>,

    #[arg(long)]
    octaves: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    base_filter: Option<usize>,
    /// Minimum Hessian response for a keypoint.
    #[arg(long)]
    threshold: Option<f64>,

    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Seed for the random-subset initialisation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_points: Option<usize>,
    #[arg(long)]
    fallback_margin: Option<f64>,

    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Gaussian sigma of the image-energy field.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    converge_fraction: Option<f64>,

    #[arg(long)]
    classes: Option<usize>,
    /// darkest, brightest or a class index.
    #[arg(long, value_parser = parse_lesion_rule)]
    lesion: Option<LesionRule>,
    /// Otsu region of interest as `x,y,w,h`.
    #[arg(long)]
    roi: Option<Roi>,

    /// Source image with the final contour drawn in green.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Keypoints as JSON.
    #[arg(long)]
    dump_keypoints: Option<PathBuf>,
    /// Per-iteration energy CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run summary as JSON: effective parameters, seed source, counts.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// RGB input image.
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Identifier stored in the report; defaults to the image file stem.
    #[arg(long)]
    id: Option<String>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted mask files or directories of PNG masks.
    #[arg(long = "pred", required = true, num_args = 1..)]
    pred: Vec<PathBuf>,
    /// Reference mask files or directories, matched to predictions by file stem.
    #[arg(long = "ref", required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Seed for a single image; ignored with --suite or --manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single-image output path.
    #[arg(long, required_unless_present_any = ["suite", "manifest", "write_manifest"])]
    out: Option<PathBuf>,
    /// Single-image mask path.
    #[arg(long, requires = "out")]
    mask: Option<PathBuf>,
    /// Single-image Gaussian noise sigma.
    #[arg(long)]
    noise: Option<f64>,
    /// Single-image boundary blur in pixels.
    #[arg(long)]
    softness: Option<f64>,
    /// Built-in suite to generate into --out-dir.
    #[arg(long, value_parser = ["synth20"], conflicts_with = "manifest")]
    suite: Option<String>,
    /// JSON manifest (`{"name", "cases": [...]}`) to generate into --out-dir.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Receives `images/<name>.png` and `masks/<name>.png`.
    #[arg(long, required_if_eq("suite", "synth20"))]
    out_dir: Option<PathBuf>,
    /// Write the built-in synth20 manifest as JSON.
    #[arg(long)]
    write_manifest: Option<PathBuf>,
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Segment(a) => run_segment(a),
        Command::Features(a) => run_features(a),
        Command::Eval(a) => run_eval(a),
        Command::Overlay(a) => run_overlay(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lesionseg: {e}");
            e.exit_code()
        }
    }
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p.to_path_buf(),
    }
}

/// Pending outputs, written in order once everything has been computed.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn push(&mut self, path: &Path, bytes: impl Into<Vec<u8>>) {
        self.0.push((out_path(path), bytes.into()));
    }

    fn png(&mut self, path: &Path, img: &crate::raster::RasterImage) -> CliResult<()> {
        let bytes = io::encode_png(img, path)?;
        self.push(path, bytes);
        Ok(())
    }

    fn mask(&mut self, path: &Path, mask: &BinaryMask) -> CliResult<()> {
        self.png(path, &io::mask_image(mask))
    }

    fn commit(self) -> CliResult<()> {
        for (path, bytes) in self.0 {
            io::write_atomic(&path, &bytes)?;
        }
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> CliResult<SegmentParams> {
    let Some(path) = path else {
        return Ok(SegmentParams::default());
    };
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidParams(format!("{}: {}", path.display(), e.message())).into())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn effective_params(a: &SegmentArgs) -> CliResult<SegmentParams> {
    let mut p = load_config(a.config.as_deref())?;
    set(
        &mut p.method,
        a.method.map(|m| match m {
            MethodArg::Snake => Method::Snake,
            MethodArg::Otsu => Method::Otsu,
        }),
    );
    set(
        &mut p.gray,
        a.gray.map(|g| match g {
            GrayArg::Luma => GrayMode::Luma,
            GrayArg::Red => GrayMode::Red,
            GrayArg::Green => GrayMode::Green,
            GrayArg::Blue => GrayMode::Blue,
        }),
    );
    set(&mut p.detector.octaves, a.octaves);
    set(&mut p.detector.layers_per_octave, a.layers);
    set(&mut p.detector.base_filter_size, a.base_filter);
    set(&mut p.detector.response_threshold, a.threshold);
    set(
        &mut p.init.strategy,
        a.init.map(|s| match s {
            InitArg::Hull => SeedStrategy::Hull,
            InitArg::Random => SeedStrategy::RandomSubset,
        }),
    );
    set(&mut p.init.rng_seed, a.seed);
    set(&mut p.init.num_points, a.num_points);
    set(&mut p.init.fallback_margin, a.fallback_margin);
    set(&mut p.snake.alpha, a.alpha);
    set(&mut p.snake.beta, a.beta);
    set(&mut p.snake.gamma, a.gamma);
    set(&mut p.snake.smoothing_sigma, a.sigma);
    set(&mut p.snake.neighborhood_radius, a.radius);
    set(&mut p.snake.max_iterations, a.max_iterations);
    set(&mut p.snake.converge_fraction, a.converge_fraction);
    set(&mut p.otsu.classes, a.classes);
    set(&mut p.otsu.lesion, a.lesion);
    if a.roi.is_some() {
        p.otsu.roi = a.roi;
    }
    Ok(p)
}

#[derive(Serialize)]
struct SegmentMeta<'a> {
    input: String,
    width: usize,
    height: usize,
    params: &'a SegmentParams,
    keypoints: usize,
    seed_source: Option<SeedSource>,
    iterations: usize,
    lesion_pixels: usize,
}

fn run_segment(a: SegmentArgs) -> CliResult<()> {
    let params = effective_params(&a)?;
    let img = flatten(io::read_image(&a.input))?;
    let outcome = segment(&img, &params)?;

    let mut out = Outputs::default();
    out.mask(&a.mask, &outcome.mask)?;
    if let Some(path) = &a.overlay {
        let pixels = match &outcome.contour {
            Some(c) => io::polyline_pixels(c, img.width(), img.height()),
            None => io::mask_boundary_pixels(&outcome.mask),
        };
        out.png(path, &io::render_overlay(&img, &pixels))?;
    }
    if let Some(path) = &a.dump_keypoints {
        out.push(path, keypoints_json(&outcome.keypoints));
    }
    if let Some(path) = &a.trace {
        out.push(path, trace_csv(&outcome.trace));
    }
    if let Some(path) = &a.meta {
        let meta = SegmentMeta {
            input: a.input.display().to_string(),
            width: img.width(),
            height: img.height(),
            params: &params,
            keypoints: outcome.keypoints.len(),
            seed_source: outcome.seed.as_ref().map(|(_, s)| *s),
            iterations: outcome.trace.len(),
            lesion_pixels: outcome.mask.count(),
        };
        out.push(path, serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n");
    }
    out.commit()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run_features(a: FeaturesArgs) -> CliResult<()> {
    let img = flatten(io::read_image(&a.image))?;
    let mask = flatten(io::read_mask(&a.mask))?;
    let id = a.id.clone().unwrap_or_else(|| file_stem(&a.image));
    let json = region_stats(&img, &mask, &id)?.to_json();
    match &a.out {
        Some(path) => {
            let mut out = Outputs::default();
            out.push(path, json);
            out.commit()
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Expands files and directories (non-recursive, `*.png`) into an id → path map.
fn collect_masks(inputs: &[PathBuf]) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut map = BTreeMap::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|source| IoError::File {
                path: input.clone(),
                source,
            })?;
            for entry in entries {
                let path = entry
                    .map_err(|source| IoError::File {
                        path: input.clone(),
                        source,
                    })?
                    .path();
                if path.is_file() && is_png(&path) {
                    map.insert(file_stem(&path), path);
                }
            }
        } else {
            map.insert(file_stem(input), input.clone());
        }
    }
    Ok(map)
}

fn run_eval(a: EvalArgs) -> CliResult<()> {
    let preds = collect_masks(&a.pred)?;
    let refs = collect_masks(&a.reference)?;
    let unmatched: Vec<String> = preds
        .keys()
        .filter(|k| !refs.contains_key(*k))
        .chain(refs.keys().filter(|k| !preds.contains_key(*k)))
        .cloned()
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedIds(unmatched).into());
    }
    let mut loaded = Vec::with_capacity(preds.len());
    for (id, pred_path) in &preds {
        let pred = flatten(io::read_mask(pred_path))?;
        let reference = flatten(io::read_mask(&refs[id]))?;
        loaded.push((id.clone(), pred, reference));
    }
    let cases: Vec<(&str, &BinaryMask, &BinaryMask)> =
        loaded.iter().map(|(id, p, r)| (id.as_str(), p, r)).collect();
    let table = batch_evaluate(&cases)?;

    let mut out = Outputs::default();
    if let Some(path) = &a.csv {
        out.push(path, table.to_csv());
    }
    if let Some(path) = &a.json {
        out.push(path, table.to_json());
    }
    out.commit()?;
    println!(
        "average recall {:.2}%  average precision {:.2}%  ({} images)",
        table.average_recall_percent(),
        table.average_precision_percent(),
        table.rows.len()
    );
    Ok(())
}

fn run_overlay(a: OverlayArgs) -> CliResult<()> {
    let img = flatten(io::read_image(&a.image))?;
    let mask = flatten(io::read_mask(&a.mask))?;
    if img.dims() != mask.dims() {
        return Err(Error::dims(img.dims(), mask.dims()).into());
    }
    let mut out = Outputs::default();
    out.png(&a.out, &io::render_overlay(&img, &io::mask_boundary_pixels(&mask)))?;
    out.commit()
}

fn run_synth(a: SynthArgs) -> CliResult<()> {
    let mut out = Outputs::default();
    if let Some(path) = &a.write_manifest {
        out.push(path, synth20_manifest_json());
    }

    let manifest = if a.suite.is_some() {
        Some(synth20())
    } else if let Some(path) = &a.manifest {
        let text = fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.clone(),
            source,
        })?;
        let m: SynthManifest = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?;
        Some(m)
    } else {
        None
    };

    if let Some(manifest) = manifest {
        let dir = a
            .out_dir
            .as_deref()
            .ok_or_else(|| Error::InvalidParams("--out-dir is required with --suite or --manifest".into()))?;
        for case in &manifest.cases {
            let (img, mask) = gen_lesion_image(case).map_err(|e| Error::Case {
                id: case_name(case),
                source: Box::new(e),
            })?;
            let name = format!("{}.png", case_name(case));
            out.png(&dir.join("images").join(&name), &img)?;
            out.mask(&dir.join("masks").join(&name), &mask)?;
        }
    } else if let Some(path) = &a.out {
        let mut p = SynthParams {
            rng_seed: a.seed,
            ..Default::default()
        };
        set(&mut p.noise_sigma, a.noise);
        set(&mut p.edge_softness, a.softness);
        let (img, mask) = gen_lesion_image(&p)?;
        out.png(path, &img)?;
        if let Some(mask_path) = &a.mask {
            out.mask(mask_path, &mask)?;
        }
    }
    out.commit()
}

/// File name used for a manifest case: `case_<seed>` zero-padded to two digits.
pub fn case_name(p: &SynthParams) -> String {
    format!("case_{:02}", p.rng_seed)
}
