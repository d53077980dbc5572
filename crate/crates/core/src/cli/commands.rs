use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use super::{CliError, CliResult, ConfigArg};
use crate::distance::MatchParams;
use crate::error::Error;
use crate::io::{self, load_mask, load_tensor, save_mask, save_tensor};
use crate::matching::{
    global_match, multi_local_match, oracle_match, AtrousSpec, MatchInputs, MatchOutput, WindowSet,
};
use crate::metrics::{default_tolerance, score};
use crate::pipeline::nn_propagate;
use crate::sampling::{balanced_random_crop, CropConfig};
use crate::tensor::{FrameSequence, Tensor3};

pub(crate) fn parse_windows(s: &str) -> Result<WindowSet, String> {
    let sizes = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    WindowSet::new(sizes).map_err(|e| e.to_string())
}

pub(crate) fn parse_finite(s: &str) -> Result<f32, String> {
    let v: f32 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_object(s: &str) -> Result<u16, String> {
    match s.trim().parse::<u16>() {
        Ok(0) => Err("object ids must be positive".to_string()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{s:?}: {e}")),
    }
}

/// Matching flags shared by `match` and `propagate`.
#[derive(Debug, Clone, Args)]
pub struct MatchFlags {
    /// Comma-separated local window radii, strictly increasing.
    #[arg(long, value_parser = parse_windows, default_value = "1,2,4")]
    pub windows: WindowSet,
    /// Atrous factor l (1 = dense).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub atrous: u32,
    /// Residue of the global atrous grid, in [0, l).
    #[arg(long, default_value_t = 0)]
    pub atrous_origin: u32,
    #[arg(long, default_value_t = 0.0, value_parser = parse_finite, allow_negative_numbers = true)]
    pub bias_fg: f32,
    #[arg(long, default_value_t = 0.0, value_parser = parse_finite, allow_negative_numbers = true)]
    pub bias_bg: f32,
}

impl MatchFlags {
    fn atrous(&self) -> CliResult<AtrousSpec> {
        Ok(AtrousSpec::new(self.atrous as usize, self.atrous_origin as usize)?)
    }

    fn params(&self) -> MatchParams {
        MatchParams { bias_fg: self.bias_fg, bias_bg: self.bias_bg }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub ref_embed: PathBuf,
    #[arg(long)]
    pub ref_mask: PathBuf,
    #[arg(long)]
    pub prev_embed: PathBuf,
    #[arg(long)]
    pub prev_mask: PathBuf,
    #[arg(long)]
    pub cur_embed: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub object: u16,
    #[command(flatten)]
    pub matching: MatchFlags,
    /// Output path prefix; maps land in `<out>global_fg.fbt` and so on.
    #[arg(long)]
    pub out: String,
    /// Use the brute-force oracle instead of the optimized kernels.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Serialize)]
struct MapStats<'a> {
    kind: &'static str,
    name: &'a str,
    path: String,
    min: f32,
    max: f32,
    mean: f64,
}

#[derive(Serialize)]
struct RunSummary {
    kind: &'static str,
    object: u16,
    windows: Vec<usize>,
    atrous: usize,
    atrous_origin: usize,
    bias_fg: f32,
    bias_bg: f32,
    oracle: bool,
    height: usize,
    width: usize,
    referred_pixels: u64,
    global_ms: f64,
    local_ms: f64,
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub(crate) fn cmd_match(a: &MatchArgs) -> CliResult<()> {
    let reference = load_tensor(&a.ref_embed)?;
    let reference_mask = load_mask(&a.ref_mask)?;
    let previous = load_tensor(&a.prev_embed)?;
    let previous_mask = load_mask(&a.prev_mask)?;
    let current = load_tensor(&a.cur_embed)?;
    let atrous = a.matching.atrous()?;
    let params = a.matching.params();
    let inputs = MatchInputs {
        current: &current,
        reference: &reference,
        reference_mask: &reference_mask,
        previous: &previous,
        previous_mask: &previous_mask,
    };

    let (output, global_ms, local_ms) = if a.oracle {
        let t = Instant::now();
        let out = oracle_match(inputs, a.object, &a.matching.windows, params, atrous)?;
        (out, ms(t), 0.0)
    } else {
        let t = Instant::now();
        let g = global_match(&current, &reference, &reference_mask, a.object, params, atrous)?;
        let global_ms = ms(t);
        let t = Instant::now();
        let l = multi_local_match(
            &current,
            &previous,
            &previous_mask,
            a.object,
            &a.matching.windows,
            params,
            atrous,
        )?;
        (MatchOutput::from_parts(g, l), global_ms, ms(t))
    };

    let summary_path = PathBuf::from(format!("{}summary.jsonl", a.out));
    ensure_parent(&summary_path)?;
    let mut lines = Vec::new();
    let mut write_map = |name: &str, t: &Tensor3| -> CliResult<()> {
        let path = format!("{}{name}.fbt", a.out);
        save_tensor(t, &path)?;
        let d = t.data();
        let stats = MapStats {
            kind: "map",
            name,
            path,
            min: d.iter().copied().fold(f32::INFINITY, f32::min),
            max: d.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            mean: d.iter().map(|&v| v as f64).sum::<f64>() / d.len().max(1) as f64,
        };
        lines.push(serde_json::to_string(&stats).expect("serializable"));
        Ok(())
    };
    write_map("global_fg", &output.global_fg)?;
    write_map("global_bg", &output.global_bg)?;
    for (i, k) in output.windows.iter().enumerate() {
        write_map(&format!("local_fg_k{k}"), &output.local_fg[i])?;
        write_map(&format!("local_bg_k{k}"), &output.local_bg[i])?;
    }
    let (height, width) = output.dims();
    let run = RunSummary {
        kind: "run",
        object: a.object,
        windows: output.windows.clone(),
        atrous: atrous.factor(),
        atrous_origin: atrous.origin(),
        bias_fg: params.bias_fg,
        bias_bg: params.bias_bg,
        oracle: a.oracle,
        height,
        width,
        referred_pixels: output.referred_pixels,
        global_ms,
        local_ms,
    };
    lines.push(serde_json::to_string(&run).expect("serializable"));
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    Ok(())
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

#[derive(Debug, Clone, Args)]
pub struct PropagateArgs {
    /// Directory of per-frame embeddings (`*.fbt`), processed in name order.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// Ground-truth mask of the first frame.
    #[arg(long)]
    pub ref_mask: PathBuf,
    /// Comma-separated object ids; defaults to the ids in the reference mask.
    #[arg(long, value_parser = parse_object, value_delimiter = ',')]
    pub objects: Option<Vec<u16>>,
    #[command(flatten)]
    pub matching: MatchFlags,
    /// Output directory for `<frame>.pgm` predictions.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

pub(crate) fn cmd_propagate(a: &PropagateArgs) -> CliResult<()> {
    let files = list_files(&a.input_dir, "fbt")?;
    if files.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    let ref_mask = load_mask(&a.ref_mask)?;
    let objects = a.objects.clone().unwrap_or_else(|| ref_mask.object_ids());
    let atrous = a.matching.atrous()?;
    let params = a.matching.params();
    create_dir(&a.out_dir)?;

    let reference = load_tensor(&files[0])?;
    save_mask(&ref_mask, a.out_dir.join(format!("{}.pgm", stem(&files[0]))))?;
    let mut previous = (reference.clone(), ref_mask.clone());
    for file in &files[1..] {
        let current = load_tensor(file)?;
        let predicted = nn_propagate(
            (&reference, &ref_mask),
            (&previous.0, &previous.1),
            &current,
            &objects,
            params,
            &a.matching.windows,
            atrous,
        )?;
        save_mask(&predicted, a.out_dir.join(format!("{}.pgm", stem(file))))?;
        previous = (current, predicted);
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Directory of predicted `*.pgm` masks.
    #[arg(long)]
    pub pred_dir: PathBuf,
    /// Directory of ground-truth `*.pgm` masks; file names pair the frames.
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Boundary tolerance in pixels; defaults to 0.8% of the image diagonal.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

pub(crate) fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    if let Some(t) = a.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::Usage(format!("--tol {t} must be non-negative")));
        }
    }
    let gt_files = list_files(&a.gt_dir, "pgm")?;
    let mut frames = Vec::with_capacity(gt_files.len());
    let mut objects = std::collections::BTreeSet::new();
    for gt_path in &gt_files {
        let gt = load_mask(gt_path)?;
        let name = gt_path.file_name().expect("listed file has a name");
        let pred = load_mask(a.pred_dir.join(name))?;
        objects.extend(gt.object_ids());
        frames.push((stem(gt_path), pred, gt));
    }
    let mut csv = String::from("frame,object,J,F,J&F\n");
    for (name, pred, gt) in &frames {
        let tol = a.tol.unwrap_or_else(|| default_tolerance(gt.height(), gt.width()));
        for &o in &objects {
            let s = score(pred, gt, o, tol)?;
            csv.push_str(&format!("{name},{o},{:.6},{:.6},{:.6}\n", s.j, s.f, s.jf));
        }
    }
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            fs::write(p, csv).map_err(|e| Error::io(p, e))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CropArgs {
    /// Directory of `<frame>.fbt` embeddings with matching `<frame>.pgm`
    /// masks; the first frame in name order constrains the crop.
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long, default_value_t = 465, value_parser = clap::value_parser!(u32).range(1..))]
    pub window_h: u32,
    #[arg(long, default_value_t = 465, value_parser = clap::value_parser!(u32).range(1..))]
    pub window_w: u32,
    /// Minimum foreground pixels in the first frame's crop; default 1% of the window.
    #[arg(long)]
    pub min_fg: Option<usize>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_retries: u32,
    #[arg(long, default_value_t = 1.0)]
    pub scale_lo: f64,
    #[arg(long, default_value_t = 1.3)]
    pub scale_hi: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Serialize)]
struct CropReport {
    offset_y: usize,
    offset_x: usize,
    scale: f64,
    scaled_height: usize,
    scaled_width: usize,
    retries: usize,
}

pub(crate) fn cmd_crop(a: &CropArgs) -> CliResult<()> {
    if !(a.scale_lo > 0.0 && a.scale_lo <= a.scale_hi && a.scale_hi.is_finite()) {
        return Err(CliError::Usage(format!(
            "--scale-lo {} / --scale-hi {} must satisfy 0 < lo <= hi",
            a.scale_lo, a.scale_hi
        )));
    }
    let files = list_files(&a.input_dir, "fbt")?;
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        frames.push((load_tensor(f)?, load_mask(f.with_extension("pgm"))?));
    }
    let seq = FrameSequence::new(frames)?;
    let mut cfg = CropConfig::with_window(a.window_h as usize, a.window_w as usize);
    if let Some(m) = a.min_fg {
        cfg.min_fg_pixels = m;
    }
    cfg.max_retries = a.max_retries as usize;
    cfg.scale_range = (a.scale_lo, a.scale_hi);
    let out = balanced_random_crop(&seq, &cfg, a.seed)?;
    create_dir(&a.out_dir)?;
    for (f, (e, m)) in files.iter().zip(out.frames.frames()) {
        let s = stem(f);
        save_tensor(e, a.out_dir.join(format!("{s}.fbt")))?;
        save_mask(m, a.out_dir.join(format!("{s}.pgm")))?;
    }
    let report = CropReport {
        offset_y: out.offset.0,
        offset_x: out.offset.1,
        scale: out.scale,
        scaled_height: out.scaled_dims.0,
        scaled_width: out.scaled_dims.1,
        retries: out.retries,
    };
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    /// FBT or PGM files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

pub(crate) fn cmd_info(a: &InfoArgs) -> CliResult<()> {
    for p in &a.paths {
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        if bytes.starts_with(b"P5") {
            let m = io::decode_mask(&bytes)?;
            let ids: Vec<String> = m.object_ids().iter().map(u16::to_string).collect();
            println!(
                "{}: format=PGM height={} width={} objects=[{}]",
                p.display(),
                m.height(),
                m.width(),
                ids.join(",")
            );
        } else {
            let h = io::parse_fbt_header(&bytes)?;
            println!(
                "{}: format=FBT magic=FBT1 dtype=f32 rank={} height={} width={} channels={} payload_bytes={}",
                p.display(),
                h.rank,
                h.height,
                h.width,
                h.channels,
                4 * h.payload_len()
            );
        }
    }
    Ok(())
}
