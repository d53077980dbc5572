use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};

use super::commands::parse_windows;
use super::{CliResult, ConfigArg};
use crate::distance::MatchParams;
use crate::error::{Error, Result};
use crate::matching::{global_match, multi_local_match, AtrousSpec, WindowSet};
use crate::sampling::SeededRng;
use crate::tensor::{ObjectMask, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Global,
    Local,
    /// Global rows followed by local rows.
    All,
}

impl BenchKind {
    fn stages(self) -> &'static [&'static str] {
        match self {
            BenchKind::Global => &["global"],
            BenchKind::Local => &["local"],
            BenchKind::All => &["global", "local"],
        }
    }
}

fn parse_factor(s: &str) -> std::result::Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("atrous factors must be positive".to_string()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{s:?}: {e}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 120, value_parser = clap::value_parser!(u32).range(1..))]
    pub height: u32,
    #[arg(long, default_value_t = 120, value_parser = clap::value_parser!(u32).range(1..))]
    pub width: u32,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub channels: u32,
    /// Comma-separated atrous factors; the dense baseline (1) is always run.
    #[arg(long, value_parser = parse_factor, value_delimiter = ',', default_value = "2,4")]
    pub atrous_list: Vec<usize>,
    #[arg(long, value_parser = parse_windows, default_value = "1,2,4")]
    pub windows: WindowSet,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeat: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = BenchKind::All)]
    pub kind: BenchKind,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub kind: &'static str,
    pub atrous: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub repeat: usize,
    pub referred: u64,
    pub median_ms: f64,
    pub min_ms: f64,
    /// Dense median over this row's median.
    pub speedup: f64,
}

pub const BENCH_HEADER: &str = "kind,atrous,height,width,channels,repeat,referred,median_ms,min_ms,speedup";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3},{:.3},{:.3}",
            self.kind,
            self.atrous,
            self.height,
            self.width,
            self.channels,
            self.repeat,
            self.referred,
            self.median_ms,
            self.min_ms,
            self.speedup
        )
    }
}

fn random_embedding(rng: &mut SeededRng, h: usize, w: usize, c: usize) -> Tensor3 {
    Tensor3::from_fn(h, w, c, |_, _, _| (2.0 * rng.unit_f64() - 1.0) as f32).expect("finite values")
}

/// Object 1 fills the central rectangle spanning half of each axis.
fn rectangle_mask(h: usize, w: usize) -> ObjectMask {
    ObjectMask::from_fn(h, w, |y, x| {
        u16::from((h / 4..h / 4 + h.div_ceil(2)).contains(&y) && (w / 4..w / 4 + w.div_ceil(2)).contains(&x))
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Times dense and atrous matching on seeded synthetic frames.
pub fn run_bench(a: &BenchArgs) -> Result<Vec<BenchRow>> {
    let (h, w, c) = (a.height as usize, a.width as usize, a.channels as usize);
    let mut rng = SeededRng::new(a.seed);
    let current = random_embedding(&mut rng, h, w, c);
    let reference = random_embedding(&mut rng, h, w, c);
    let previous = random_embedding(&mut rng, h, w, c);
    let mask = rectangle_mask(h, w);
    let params = MatchParams::default();

    let mut factors = vec![1];
    for &l in &a.atrous_list {
        if !factors.contains(&l) {
            factors.push(l);
        }
    }

    let mut rows: Vec<BenchRow> = Vec::new();
    for &stage in a.kind.stages() {
        let mut dense = None;
        for &l in &factors {
            let atrous = AtrousSpec::with_factor(l)?;
            let mut times = Vec::with_capacity(a.repeat as usize);
            let mut referred = 0;
            for _ in 0..a.repeat {
                let t = Instant::now();
                referred = if stage == "global" {
                    global_match(&current, &reference, &mask, 1, params, atrous)?.referred
                } else {
                    multi_local_match(&current, &previous, &mask, 1, &a.windows, params, atrous)?.referred
                };
                times.push(t.elapsed().as_secs_f64() * 1e3);
            }
            times.sort_by(f64::total_cmp);
            let median_ms = median(&times);
            let dense_ms = *dense.get_or_insert(median_ms);
            rows.push(BenchRow {
                kind: stage,
                atrous: l,
                height: h,
                width: w,
                channels: c,
                repeat: a.repeat as usize,
                referred,
                median_ms,
                min_ms: times[0],
                speedup: if median_ms > 0.0 { dense_ms / median_ms } else { f64::INFINITY },
            });
        }
    }
    Ok(rows)
}

pub(crate) fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let rows = run_bench(a)?;
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    match &a.out {
        Some(p) => fs::write(p, csv).map_err(|e| Error::io(p, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}
