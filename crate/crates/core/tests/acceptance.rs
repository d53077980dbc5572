//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use fbmatch::distance::{distance_from_squared, squared_distance};
use fbmatch::io::{encode_mask, encode_tensor};
use fbmatch::matching::{
    global_match, global_match_dense, match_object, multi_local_match, oracle_match, EMPTY_MATCH,
};
use fbmatch::metrics::{bootstrapped_ce, boundary_f, jaccard};
use fbmatch::pipeline::{nn_propagate, run_scale, RunOptions, ScaleFrames, ScaleSpec};
use fbmatch::sampling::{balanced_random_crop, CropConfig, SeededRng};
use fbmatch::{AtrousSpec, Error, FrameSequence, MatchInputs, MatchParams, ObjectMask, Tensor3, WindowSet};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Instance {
    cur: Tensor3,
    reference: Tensor3,
    prev: Tensor3,
    ref_mask: ObjectMask,
    prev_mask: ObjectMask,
    objects: u16,
    params: MatchParams,
}

fn random_tensor(rng: &mut SeededRng, h: usize, w: usize, c: usize) -> Tensor3 {
    Tensor3::from_fn(h, w, c, |_, _, _| (2.0 * rng.unit_f64() - 1.0) as f32).unwrap()
}

fn random_mask(rng: &mut SeededRng, h: usize, w: usize, objects: u16) -> ObjectMask {
    ObjectMask::from_fn(h, w, |_, _| rng.below(objects as u32 + 1) as u16)
}

/// H, W <= 16, C <= 8, up to 3 objects.
fn instance(seed: u64) -> Instance {
    let mut rng = SeededRng::new(seed);
    let h = 1 + rng.below(16) as usize;
    let w = 1 + rng.below(16) as usize;
    let c = 1 + rng.below(8) as usize;
    let objects = 1 + rng.below(3) as u16;
    let bias = |rng: &mut SeededRng| (4.0 * rng.unit_f64() - 2.0) as f32;
    let params = MatchParams::new(bias(&mut rng), bias(&mut rng)).unwrap();
    Instance {
        cur: random_tensor(&mut rng, h, w, c),
        reference: random_tensor(&mut rng, h, w, c),
        prev: random_tensor(&mut rng, h, w, c),
        ref_mask: random_mask(&mut rng, h, w, objects),
        prev_mask: random_mask(&mut rng, h, w, objects),
        objects,
        params,
    }
}

impl Instance {
    fn inputs(&self) -> MatchInputs<'_> {
        MatchInputs {
            current: &self.cur,
            reference: &self.reference,
            reference_mask: &self.ref_mask,
            previous: &self.prev,
            previous_mask: &self.prev_mask,
        }
    }
}

/// Dense multi-local maps with every window scanned independently.
fn dense_local(inst: &Instance, object: u16, ws: &WindowSet) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    let (h, w) = (inst.cur.height(), inst.cur.width());
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for &k in ws.sizes() {
        let mut f = Vec::with_capacity(h * w);
        let mut b = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (mut mf, mut mb) = (f32::INFINITY, f32::INFINITY);
                for py in y.saturating_sub(k)..=(y + k).min(h - 1) {
                    for px in x.saturating_sub(k)..=(x + k).min(w - 1) {
                        let d2 = squared_distance(inst.cur.pixel(x, y), inst.prev.pixel(px, py));
                        if inst.prev_mask.get(px, py) == object {
                            mf = mf.min(d2);
                        } else {
                            mb = mb.min(d2);
                        }
                    }
                }
                let finish =
                    |m: f32, bias| if m.is_finite() { distance_from_squared(m, bias) } else { EMPTY_MATCH };
                f.push(finish(mf, inst.params.bias_fg));
                b.push(finish(mb, inst.params.bias_bg));
            }
        }
        fg.push(f);
        bg.push(b);
    }
    (fg, bg)
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn ac1_atrous_identity() -> Verdict {
    let start = Instant::now();
    let ws = WindowSet::new(vec![1, 2, 3]).unwrap();
    let one = AtrousSpec::with_factor(1).unwrap();
    let mut checked = 0;
    for seed in 0..200u64 {
        let inst = instance(seed);
        for o in 1..=inst.objects {
            let g = global_match(&inst.cur, &inst.reference, &inst.ref_mask, o, inst.params, one).unwrap();
            let d = global_match_dense(&inst.cur, &inst.reference, &inst.ref_mask, o, inst.params).unwrap();
            if bits(g.fg.data()) != bits(d.fg.data()) || bits(g.bg.data()) != bits(d.bg.data()) {
                return verdict(false, format!("global maps differ on seed {seed}, object {o}"));
            }
            let l =
                multi_local_match(&inst.cur, &inst.prev, &inst.prev_mask, o, &ws, inst.params, one).unwrap();
            let (fg, bg) = dense_local(&inst, o, &ws);
            for i in 0..ws.len() {
                if bits(l.fg[i].data()) != bits(&fg[i]) || bits(l.bg[i].data()) != bits(&bg[i]) {
                    return verdict(
                        false,
                        format!("local maps differ on seed {seed}, object {o}, k={}", ws.sizes()[i]),
                    );
                }
            }
            checked += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        t < Duration::from_secs(10),
        format!("{checked} (instance, object) pairs bitwise equal in {:.2}s (limit 10s)", t.as_secs_f64()),
    )
}

fn window_subsets() -> Vec<WindowSet> {
    (1u32..8)
        .map(|bits| WindowSet::new((1..=3).filter(|k| bits & (1 << (k - 1)) != 0).collect()).unwrap())
        .collect()
}

fn ac2_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f32;
    let mut runs = 0;
    for seed in 0..200u64 {
        let inst = instance(seed);
        for l in [1, 2] {
            let a = AtrousSpec::with_factor(l).unwrap();
            for ws in window_subsets() {
                for o in 1..=inst.objects {
                    let fast = match_object(inst.inputs(), o, &ws, inst.params, a).unwrap();
                    let slow = oracle_match(inst.inputs(), o, &ws, inst.params, a).unwrap();
                    let pairs = [(&fast.global_fg, &slow.global_fg), (&fast.global_bg, &slow.global_bg)]
                        .into_iter()
                        .chain(fast.local_fg.iter().zip(&slow.local_fg))
                        .chain(fast.local_bg.iter().zip(&slow.local_bg));
                    for (x, y) in pairs {
                        for (p, q) in x.data().iter().zip(y.data()) {
                            worst = worst.max((p - q).abs());
                        }
                    }
                    runs += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    verdict(
        worst <= 1e-6 && t < Duration::from_secs(60),
        format!("{runs} runs, max |diff| {worst:.3e} (limit 1e-6) in {:.2}s (limit 60s)", t.as_secs_f64()),
    )
}

fn ac3_referred_law() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for w in [32usize, 64, 128] {
        let e = Tensor3::zeros(w, w, 1);
        let m = ObjectMask::from_fn(w, w, |_, _| 1);
        let count = |l| {
            global_match(&e, &e, &m, 1, MatchParams::default(), AtrousSpec::with_factor(l).unwrap())
                .unwrap()
                .referred
        };
        let dense = count(1);
        for l in [2usize, 4] {
            let ratio = dense as f64 / count(l) as f64;
            let target = (l * l) as f64;
            let ok = (ratio - target).abs() <= 0.2 * target;
            pass &= ok;
            parts.push(format!("W={w} l={l}: {ratio:.3}"));
        }
    }
    verdict(pass, format!("reduction factors (target l^2 +-20%): {}", parts.join(", ")))
}

fn ac4_speed() -> Verdict {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_fbmatch"))
        .args([
            "bench",
            "--kind",
            "global",
            "--height",
            "120",
            "--width",
            "120",
            "--channels",
            "100",
            "--atrous-list",
            "2",
            "--repeat",
            "5",
            "--seed",
            "1",
        ])
        .output()
        .expect("spawn fbmatch bench");
    let t = start.elapsed();
    if !out.status.success() {
        return verdict(false, format!("bench exited with {:?}", out.status.code()));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text.lines().find(|l| l.starts_with("global,2,"));
    let Some(speedup) = row.and_then(|r| r.rsplit(',').next()).and_then(|v| v.parse::<f64>().ok()) else {
        return verdict(false, format!("no l=2 row in bench output:\n{text}"));
    };
    verdict(
        speedup >= 2.5 && t < Duration::from_secs(120),
        format!("median speedup {speedup:.2}x (need >= 2.5x) in {:.1}s (limit 120s)", t.as_secs_f64()),
    )
}

fn ac5_distance_identity() -> Verdict {
    let mut rng = SeededRng::new(5);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let d2 = (rng.unit_f64() * 60.0) as f32;
        let b = (rng.unit_f64() * 20.0 - 10.0) as f32;
        let exp_form = 1.0 - 2.0 / (1.0 + (d2 as f64 + b as f64).exp());
        worst = worst.max((distance_from_squared(d2, b) as f64 - exp_form).abs());
    }
    let big = [0.0f32, -10.0, 10.0].iter().map(|&b| distance_from_squared(1e6, b)).collect::<Vec<_>>();
    let finite = big.iter().all(|v| v.is_finite() && *v <= 1.0);
    verdict(
        worst <= 1e-6 && finite,
        format!("max |tanh - exp| {worst:.3e} over 1e5 samples (limit 1e-6); d2=1e6 -> {big:?}"),
    )
}

fn ac6_channels() -> Verdict {
    let expected = [79usize, 143, 266];
    let mut got = Vec::new();
    for spec in ScaleSpec::multiscale_defaults() {
        let (h, w, c) = (6, 5, spec.channels);
        let e = Tensor3::from_fn(h, w, c, |y, x, k| ((y + 2 * x + k) % 5) as f32 * 0.1).unwrap();
        let m = ObjectMask::from_fn(h, w, |y, _| u16::from(y < 3));
        let frames = ScaleFrames {
            reference: e.clone(),
            reference_mask: m.clone(),
            previous: e.clone(),
            previous_mask: m,
            current: e,
        };
        let f = run_scale(&spec, &frames, 1, MatchParams::default(), RunOptions::default()).unwrap();
        got.push(f.features.channels());
    }
    verdict(got == expected, format!("got {got:?}, expected {expected:?}"))
}

fn crop_sequence() -> FrameSequence {
    let frames = (0..3)
        .map(|t| {
            let e = Tensor3::from_fn(60, 80, 2, |y, x, c| (y * 80 + x + c + t) as f32 * 1e-3).unwrap();
            let m = ObjectMask::from_fn(60, 80, |y, x| {
                if (20..34).contains(&y) && (50..62).contains(&x) {
                    1
                } else if (40..44).contains(&y) && (8..14).contains(&x) {
                    2
                } else {
                    0
                }
            });
            (e, m)
        })
        .collect();
    FrameSequence::new(frames).unwrap()
}

fn ac7_sampler() -> Verdict {
    let seq = crop_sequence();
    let cfg = CropConfig::with_window(24, 24);
    for seed in 0..1000u64 {
        let out = match balanced_random_crop(&seq, &cfg, seed) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("seed {seed}: {e}")),
        };
        let first = &out.frames.frames()[0].1;
        let fg = first.labels().iter().filter(|&&l| l != 0).count();
        if fg < cfg.min_fg_pixels {
            return verdict(false, format!("seed {seed}: {fg} foreground pixels < {}", cfg.min_fg_pixels));
        }
    }
    let empty =
        FrameSequence::new(vec![(Tensor3::zeros(60, 80, 2), ObjectMask::background(60, 80))]).unwrap();
    let raised = matches!(balanced_random_crop(&empty, &cfg, 3), Err(Error::MaxRetriesExceeded { .. }));
    let encode = |s: u64| {
        let out = balanced_random_crop(&seq, &cfg, s).unwrap();
        out.frames.frames().iter().flat_map(|(e, m)| [encode_tensor(e), encode_mask(m)]).collect::<Vec<_>>()
    };
    let reproducible = (0..20).all(|s| encode(s) == encode(s));
    verdict(
        raised && reproducible,
        format!(
            "1000 crops >= {} fg pixels; all-background raises MaxRetriesExceeded: {raised}; byte-identical reruns: {reproducible}",
            cfg.min_fg_pixels
        ),
    )
}

fn oracle_boundary(m: &ObjectMask, o: u16) -> Vec<(i64, i64)> {
    let (h, w) = m.dims();
    let inside = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m.get(x as usize, y as usize) == o
    };
    let mut out = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if inside(x, y)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| !inside(x + dx, y + dy))
            {
                out.push((x, y));
            }
        }
    }
    out
}

fn oracle_f(pred: &ObjectMask, gt: &ObjectMask, o: u16, tol: f64) -> f64 {
    let (bp, bg) = (oracle_boundary(pred, o), oracle_boundary(gt, o));
    match (bp.is_empty(), bg.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let near = |a: &[(i64, i64)], b: &[(i64, i64)]| {
        a.iter()
            .filter(|p| b.iter().any(|q| (((p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)) as f64) <= tol * tol))
            .count()
    };
    let p = near(&bp, &bg) as f64 / bp.len() as f64;
    let r = near(&bg, &bp) as f64 / bg.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn blob(rng: &mut SeededRng, h: usize, w: usize) -> ObjectMask {
    let (cy, cx) = (rng.unit_f64() * h as f64, rng.unit_f64() * w as f64);
    let (ry, rx) = (1.0 + rng.unit_f64() * h as f64 / 2.0, 1.0 + rng.unit_f64() * w as f64 / 2.0);
    let noise: Vec<bool> = (0..h * w).map(|_| rng.below(10) == 0).collect();
    ObjectMask::from_fn(h, w, |y, x| {
        let v = ((y as f64 - cy) / ry).powi(2) + ((x as f64 - cx) / rx).powi(2);
        u16::from((v <= 1.0) ^ noise[y * w + x])
    })
}

fn ac8_metrics() -> Verdict {
    let mut rng = SeededRng::new(8);
    let a = blob(&mut rng, 20, 20);
    let ident = jaccard(&a, &a, 1).unwrap() == 1.0 && boundary_f(&a, &a, 1, 2.0).unwrap() == 1.0;
    let gt = ObjectMask::from_fn(10, 10, |_, x| u16::from(x < 4));
    let half = ObjectMask::from_fn(10, 10, |_, x| u16::from(x < 2));
    let j_half = jaccard(&half, &gt, 1).unwrap();
    let mut mismatches = 0;
    for _ in 0..50 {
        let h = 4 + rng.below(17) as usize;
        let w = 4 + rng.below(17) as usize;
        let (p, g) = (blob(&mut rng, h, w), blob(&mut rng, h, w));
        for tol in [0.0, 1.0, 1.5, 2.0, 3.0] {
            if boundary_f(&p, &g, 1, tol).unwrap() != oracle_f(&p, &g, 1, tol) {
                mismatches += 1;
            }
        }
    }
    verdict(
        ident && j_half == 0.5 && mismatches == 0,
        format!("identical J=F=1: {ident}; half-overlap J={j_half}; boundary_f vs O(B^2) oracle mismatches: {mismatches}/250"),
    )
}

fn ac9_bootstrap() -> Verdict {
    let losses: Vec<f32> = (1..=20).map(|v| v as f32).collect();
    let top = bootstrapped_ce(&losses, 0.15).unwrap();
    let mut rng = SeededRng::new(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 1 + rng.below(500) as usize;
        let v: Vec<f32> = (0..n).map(|_| (rng.unit_f64() * 10.0) as f32).collect();
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        worst = worst.max((bootstrapped_ce(&v, 1.0).unwrap() - mean).abs());
    }
    verdict(
        top == 19.0 && worst <= 1e-6,
        format!("1..20 @0.15 -> {top}; ratio 1.0 vs mean max |diff| {worst:.3e}"),
    )
}

/// Three 4x4 objects drifting one pixel per frame, kept apart by background.
fn propagation_sequence(seed: u64) -> (Vec<Tensor3>, Vec<ObjectMask>) {
    let mut rng = SeededRng::new(seed);
    let starts = [(1usize, 1usize), (1, 10), (9, 5)];
    let drift: Vec<(isize, isize)> =
        (0..3).map(|_| (rng.below(3) as isize - 1, rng.below(3) as isize - 1)).collect();
    let mut embeds = Vec::new();
    let mut masks = Vec::new();
    for t in 0..5isize {
        let m = ObjectMask::from_fn(16, 16, |y, x| {
            for (i, (&(sy, sx), &(dy, dx))) in starts.iter().zip(&drift).enumerate() {
                let (oy, ox) = (sy as isize + dy * t / 2, sx as isize + dx * t / 2);
                let (y, x) = (y as isize, x as isize);
                if (oy..oy + 4).contains(&y) && (ox..ox + 4).contains(&x) {
                    return i as u16 + 1;
                }
            }
            0
        });
        let e = Tensor3::from_fn(16, 16, 4, |y, x, c| {
            let proto = if m.get(x, y) as usize == c { 5.0 } else { 0.0 };
            proto + (rng.unit_f64() * 0.4 - 0.2) as f32
        })
        .unwrap();
        embeds.push(e);
        masks.push(m);
    }
    (embeds, masks)
}

fn ac10_propagation() -> Verdict {
    let ws = WindowSet::new(vec![1, 2]).unwrap();
    let mut wrong = Vec::new();
    let mut frames = 0;
    for seed in 0..5u64 {
        let (e, gt) = propagation_sequence(seed);
        for l in [1, 2] {
            let a = AtrousSpec::with_factor(l).unwrap();
            let mut prev = gt[0].clone();
            for t in 1..5 {
                let pred = nn_propagate(
                    (&e[0], &gt[0]),
                    (&e[t - 1], &prev),
                    &e[t],
                    &[1, 2, 3],
                    MatchParams::default(),
                    &ws,
                    a,
                )
                .unwrap();
                if pred != gt[t] {
                    wrong.push(format!("seed {seed} l={l} frame {t}"));
                }
                frames += 1;
                prev = pred;
            }
        }
    }
    verdict(
        wrong.is_empty(),
        format!("{} of {frames} propagated frames exact {wrong:?}", frames - wrong.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 atrous identity", ac1_atrous_identity),
        ("AC2 oracle equivalence", ac2_oracle_equivalence),
        ("AC3 referred-pixel law", ac3_referred_law),
        ("AC4 speed proxy", ac4_speed),
        ("AC5 distance identity", ac5_distance_identity),
        ("AC6 channel-count formula", ac6_channels),
        ("AC7 sampler guarantees", ac7_sampler),
        ("AC8 metrics sanity", ac8_metrics),
        ("AC9 bootstrapped loss", ac9_bootstrap),
        ("AC10 propagation fixture", ac10_propagation),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        failed += usize::from(!v.pass);
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
