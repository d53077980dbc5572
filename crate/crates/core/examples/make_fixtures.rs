//! Regenerates `tests/fixtures/` from fixed seeds.
//!
//! cargo run -p fbmatch --example make_fixtures

use std::fs;
use std::path::Path;

use fbmatch::io::{save_mask, save_tensor};
use fbmatch::matching::{oracle_match, AtrousSpec, MatchInputs, WindowSet};
use fbmatch::sampling::SeededRng;
use fbmatch::{MatchParams, ObjectMask, Tensor3};

const H: usize = 12;
const W: usize = 10;
const C: usize = 6;

fn embedding(rng: &mut SeededRng) -> Tensor3 {
    Tensor3::from_fn(H, W, C, |_, _, _| (2.0 * rng.unit_f64() - 1.0) as f32).unwrap()
}

fn blobs(dy: usize, dx: usize) -> ObjectMask {
    ObjectMask::from_fn(H, W, |y, x| {
        if (2 + dy..6 + dy).contains(&y) && (1 + dx..5 + dx).contains(&x) {
            1
        } else if (7..11).contains(&y) && (6..9).contains(&x) {
            2
        } else {
            0
        }
    })
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle");
    fs::create_dir_all(&root).unwrap();
    let mut rng = SeededRng::new(20240601);
    let reference = embedding(&mut rng);
    let previous = embedding(&mut rng);
    let current = embedding(&mut rng);
    let reference_mask = blobs(0, 0);
    let previous_mask = blobs(1, 1);
    save_tensor(&reference, root.join("ref_embed.fbt")).unwrap();
    save_tensor(&previous, root.join("prev_embed.fbt")).unwrap();
    save_tensor(&current, root.join("cur_embed.fbt")).unwrap();
    save_mask(&reference_mask, root.join("ref_mask.pgm")).unwrap();
    save_mask(&previous_mask, root.join("prev_mask.pgm")).unwrap();

    let inputs = MatchInputs {
        current: &current,
        reference: &reference,
        reference_mask: &reference_mask,
        previous: &previous,
        previous_mask: &previous_mask,
    };
    let windows = WindowSet::new(vec![1, 2, 3]).unwrap();
    let params = MatchParams::new(-0.5, 0.25).unwrap();
    for l in [1, 2] {
        let out = oracle_match(inputs, 1, &windows, params, AtrousSpec::with_factor(l).unwrap()).unwrap();
        let dir = root.join(format!("expected_l{l}"));
        fs::create_dir_all(&dir).unwrap();
        save_tensor(&out.global_fg, dir.join("global_fg.fbt")).unwrap();
        save_tensor(&out.global_bg, dir.join("global_bg.fbt")).unwrap();
        for (i, k) in out.windows.iter().enumerate() {
            save_tensor(&out.local_fg[i], dir.join(format!("local_fg_k{k}.fbt"))).unwrap();
            save_tensor(&out.local_bg[i], dir.join(format!("local_bg_k{k}.fbt"))).unwrap();
        }
        fs::write(dir.join("referred.txt"), format!("{}\n", out.referred_pixels)).unwrap();
    }
}
