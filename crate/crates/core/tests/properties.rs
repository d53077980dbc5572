use fbmatch::instance::instance_pool;
use fbmatch::io::{decode_mask, decode_tensor, encode_mask, encode_tensor};
use fbmatch::matching::{count_atrous_candidates, global_match, multi_local_match, oracle_match};
use fbmatch::metrics::{bootstrapped_ce, boundary_f, jaccard};
use fbmatch::resample::{downsample_embedding, downsample_mask, resize_embedding, resize_mask};
use fbmatch::{partition_pixels, AtrousSpec, MatchInputs, MatchParams, ObjectMask, Tensor3, WindowSet};
use proptest::prelude::*;

fn tensor(max_hw: usize, max_c: usize) -> impl Strategy<Value = Tensor3> {
    (1..=max_hw, 1..=max_hw, 1..=max_c).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(-2.0f32..2.0, h * w * c).prop_map(move |d| Tensor3::new(h, w, c, d).unwrap())
    })
}

fn mask(h: usize, w: usize, ids: u16) -> impl Strategy<Value = ObjectMask> {
    prop::collection::vec(0..=ids, h * w).prop_map(move |l| ObjectMask::new(h, w, l).unwrap())
}

fn random_like(t: &Tensor3, salt: u32) -> Tensor3 {
    let (h, w, c) = t.dims();
    Tensor3::from_fn(h, w, c, |y, x, k| {
        let v = (y as u32 * 7919 + x as u32 * 104_729 + k as u32 * 31 + salt).wrapping_mul(2_654_435_761);
        (v >> 8) as f32 / (1u32 << 24) as f32 * 2.0 - 1.0
    })
    .unwrap()
}

/// A frame plus two masks of the same size and a second and third embedding.
fn scene(max_hw: usize) -> impl Strategy<Value = (Tensor3, Tensor3, Tensor3, ObjectMask, ObjectMask)> {
    tensor(max_hw, 4).prop_flat_map(|cur| {
        let (h, w) = (cur.height(), cur.width());
        let r = random_like(&cur, 1);
        let p = random_like(&cur, 2);
        (Just(cur), Just(r), Just(p), mask(h, w, 2), mask(h, w, 2))
    })
}

fn pad(m: &ObjectMask, top: usize, left: usize, h: usize, w: usize) -> ObjectMask {
    ObjectMask::from_fn(h, w, |y, x| {
        if y >= top && x >= left && y - top < m.height() && x - left < m.width() {
            m.get(x - left, y - top)
        } else {
            0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fbt_round_trip(t in tensor(9, 5)) {
        let back = decode_tensor(&encode_tensor(&t)).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn pgm_round_trip(m in (1usize..10, 1usize..10, prop::bool::ANY).prop_flat_map(|(h, w, wide)| mask(h, w, if wide { 700 } else { 9 }))) {
        prop_assert_eq!(decode_mask(&encode_mask(&m)).unwrap(), m);
    }

    #[test]
    fn partition_covers_frame(m in (1usize..12, 1usize..12).prop_flat_map(|(h, w)| mask(h, w, 3)), o in 1u16..4) {
        let p = partition_pixels(&m, o);
        prop_assert_eq!(p.fg_indices.len() + p.bg_indices.len(), m.height() * m.width());
        prop_assert_eq!(p.fg_indices.len(), m.count(o));
        prop_assert!(p.fg_indices.iter().all(|&(x, y)| m.get(x, y) == o));
    }

    #[test]
    fn resample_shapes_and_labels(t in tensor(11, 3), f in 1usize..5) {
        let d = downsample_embedding(&t, f).unwrap();
        prop_assert_eq!(d.dims(), (t.height().div_ceil(f), t.width().div_ceil(f), t.channels()));
        prop_assert_eq!(resize_embedding(&t, t.height(), t.width()), t.clone());
        let m = ObjectMask::from_fn(t.height(), t.width(), |y, x| ((y * 3 + x) % 4) as u16);
        let dm = downsample_mask(&m, f).unwrap();
        prop_assert_eq!(dm.dims(), (m.height().div_ceil(f), m.width().div_ceil(f)));
        let ids = m.object_ids();
        prop_assert!(dm.object_ids().iter().all(|o| ids.contains(o)));
        prop_assert_eq!(resize_mask(&m, m.height(), m.width()), m);
    }

    #[test]
    fn larger_windows_never_worse((cur, _, prev, _, pm) in scene(9), l in 1usize..3) {
        let ws = WindowSet::new(vec![1, 2, 3]).unwrap();
        let out = multi_local_match(&cur, &prev, &pm, 1, &ws, MatchParams::default(), AtrousSpec::with_factor(l).unwrap()).unwrap();
        for pair in [&out.fg, &out.bg] {
            for i in 1..pair.len() {
                prop_assert!(pair[i].data().iter().zip(pair[i - 1].data()).all(|(big, small)| big <= small));
            }
        }
    }

    #[test]
    fn atrous_candidates_are_a_subset((cur, r, _, rm, _) in scene(10), l in 2usize..4, origin in 0usize..2) {
        let p = MatchParams::default();
        let dense = global_match(&cur, &r, &rm, 1, p, AtrousSpec::DENSE).unwrap();
        let sparse = global_match(&cur, &r, &rm, 1, p, AtrousSpec::new(l, origin).unwrap()).unwrap();
        prop_assert!(sparse.fg.data().iter().zip(dense.fg.data()).all(|(s, d)| s >= d));
        prop_assert!(sparse.bg.data().iter().zip(dense.bg.data()).all(|(s, d)| s >= d));
    }

    #[test]
    fn referred_count_law((cur, r, _, rm, _) in scene(10), l in 1usize..4) {
        let a = AtrousSpec::with_factor(l).unwrap();
        let g = global_match(&cur, &r, &rm, 1, MatchParams::default(), a).unwrap();
        let (nf, nb) = count_atrous_candidates(&rm, 1, a);
        prop_assert_eq!(g.referred, (cur.pixel_count() * (nf + nb)) as u64);
    }

    #[test]
    fn thread_count_does_not_change_results((cur, r, p, rm, pm) in scene(10)) {
        let ws = WindowSet::new(vec![1, 3]).unwrap();
        let a = AtrousSpec::with_factor(2).unwrap();
        let run = || {
            let g = global_match(&cur, &r, &rm, 1, MatchParams::default(), a).unwrap();
            let l = multi_local_match(&cur, &p, &pm, 1, &ws, MatchParams::default(), a).unwrap();
            (g.fg, g.bg, l.fg, l.bg)
        };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let multi = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        prop_assert_eq!(single, multi);
    }

    #[test]
    fn optimized_matches_oracle((cur, r, p, rm, pm) in scene(8), l in 1usize..3, bf in -1.0f32..1.0, bb in -1.0f32..1.0) {
        let ws = WindowSet::new(vec![1, 2, 3]).unwrap();
        let a = AtrousSpec::with_factor(l).unwrap();
        let params = MatchParams::new(bf, bb).unwrap();
        let inputs = MatchInputs { current: &cur, reference: &r, reference_mask: &rm, previous: &p, previous_mask: &pm };
        let fast = fbmatch::matching::match_object(inputs, 1, &ws, params, a).unwrap();
        let slow = oracle_match(inputs, 1, &ws, params, a).unwrap();
        let pairs = [(&fast.global_fg, &slow.global_fg), (&fast.global_bg, &slow.global_bg)]
            .into_iter()
            .chain(fast.local_fg.iter().zip(&slow.local_fg))
            .chain(fast.local_bg.iter().zip(&slow.local_bg));
        for (x, y) in pairs {
            prop_assert!(x.data().iter().zip(y.data()).all(|(a, b)| (a - b).abs() <= 1e-6));
        }
        prop_assert_eq!(fast.referred_pixels, slow.referred_pixels);
    }

    #[test]
    fn pooling_is_linear((cur, r, _, rm, pm) in scene(8), alpha in -3.0f32..3.0) {
        let g = instance_pool((&r, &rm), (&cur, &pm), 1).unwrap();
        let gs = instance_pool((&r.scaled(alpha).unwrap(), &rm), (&cur.scaled(alpha).unwrap(), &pm), 1).unwrap();
        for (a, b) in g.values().iter().zip(gs.values()) {
            prop_assert!((a * alpha - b).abs() <= 1e-5 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn jaccard_and_f_are_symmetric(
        (a, b) in (2usize..12, 2usize..12).prop_flat_map(|(h, w)| (mask(h, w, 1), mask(h, w, 1))),
        tol in 0.0f64..3.0,
    ) {
        prop_assert_eq!(jaccard(&a, &b, 1).unwrap(), jaccard(&b, &a, 1).unwrap());
        let (f1, f2) = (boundary_f(&a, &b, 1, tol).unwrap(), boundary_f(&b, &a, 1, tol).unwrap());
        prop_assert!((f1 - f2).abs() <= 1e-12);
    }

    #[test]
    fn scores_survive_translation(
        (a, b) in (2usize..10, 2usize..10).prop_flat_map(|(h, w)| (mask(h, w, 1), mask(h, w, 1))),
        (t1, l1, t2, l2) in (1usize..4, 1usize..4, 1usize..4, 1usize..4),
        tol in 0.0f64..3.0,
    ) {
        let (h, w) = (a.height() + 8, a.width() + 8);
        let (a1, b1) = (pad(&a, t1, l1, h, w), pad(&b, t1, l1, h, w));
        let (a2, b2) = (pad(&a, t2, l2, h, w), pad(&b, t2, l2, h, w));
        prop_assert_eq!(jaccard(&a1, &b1, 1).unwrap(), jaccard(&a2, &b2, 1).unwrap());
        prop_assert_eq!(boundary_f(&a1, &b1, 1, tol).unwrap(), boundary_f(&a2, &b2, 1, tol).unwrap());
    }

    #[test]
    fn bootstrap_decreases_with_ratio(losses in prop::collection::vec(0.0f32..20.0, 1..200), r1 in 0.01f64..1.0, r2 in 0.01f64..1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(bootstrapped_ce(&losses, lo).unwrap() >= bootstrapped_ce(&losses, hi).unwrap() - 1e-9);
    }
}
