mod common;

use proptest::prelude::*;
use storyplay_core::action::{
    interpolate, rank_actions, topk_weights, ActionEmbedding, ActionInfo, Lexicon, BASE_ACTIONS,
};
use storyplay_core::dataset::{corpus_to_json, parse_corpus, subsample, MotionInstance, SceneScale};
use storyplay_core::eval::{gini, mst_dispersion};
use storyplay_core::motion::{
    apply_motion_delta, pair_distance, proactive_features, reactive_features, Character, Frame, MotionDelta, Pose,
    SceneBounds, Trajectory,
};
use storyplay_core::neural::optim::{clip_grad_norm, global_norm};
use storyplay_core::neural::{ModelConfig, ModelKind, Preset, SequenceModel, Tensor};
use storyplay_core::pipelines::{proactive_motion_step, reactive_motion_step};

fn pose() -> impl Strategy<Value = Pose> {
    (-3.0..3.0f64, -3.0..3.0f64, -7.0..7.0f64).prop_map(|(x, y, r)| Pose::new(x, y, r))
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn lexicon(d: usize) -> impl Strategy<Value = Lexicon> {
    prop::collection::vec(vector(d), 31).prop_map(|vs| {
        Lexicon::new(BASE_ACTIONS.iter().zip(vs).map(|(t, v)| (t.to_string(), ActionEmbedding(v))).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn pair_distance_is_antisymmetric(a in pose(), b in pose()) {
        let (x1, y1) = pair_distance(a, b);
        let (x2, y2) = pair_distance(b, a);
        prop_assert_eq!((x1, y1), (-x2, -y2));
    }

    #[test]
    fn opposite_delta_restores_pose(p in pose(), dx in -1.0..1.0f64, dy in -1.0..1.0f64, r in -7.0..7.0f64) {
        let back = apply_motion_delta(apply_motion_delta(p, MotionDelta::new(dx, dy, r)), MotionDelta::new(-dx, -dy, p.r));
        prop_assert!((back.x - p.x).abs() < 1e-12 && (back.y - p.y).abs() < 1e-12);
        prop_assert_eq!(back.r, p.r);
    }

    #[test]
    fn proactive_and_reactive_offsets_mirror(a in pose(), b in pose(), c in pose(), d in pose()) {
        let prev = Frame::new(4, a, b);
        let cur = Frame::new(5, c, d);
        let p = proactive_features(&cur, Some(&prev)).unwrap().to_array();
        let r = reactive_features(&cur, Some(&prev)).unwrap().to_array();
        prop_assert_eq!(p.len(), 6);
        prop_assert_eq!((p[2], p[3]), (-r[2], -r[3]));
        prop_assert_eq!((p[0], p[1]), (d.x - b.x, d.y - b.y));
        prop_assert_eq!((r[0], r[1]), (c.x - a.x, c.y - a.y));
        prop_assert_eq!((p[4], p[5]), (c.r, d.r));
    }

    #[test]
    fn ranking_is_a_sorted_permutation(lex in lexicon(5), q in vector(5)) {
        let ranked = rank_actions(&ActionEmbedding(q), &lex).unwrap();
        let mut terms: Vec<&str> = ranked.iter().map(|r| r.term.as_str()).collect();
        prop_assert!(ranked.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        terms.sort();
        let mut base = BASE_ACTIONS.to_vec();
        base.sort();
        prop_assert_eq!(terms, base);
    }

    #[test]
    fn topk_weights_are_a_distribution_in_rank_order(lex in lexicon(4), q in vector(4), k in 1usize..=31, c in 0.01..100.0f64) {
        let w = topk_weights(&ActionEmbedding(q.clone()), &lex, k).unwrap();
        prop_assert_eq!(w.len(), k);
        prop_assert!(w.iter().all(|x| x.weight >= 0.0));
        prop_assert!((w.iter().map(|x| x.weight).sum::<f64>() - 1.0).abs() < 1e-9);
        let ranked = rank_actions(&ActionEmbedding(q.clone()), &lex).unwrap();
        for (a, b) in w.iter().zip(&ranked) {
            prop_assert_eq!(&a.term, &b.term);
        }
        let scaled = topk_weights(&ActionEmbedding(q.iter().map(|x| x * c).collect()), &lex, k).unwrap();
        let r2 = rank_actions(&ActionEmbedding(q.iter().map(|x| x * c).collect()), &lex).unwrap();
        let same_order = ranked.iter().zip(&r2).all(|(a, b)| a.term == b.term || (a.similarity - b.similarity).abs() < 1e-12);
        prop_assert!(same_order);
        for (a, b) in w.iter().zip(&scaled) {
            prop_assert!((a.weight - b.weight).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_stays_in_the_hull(vs in prop::collection::vec(vector(3), 1..6), raw in prop::collection::vec(0.0..1.0f64, 6)) {
        let n = vs.len();
        let total: f64 = raw[..n].iter().sum::<f64>() + 1e-9 * n as f64;
        let weights: Vec<f64> = raw[..n].iter().map(|w| (w + 1e-9) / total).collect();
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let out = interpolate(&weights, &refs).unwrap();
        for (d, x) in out.iter().enumerate() {
            let lo = vs.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min);
            let hi = vs.iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
    }

    #[test]
    fn gini_is_scale_invariant(w in prop::collection::vec(0.0..1.0f64, 1..40), c in 0.001..1000.0f64) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        prop_assert!((gini(&w).unwrap() - gini(&scaled).unwrap()).abs() < 1e-12);
        prop_assert!((gini(&w).unwrap() - common::gini_pairwise(&w)).abs() < 1e-12);
    }

    #[test]
    fn gini_of_one_hot(n in 1usize..200, at in 0usize..200, v in 0.001..10.0f64) {
        let mut w = vec![0.0; n];
        w[at % n] = v;
        prop_assert_eq!(gini(&w).unwrap(), (n - 1) as f64 / n as f64);
    }

    #[test]
    fn dispersion_ignores_input_order(pts in prop::collection::vec(vector(4), 1..7), seed in any::<u64>()) {
        let a = mst_dispersion(&pts).unwrap();
        let mut shuffled = pts.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let b = mst_dispersion(&shuffled).unwrap();
        prop_assert!((a.dispersion - b.dispersion).abs() < 1e-12);
        prop_assert!((a.total_weight - common::mst_exhaustive(&pts)).abs() < 1e-12);
        prop_assert!(a.dispersion >= 0.0);
    }

    #[test]
    fn clipping_bounds_the_norm_and_keeps_direction(data in prop::collection::vec(-50.0..50.0f64, 1..30), max in 0.1..20.0f64) {
        let original = Tensor { shape: vec![data.len()], data };
        let mut t = original.clone();
        clip_grad_norm(&mut [&mut t], max);
        let norm = global_norm([&t]);
        prop_assert!(norm <= max + 1e-12);
        let n0 = global_norm([&original]);
        if n0 > 0.0 {
            let cos = common::dot(&t.data, &original.data) / (norm * n0);
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn subsampling_composes(n in 1usize..80, seed in any::<u64>()) {
        let frames: Vec<[Pose; 2]> = (0..n)
            .map(|i| {
                let v = (seed.wrapping_mul(i as u64 + 1) % 1000) as f64 / 1000.0;
                [Pose::new(v, 1.0 - v, 0.0), Pose::new(0.5, v, 1.0)]
            })
            .collect();
        let inst = MotionInstance { trajectory: Trajectory::from_poses(60, frames), label: "hug".into(), active: Character::Sym0 };
        let twice = subsample(&subsample(&inst, 30).unwrap(), 10).unwrap();
        let once = subsample(&inst, 10).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn corpus_reload_is_stable(xs in prop::collection::vec(0.0..640.0f64, 6..60), w in 1.0..2000.0f64, h in 1.0..2000.0f64) {
        let frames: Vec<Vec<f64>> = xs.chunks_exact(6).map(|c| c.to_vec()).collect();
        let json = serde_json::json!({"instances": [{"label": "chase", "active_char": 1, "fps": 10, "frames": frames}]}).to_string();
        let scale = SceneScale { width: w, height: h };
        let first = parse_corpus(&json, scale).unwrap();
        let again = parse_corpus(&corpus_to_json(&first, scale).unwrap(), scale).unwrap();
        for (a, b) in first[0].trajectory.frames.iter().zip(&again[0].trajectory.frames) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
        prop_assert_eq!(&first[0].label, &again[0].label);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn generation_stays_finite_and_in_bounds(
        emb in vector(8),
        active in any::<bool>(),
        a in pose(),
        b in pose(),
        seed in 0u64..4,
    ) {
        let pro = SequenceModel::new(ModelConfig::preset(ModelKind::Proactive, Preset::Desk, 8), seed);
        let rea = SequenceModel::new(ModelConfig::preset(ModelKind::Reactive, Preset::Desk, 8), seed + 10);
        let info = ActionInfo { embedding: ActionEmbedding(emb), active: if active { Character::Sym1 } else { Character::Sym0 } };
        let bounds = SceneBounds::UNIT;
        let mut frame = Frame::new(0, a, b);
        let mut prev = None;
        let (mut sp, mut sr) = (pro.fresh_state(), rea.fresh_state());
        for t in 1..4 {
            let g0 = proactive_motion_step(&pro, &sp, &info, &frame, prev.as_ref(), &bounds).unwrap();
            let g1 = reactive_motion_step(&rea, &sr, &info, &frame, prev.as_ref(), MotionDelta::between(frame.poses[0], g0.pose), &bounds).unwrap();
            for p in [g0.pose, g1.pose] {
                prop_assert!(p.is_finite());
                prop_assert!(bounds.contains(p));
            }
            sp = g0.state;
            sr = g1.state;
            prev = Some(frame);
            frame = Frame::new(t, g0.pose, g1.pose);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fuzzed_sessions_keep_their_invariants(seed in any::<u64>(), len in 1usize..120) {
        let engine = common::session_fuzz::flaky_engine(seed % 7);
        let run = common::session_fuzz::fuzz_session(engine, seed, len);
        prop_assert!(run.is_ok(), "{}", run.err().unwrap_or_default());
    }
}

#[test]
fn input_blind_recognizer_ranks_gold_at_chance() {
    use storyplay_core::eval::eval_recognition;
    let lex = Lexicon::base(&storyplay_core::action::PseudoEmbeddings::new(8, 1)).unwrap();
    // Zero weights with a non-zero output bias: the same embedding for every input.
    let mut m2a = SequenceModel::zeroed(ModelConfig::preset(ModelKind::Motion2Action, Preset::Desk, 8));
    let bias = m2a.params.head.tensors_mut().last().unwrap();
    bias.data.iter_mut().enumerate().for_each(|(i, b)| *b = (i as f64 * 0.7).sin());
    let m2c = SequenceModel::zeroed(ModelConfig::preset(ModelKind::Motion2Char, Preset::Desk, 8));
    let traj = Trajectory::from_poses(10, (0..5).map(|i| [Pose::new(0.1 * i as f64, 0.5, 0.0), Pose::new(0.8, 0.5, 3.0)]));
    let data: Vec<MotionInstance> = BASE_ACTIONS
        .iter()
        .map(|t| MotionInstance { trajectory: traj.clone(), label: t.to_string(), active: Character::Sym0 })
        .collect();
    let report = eval_recognition(&m2a, &m2c, &data, &lex).unwrap();
    assert_eq!(report.gold_rank.mean, 16.0);
    assert_eq!(report.top1_rate, 1.0 / 31.0);
    assert_eq!(report.instances.iter().filter(|r| r.weight_ratio == 1.0).count(), 1);
}
