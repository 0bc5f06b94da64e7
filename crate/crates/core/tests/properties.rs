//! Property tests for the numerical core: schedule algebra, forward/inverse
//! consistency, tape shape and linearity rules, and denoiser contracts.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stylewalk::autodiff::{Array, ParamStore, Primitive, Tape, Var};
use stylewalk::denoiser::{ConditionPair, DenoiserConfig, DenoiserParams, STYLE_TABLE};
use stylewalk::motion::{synthetic_walk, WalkStyle, DEFAULT_FRAME_TIME};
use stylewalk::schedule::{noise_rng, NoiseSchedule, DEFAULT_BETA_END};
use stylewalk::training::{train_step, AuxSelectors, TrainConfig, TrainState, TrainingSet, TRAIN_BETA_END};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array {
    Array::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_tables_are_consistent(
        steps in 1usize..400,
        beta_start in 1e-5f64..1e-2,
        spread in 0.0f64..0.3,
    ) {
        let beta_end = beta_start + spread;
        let s = NoiseSchedule::linear(steps, beta_start, beta_end).unwrap();
        prop_assert_eq!(s.betas().len(), steps);
        prop_assert_eq!(s.betas()[0], beta_start);
        if steps > 1 {
            prop_assert_eq!(s.betas()[steps - 1], beta_end);
        }
        prop_assert_eq!(s.alpha_bar(0), 1.0);
        for t in 1..=steps {
            prop_assert_eq!(s.alpha(t), 1.0 - s.beta(t));
            prop_assert_eq!(s.alpha_bar(t), s.alpha_bar(t - 1) * s.alpha(t));
            prop_assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            if t > 1 {
                prop_assert!(s.beta(t) >= s.beta(t - 1));
            }
        }
    }

    #[test]
    fn inversion_recovers_the_clean_sample(
        training in any::<bool>(),
        t in 1usize..=100,
        x0 in prop::collection::vec(-50.0f64..50.0, 1..24),
        seed in any::<u64>(),
    ) {
        let beta_end = if training { TRAIN_BETA_END } else { DEFAULT_BETA_END };
        let s = NoiseSchedule::linear(100, 1e-4, beta_end).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = (0..x0.len()).map(|_| rng.random_range(-4.0..4.0)).collect();
        let back = s.predict_x0(&s.q_sample(&x0, t, &eps).unwrap(), t, &eps).unwrap();
        let norm = x0.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(&x0) {
            prop_assert!((a - b).abs() / norm < 1e-9, "{} vs {} at t = {}", a, b, t);
        }
    }

    #[test]
    fn primitive_shapes_follow_input_shapes(m in 1usize..6, n in 1usize..6, k in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let a = tape.constant(random_matrix(&mut rng, m, n));
        let b = tape.constant(random_matrix(&mut rng, m, n));
        let row = tape.constant(random_matrix(&mut rng, 1, n));
        let right = tape.constant(random_matrix(&mut rng, n, k));
        let wide = tape.constant(random_matrix(&mut rng, m, k));
        let tall = tape.constant(random_matrix(&mut rng, k, n));
        let scalar_shape = Array::scalar(0.0).shape().to_vec();

        let cases: Vec<(Primitive, Vec<Var>, Vec<usize>)> = vec![
            (Primitive::Add, vec![a, b], vec![m, n]),
            (Primitive::Add, vec![a, row], vec![m, n]),
            (Primitive::Sub, vec![a, b], vec![m, n]),
            (Primitive::Sub, vec![a, row], vec![m, n]),
            (Primitive::ScalarMul(0.5), vec![a], vec![m, n]),
            (Primitive::Mul, vec![a, b], vec![m, n]),
            (Primitive::MatMul, vec![a, right], vec![m, k]),
            (Primitive::Concat { axis: 1 }, vec![a, wide], vec![m, n + k]),
            (Primitive::Concat { axis: 0 }, vec![a, tall], vec![m + k, n]),
            (Primitive::Silu, vec![a], vec![m, n]),
            (Primitive::Mse, vec![a, b], scalar_shape.clone()),
            (Primitive::Sum, vec![a], scalar_shape.clone()),
        ];
        for (prim, inputs, want) in cases {
            let out = tape.apply(prim, &inputs).unwrap();
            prop_assert_eq!(tape.value(out).shape(), want.as_slice(), "{:?}", prim);
            prop_assert_eq!(tape.value(out).len(), want.iter().product::<usize>());
        }
    }

    #[test]
    fn backward_is_linear_in_the_loss(
        w in matrix_strategy(3, 4),
        x in matrix_strategy(4, 2),
        y in matrix_strategy(3, 2),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut params = ParamStore::new();
        params.insert("w", Array::matrix(3, 4, w).unwrap());
        let x = Array::matrix(4, 2, x).unwrap();
        let y = Array::matrix(3, 2, y).unwrap();

        // f = sum(silu(W x)), g = mse(W x, y)
        let build = |tape: &mut Tape| {
            let w = tape.param("w", params.get("w").unwrap().clone()).unwrap();
            let x = tape.constant(x.clone());
            let y = tape.constant(y.clone());
            let h = tape.matmul(w, x).unwrap();
            let act = tape.silu(h).unwrap();
            let f = tape.sum(act).unwrap();
            let g = tape.mse(h, y).unwrap();
            (f, g)
        };
        let grad = |pick: &dyn Fn(&mut Tape, Var, Var) -> Var| {
            let mut tape = Tape::new();
            let (f, g) = build(&mut tape);
            let loss = pick(&mut tape, f, g);
            tape.backward(loss).unwrap().get("w").unwrap().data().to_vec()
        };
        let gf = grad(&|_, f, _| f);
        let gg = grad(&|_, _, g| g);
        let combined = grad(&|tape, f, g| {
            let af = tape.scale(f, a).unwrap();
            let bg = tape.scale(g, b).unwrap();
            tape.add(af, bg).unwrap()
        });
        for ((c, f), g) in combined.iter().zip(&gf).zip(&gg) {
            let want = a * f + b * g;
            prop_assert!((c - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", c, want);
        }
    }
}

fn small_denoiser(feature_dim: usize, seed: u64) -> DenoiserParams {
    let cfg = DenoiserConfig { feature_dim, content_count: 2, style_count: 3, embed_dim: 4, time_dim: 8, hidden: 12 };
    DenoiserParams::init(cfg, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn denoiser_output_matches_input_dimension(
        dim in prop::sample::select(vec![4usize, 16, 62]),
        t in 1usize..=100,
        style in 0usize..3,
        seed in any::<u64>(),
    ) {
        let params = small_denoiser(dim, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = params.denoise(&x, t, &ConditionPair::new(1, style)).unwrap();
        prop_assert_eq!(out.len(), dim);
        prop_assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn style_row_changes_the_prediction(
        dim in 2usize..20,
        t in 1usize..=100,
        delta in prop::sample::select(vec![-0.5f64, 0.25, 1.0]),
        seed in any::<u64>(),
    ) {
        let params = small_denoiser(dim, seed);
        let cond = ConditionPair::new(0, 2);
        let x = vec![0.3; dim];
        let before = params.denoise(&x, t, &cond).unwrap();

        let mut moved = params.clone();
        let table = moved.store_mut().get_mut(STYLE_TABLE).unwrap();
        let e = table.cols();
        for v in &mut table.data_mut()[2 * e..3 * e] {
            *v += delta;
        }
        let after = moved.denoise(&x, t, &cond).unwrap();
        let diff = before.iter().zip(&after).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(diff > 0.0);
    }

    #[test]
    fn total_loss_decomposes_into_weighted_parts(
        lambda_foot in 0.0f64..2.0,
        lambda_root in 0.0f64..2.0,
        lambda_adv in 0.0f64..2.0,
        seed in 0u64..1000,
    ) {
        let walk = |s| synthetic_walk(WalkStyle::new(60.0, 1.0, 0.0, 3.0), 8, DEFAULT_FRAME_TIME, s).unwrap();
        let clips: Vec<Vec<f64>> = (0..4).map(|s| walk(s).clip.into_flat().iter().map(|v| v / 100.0).collect()).collect();
        let set = TrainingSet {
            layout: walk(0).clip.layout,
            frames: 8,
            clips,
            conds: (0..4).map(|i| ConditionPair::new(0, i % 2)).collect(),
            content_count: 1,
            style_count: 2,
        };
        let config = TrainConfig {
            lambda_foot,
            lambda_root,
            lambda_adv,
            seed,
            hidden: 16,
            disc_hidden: 8,
            aux_min_alpha_bar: 0.0,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(&config, set.feature_dim(), 1, 2).unwrap();
        let sched = config.schedule().unwrap();
        let sel = AuxSelectors::new(&set.layout, set.frames).with_min_alpha_bar(config.aux_min_alpha_bar);
        let batch: Vec<(&[f64], ConditionPair)> =
            set.clips.iter().map(Vec::as_slice).zip(set.conds.iter().copied()).collect();
        let r = train_step(&mut state, &batch, &sched, &mut noise_rng(seed), &config, &sel).unwrap();
        prop_assert!((r.total - r.recompose(&config)).abs() <= 1e-12, "{:?}", r);
    }
}
