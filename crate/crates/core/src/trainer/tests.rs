use super::*;
use crate::model::{DietaModel, ModelConfig};
use crate::tokenizer::{train_bpe, Vocab, EOS, PAD};
use proptest::prelude::*;

fn byte_vocab() -> Vocab {
    train_bpe(&["x"], 259, true).unwrap()
}

#[test]
fn lion_scalar_example() {
    let cfg = LionConfig {
        beta1: 0.9,
        beta2: 0.99,
        weight_decay: 0.0,
    };
    let (mut p, mut m) = ([1.0f64], [0.0f64]);
    lion_step(&mut p, &[0.5], &mut m, &cfg, 0.1).unwrap();
    assert_eq!(p[0], 0.9);
    assert!((m[0] - 0.005).abs() < 1e-15);

    let (mut p, mut m) = ([0.7f64, -0.3], [0.0f64; 2]);
    lion_step(&mut p, &[0.0, 0.0], &mut m, &cfg, 0.1).unwrap();
    assert_eq!(p, [0.7, -0.3]);

    let (mut p, mut m) = ([0.25f64, 0.25], [0.0f64; 2]);
    lion_step(&mut p, &[3.0, -1e-6], &mut m, &cfg, 0.125).unwrap();
    assert_eq!(p, [0.125, 0.375]);

    assert!(matches!(
        lion_step(&mut [0.0f64; 2], &[0.0], &mut [0.0; 2], &cfg, 0.1),
        Err(crate::Error::Contract(_))
    ));
}

#[test]
fn schedule_examples() {
    let s = Schedule::paper(100);
    assert_eq!(s.warmup_steps(), 10);
    assert_eq!(s.lr_at(10).unwrap(), 2e-4);
    assert_eq!(s.lr_at(0).unwrap(), 0.0);
    assert_eq!(s.lr_at(55).unwrap(), 1e-4);
    assert_eq!(s.lr_at(100).unwrap(), 0.0);
    assert!(matches!(s.lr_at(101), Err(crate::Error::Contract(_))));
    assert!(Schedule::new(2e-4, 100, 0.0, 0.0).is_err());
    assert!(Schedule::new(2e-4, 100, 1.0, 0.0).is_err());
    assert!(Schedule::new(2e-4, 100, 0.1, -1.0).is_err());
}

#[test]
fn single_sample_batch_includes_eos() {
    let v = byte_vocab();
    let (batches, stats) = make_batches(&["abcdefghij"], &v, 64, 32).unwrap();
    assert_eq!(batches.len(), 1);
    assert_eq!((batches[0].rows, batches[0].width), (1, 11));
    assert_eq!(*batches[0].tokens.last().unwrap(), EOS);
    assert_eq!(batches[0].inputs().len(), 10);
    assert_eq!(batches[0].targets()[9], EOS);
    assert_eq!(stats.tokens, 11);
}

#[test]
fn greedy_packing_example() {
    let seqs = vec![vec![5u32; 30]; 3];
    let batches = pack(seqs, 64);
    assert_eq!(batches.iter().map(|b| b.rows).collect::<Vec<_>>(), vec![2, 1]);
}

#[test]
fn truncation_is_counted() {
    let v = byte_vocab();
    let (batches, stats) = make_batches(&["abcdefghij", "ab"], &v, 64, 8).unwrap();
    assert_eq!(stats.truncated, 1);
    assert_eq!(batches[0].width, 8);
    assert_eq!(batches[0].tokens[8..11], [3 + b'a' as u32, 3 + b'b' as u32, EOS]);
    assert!(batches[0].tokens[11..].iter().all(|&t| t == PAD));
    assert_eq!(batches[0].mask().iter().filter(|m| **m).count(), 7 + 2);
    assert!(make_batches(&["a"], &v, 4, 8).is_err());
}

#[test]
fn recipes_match_published_mixtures() {
    let r = |n| TrainRecipe::preset(n);
    assert_eq!(r(RecipeName::Dieta).paper_samples(), 415_728_874);
    assert_eq!(r(RecipeName::Bt).paper_samples(), 559_924_569);
    assert_eq!(r(RecipeName::Cont).paper_samples(), 559_924_569);
    assert_eq!(r(RecipeName::Cont).start_from, Some(RecipeName::Dieta));
    assert_eq!(r(RecipeName::NoSynth).paper_samples(), 415_728_874);
    assert_eq!(r(RecipeName::NoSynth).start_from, Some(RecipeName::Dieta));
    assert_eq!(r(RecipeName::AllSynth).paper_samples(), 768_440_887);
    assert_eq!(r(RecipeName::AllSynth).start_from, Some(RecipeName::Cont));
    assert_eq!(r(RecipeName::AllSynth).epoch_index, 3);
    assert!(RecipeName::ALL.iter().all(|n| r(*n).epochs == 1));
    for n in RecipeName::ALL {
        assert_eq!(n.label().parse::<RecipeName>().unwrap(), n);
    }
    assert_eq!("DIETA+cont".parse::<RecipeName>().unwrap(), RecipeName::Cont);
    assert!("+foo".parse::<RecipeName>().is_err());
}

fn copy_corpus() -> (Vocab, Vec<String>) {
    let samples: Vec<String> = (0..32)
        .map(|i| {
            let w: String = (0..4).map(|k| char::from(b'a' + ((i * 7 + k * 3) % 26) as u8)).collect();
            format!("{w} = {w}")
        })
        .collect();
    let vocab = train_bpe(&samples, 300, true).unwrap();
    (vocab, samples)
}

fn desk_opts(dir: &std::path::Path, name: RecipeName) -> TrainOptions {
    let mut opts = TrainOptions::new(TrainRecipe::preset(name), ModelConfig::desk(), dir.join("ckpt.bin"));
    opts.peak_lr = 1e-3;
    opts.total_steps = Some(200);
    opts.seed = 3;
    opts
}

#[test]
fn copy_task_loss_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, samples) = copy_corpus();
    let (batches, _) = make_batches(&samples, &vocab, 128, 64).unwrap();
    let mut opts = desk_opts(dir.path(), RecipeName::Dieta);
    opts.metrics_log = Some(dir.path().join("metrics.tsv"));
    let summary = train::<f32>(&opts, batches).unwrap();
    assert_eq!(summary.steps, 200);
    assert!(summary.last_loss.unwrap() < summary.first_loss.unwrap());
    let head: f64 = summary.losses[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = summary.losses[180..].iter().sum::<f64>() / 20.0;
    assert!(tail < head, "{head} -> {tail}");
    let log = std::fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
    assert!(log.starts_with("step\tlr\tloss\ttokens_per_sec\n"));
    assert_eq!(log.lines().count(), 201);
    let model = DietaModel::<f32>::load(&opts.output).unwrap();
    assert_eq!(model.config(), &ModelConfig::desk());
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let (vocab, samples) = copy_corpus();
    let (batches, _) = make_batches(&samples, &vocab, 96, 64).unwrap();
    let cfg = ModelConfig {
        n_layers: 1,
        ..ModelConfig::desk()
    };
    let full_dir = tempfile::tempdir().unwrap();
    let mut full = desk_opts(full_dir.path(), RecipeName::Dieta);
    full.model = cfg.clone();
    full.total_steps = Some(40);
    let a = train::<f64>(&full, batches.clone()).unwrap();

    let split_dir = tempfile::tempdir().unwrap();
    let mut first = desk_opts(split_dir.path(), RecipeName::Dieta);
    first.model = cfg;
    first.total_steps = Some(40);
    first.max_steps_this_run = Some(20);
    let partial = train::<f64>(&first, batches.clone()).unwrap();
    assert_eq!(partial.steps, 20);
    let mut second = first.clone();
    second.max_steps_this_run = None;
    second.resume_from = Some(first.output.clone());
    let b = train::<f64>(&second, batches).unwrap();
    assert_eq!(b.steps, 40);
    assert_eq!(a.last_loss.unwrap().to_bits(), b.last_loss.unwrap().to_bits());
    assert_eq!(std::fs::read(&full.output).unwrap(), std::fs::read(&second.output).unwrap());
}

#[test]
fn continued_recipe_needs_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, samples) = copy_corpus();
    let (batches, _) = make_batches(&samples, &vocab, 128, 64).unwrap();
    let mut opts = desk_opts(dir.path(), RecipeName::NoSynth);
    assert!(matches!(train::<f32>(&opts, batches.clone()), Err(crate::Error::Config(_))));
    opts.init_from = Some(dir.path().join("missing.bin"));
    assert!(matches!(train::<f32>(&opts, batches), Err(crate::Error::Config(_))));
}

#[test]
fn every_parameter_receives_gradient() {
    let (vocab, samples) = copy_corpus();
    let (batches, _) = make_batches(&samples, &vocab, 128, 64).unwrap();
    let model = DietaModel::<f32>::new(ModelConfig::desk(), 1).unwrap();
    let mut t = Trainer::new(model, LionConfig::default(), Schedule::paper(5), batches).unwrap();
    for _ in 0..5 {
        t.train_step().unwrap();
    }
    assert!(t.dead_parameters().is_empty(), "{:?}", t.dead_parameters());
    assert!(t.train_step().is_err());
}

#[test]
fn optimizer_section_round_trips() {
    let model = DietaModel::<f32>::new(ModelConfig { n_layers: 1, ..ModelConfig::desk() }, 1).unwrap();
    let mut state = LionState::new(&model, LionConfig::default());
    state.step = 17;
    let mut buf = Vec::new();
    state.write_to(&mut buf, &crate::kv::KvMap::new()).unwrap();
    assert_eq!(&buf[..5], b"LION1");
    let (back, _) = LionState::read_from(&mut buf.as_slice(), &model).unwrap();
    assert_eq!(back, state);
}

proptest! {
    #[test]
    fn lion_step_is_bounded(p in -3.0f64..3.0, g in -2.0f64..2.0, m in -1.0f64..1.0, lr in 0.0f64..0.1) {
        let cfg = LionConfig::default();
        let (mut pp, mut mm) = ([p], [m]);
        lion_step(&mut pp, &[g], &mut mm, &cfg, lr).unwrap();
        prop_assert!((pp[0] - p).abs() <= lr * (1.0 + cfg.weight_decay * p.abs()) + 1e-15);
    }

    #[test]
    fn schedule_peaks_at_warmup_end(total in 10usize..5000, frac in 0.01f64..0.99) {
        let s = Schedule::new(2e-4, total, frac, 0.0).unwrap();
        let w = s.warmup_steps();
        let lrs: Vec<f64> = (0..=total).map(|k| s.lr_at(k).unwrap()).collect();
        let max = lrs.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(max, 2e-4);
        prop_assert_eq!(lrs[w], 2e-4);
        let step_up = 2e-4 / w as f64;
        let step_down = if total > w { 2e-4 / (total - w) as f64 } else { 0.0 };
        for k in 1..=total {
            prop_assert!((lrs[k] - lrs[k - 1]).abs() <= step_up.max(step_down) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn batching_conserves_tokens(lens in proptest::collection::vec(1usize..40, 0..40), budget in 64usize..300) {
        let v = byte_vocab();
        let samples: Vec<String> = lens.iter().map(|&n| "a".repeat(n)).collect();
        let (batches, stats) = make_batches(&samples, &v, budget, 48).unwrap();
        let real: usize = batches.iter().map(|b| b.real_tokens()).sum();
        prop_assert_eq!(real, stats.tokens);
        let expected: usize = lens.iter().map(|&n| (n + 1).min(48)).sum();
        prop_assert_eq!(stats.tokens, expected);
        for b in &batches {
            prop_assert!(b.rows * b.width <= budget);
        }
    }
}
