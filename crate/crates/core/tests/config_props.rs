use proptest::prelude::*;
use synthforge::config::{
    dump_effective_config, parse_config, parse_config_bytes, ExperimentConfig, LabelingParadigm, ModelFamily,
    OptimizerName, SchedulerName,
};

fn family() -> impl Strategy<Value = ModelFamily> {
    prop::sample::select(ModelFamily::ALL.to_vec())
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        family(),
        prop::sample::select(vec![8usize, 16, 32, 64]),
        1usize..500,
        any::<u64>(),
        (1usize..64, 0usize..4, any::<bool>()),
        (1e-6f64..1.0, 0.0f64..0.999, 0.0f64..10.0, any::<bool>()),
        (prop::sample::select(SchedulerName::ALL.to_vec()), 0.01f64..1.0, 1usize..50),
        (2usize..2000, 1e-6f64..0.1, 0.0f64..0.5),
        (any::<bool>(), any::<bool>(), any::<bool>(), 0.0f64..0.3, -5.0f64..0.0, 0.01f64..5.0),
    )
        .prop_map(|(fam, size, epochs, seed, (batch, extra_classes, labeled), opt, sched, diff, aug)| {
            let mut c = ExperimentConfig::with_defaults(fam, size, epochs);
            c.seed = seed;
            c.batch_size = batch;
            c.workers = 1 + seed as usize % batch;
            if labeled {
                c.labeling_paradigm = LabelingParadigm::Labeled;
                c.num_classes = 2 + extra_classes;
            }
            c.optimizer.lr = opt.0;
            c.optimizer.beta1 = opt.1;
            c.optimizer.grad_clip_norm = opt.2;
            if opt.3 {
                c.optimizer.kind = OptimizerName::Sgd;
                c.optimizer.momentum = opt.1;
            }
            c.scheduler.kind = sched.0;
            c.scheduler.gamma = sched.1;
            c.scheduler.period = sched.2;
            c.scheduler.lr_min = c.optimizer.lr * sched.1;
            c.diffusion.timesteps = diff.0;
            c.diffusion.sampling_steps = diff.0;
            c.diffusion.beta_start = diff.1;
            c.diffusion.beta_end = diff.1 + diff.2;
            c.augmentation.hflip = aug.0;
            c.augmentation.vflip = aug.1;
            c.augmentation.rot90 = aug.2;
            c.augmentation.noise_std = aug.3;
            c.normalization_range = (aug.4, aug.4 + aug.5);
            c.autoencoder.beta_kl = aug.3;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dump_parse_is_a_fixed_point(cfg in config()) {
        cfg.check().unwrap();
        let text = dump_effective_config(&cfg);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(dump_effective_config(&back), text);
    }

    #[test]
    fn float_rendering_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut cfg = ExperimentConfig::with_defaults(ModelFamily::Autoencoder, 16, 1);
        cfg.autoencoder.beta_kl = v.abs();
        let text = dump_effective_config(&cfg);
        let line = text.lines().find(|l| l.trim_start().starts_with("beta_kl:")).unwrap();
        let rendered = line.split(": ").nth(1).unwrap();
        let mantissa: String = rendered.split(['e', 'E']).next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
        let significant = mantissa.trim_start_matches('0').trim_end_matches('0').len();
        prop_assert!(significant <= 17, "{rendered}");
        prop_assert_eq!(rendered.parse::<f64>().unwrap(), v.abs());
        prop_assert_eq!(parse_config(&text).unwrap().autoencoder.beta_kl, v.abs());
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        if let Err(e) = parse_config_bytes(&bytes) {
            prop_assert!(e.line >= 1 && e.column >= 1);
        }
    }

    #[test]
    fn mutated_configs_never_panic(cfg in config(), cut in 0usize..2000, junk in "[ a-z:#\\-\\n\t0-9.]{0,12}") {
        let mut text = dump_effective_config(&cfg);
        let at = cut.min(text.len());
        let at = (0..=at).rev().find(|i| text.is_char_boundary(*i)).unwrap();
        text.insert_str(at, &junk);
        if let Err(e) = parse_config(&text) {
            prop_assert!(e.line >= 1 && e.column >= 1);
        }
    }
}

#[test]
fn spec_document_examples() {
    let doc = synthforge::config::parse_document("model_family: gan\n").unwrap();
    assert_eq!(doc.root.get("model_family").unwrap().kind_name(), "string");
    let doc = synthforge::config::parse_document("optimizer:\n  lr: 0.001\n").unwrap();
    assert!(doc.root.get("optimizer").unwrap().get("lr").is_some());
}

#[test]
fn duplicate_key_cites_second_occurrence() {
    let text = "model_family: gan\nimage_size: 16\nepochs: 2\nseed: 1\nbatch_size: 4\nworkers: 1\nepochs: 3\n";
    let err = synthforge::config::parse_document(text).unwrap_err();
    assert_eq!(err.line, 7);
}
