//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line, and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use synthforge::config::{
    dump_effective_config, parse_config, parse_config_bytes, ExperimentConfig, LabelingParadigm, ModelFamily,
};
use synthforge::data::{denormalize, generate_phantom_dataset, load_dataset, seeded_rng, Dataset, Manifest};
use synthforge::metrics::{compare_cohorts, ks_statistic};
use synthforge::models::{
    build_module, build_optimizers, build_schedule, ddpm_sample_step, discriminator_loss, generator_loss,
    kl_divergence, q_sample, training_step, SynthesisModule,
};
use synthforge::nn::{Activation, GroupBuilder, Layer};
use synthforge::tensor::{grad_check, Tape, Tensor};
use synthforge::trainer::{
    data_parallel_step, sharded_phase_gradients, train_run, Checkpoint, MetricRow, LAST_CHECKPOINT, METRICS_FILE,
};

type Outcome = Result<String, String>;

macro_rules! require {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn normal_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

// ---------------------------------------------------------------- 1

struct LayerCase {
    name: &'static str,
    build: fn(&mut GroupBuilder<'_, ChaCha8Rng>) -> Layer,
    input: &'static [usize],
}

const LAYER_CASES: &[LayerCase] = &[
    LayerCase { name: "dense", build: |b| b.dense("l", 5, 3), input: &[2, 5] },
    LayerCase { name: "conv3x3", build: |b| b.conv2d("l", 2, 3, 3, 1, 1), input: &[2, 2, 5, 5] },
    LayerCase { name: "conv4x4/s2", build: |b| b.conv2d("l", 2, 2, 4, 2, 1), input: &[1, 2, 6, 6] },
    LayerCase { name: "conv_transpose4x4/s2", build: |b| b.conv_transpose2d("l", 2, 3, 4, 2, 1), input: &[1, 2, 3, 3] },
    LayerCase { name: "relu", build: |_| Layer::Activation(Activation::Relu), input: &[3, 7] },
    LayerCase { name: "leaky_relu", build: |_| Layer::Activation(Activation::LeakyRelu(0.2)), input: &[3, 7] },
    LayerCase { name: "sigmoid", build: |_| Layer::Activation(Activation::Sigmoid), input: &[3, 7] },
    LayerCase { name: "tanh", build: |_| Layer::Activation(Activation::Tanh), input: &[3, 7] },
];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for case in LAYER_CASES {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut builder = GroupBuilder::new("g", &mut rng);
            let layer = (case.build)(&mut builder);
            let group = builder.finish();
            let out_shape = layer.output_shape(case.input).map_err(|e| e.to_string())?;
            let x = normal_tensor(case.input, &mut rng);
            let probe = normal_tensor(&out_shape, &mut rng);
            // biases start at zero; perturb so their gradients are exercised at a generic point
            let params: Vec<Tensor> = group
                .params
                .iter()
                .map(|p| {
                    let shift = normal_tensor(p.value.shape(), &mut rng);
                    let data = p.value.data().iter().zip(shift.data()).map(|(v, d)| v + 0.1 * d).collect();
                    Tensor::new(p.value.shape().to_vec(), data).unwrap()
                })
                .collect();

            // wrt the input, then wrt each parameter in turn
            for target in 0..=params.len() {
                let point = if target == 0 { x.clone() } else { params[target - 1].clone() };
                let report = grad_check(
                    |tape, v| {
                        let vars: Vec<_> = params
                            .iter()
                            .enumerate()
                            .map(|(i, p)| if target == i + 1 { v } else { tape.constant(p.clone()) })
                            .collect();
                        let input = if target == 0 { v } else { tape.constant(x.clone()) };
                        Ok(layer.forward(input, &vars)?.mul(tape.constant(probe.clone()))?.sum())
                    },
                    &point,
                    1e-6,
                )
                .map_err(|e| format!("{} seed {seed}: {e}", case.name))?;
                require!(
                    report.max_rel_error <= 1e-6,
                    "{} seed {seed} target {target}: max rel error {:e}",
                    case.name,
                    report.max_rel_error
                );
                worst = worst.max(report.max_rel_error);
                checks += 1;
            }
        }
    }

    // <conv(x, K), y> = <x, conv_transpose(y, K)>
    let mut worst_adj = 0.0f64;
    for (i, &(cin, cout, k, s, p, h)) in
        [(2, 3, 3, 1, 1, 5), (3, 2, 4, 2, 1, 6), (1, 4, 3, 2, 0, 7), (2, 2, 3, 3, 0, 9), (3, 3, 1, 1, 0, 4)]
            .iter()
            .enumerate()
    {
        for seed in 0..20u64 {
            let mut rng = seeded_rng(seed, i as u64, 0);
            let tape = Tape::new();
            let x = tape.constant(normal_tensor(&[2, cin, h, h], &mut rng));
            let kern = tape.constant(normal_tensor(&[cout, cin, k, k], &mut rng));
            let cx = x.conv2d(kern, s, p).map_err(|e| e.to_string())?;
            let y = tape.constant(normal_tensor(&cx.shape(), &mut rng));
            let ty = y.conv_transpose2d(kern, s, p).map_err(|e| e.to_string())?;
            require!(ty.shape() == x.shape(), "adjoint shapes {:?} vs {:?}", ty.shape(), x.shape());
            let (a, b) = (dot(&cx.value(), &y.value()), dot(&x.value(), &ty.value()));
            let rel = (a - b).abs() / a.abs().max(b.abs());
            require!(rel <= 1e-10, "adjoint case {i} seed {seed}: {a} vs {b} (rel {rel:e})");
            worst_adj = worst_adj.max(rel);
        }
    }
    let elapsed = start.elapsed();
    require!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{checks} gradient checks over {} layer types × 20 seeds, worst {worst:.1e}; adjoint worst {worst_adj:.1e}; {:.1}s",
        LAYER_CASES.len(),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let s = build_schedule(1000, 1e-4, 0.02).map_err(|e| e.to_string())?;
    require!(s.betas[0] == 1e-4 && s.betas[999] == 0.02, "endpoints {} {}", s.betas[0], s.betas[999]);
    require!(s.betas.windows(2).all(|w| w[0] < w[1]), "β not increasing");
    require!(s.alpha_bars.windows(2).all(|w| w[0] > w[1]), "ᾱ not strictly decreasing");
    require!(s.betas.iter().all(|b| (1e-4..=0.02).contains(b)), "β outside [1e-4, 0.02]");

    let n = 10_000;
    let x0_value = 0.7;
    let x0 = Tensor::full(&[n], x0_value);
    let mut worst_z = 0.0f64;
    for (k, t) in [1usize, 10, 250, 500, 1000].into_iter().enumerate() {
        let eps = normal_tensor(&[n], &mut seeded_rng(21, k as u64, 0));
        let xt = q_sample(&x0, t, &eps, &s).map_err(|e| e.to_string())?;
        let ab = s.alpha_bar(t).map_err(|e| e.to_string())?;
        let (mean_true, var_true) = (ab.sqrt() * x0_value, 1.0 - ab);
        let mean = xt.data().iter().sum::<f64>() / n as f64;
        let var = xt.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z_mean = (mean - mean_true).abs() / (var_true / n as f64).sqrt();
        let z_var = (var - var_true).abs() / (var_true * (2.0 / (n - 1) as f64).sqrt());
        require!(z_mean <= 3.0 && z_var <= 3.0, "t={t}: mean z {z_mean:.2}, var z {z_var:.2}");
        worst_z = worst_z.max(z_mean).max(z_var);
    }

    let xt = normal_tensor(&[64], &mut seeded_rng(5, 0, 0));
    let eps = normal_tensor(&[64], &mut seeded_rng(5, 0, 1));
    let a = ddpm_sample_step(&xt, 1, &eps, &s, &mut seeded_rng(1, 2, 3)).map_err(|e| e.to_string())?;
    let b = ddpm_sample_step(&xt, 1, &eps, &s, &mut seeded_rng(9, 9, 9)).map_err(|e| e.to_string())?;
    require!(a == b, "t=1 step depends on the rng");

    // deterministic part of the step with the true ε equals μ̃(x_t, x0)
    let mut worst_ulps = 0.0f64;
    for (t, x0, e) in [(2usize, 0.4, -1.3), (17, -0.9, 0.2), (500, 0.1, 2.0), (1000, 1.0, -0.5), (731, -0.3, 0.8)] {
        let i = t - 1;
        let (ab, ab_prev, beta, alpha) = (s.alpha_bars[i], s.alpha_bars[i - 1], s.betas[i], s.alphas[i]);
        let xt = ab.sqrt() * x0 + (1.0 - ab).sqrt() * e;
        let mu_tilde = ab_prev.sqrt() * beta / (1.0 - ab) * x0 + alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab) * xt;
        let mut rng = seeded_rng(0, 0, t as u64);
        let z: f64 = StandardNormal.sample(&mut rng.clone());
        let out = ddpm_sample_step(&Tensor::from_vec(vec![xt]), t, &Tensor::from_vec(vec![e]), &s, &mut rng)
            .map_err(|e| e.to_string())?;
        let deterministic = out.data()[0] - s.posterior_variance[i].sqrt() * z;
        // equality up to the rounding of the dozen float operations involved
        let scale = x0.abs() + e.abs() + xt.abs() + (s.posterior_variance[i].sqrt() * z).abs();
        let ulps = (deterministic - mu_tilde).abs() / (f64::EPSILON * scale);
        require!(ulps <= 32.0, "t={t}: {deterministic} vs {mu_tilde} ({ulps:.1} ulps)");
        worst_ulps = worst_ulps.max(ulps);
    }
    let elapsed = start.elapsed();
    require!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "schedule monotone, q_sample worst |z| {worst_z:.2}, t=1 deterministic, posterior mean within {worst_ulps:.1} ulps; {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 3

fn mc_kl(mu: f64, logvar: f64, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let sigma = (0.5 * logvar).exp();
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            let z = mu + sigma * e;
            // log q(z) − log p(z); the ½ log 2π terms cancel
            -0.5 * logvar - 0.5 * e * e + 0.5 * z * z
        })
        .sum::<f64>()
        / n as f64
}

fn criterion_3() -> Outcome {
    let kl = kl_divergence(&Tensor::full(&[1, 1], 2.0), &Tensor::zeros(&[1, 1])).map_err(|e| e.to_string())?;
    require!(kl == 2.0, "KL(2, 0) = {kl}");

    let mut worst = 0.0f64;
    for (k, (mu, lv)) in [(2.0, 0.0), (0.0, 2.0), (-1.0, -1.0), (0.5, 1.0)].into_iter().enumerate() {
        let closed = kl_divergence(&Tensor::full(&[1, 1], mu), &Tensor::full(&[1, 1], lv)).map_err(|e| e.to_string())?;
        let mc = mc_kl(mu, lv, 100_000, &mut seeded_rng(33, k as u64, 0));
        let rel = (mc - closed).abs() / closed;
        require!(rel <= 0.02, "KL(μ={mu}, lv={lv}): closed {closed} vs MC {mc}");
        worst = worst.max(rel);
    }

    let tape = Tape::new();
    let half = tape.constant(Tensor::full(&[8, 1], 0.5));
    let ln2 = std::f64::consts::LN_2;
    for smoothing in [false, true] {
        let d = discriminator_loss(half, half, smoothing).and_then(|l| l.item()).map_err(|e| e.to_string())?;
        require!((d - 2.0 * ln2).abs() <= 1e-12, "D loss at 0.5 (smoothing {smoothing}) = {d}");
    }
    let g = generator_loss(half).and_then(|l| l.item()).map_err(|e| e.to_string())?;
    require!((g - ln2).abs() <= 1e-12, "G loss at 0.5 = {g}");

    let ks = ks_statistic(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    require!(ks == 1.0 / 3.0, "KS = {ks:?}");
    Ok(format!("KL(2,0) = 2 exactly, MC KL worst rel {worst:.4}, GAN losses 2 ln 2 / ln 2, KS = 1/3 exactly"))
}

// ---------------------------------------------------------------- shared fixtures

const FAMILIES: [ModelFamily; 3] = [ModelFamily::Autoencoder, ModelFamily::Gan, ModelFamily::Diffusion];

fn small_config(family: ModelFamily, epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_defaults(family, 16, epochs);
    cfg.base_channels = 8;
    cfg.latent_dim = 8;
    cfg.batch_size = 4;
    cfg.diffusion.timesteps = 100;
    cfg.diffusion.sampling_steps = 100;
    cfg
}

fn unlabeled(mut m: Manifest) -> Manifest {
    m.paradigm = LabelingParadigm::Unlabeled;
    m.records.iter_mut().for_each(|r| r.label = None);
    m
}

fn max_rel_error(a: &[Tensor], b: &[Tensor]) -> f64 {
    let (mut diff, mut norm) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.data().iter().zip(y.data()) {
            diff += (p - q) * (p - q);
            norm += p * p;
        }
    }
    (diff / norm).sqrt()
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = unlabeled(generate_phantom_dataset(dir.path(), 4, 16, 8).map_err(|e| e.to_string())?.manifest);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for family in FAMILIES {
        let cfg = small_config(family, 1);
        let data = load_dataset(&manifest, dir.path(), &cfg).map_err(|e| e.to_string())?;
        let module = build_module(&cfg).map_err(|e| e.to_string())?;
        for (n, shard_sets) in [
            (4usize, vec![vec![4], vec![2, 2], vec![3, 1], vec![1, 1, 1, 1]]),
            (8, vec![vec![4, 4], vec![5, 3], vec![2, 2, 2, 2], vec![3, 2, 2, 1]]),
        ] {
            let batch = data.gather(&(0..n).collect::<Vec<_>>());
            for phase in 0..module.phases() {
                let noise = module.draw_noise(phase, n, &mut seeded_rng(4, n as u64, phase as u64));
                let full = module.phase_gradients(phase, &batch, &noise).map_err(|e| e.to_string())?;
                for sizes in &shard_sets {
                    let out = sharded_phase_gradients(module.as_ref(), phase, &batch, &noise, sizes)
                        .map_err(|e| e.to_string())?;
                    let e = max_rel_error(&full.grads, &out.grads);
                    require!(e <= 1e-9, "{family} phase {phase} shards {sizes:?}: rel error {e:e}");
                    worst = worst.max(e);
                    cases += 1;
                }
            }
        }

        // K = 1 against the serial step, bitwise
        let batch = data.gather(&[0, 1, 2, 3]);
        let (mut a, mut b) = (build_module(&cfg).unwrap(), build_module(&cfg).unwrap());
        let (mut oa, mut ob) = (build_optimizers(a.as_ref(), &cfg), build_optimizers(b.as_ref(), &cfg));
        for s in 0..3 {
            let ra = training_step(a.as_mut(), &mut oa, &batch, 1e-3, &mut seeded_rng(1, 0, s)).map_err(|e| e.to_string())?;
            let rb = data_parallel_step(b.as_mut(), &mut ob, &batch, 1, 1e-3, &mut seeded_rng(1, 0, s))
                .map_err(|e| e.to_string())?;
            require!(ra.metrics == rb.metrics, "{family}: K=1 metrics differ at step {s}");
        }
        require!(param_bits(a.as_ref()) == param_bits(b.as_ref()), "{family}: K=1 parameters differ from serial");
    }
    Ok(format!("{cases} shard layouts over K∈{{1,2,4}}, worst rel error {worst:.1e}; K=1 bitwise serial for all families"))
}

fn param_bits(module: &dyn SynthesisModule) -> Vec<u64> {
    module.groups().iter().flat_map(|g| g.params.iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits()))).collect()
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    let labeled = generate_phantom_dataset(data.path(), 4, 16, 9).map_err(|e| e.to_string())?.manifest;
    let plain = unlabeled(labeled.clone());
    let run = |cfg: &ExperimentConfig, m: &Manifest, out: &Path, resume: bool| {
        train_run(cfg, m, data.path(), out, resume).map_err(|e| format!("{}: {e}", cfg.model_family))
    };
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    for family in FAMILIES {
        let mut cfg = small_config(family, 10);
        cfg.workers = 2;
        let manifest = if family == ModelFamily::Gan {
            &plain
        } else {
            cfg.labeling_paradigm = LabelingParadigm::Labeled;
            cfg.num_classes = 2;
            &labeled
        };
        let (straight, again, split) = (tempdir()?, tempdir()?, tempdir()?);
        run(&cfg, manifest, straight.path(), false)?;
        run(&cfg, manifest, again.path(), false)?;
        let mut half = cfg.clone();
        half.epochs = 5;
        run(&half, manifest, split.path(), false)?;
        run(&cfg, manifest, split.path(), true)?;

        let reference = read(straight.path().join(LAST_CHECKPOINT))?;
        require!(reference == read(split.path().join(LAST_CHECKPOINT))?, "{family}: 10 vs 5+5 checkpoints differ");
        require!(reference == read(again.path().join(LAST_CHECKPOINT))?, "{family}: repeated runs differ");
        let log = read(straight.path().join(METRICS_FILE))?;
        require!(log == read(again.path().join(METRICS_FILE))?, "{family}: repeated metric logs differ");
        require!(log == read(split.path().join(METRICS_FILE))?, "{family}: resumed metric log differs");
    }

    let ckpt = Checkpoint {
        epoch: 3,
        step: 42,
        config_text: "epochs: 3\n".into(),
        rng_states: vec![7, u64::MAX],
        tensors: vec![("w".into(), Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap())],
    };
    let mut golden: Vec<u8> = b"GSYN".to_vec();
    golden.extend([1, 0, 0, 0]);
    golden.extend(3u64.to_le_bytes());
    golden.extend(42u64.to_le_bytes());
    golden.extend([10, 0, 0, 0]);
    golden.extend(b"epochs: 3\n");
    golden.extend([2, 0, 0, 0]);
    golden.extend([7, 0, 0, 0, 0, 0, 0, 0]);
    golden.extend([0xff; 8]);
    golden.extend([1, 0, 0, 0]);
    golden.extend([1, 0, b'w', 2]);
    golden.extend([1, 0, 0, 0, 0, 0, 0, 0]);
    golden.extend([2, 0, 0, 0, 0, 0, 0, 0]);
    golden.extend([0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
    golden.extend([0, 0, 0, 0, 0, 0, 0, 0xc0]);
    require!(ckpt.encode().map_err(|e| e.to_string())? == golden, "checkpoint byte layout changed");
    require!(Checkpoint::decode(&golden).map_err(|e| e.to_string())? == ckpt, "golden bytes decode differently");
    Ok("10 vs 5+resume+5 and repeated runs bitwise identical for all families; golden byte layout stable".into())
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 6

struct Trained {
    family: ModelFamily,
    config: ExperimentConfig,
    module: Box<dyn SynthesisModule>,
}

struct SmokeArtifacts {
    real: Dataset,
    trained: Vec<Trained>,
}

fn epoch_means(rows: &[MetricRow], metric: &str) -> Vec<f64> {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let e = r.epoch as usize - 1;
        if sums.len() <= e {
            sums.resize(e + 1, (0.0, 0));
        }
        sums[e].0 += r.value;
        sums[e].1 += 1;
    }
    sums.into_iter().map(|(s, n)| s / n as f64).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_6(artifacts: &mut Option<SmokeArtifacts>) -> Outcome {
    let data = tempdir()?;
    let labeled = generate_phantom_dataset(data.path(), 100, 16, 0).map_err(|e| e.to_string())?.manifest;
    let mut trained = Vec::new();
    let mut details = Vec::new();
    let mut real = None;
    for (family, file) in [
        (ModelFamily::Autoencoder, "vae_phantom.yaml"),
        (ModelFamily::Gan, "gan_phantom.yaml"),
        (ModelFamily::Diffusion, "diffusion_phantom.yaml"),
    ] {
        let path = configs_dir().join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg = parse_config(&text).map_err(|e| format!("{file}: {e}"))?;
        require!(cfg.model_family == family && cfg.epochs == 30 && cfg.image_size == 16, "{file} is not a 30-epoch 16×16 run");
        let manifest = if cfg.is_conditional() { labeled.clone() } else { unlabeled(labeled.clone()) };
        let out = tempdir()?;
        let start = Instant::now();
        let outcome = train_run(&cfg, &manifest, data.path(), out.path(), false).map_err(|e| format!("{family}: {e}"))?;
        let elapsed = start.elapsed();
        require!(elapsed < Duration::from_secs(15 * 60), "{family} took {elapsed:?}");
        require!(outcome.metrics.iter().all(|r| r.value.is_finite()), "{family}: non-finite metric");

        let primary = outcome.module.primary_metric();
        let per_epoch = epoch_means(&outcome.metrics, primary);
        require!(per_epoch.len() == 30, "{family}: {} epochs logged", per_epoch.len());
        let (first, last) = (mean(&per_epoch[..5]), mean(&per_epoch[25..]));
        match family {
            ModelFamily::Gan => {
                let d_real = *epoch_means(&outcome.metrics, "d_real").last().unwrap();
                require!(d_real > 0.02 && d_real < 0.98, "GAN final D(x) mean {d_real}");
                details.push(format!("gan D(x) {d_real:.3} ({:.0}s)", elapsed.as_secs_f64()));
            }
            _ => {
                require!(last < first, "{family}: last-5 mean {primary} {last} ≥ first-5 {first}");
                details.push(format!("{family} {primary} {first:.4}→{last:.4} ({:.0}s)", elapsed.as_secs_f64()));
            }
        }
        if real.is_none() {
            real = Some(load_dataset(&manifest, data.path(), &cfg).map_err(|e| e.to_string())?);
        }
        trained.push(Trained { family, config: cfg, module: outcome.module });
    }
    *artifacts = Some(SmokeArtifacts { real: real.expect("loaded"), trained });
    Ok(details.join("; "))
}

// ---------------------------------------------------------------- 7

const N_SAMPLES: usize = 16;

fn sample(t: &Trained, n: usize, seed: u64) -> Result<Tensor, String> {
    let labels: Option<Vec<usize>> = t.config.is_conditional().then(|| (0..n).map(|i| i % t.config.num_classes).collect());
    t.module
        .generate(n, labels.as_deref(), t.config.normalization_range, &mut seeded_rng(seed, u64::MAX, 1))
        .map_err(|e| format!("{}: {e}", t.family))
}

fn criterion_7(artifacts: &Option<SmokeArtifacts>, synthetic: &mut Vec<(ModelFamily, Tensor)>) -> Outcome {
    let a = artifacts.as_ref().ok_or("needs the criterion 6 models")?;
    let find = |f: ModelFamily| a.trained.iter().find(|t| t.family == f).expect("trained");
    let (vae, diffusion) = (find(ModelFamily::Autoencoder), find(ModelFamily::Diffusion));
    require!(diffusion.config.diffusion.timesteps == 1000, "diffusion model is not T=1000");

    let mut vae_times = Vec::new();
    for rep in 0..20 {
        let start = Instant::now();
        let x = sample(vae, N_SAMPLES, rep)?;
        vae_times.push(start.elapsed().as_secs_f64());
        if rep == 0 {
            synthetic.push((ModelFamily::Autoencoder, x));
        }
    }
    vae_times.sort_by(f64::total_cmp);
    let vae_per_sample = vae_times[vae_times.len() / 2] / N_SAMPLES as f64;

    let start = Instant::now();
    let x = sample(diffusion, N_SAMPLES, 0)?;
    let diffusion_per_sample = start.elapsed().as_secs_f64() / N_SAMPLES as f64;
    synthetic.push((ModelFamily::Diffusion, x));
    synthetic.push((ModelFamily::Gan, sample(find(ModelFamily::Gan), N_SAMPLES, 0)?));

    let ratio = diffusion_per_sample / vae_per_sample;
    require!(ratio >= 50.0, "ratio {ratio:.1} (diffusion {diffusion_per_sample:e}s, VAE {vae_per_sample:e}s per sample)");
    Ok(format!(
        "diffusion {:.1} ms/sample vs VAE {:.3} ms/sample, ratio {ratio:.0}×",
        diffusion_per_sample * 1e3,
        vae_per_sample * 1e3
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8(artifacts: &Option<SmokeArtifacts>, synthetic: &[(ModelFamily, Tensor)]) -> Outcome {
    let a = artifacts.as_ref().ok_or("needs the criterion 6 models")?;
    let range = a.trained[0].config.normalization_range;
    let real: Vec<Tensor> = a.real.images.iter().map(|x| denormalize(x, range)).collect();

    let same = compare_cohorts(&real, &real).map_err(|e| e.to_string())?;
    require!(same.rows.len() == 14, "{} rows", same.rows.len());
    require!(
        same.rows.iter().all(|r| r.standardized_diff == 0.0 && r.ks_distance == 0.0),
        "real vs real is not all zeros"
    );

    require!(synthetic.len() == 3, "only {} synthetic cohorts", synthetic.len());
    let mut summary = Vec::new();
    for (family, batch) in synthetic {
        let n = batch.shape()[0];
        let cohort: Vec<Tensor> = (0..n)
            .map(|i| denormalize(&batch.slice_rows(i, i + 1).unwrap().reshape(&batch.shape()[1..]).unwrap(), range))
            .collect();
        let report = compare_cohorts(&real, &cohort).map_err(|e| format!("{family}: {e}"))?;
        require!(report.rows.len() == 14 && report.n_synth == n, "{family}: malformed report");
        let m = report.row("mean").expect("mean row");
        summary.push(format!("{family} mean d={:.2} ks={:.2}", m.standardized_diff, m.ks_distance));
    }

    let shifted: Vec<Tensor> = real.iter().map(|x| x.map(|v| v + 0.5)).collect();
    let control = compare_cohorts(&real, &shifted).map_err(|e| e.to_string())?;
    let ks = control.row("mean").expect("mean row").ks_distance;
    require!(ks == 1.0, "intensity-shift control KS on mean = {ks}");
    Ok(format!("real vs real all zero; 14-row reports: {}; shift control KS = 1", summary.join(", ")))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut shipped = 0;
    for entry in std::fs::read_dir(configs_dir()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_none_or(|e| e != "yaml") {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let dumped = dump_effective_config(&cfg);
        let again = parse_config(&dumped).map_err(|e| format!("{} dump: {e}", path.display()))?;
        require!(again == cfg && dump_effective_config(&again) == dumped, "{} is not a fixed point", path.display());
        shipped += 1;
    }
    require!(shipped >= 4, "only {shipped} shipped configs found");

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut rejected = 0;
    for i in 0..10_000 {
        let len = rng.random_range(0..256);
        let mut bytes = vec![0u8; len];
        rng.fill_bytes(&mut bytes);
        // bias some inputs toward the config alphabet so the parser gets past line one
        if i % 2 == 1 {
            const ALPHABET: &[u8] = b"abcdefgz_: -#\n\n  0123456789.e";
            bytes.iter_mut().for_each(|b| *b = ALPHABET[*b as usize % ALPHABET.len()]);
        }
        match catch_unwind(|| parse_config_bytes(&bytes)) {
            Err(_) => return Err(format!("parser panicked on input {i}: {bytes:?}")),
            Ok(Ok(_)) => return Err(format!("random input {i} accepted: {:?}", String::from_utf8_lossy(&bytes))),
            Ok(Err(e)) => {
                require!(e.line >= 1 && e.column >= 1, "error without a location: {e}");
                rejected += 1;
            }
        }
    }

    let unknown = parse_config("model_family: gan\nimage_size: 16\nepochs: 2\noptimizer:\n  lrr: 0.1\n").unwrap_err();
    require!(unknown.line == 5 && unknown.to_string().contains("line 5"), "unknown key: {unknown}");
    require!(unknown.to_string().contains("did you mean 'optimizer.lr'"), "no suggestion: {unknown}");
    let violation = parse_config(
        "model_family: diffusion\nimage_size: 16\nepochs: 2\ndiffusion:\n  beta_start: 0.5\n  beta_end: 0.1\n",
    )
    .unwrap_err();
    require!(violation.to_string().contains("line 5") && violation.to_string().contains("β_start ≤ β_end"), "{violation}");
    Ok(format!("{shipped} shipped configs are fixed points; {rejected} fuzz inputs rejected without panics; errors carry lines"))
}

// ---------------------------------------------------------------- driver

fn report(n: usize, name: &str, failures: &mut usize, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(detail) => println!("criterion {n}: PASS [{name}] {detail} ({secs:.1}s)"),
        Err(why) => {
            *failures += 1;
            println!("criterion {n}: FAIL [{name}] {why} ({secs:.1}s)");
        }
    }
}

fn main() {
    // panics are reported as FAIL lines instead
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    let mut artifacts = None;
    let mut synthetic = Vec::new();
    report(1, "autodiff correctness", &mut failures, criterion_1);
    report(2, "diffusion math", &mut failures, criterion_2);
    report(3, "closed-form checks", &mut failures, criterion_3);
    report(4, "data-parallel equivalence", &mut failures, criterion_4);
    report(5, "determinism and fault tolerance", &mut failures, criterion_5);
    report(6, "end-to-end smoke per family", &mut failures, || criterion_6(&mut artifacts));
    report(7, "inference-cost asymmetry", &mut failures, || criterion_7(&artifacts, &mut synthetic));
    report(8, "validation methodology", &mut failures, || criterion_8(&artifacts, &synthetic));
    report(9, "parser robustness", &mut failures, criterion_9);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
