use std::path::{Path, PathBuf};

use interlerp::cgan::{self, GeneratorCheckpoint, Progress};
use interlerp::datasets::{download_dataset, known_sources, save_synth_faces, synth_faces, SyntheticFaceSpec};
use interlerp::judges::{self, JudgeCheckpoint, JudgeConfig, JudgeMetrics};
use interlerp::label_space::build_schedule;
use interlerp::sweep::{self, PairSelection, RunManifest, TrajectoryStats};
use interlerp::LabelMap;

use crate::config::{DatasetKind, RunConfig, SweepSection};
use crate::data;
use crate::error::CliError;
pub use crate::record::Ctx;
use crate::{Command, SweepKindArg, Task};

const CLASSIFIER_FLOOR: f64 = 0.89;
const VA_FLOOR: f64 = 0.8;

pub fn run(command: Command, ctx: &mut Ctx) -> Result<(), CliError> {
    match command {
        Command::Download { name, dest } => download(ctx, &name, dest),
        Command::TrainGan { preset, data, kind, batches, epochs } => {
            train_gan(ctx, preset.as_deref(), data.as_deref(), kind, batches, epochs)
        }
        Command::TrainJudge { task, preset, data, kind, epochs } => {
            train_judge(ctx, task, preset.as_deref(), data.as_deref(), kind, epochs)
        }
        Command::Sweep { kind, gan, judge, preset, pairs, n_samples, step, neutral, save_images } => {
            let flags = SweepFlags { pairs, n_samples, step, neutral, save_images };
            run_sweep(ctx, kind, &gan, &judge, preset.as_deref(), flags)
        }
        Command::Report { inputs, all_classes } => report(ctx, &inputs, all_classes),
        Command::SynthFaces { preset, n, size } => synth(ctx, preset.as_deref(), n, size),
        Command::ValidateConfig { path } => validate_config(ctx, path),
    }
}

/// `--config` wins over `--preset`; `None` when neither was given.
fn explicit_config(ctx: &Ctx, preset: Option<&str>) -> Result<Option<RunConfig>, CliError> {
    let cfg = match (&ctx.global.config, preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Ok(None),
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

/// Config, data directory and dataset kind for a training command.
struct TrainingInputs {
    cfg: RunConfig,
    dir: PathBuf,
    kind: DatasetKind,
    /// The config was picked from the detected dataset kind rather than
    /// named by the user, so its shape and split sizes yield to the data.
    implied: bool,
}

fn training_inputs(ctx: &Ctx, preset: Option<&str>, data: Option<&Path>, kind: Option<DatasetKind>) -> Result<TrainingInputs, CliError> {
    let explicit = explicit_config(ctx, preset)?;
    let dir = data::resolve_dir(data, explicit.as_ref().and_then(|c| c.dataset.as_ref()))?;
    let kind = kind
        .or_else(|| explicit.as_ref().and_then(|c| c.dataset.as_ref()).map(|d| d.kind))
        .or_else(|| data::detect(&dir))
        .ok_or_else(|| CliError::Usage(format!("cannot tell what kind of dataset {} holds", dir.display())))?;
    let implied = explicit.is_none();
    let mut cfg = match explicit {
        Some(c) => c,
        None => match kind.preset() {
            Some(p) => {
                log::info!("using preset {p} for {}", dir.display());
                RunConfig::preset(p)?
            }
            None => RunConfig::default(),
        },
    };
    if implied {
        if let Some(d) = cfg.dataset.as_mut() {
            d.test_samples = None;
        }
    }
    Ok(TrainingInputs { cfg, dir, kind, implied })
}

fn download(ctx: &mut Ctx, name: &str, dest: Option<PathBuf>) -> Result<(), CliError> {
    let files = known_sources(name).ok_or_else(|| CliError::Usage(format!("unknown dataset {name:?}; known: fashion-mnist, cifar-10")))?;
    let dest = match (dest, &ctx.global.out, std::env::var_os("INTERLERP_DATA_DIR")) {
        (Some(d), _, _) => d,
        (None, Some(o), _) => o.clone(),
        (None, None, Some(root)) => Path::new(&root).join(name),
        (None, None, None) => {
            return Err(CliError::Usage("pass --dest <DIR> or set INTERLERP_DATA_DIR".into()));
        }
    };
    let outcome = download_dataset(name, &files, &dest)?;
    ctx.output(&outcome.manifest_path);
    if outcome.fully_cached() {
        ctx.say(format!("cached: all {} files already present and verified", outcome.cached.len()));
    } else {
        ctx.say(format!("downloaded {} file(s), {} cached", outcome.downloaded.len(), outcome.cached.len()));
    }
    ctx.say(outcome.manifest_path.display());
    Ok(())
}

fn train_gan(
    ctx: &mut Ctx,
    preset: Option<&str>,
    data: Option<&Path>,
    kind: Option<DatasetKind>,
    batches: Option<usize>,
    epochs: Option<usize>,
) -> Result<(), CliError> {
    let TrainingInputs { cfg, dir, kind, implied } = training_inputs(ctx, preset, data, kind)?;
    let mut gan = cfg.gan.ok_or_else(|| CliError::Usage("the configuration has no gan section".into()))?;
    if let Some(s) = ctx.global.seed {
        gan.seed = s;
    }
    if let Some(b) = batches {
        gan.total_batches = b;
    }
    if epochs.is_some() {
        gan.epochs = epochs;
    }
    let out = ctx.out_dir()?;
    ctx.claim(&[cgan::MANIFEST_FILE, cgan::WEIGHTS_FILE, cgan::LOSSES_FILE].map(|f| out.join(f)))?;

    let set = data::load_for_gan(kind, &dir, cfg.dataset.as_ref())?;
    if let (true, Some((h, w, c))) = (implied, set.shape()) {
        gan.image_shape = [h, w, c];
        gan.n_classes = set.n_classes();
    }
    gan.validate().map_err(|e| CliError::Usage(format!("gan: {e}")))?;
    ctx.input(&dir);
    ctx.config(&gan);
    ctx.say(format!("training on {} images ({} classes) for {} batches", set.len(), set.n_classes(), gan.planned_batches(set.len())));
    let quiet = ctx.global.quiet;
    let mut sink = |p: &Progress| {
        if !quiet {
            println!(
                "batch {:>6}/{}  d_loss {:.4}  g_loss {:.4}  (mean d {:.4}, g {:.4})",
                p.batch, p.total, p.d_loss, p.g_loss, p.mean_d_loss, p.mean_g_loss
            );
        }
    };
    let result = cgan::train(&set, &gan, &out, &mut sink);
    ctx.output(&out);
    let ck = result?;
    ctx.say(format!("checkpoint written to {} (weights sha256 {})", out.display(), ck.fingerprint()));
    Ok(())
}

fn metrics_table(m: &JudgeMetrics) -> String {
    match m {
        JudgeMetrics::Classifier(s) => format!("held-out accuracy {:.4}", s.accuracy),
        JudgeMetrics::Regressor { axes } => {
            let mut t = format!("{:<9} {:>8} {:>8} {:>8} {:>8}", "axis", "rmse", "corr", "sagr", "ccc");
            for a in axes {
                t.push_str(&format!("\n{:<9} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", a.axis, a.rmse, a.corr, a.sagr, a.ccc));
            }
            t
        }
    }
}

fn train_judge(
    ctx: &mut Ctx,
    task: Task,
    preset: Option<&str>,
    data: Option<&Path>,
    kind: Option<DatasetKind>,
    epochs: Option<usize>,
) -> Result<(), CliError> {
    let TrainingInputs { cfg, dir, kind, .. } = training_inputs(ctx, preset, data, kind)?;
    let section = cfg.judge.clone().unwrap_or_default();
    let mut jc = match task {
        Task::Classifier => section.classifier.unwrap_or_else(|| JudgeConfig::new(CLASSIFIER_FLOOR)),
        Task::Va => section.va.unwrap_or_else(|| JudgeConfig::new(VA_FLOOR)),
    };
    if let Some(s) = ctx.global.seed {
        jc.seed = s;
    }
    if let Some(e) = epochs {
        jc.max_epochs = e;
    }
    jc.validate().map_err(|e| CliError::Usage(format!("judge: {e}")))?;
    let out = ctx.out_dir()?;
    let mut claimed = vec![out.join(judges::MANIFEST_FILE), out.join(judges::WEIGHTS_FILE)];
    if task == Task::Va {
        claimed.push(out.join(judges::METRICS_REPORT_FILE));
    }
    ctx.claim(&claimed)?;
    ctx.input(&dir);
    ctx.config(&jc);

    let result = match task {
        Task::Classifier => {
            let (train, test) = data::load_splits(kind, &dir, cfg.dataset.as_ref())?;
            ctx.say(format!("classifier: {} train / {} held-out images", train.len(), test.len()));
            judges::train_classifier(&train, &test, &jc, &out)
        }
        Task::Va => {
            let (train, test) = data::load_va_splits(kind, &dir, cfg.dataset.as_ref())?;
            ctx.say(format!("va regressor: {} train / {} held-out images", train.len(), test.len()));
            judges::train_va_regressor(&train, &test, &jc, &out)
        }
    };
    ctx.output(&out);
    let ck = result?;
    ctx.say(metrics_table(&ck.manifest.metrics));
    ctx.say(format!("gate passed ({} >= {})", ck.manifest.gate.metric, ck.manifest.gate.floor));
    Ok(())
}

struct SweepFlags {
    pairs: Option<String>,
    n_samples: Option<usize>,
    step: Option<f64>,
    neutral: Option<String>,
    save_images: Option<usize>,
}

/// `all`, or comma-separated `source:target` pairs by name or index.
fn parse_pairs(text: &str, labels: &LabelMap) -> Result<PairSelection, CliError> {
    if text.trim() == "all" {
        return Ok(PairSelection::all());
    }
    let pairs = text
        .split(',')
        .map(|p| {
            let (s, t) = p.split_once(':').ok_or_else(|| CliError::Usage(format!("pair {p:?} is not of the form source:target")))?;
            let get = |k: &str| labels.resolve(k.trim()).map(|c| c.index).map_err(|e| CliError::Usage(e.to_string()));
            Ok((get(s)?, get(t)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(PairSelection::Explicit(pairs))
}

fn run_sweep(
    ctx: &mut Ctx,
    kind: SweepKindArg,
    gan_dir: &Path,
    judge_dir: &Path,
    preset: Option<&str>,
    flags: SweepFlags,
) -> Result<(), CliError> {
    let cfg = explicit_config(ctx, preset)?.unwrap_or_default();
    let mut section = cfg.sweep.unwrap_or_default();
    for dir in [gan_dir, judge_dir] {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("checkpoint directory {} does not exist", dir.display())));
        }
    }
    let gan = GeneratorCheckpoint::load(gan_dir)?;
    let judge = JudgeCheckpoint::load(judge_dir)?;
    ctx.input(gan_dir);
    ctx.input(judge_dir);
    apply_sweep_flags(&mut section, &flags, ctx.global.seed, gan.label_map())?;
    section.spec.validate()?;

    let out = ctx.out_dir()?;
    let csv_name = match kind {
        SweepKindArg::Confidence => sweep::CONFIDENCE_CSV,
        SweepKindArg::Va => sweep::VA_CSV,
    };
    let (csv_path, manifest_path) = (out.join(csv_name), out.join(sweep::MANIFEST_FILE));
    ctx.claim(&[csv_path.clone(), manifest_path.clone()])?;
    ctx.config(&section);

    let (stats, neutral) = match kind {
        SweepKindArg::Confidence => (sweep::run_confidence_sweep(&gan, &judge, &section.spec)?, None),
        SweepKindArg::Va => {
            let neutral = gan.label_map().resolve(&section.neutral).map_err(|e| CliError::Usage(e.to_string()))?;
            (sweep::run_va_sweep(&gan, &judge, &section.spec, &section.axes, &neutral)?, Some(neutral.label))
        }
    };
    std::fs::create_dir_all(&out).map_err(interlerp::Error::io(format!("creating {}", out.display())))?;
    let rows = sweep::export_trajectories(&stats, &csv_path)?;
    let manifest = RunManifest {
        kind: stats[0].kind,
        spec: section.spec.clone(),
        gan_fingerprint: gan.fingerprint(),
        judge_fingerprint: judge.fingerprint().to_owned(),
        label_map: gan.label_map().clone(),
        axes: (kind == SweepKindArg::Va).then(|| section.axes.clone()),
        neutral,
        trajectories: stats.len(),
        rows,
        code_version: interlerp::CODE_VERSION.into(),
    };
    manifest.write(&manifest_path)?;
    ctx.output(&csv_path);
    ctx.output(&manifest_path);
    if let Some(k) = flags.save_images.filter(|&k| k > 0) {
        let dir = out.join("images");
        save_sweep_images(&gan, &section, &stats, k, &dir)?;
        ctx.output(&dir);
    }
    ctx.say(format!("{} trajectories, {rows} rows -> {}", stats.len(), csv_path.display()));
    Ok(())
}

fn apply_sweep_flags(section: &mut SweepSection, flags: &SweepFlags, seed: Option<u64>, labels: &LabelMap) -> Result<(), CliError> {
    if let Some(p) = &flags.pairs {
        section.spec.pairs = parse_pairs(p, labels)?;
    }
    if let Some(n) = flags.n_samples {
        section.spec.n_samples = n;
    }
    if let Some(e) = flags.step {
        section.spec.step_size = e;
    }
    if let Some(s) = seed {
        section.spec.seed = s;
    }
    if let Some(n) = &flags.neutral {
        section.neutral = n.clone();
    }
    Ok(())
}

/// PNGs of the first `k` noise vectors along every trajectory, named
/// `<source>-<target>/s<step>_k<sample>.png`.
fn save_sweep_images(
    gan: &GeneratorCheckpoint,
    section: &SweepSection,
    stats: &[TrajectoryStats],
    k: usize,
    dir: &Path,
) -> Result<(), CliError> {
    let n = gan.label_map().len();
    for t in stats {
        let sub = dir.join(format!("{}-{}", t.source.label, t.target.label));
        std::fs::create_dir_all(&sub).map_err(interlerp::Error::io(format!("creating {}", sub.display())))?;
        let zs: Vec<_> = section.spec.noise_for_source(t.source.index, gan.config().z_dim).into_iter().take(k).collect();
        let schedule = build_schedule(t.source.index, t.target.index, section.spec.step_size, n)?;
        for (s, v) in schedule.steps.iter().enumerate() {
            let images = gan.generate_batch(&zs, &vec![v.clone(); zs.len()])?;
            for (i, im) in images.iter().enumerate() {
                im.save_png(&sub.join(format!("s{s:02}_k{i:03}.png")))?;
            }
        }
    }
    Ok(())
}

fn report(ctx: &mut Ctx, inputs: &[PathBuf], all_classes_flag: bool) -> Result<(), CliError> {
    let cfg = explicit_config(ctx, None)?.unwrap_or_default();
    let all_classes = all_classes_flag || cfg.report.is_some_and(|r| r.all_classes);
    let out = ctx.out_dir()?;
    ctx.claim(&[out.join(crate::report::SUMMARY_FILE)])?;
    for i in inputs {
        if !i.is_file() {
            return Err(CliError::Usage(format!("input {} does not exist", i.display())));
        }
        ctx.input(i);
    }
    let outcome = crate::report::render(inputs, &out, all_classes)?;
    for p in &outcome.plots {
        ctx.output(p);
    }
    ctx.output(&outcome.summary);
    ctx.say(format!("{} plots, summary at {}", outcome.plots.len(), outcome.summary.display()));
    Ok(())
}

fn synth(ctx: &mut Ctx, preset: Option<&str>, n: Option<usize>, size: Option<usize>) -> Result<(), CliError> {
    let cfg = match explicit_config(ctx, preset)? {
        Some(c) => c,
        None => RunConfig::preset("synth_faces")?,
    };
    let mut spec = cfg.dataset.and_then(|d| d.synth).unwrap_or_else(|| SyntheticFaceSpec::new(1000, 0));
    if let Some(n) = n {
        spec.n_samples = n;
    }
    if let Some(s) = size {
        spec.image_size = s;
    }
    if let Some(s) = ctx.global.seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| CliError::Usage(format!("synth: {e}")))?;
    let out = ctx.out_dir()?;
    ctx.claim(&[out.join("va.csv"), out.join("manifest.json")])?;
    ctx.config(&spec);
    let set = synth_faces(&spec)?;
    save_synth_faces(&set, Some(&spec), &out)?;
    ctx.output(&out);
    ctx.say(format!("{} faces ({}x{}) written to {}", set.len(), spec.image_size, spec.image_size, out.display()));
    Ok(())
}

fn validate_config(ctx: &mut Ctx, path: Option<PathBuf>) -> Result<(), CliError> {
    let path = path.or_else(|| ctx.global.config.clone()).ok_or_else(|| CliError::Usage("pass a config path or --config".into()))?;
    ctx.input(&path);
    let cfg = RunConfig::load(&path)?;
    cfg.validate()?;
    ctx.config(&cfg);
    ctx.say(format!("{}: ok", path.display()));
    Ok(())
}
