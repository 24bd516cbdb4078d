use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::report::{read_csv, write_csv, CsvStream, StepReport};
use super::{Result, TrainError, TrainingConfig};
use crate::config::to_pretty_json;
use crate::dataset::{bucket_batches, PatchSequence, WordSample};
use crate::models::{time_major, Checkpoint, Mode, ModelConfig, ModelKind, Models, ParamReport};
use crate::tensor::{set_trainable, zero_grads, Adam, Moments, Tape, Tensor, Var};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const STEPS_FILE: &str = "steps.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "resolved-config.json";

/// Words of one patch count, stacked time-major.
#[derive(Clone, Debug)]
pub struct Batch {
    pub steps: usize,
    /// Target font of each word.
    pub labels: Vec<usize>,
    /// Target font of each patch row.
    pub row_labels: Vec<usize>,
    pub source: Tensor,
    pub target: Tensor,
}

impl Batch {
    pub fn new(samples: &[&WordSample]) -> Result<Self> {
        let sources: Vec<&PatchSequence> = samples.iter().map(|s| &s.source).collect();
        let targets: Vec<&PatchSequence> = samples.iter().map(|s| &s.target).collect();
        let source = time_major(&sources)?;
        let target = time_major(&targets)?;
        let steps = sources[0].count();
        let labels: Vec<usize> = samples.iter().map(|s| s.target_font).collect();
        let row_labels = (0..steps).flat_map(|_| labels.iter().copied()).collect();
        Ok(Self {
            steps,
            labels,
            row_labels,
            source,
            target,
        })
    }

    pub fn words(&self) -> usize {
        self.labels.len()
    }
}

/// Shuffle seed of one epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Groups of at most `batch_size` same-length samples, in sample order.
fn ordered_batches(samples: &[WordSample], batch_size: usize) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.source.count()).or_default().push(i);
    }
    groups
        .values()
        .flat_map(|idx| idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect::<Vec<_>>())
        .collect()
}

/// Mean absolute error between generated and ground-truth patches over a
/// whole sample set, batched deterministically. Use `BatchStats` or `Infer`;
/// `Train` would move the running statistics.
pub fn mean_l1(models: &Models, samples: &[WordSample], batch_size: usize, mode: Mode) -> Result<f64> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for idx in ordered_batches(samples, batch_size) {
        let batch = Batch::new(&idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>())?;
        let tape = Tape::new();
        let fake = models
            .generator
            .forward(&tape, tape.constant(&batch.source), batch.steps, &batch.labels, mode)?;
        let n = batch.target.len();
        total += fake.l1(&tape.constant(&batch.target))?.item() * n as f64;
        count += n;
    }
    Ok(total / count as f64)
}

/// Optimiser state and position of a training run.
pub struct Trainer {
    config: TrainingConfig,
    models: Models,
    samples: Vec<WordSample>,
    opt_g: Adam,
    opt_d: Adam,
    opt_c: Adam,
    epoch: usize,
    step: u64,
}

impl Trainer {
    pub fn new(config: TrainingConfig, models: Models, samples: Vec<WordSample>) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        for s in &samples {
            if s.target_font >= models.fonts() {
                return Err(crate::dataset::DatasetError::UnknownFont {
                    id: s.target_font,
                    fonts: models.fonts(),
                }
                .into());
            }
            if s.source.count() != s.target.count() {
                return Err(TrainError::Resume(format!(
                    "sample {:?}: source has {} patches, target {}",
                    s.word,
                    s.source.count(),
                    s.target.count()
                )));
            }
        }
        let adam = config.adam();
        Ok(Self {
            opt_g: Adam::new(adam, &models.generator.params()),
            opt_d: Adam::new(adam, &models.critic.disc_params()),
            opt_c: Adam::new(adam, &models.critic.cls_params()),
            config,
            models,
            samples,
            epoch: 0,
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn into_models(self) -> Models {
        self.models
    }

    pub fn samples(&self) -> &[WordSample] {
        &self.samples
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn batches_per_epoch(&self) -> usize {
        ordered_batches(&self.samples, self.config.batch_size).len()
    }

    /// The shuffled batches of `epoch`; a pure function of seed and epoch.
    pub fn epoch_batches(&self, epoch: usize) -> Result<Vec<Batch>> {
        bucket_batches(
            &self.samples,
            self.config.batch_size,
            epoch_seed(self.config.seed, epoch),
        )
        .iter()
        .map(|idx| Batch::new(&idx.iter().map(|&i| &self.samples[i]).collect::<Vec<_>>()))
        .collect()
    }

    fn ensure_finite(&self, loss: &'static str, value: f64) -> Result<()> {
        if value.is_finite() {
            Ok(())
        } else {
            Err(TrainError::NonFiniteLoss { step: self.step, loss })
        }
    }

    fn finish(&mut self, mut report: StepReport) -> StepReport {
        report.step = self.step;
        self.step += 1;
        report
    }

    /// One L1-only generator update.
    pub fn pretrain_step(&mut self, batch: &Batch) -> Result<StepReport> {
        let params = self.models.generator.params();
        let tape = Tape::new();
        let fake = self.models.generator.forward(
            &tape,
            tape.constant(&batch.source),
            batch.steps,
            &batch.labels,
            Mode::Train,
        )?;
        let l1 = fake.l1(&tape.constant(&batch.target))?;
        let loss_g_l1 = l1.item();
        self.ensure_finite("loss_g_l1", loss_g_l1)?;
        zero_grads(&params);
        tape.backward(l1.scale(self.config.lambda_l1))?;
        self.opt_g.step(&params)?;
        Ok(self.finish(StepReport {
            loss_g_l1,
            ..StepReport::default()
        }))
    }

    /// One update of the discriminator trunk and head. `fake` holds generated
    /// patches in the batch layout and is treated as a constant.
    /// Returns `(loss_d, mean D(real), mean D(fake))`.
    pub fn discriminator_step(&mut self, batch: &Batch, fake: &Tensor) -> Result<(f64, f64, f64)> {
        let params = self.models.critic.disc_params();
        let critic = &self.models.critic;
        let tape = Tape::new();
        let real = critic.features(&tape, tape.constant(&batch.target))?;
        let real = critic.discriminate(&tape, real, &batch.row_labels)?;
        let fake = critic.features(&tape, tape.constant(fake))?;
        let fake = critic.discriminate(&tape, fake, &batch.row_labels)?;
        let (d_real, d_fake) = (real.mean().item(), fake.mean().item());
        let loss = real.bce(1.0).add(&fake.bce(0.0))?;
        let loss_d = loss.item();
        self.ensure_finite("loss_d", loss_d)?;
        zero_grads(&params);
        tape.backward(loss)?;
        self.opt_d.step(&params)?;
        Ok((loss_d, d_real, d_fake))
    }

    /// One update of the trunk and classification head on real target patches.
    pub fn classifier_step(&mut self, batch: &Batch) -> Result<f64> {
        let params = self.models.critic.cls_params();
        let critic = &self.models.critic;
        let tape = Tape::new();
        let feats = critic.features(&tape, tape.constant(&batch.target))?;
        let loss = critic.classify(&tape, feats)?.cross_entropy(&batch.row_labels)?;
        let loss_c = loss.item();
        self.ensure_finite("loss_c", loss_c)?;
        zero_grads(&params);
        tape.backward(loss)?;
        self.opt_c.step(&params)?;
        Ok(loss_c)
    }

    /// Discriminator, classifier and generator steps on one batch.
    pub fn adversarial_step(&mut self, batch: &Batch) -> Result<StepReport> {
        let tape = Tape::new();
        let fake = self.models.generator.forward(
            &tape,
            tape.constant(&batch.source),
            batch.steps,
            &batch.labels,
            Mode::Train,
        )?;
        let (loss_d, d_real, d_fake) = self.discriminator_step(batch, &fake.value())?;
        let loss_c = self.classifier_step(batch)?;

        let critic_params = self.models.critic.params();
        set_trainable(&critic_params, false);
        let terms = self.generator_terms(&tape, fake, batch);
        set_trainable(&critic_params, true);
        let [adv, l1, cls] = terms?;
        let (loss_g_adv, loss_g_l1, loss_g_cls) = (adv.item(), l1.item(), cls.item());
        self.ensure_finite("loss_g_adv", loss_g_adv)?;
        self.ensure_finite("loss_g_l1", loss_g_l1)?;
        self.ensure_finite("loss_g_cls", loss_g_cls)?;

        // Zero-weight terms stay out of the graph, so with only the L1 weight
        // set this is exactly a pre-training update.
        let c = &self.config;
        let mut loss: Option<Var<'_>> = None;
        for (w, term) in [(c.lambda_adv, adv), (c.lambda_l1, l1), (c.lambda_cls, cls)] {
            if w > 0.0 {
                let t = term.scale(w);
                loss = Some(match loss {
                    Some(acc) => acc.add(&t)?,
                    None => t,
                });
            }
        }
        let params = self.models.generator.params();
        zero_grads(&params);
        if let Some(loss) = loss {
            tape.backward(loss)?;
        }
        self.opt_g.step(&params)?;
        Ok(self.finish(StepReport {
            step: 0,
            loss_d,
            loss_g_adv,
            loss_g_l1,
            loss_g_cls,
            loss_c,
            d_real,
            d_fake,
        }))
    }

    /// Unweighted `[adversarial, L1, classification]` generator losses.
    fn generator_terms<'t>(&self, tape: &'t Tape, fake: Var<'t>, batch: &Batch) -> Result<[Var<'t>; 3]> {
        let critic = &self.models.critic;
        let feats = critic.features(tape, fake)?;
        let adv = critic.discriminate(tape, feats, &batch.row_labels)?.bce(1.0);
        let l1 = fake.l1(&tape.constant(&batch.target))?;
        let cls = critic.classify(tape, feats)?.cross_entropy(&batch.row_labels)?;
        Ok([adv, l1, cls])
    }

    /// Train until `config.epochs` epochs are complete, or until `step`
    /// reaches `stop_after_step`. Returns `true` when all epochs finished.
    pub fn fit(
        &mut self,
        stop_after_step: Option<u64>,
        mut on_step: impl FnMut(&StepReport) -> Result<()>,
        mut on_epoch: impl FnMut(&Self) -> Result<()>,
    ) -> Result<bool> {
        while self.epoch < self.config.epochs {
            let pretrain = self.epoch < self.config.pretrain_epochs;
            for batch in self.epoch_batches(self.epoch)? {
                if stop_after_step.is_some_and(|s| self.step >= s) {
                    return Ok(false);
                }
                let report = if pretrain {
                    self.pretrain_step(&batch)?
                } else {
                    self.adversarial_step(&batch)?
                };
                on_step(&report)?;
            }
            self.epoch += 1;
            log::info!(
                "epoch {}/{} done after {} steps",
                self.epoch,
                self.config.epochs,
                self.step
            );
            on_epoch(self)?;
        }
        Ok(true)
    }

    /// Model tensors, the three optimiser states and the run position.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.models.to_checkpoint();
        ck.push("train.epoch", Tensor::scalar(self.epoch as f64));
        ck.push("train.step", Tensor::scalar(self.step as f64));
        for (tag, opt) in self.optimizers() {
            ck.push(format!("opt.{tag}.t"), Tensor::scalar(opt.steps() as f64));
            for (name, m) in opt.names().iter().zip(opt.moments()) {
                ck.push(
                    format!("opt.{tag}.m.{name}"),
                    Tensor::new([m.m.len()], m.m.clone()).expect("1-D"),
                );
                ck.push(
                    format!("opt.{tag}.v.{name}"),
                    Tensor::new([m.v.len()], m.v.clone()).expect("1-D"),
                );
            }
        }
        ck
    }

    fn optimizers(&self) -> [(&'static str, &Adam); 3] {
        [("g", &self.opt_g), ("d", &self.opt_d), ("c", &self.opt_c)]
    }

    /// Continue a run saved by [`Trainer::to_checkpoint`].
    pub fn from_checkpoint(config: TrainingConfig, samples: Vec<WordSample>, ck: &Checkpoint) -> Result<Self> {
        let models = Models::from_checkpoint(ck)?;
        if models.kind() != config.model {
            return Err(TrainError::Resume(format!(
                "checkpoint holds a {} model but the config asks for {}",
                models.kind(),
                config.model
            )));
        }
        let mut trainer = Self::new(config, models, samples)?;
        let scalar = |name: &str| {
            ck.scalar(name)
                .ok_or_else(|| TrainError::Resume(format!("checkpoint has no `{name}` entry")))
        };
        trainer.epoch = scalar("train.epoch")? as usize;
        trainer.step = scalar("train.step")? as u64;
        for (tag, opt) in [
            ("g", &mut trainer.opt_g),
            ("d", &mut trainer.opt_d),
            ("c", &mut trainer.opt_c),
        ] {
            let t = ck
                .scalar(&format!("opt.{tag}.t"))
                .ok_or_else(|| TrainError::Resume(format!("checkpoint has no `opt.{tag}.t` entry")))?;
            let moments = opt
                .names()
                .iter()
                .map(|name| {
                    let get = |kind: &str| {
                        let key = format!("opt.{tag}.{kind}.{name}");
                        ck.get(&key)
                            .map(|t| t.values().to_vec())
                            .ok_or_else(|| TrainError::Resume(format!("checkpoint has no `{key}` entry")))
                    };
                    Ok(Moments {
                        m: get("m")?,
                        v: get("v")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            opt.restore(t as u64, moments)?;
        }
        Ok(trainer)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions {
    /// Continue from the checkpoint in the output directory.
    pub resume: bool,
    /// Stop (as if interrupted) once this many steps are complete.
    pub stop_after_step: Option<u64>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub seed: u64,
    pub epochs_completed: usize,
    pub steps: u64,
    pub pretrain_steps: u64,
    pub interrupted: bool,
    pub wall_clock_seconds: f64,
    pub last_step: Option<StepReport>,
    pub params: ParamReport,
}

/// Train with every artifact written under `out`: `resolved-config.json`,
/// `checkpoint.ckpt` (initial, every `checkpoint_interval` epochs, final),
/// `steps.csv` and `report.json`.
pub fn run(
    config: &TrainingConfig,
    model_config: ModelConfig,
    samples: Vec<WordSample>,
    out: &Path,
    opts: TrainOptions,
) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| TrainError::io(out, e))?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let steps_path = out.join(STEPS_FILE);
    let config_path = out.join(CONFIG_FILE);
    let resolved = to_pretty_json(config);

    let (mut trainer, mut last) = if opts.resume {
        let saved = fs::read_to_string(&config_path).map_err(|e| TrainError::io(&config_path, e))?;
        if saved != resolved {
            return Err(TrainError::Resume(format!(
                "the configuration differs from {}",
                config_path.display()
            )));
        }
        let trainer = Trainer::from_checkpoint(config.clone(), samples, &Checkpoint::load(&ckpt_path)?)?;
        trainer.models.check_fonts(model_config.fonts)?;
        let mut rows = read_csv(&steps_path)?;
        if (rows.len() as u64) < trainer.step {
            return Err(TrainError::Resume(format!(
                "{} has {} rows but the checkpoint is at step {}",
                steps_path.display(),
                rows.len(),
                trainer.step
            )));
        }
        rows.truncate(trainer.step as usize);
        write_csv(&steps_path, &rows)?;
        log::info!("resuming at epoch {} step {}", trainer.epoch, trainer.step);
        (trainer, rows.last().copied())
    } else {
        let models = Models::init(model_config, config.model, config.seed)?;
        let trainer = Trainer::new(config.clone(), models, samples)?;
        fs::write(&config_path, &resolved).map_err(|e| TrainError::io(&config_path, e))?;
        write_csv(&steps_path, &[])?;
        trainer.to_checkpoint().save(&ckpt_path)?;
        (trainer, None)
    };

    let mut csv = CsvStream::append(&steps_path)?;
    let start = Instant::now();
    let finished = trainer.fit(
        opts.stop_after_step,
        |r| {
            last = Some(*r);
            csv.push(r)
        },
        |t| {
            if t.epoch % config.checkpoint_interval == 0 || t.epoch == config.epochs {
                t.to_checkpoint().save(&ckpt_path)?;
            }
            Ok(())
        },
    )?;
    let summary = RunSummary {
        model: config.model,
        seed: config.seed,
        epochs_completed: trainer.epoch,
        steps: trainer.step,
        pretrain_steps: (trainer.batches_per_epoch() * config.pretrain_epochs) as u64,
        interrupted: !finished,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        last_step: last,
        params: trainer.models.param_report(),
    };
    let report_path = out.join(REPORT_FILE);
    fs::write(&report_path, to_pretty_json(&summary)).map_err(|e| TrainError::io(&report_path, e))?;
    Ok(summary)
}
