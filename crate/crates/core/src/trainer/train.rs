use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{Batch, LionConfig, LionState, Schedule, TrainRecipe};
use crate::autodiff::Tape;
use crate::kv::KvMap;
use crate::model::{lm_loss, DietaModel, ModelConfig};
use crate::real::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// 1-based count of completed updates.
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub tokens: usize,
    pub tokens_per_sec: f64,
}

impl StepReport {
    pub const TSV_HEADER: &'static str = "step\tlr\tloss\ttokens_per_sec";

    pub fn tsv(&self) -> String {
        format!("{}\t{:e}\t{:.6}\t{:.1}", self.step, self.lr, self.loss, self.tokens_per_sec)
    }
}

/// Model, optimizer state and the batch stream of one training run.
pub struct Trainer<F: Real> {
    pub model: DietaModel<F>,
    pub optimizer: LionState<F>,
    pub schedule: Schedule,
    batches: Vec<Batch>,
    grad_seen: Vec<bool>,
}

impl<F: Real> Trainer<F> {
    pub fn new(model: DietaModel<F>, lion: LionConfig, schedule: Schedule, batches: Vec<Batch>) -> Result<Self> {
        schedule.validate()?;
        if batches.is_empty() {
            return Err(Error::Input("no training batches".into()));
        }
        let optimizer = LionState::new(&model, lion);
        let grad_seen = vec![false; optimizer.moments().len()];
        Ok(Trainer {
            model,
            optimizer,
            schedule,
            batches,
            grad_seen,
        })
    }

    pub fn step(&self) -> usize {
        self.optimizer.step as usize
    }

    pub fn is_done(&self) -> bool {
        self.step() >= self.schedule.total_steps
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    /// Names of parameters that have never received a nonzero gradient.
    pub fn dead_parameters(&self) -> Vec<String> {
        self.optimizer
            .moments()
            .iter()
            .zip(&self.grad_seen)
            .filter(|(_, seen)| !**seen)
            .map(|((n, _), _)| n.clone())
            .collect()
    }

    /// Loss of `batch` under the current weights, without updating.
    pub fn loss_on(&self, batch: &Batch) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.model.record(&mut tape);
        let loss = lm_loss(
            &mut tape,
            &vars,
            self.model.config(),
            &batch.inputs(),
            &batch.targets(),
            &batch.mask(),
            batch.geometry(),
        )?;
        Ok(tape.scalar(loss).as_f64())
    }

    /// One optimizer update on the next batch, cycling through the stream.
    pub fn train_step(&mut self) -> Result<StepReport> {
        if self.is_done() {
            return Err(Error::Contract("schedule exhausted".into()));
        }
        let start = Instant::now();
        let step = self.step();
        let batch = &self.batches[step % self.batches.len()];
        let lr = self.schedule.lr_at(step + 1)?;
        let mut tape = Tape::new();
        let vars = self.model.record(&mut tape);
        let loss = lm_loss(
            &mut tape,
            &vars,
            self.model.config(),
            &batch.inputs(),
            &batch.targets(),
            &batch.mask(),
            batch.geometry(),
        )?;
        tape.backward(loss)?;
        self.model.zero_grads();
        self.model.accumulate_grads(&tape, &vars)?;
        for ((_, p), seen) in self.model.named_params().iter().zip(self.grad_seen.iter_mut()) {
            if !*seen {
                *seen = p.grad().is_some_and(|g| g.iter().any(|v| *v != F::zero()));
            }
        }
        self.optimizer.update(&mut self.model, lr)?;
        let tokens = batch.target_tokens();
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        Ok(StepReport {
            step: step + 1,
            lr,
            loss: tape.scalar(loss).as_f64(),
            tokens,
            tokens_per_sec: tokens as f64 / secs,
        })
    }

    fn section_header(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("peak_lr", format!("{:?}", self.schedule.peak_lr));
        kv.set("total_steps", self.schedule.total_steps);
        kv.set("warmup_fraction", format!("{:?}", self.schedule.warmup_fraction));
        kv.set("floor_lr", format!("{:?}", self.schedule.floor_lr));
        kv
    }

    /// Model section followed by the optimizer section, written atomically.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.model.write_to(&mut w)?;
            self.optimizer.write_to(&mut w, &self.section_header())?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Restores model and optimizer from a checkpoint written by
    /// [`Trainer::save_checkpoint`], continuing with `schedule` and `batches`.
    pub fn resume(path: &Path, schedule: Schedule, batches: Vec<Batch>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path).map_err(|e| missing(path, e))?);
        let model = DietaModel::<F>::read_from(&mut r)?;
        let (optimizer, header) = LionState::read_from(&mut r, &model)?;
        if header.get::<usize>("total_steps")? != Some(schedule.total_steps) {
            log::warn!("resuming {} with a different total step count", path.display());
        }
        let mut t = Trainer::new(model, optimizer.config, schedule, batches)?;
        t.optimizer = optimizer;
        Ok(t)
    }
}

fn missing(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot open checkpoint {}: {e}", path.display()))
}

/// Loads the model section of a checkpoint, reporting absence as a config error.
pub fn load_start_checkpoint<F: Real>(path: &Path) -> Result<DietaModel<F>> {
    if !path.is_file() {
        return Err(Error::Config(format!("starting checkpoint {} does not exist", path.display())));
    }
    let mut r = BufReader::new(File::open(path).map_err(|e| missing(path, e))?);
    DietaModel::read_from(&mut r)
}

/// Everything `train` needs besides the batches.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub recipe: TrainRecipe,
    pub model: ModelConfig,
    pub lion: LionConfig,
    pub peak_lr: f64,
    pub warmup_fraction: f64,
    pub floor_lr: f64,
    /// Defaults to one pass over the batches per recipe epoch.
    pub total_steps: Option<usize>,
    pub seed: u64,
    pub output: PathBuf,
    /// Starting weights for continued recipes.
    pub init_from: Option<PathBuf>,
    /// Checkpoint of an interrupted run of this same recipe.
    pub resume_from: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
    pub metrics_log: Option<PathBuf>,
    /// Stop after this many updates in this invocation.
    pub max_steps_this_run: Option<usize>,
}

impl TrainOptions {
    pub fn new(recipe: TrainRecipe, model: ModelConfig, output: PathBuf) -> Self {
        TrainOptions {
            recipe,
            model,
            lion: LionConfig::default(),
            peak_lr: super::PAPER_PEAK_LR,
            warmup_fraction: super::PAPER_WARMUP_FRACTION,
            floor_lr: 0.0,
            total_steps: None,
            seed: 0,
            output,
            init_from: None,
            resume_from: None,
            checkpoint_every: None,
            metrics_log: None,
            max_steps_this_run: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub first_loss: Option<f64>,
    pub last_loss: Option<f64>,
    pub losses: Vec<f64>,
    pub dead_parameters: Vec<String>,
}

/// Runs a recipe to completion (or to `max_steps_this_run`), writing the
/// final checkpoint to `opts.output`.
pub fn train<F: Real>(opts: &TrainOptions, batches: Vec<Batch>) -> Result<TrainSummary> {
    let total = opts
        .total_steps
        .unwrap_or(batches.len() * opts.recipe.epochs as usize);
    let schedule = Schedule::new(opts.peak_lr, total, opts.warmup_fraction, opts.floor_lr)?;
    let mut trainer = match (&opts.resume_from, opts.recipe.requires_checkpoint()) {
        (Some(path), _) => Trainer::<F>::resume(path, schedule, batches)?,
        (None, true) => {
            let path = opts.init_from.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "recipe {} continues {} and needs its checkpoint",
                    opts.recipe.name,
                    opts.recipe.start_from.expect("continued recipe")
                ))
            })?;
            let model = load_start_checkpoint::<F>(path)?;
            Trainer::new(model, opts.lion, schedule, batches)?
        }
        (None, false) => {
            let model = match &opts.init_from {
                Some(p) => load_start_checkpoint::<F>(p)?,
                None => DietaModel::new(opts.model.clone(), opts.seed)?,
            };
            Trainer::new(model, opts.lion, schedule, batches)?
        }
    };

    let mut log = match &opts.metrics_log {
        Some(p) => {
            let fresh = opts.resume_from.is_none() || !p.exists();
            let f = OpenOptions::new().create(true).append(!fresh).write(true).truncate(fresh).open(p)?;
            let mut w = BufWriter::new(f);
            if fresh {
                writeln!(w, "{}", StepReport::TSV_HEADER)?;
            }
            Some(w)
        }
        None => None,
    };

    let mut losses = Vec::new();
    let budget = opts.max_steps_this_run.unwrap_or(usize::MAX);
    while !trainer.is_done() && losses.len() < budget {
        let report = trainer.train_step()?;
        losses.push(report.loss);
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", report.tsv())?;
        }
        if let Some(every) = opts.checkpoint_every {
            if every > 0 && report.step % every == 0 && !trainer.is_done() {
                trainer.save_checkpoint(&opts.output)?;
            }
        }
    }
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    trainer.save_checkpoint(&opts.output)?;
    Ok(TrainSummary {
        steps: trainer.step(),
        first_loss: losses.first().copied(),
        last_loss: losses.last().copied(),
        dead_parameters: trainer.dead_parameters(),
        losses,
    })
}
