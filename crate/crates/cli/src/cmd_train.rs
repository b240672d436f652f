//! `train`: epochs of summed-batch SGD with clipping, per-epoch development
//! perplexity, and the halve-and-reload learning-rate schedule.

use std::io::Write;
use std::path::Path;

use clap::Args as ClapArgs;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parslate_core::checkpoint::Checkpoint;
use parslate_core::eval::{perplexity, PplMode};
use parslate_core::model::Model;
use parslate_core::oracle::SentencePair;
use parslate_core::params::ParameterStore;
use parslate_core::trainer::{init_parameters, train_epoch, LrSchedule, ScheduleDecision};

use crate::config::RunConfig;
use crate::error::{CmdError, CmdResult};
use crate::fsio;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Run configuration file.
    #[arg(long)]
    pub config: std::path::PathBuf,
    /// Continue from the last checkpoint in the model directory.
    #[arg(long)]
    pub resume: bool,
    /// Override the number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override the random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn load_pairs(data_dir: &Path, split: &str) -> CmdResult<Vec<SentencePair>> {
    let labels = fsio::read_labels(&data_dir.join("labels.vocab"))?;
    let sources = fsio::read_ids(&data_dir.join(format!("{split}.src.ids")))?;
    let targets = fsio::read_ids(&data_dir.join(format!("{split}.tgt.ids")))?;
    let actions = fsio::read_actions(&data_dir.join(format!("{split}.actions")), &labels)?;
    if sources.len() != targets.len() || sources.len() != actions.len() {
        return Err(CmdError::data(anyhow::anyhow!(
            "{split}: misaligned encoded files ({} / {} / {})",
            sources.len(),
            targets.len(),
            actions.len()
        )));
    }
    Ok(sources
        .into_iter()
        .zip(targets)
        .zip(actions)
        .map(|((source, target), actions)| SentencePair {
            source,
            target,
            actions,
        })
        .collect())
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    // Distinct deterministic stream per epoch so interrupted runs resume
    // with identical shuffles.
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn run(args: &Args) -> CmdResult {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(epochs) = args.epochs {
        config.train.max_epochs = epochs;
    }
    if let Some(seed) = args.seed {
        config.train.seed = seed;
    }
    let train_config = config.train_config();
    train_config.validate()?;

    let data_dir = &config.data.data_dir;
    let model_dir = &config.data.model_dir;
    let train_pairs = load_pairs(data_dir, "train")?;
    let dev_pairs = load_pairs(data_dir, "dev")?;
    if train_pairs.is_empty() || dev_pairs.is_empty() {
        return Err(CmdError::data(anyhow::anyhow!(
            "empty training or development set in {}",
            data_dir.display()
        )));
    }
    let src_vocab = fsio::read_vocab(&data_dir.join("src.vocab"))?;
    let tgt_vocab = fsio::read_vocab(&data_dir.join("tgt.vocab"))?;
    let labels = fsio::read_labels(&data_dir.join("labels.vocab"))?;
    let vocab_hash = fsio::vocabulary_hash(data_dir)?;
    let model_config = train_config.model_config(src_vocab.len(), tgt_vocab.len(), labels.len());

    let last_path = model_dir.join("last.ckpt");
    let best_path = model_dir.join("best.ckpt");

    let (mut store, model, mut schedule, start_epoch);
    if args.resume {
        let last = fsio::load_checkpoint(&last_path)?;
        if last.vocab_hash != vocab_hash {
            return Err(CmdError::data(anyhow::anyhow!(
                "checkpoint {} was built with different vocabulary files",
                last_path.display()
            )));
        }
        if last.config != model_config {
            return Err(CmdError::data(anyhow::anyhow!(
                "checkpoint configuration does not match the run configuration"
            )));
        }
        schedule = LrSchedule::resume(last.learning_rate, last.dev_perplexity);
        start_epoch = last.epoch as usize + 1;
        model = Model::from_store(&last.store, last.config)?;
        store = last.store;
    } else {
        let built = init_parameters(model_config, train_config.seed)?;
        store = built.0;
        model = built.1;
        schedule = LrSchedule::new(train_config.learning_rate);
        start_epoch = 1;
    }

    std::fs::create_dir_all(model_dir)
        .map_err(|e| CmdError::data(anyhow::anyhow!("creating {}: {e}", model_dir.display())))?;
    config.echo_to(model_dir)?;
    let log_path = model_dir.join("train.log");
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| CmdError::data(anyhow::anyhow!("opening {}: {e}", log_path.display())))?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(
        log,
        "# started_at={now} resume={} start_epoch={start_epoch}",
        args.resume
    )
    .map_err(CmdError::from)?;

    let checkpoint = |store: &ParameterStore, epoch: usize, schedule: &LrSchedule| Checkpoint {
        epoch: epoch as u32,
        learning_rate: schedule.learning_rate(),
        dev_perplexity: schedule.best(),
        seed: train_config.seed,
        vocab_hash,
        config: model_config,
        store: store.clone(),
    };

    for epoch in start_epoch..=train_config.max_epochs {
        let mut order: Vec<usize> = (0..train_pairs.len()).collect();
        order.shuffle(&mut epoch_rng(train_config.seed, epoch));
        let shuffled: Vec<SentencePair> =
            order.into_iter().map(|i| train_pairs[i].clone()).collect();

        let mut epoch_config = train_config;
        epoch_config.learning_rate = schedule.learning_rate();
        let stats = train_epoch(&mut store, &model, &shuffled, &epoch_config)?;

        let ppl_words = perplexity(&store, &model, &dev_pairs, PplMode::Words)?;
        let ppl_actions = perplexity(&store, &model, &dev_pairs, PplMode::Actions)?;
        let ppl_joint = perplexity(&store, &model, &dev_pairs, PplMode::Joint)?;

        let decision = schedule.observe(ppl_joint);
        let reloaded = matches!(decision, ScheduleDecision::HalveAndReload);
        match decision {
            ScheduleDecision::Record => {
                fsio::save_checkpoint(&best_path, &checkpoint(&store, epoch, &schedule))?;
            }
            ScheduleDecision::HalveAndReload => {
                let best = fsio::load_checkpoint(&best_path)?;
                store = best.store;
            }
        }
        fsio::save_checkpoint(&last_path, &checkpoint(&store, epoch, &schedule))?;

        let line = format!(
            "epoch={epoch} train_loss={:.6} mean_loss={:.6} dev_ppl_words={ppl_words:.6} \
             dev_ppl_actions={ppl_actions:.6} dev_ppl_joint={ppl_joint:.6} lr={} reloaded={reloaded}",
            stats.total_loss,
            stats.mean_loss,
            schedule.learning_rate(),
        );
        println!("{line}");
        writeln!(log, "{line}").map_err(CmdError::from)?;
    }
    Ok(())
}
