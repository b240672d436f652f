//! `translate`: beam-search translation from a checkpoint; joint mode
//! greedily decodes a dependency parse alongside each translation and
//! writes it as an aligned parse file.

use std::path::PathBuf;

use clap::Args as ClapArgs;

use parslate_core::infer::BeamOptions;
use parslate_core::model::Model;
use parslate_core::oracle::EOS_ID;

use crate::config::RunConfig;
use crate::error::{CmdError, CmdResult};
use crate::fsio;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Tokenized source sentences, one per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file for the translations.
    #[arg(long)]
    pub output: PathBuf,
    /// Checkpoint to decode with (default: best checkpoint in model_dir).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Override the beam width.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Decode translation and parse jointly (greedy).
    #[arg(long)]
    pub joint: bool,
    /// Parse output file for joint mode (default: <output>.conll).
    #[arg(long)]
    pub parse_output: Option<PathBuf>,
}

pub fn run(args: &Args) -> CmdResult {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(beam) = args.beam {
        config.decode.beam_width = beam;
    }
    if args.joint {
        config.decode.joint = true;
    }
    let data_dir = &config.data.data_dir;
    let src_vocab = fsio::read_vocab(&data_dir.join("src.vocab"))?;
    let tgt_vocab = fsio::read_vocab(&data_dir.join("tgt.vocab"))?;
    let labels = fsio::read_labels(&data_dir.join("labels.vocab"))?;
    let vocab_hash = fsio::vocabulary_hash(data_dir)?;

    let ckpt_path = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| config.data.model_dir.join("best.ckpt"));
    let checkpoint = fsio::load_checkpoint(&ckpt_path)?;
    if checkpoint.vocab_hash != vocab_hash {
        return Err(CmdError::data(anyhow::anyhow!(
            "refusing to decode: {} was trained with different vocabulary files than {}",
            ckpt_path.display(),
            data_dir.display()
        )));
    }
    if checkpoint.config.src_vocab != src_vocab.len()
        || checkpoint.config.tgt_vocab != tgt_vocab.len()
        || checkpoint.config.num_labels != labels.len()
    {
        return Err(CmdError::data(anyhow::anyhow!(
            "checkpoint vocabulary sizes do not match the data directory"
        )));
    }
    let model = Model::from_store(&checkpoint.store, checkpoint.config)?;
    let store = checkpoint.store;

    let inputs = fsio::read_lines(&args.input)?;
    let mut translations = Vec::with_capacity(inputs.len());
    let mut parse_blocks = Vec::with_capacity(inputs.len());
    let mut incomplete = 0usize;

    for line in &inputs {
        let src = src_vocab.encode_line(line);
        let cap = if config.decode.max_length_cap > 0 {
            config.decode.max_length_cap
        } else {
            2 * (src.len() - 1) + 10
        };
        if config.decode.joint {
            let result = model.translate_and_parse_capped(&store, &src, cap)?;
            if *result.words.last().unwrap_or(&0) != EOS_ID {
                incomplete += 1;
            }
            let forms: Vec<String> = result
                .words
                .iter()
                .map(|&id| tgt_vocab.decode(id).map(str::to_string))
                .collect::<Result<_, _>>()?;
            let tree = result.tree.expect("capped decode always completes");
            parse_blocks.push(fsio::conll_block(&forms, &tree, &labels)?);
            let visible =
                if forms.last().map(String::as_str) == Some(parslate_core::oracle::EOS_TOKEN) {
                    &forms[..forms.len() - 1]
                } else {
                    &forms[..]
                };
            translations.push(visible.join(" "));
        } else {
            let options = BeamOptions {
                beam_width: config.decode.beam_width,
                max_len: cap,
                length_normalize: config.decode.length_normalize,
            };
            let result = model.translate_beam(&store, &src, &options)?;
            if !result.finished {
                incomplete += 1;
            }
            let words: Vec<&str> = result
                .tokens
                .iter()
                .map(|&id| tgt_vocab.decode(id))
                .collect::<Result<_, _>>()?;
            translations.push(words.join(" "));
        }
    }

    fsio::write_lines(&args.output, &translations)?;
    if config.decode.joint {
        let parse_path = args
            .parse_output
            .clone()
            .unwrap_or_else(|| args.output.with_extension("conll"));
        fsio::write_text(&parse_path, &parse_blocks.join("\n"))?;
    }
    if incomplete > 0 {
        eprintln!("warning: {incomplete} sentence(s) hit the length cap before finishing");
    }
    println!(
        "translated={} beam={} joint={}",
        translations.len(),
        config.decode.beam_width,
        config.decode.joint
    );
    Ok(())
}
