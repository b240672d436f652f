//! `preprocess`: build vocabularies, encode the corpus, convert parses to
//! action sequences, and write the dataset statistics.

use std::path::Path;

use clap::Args as ClapArgs;

use parslate_core::oracle::{
    filter_corpus, read_conll, tree_to_actions, ConllSentence, LabelVocab, RawExample, Vocabulary,
};
use parslate_core::CoreError;

use crate::config::RunConfig;
use crate::error::{CmdError, CmdResult};
use crate::fsio;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Run configuration file.
    #[arg(long)]
    pub config: std::path::PathBuf,
}

struct Split {
    examples: Vec<RawExample>,
    dropped_long: usize,
    dropped_empty: usize,
}

fn load_split(
    name: &str,
    source: &Path,
    target: &Path,
    parses: &Path,
    max_length: usize,
) -> CmdResult<Split> {
    let src_lines = fsio::read_lines(source)?;
    let tgt_lines = fsio::read_lines(target)?;
    if src_lines.len() != tgt_lines.len() {
        return Err(CmdError::data(anyhow::anyhow!(
            "{name}: source has {} lines but target has {}",
            src_lines.len(),
            tgt_lines.len()
        )));
    }
    let parse_text = std::fs::read_to_string(parses)
        .map_err(|e| CmdError::data(anyhow::anyhow!("reading {}: {e}", parses.display())))?;
    let parsed: Vec<ConllSentence> = read_conll(&parse_text)
        .map_err(|e| CmdError::data(anyhow::anyhow!("{}: {e}", parses.display())))?;
    if parsed.len() != tgt_lines.len() {
        return Err(CmdError::data(anyhow::anyhow!(
            "{name}: target has {} lines but parse file has {} sentences",
            tgt_lines.len(),
            parsed.len()
        )));
    }

    let mut examples = Vec::with_capacity(src_lines.len());
    for (i, ((src, tgt), parse)) in src_lines.iter().zip(&tgt_lines).zip(parsed).enumerate() {
        let target: Vec<String> = tgt.split_whitespace().map(str::to_string).collect();
        // The parse annotates exactly the target tokens (EOS is appended by
        // the reader).
        let parse_forms = &parse.forms[..parse.forms.len() - 1];
        if parse_forms != target.as_slice() {
            return Err(CmdError::data(anyhow::anyhow!(
                "{name}: parse/target mismatch at line {}: target {:?} vs parse {:?}",
                i + 1,
                target,
                parse_forms
            )));
        }
        examples.push(RawExample {
            source: src.split_whitespace().map(str::to_string).collect(),
            target,
            parse,
        });
    }
    let (examples, stats) = filter_corpus(examples, max_length);
    Ok(Split {
        examples,
        dropped_long: stats.dropped_long,
        dropped_empty: stats.dropped_empty,
    })
}

struct Encoded {
    sources: Vec<Vec<usize>>,
    targets: Vec<Vec<usize>>,
    actions: Vec<Vec<parslate_core::transition::Action>>,
    skipped_nonprojective: usize,
}

fn encode_split(
    split: &Split,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    labels: &LabelVocab,
) -> CmdResult<Encoded> {
    let mut out = Encoded {
        sources: Vec::new(),
        targets: Vec::new(),
        actions: Vec::new(),
        skipped_nonprojective: 0,
    };
    for ex in &split.examples {
        let tree = ex.parse.to_tree(labels)?;
        let actions = match tree_to_actions(&tree) {
            Ok(actions) => actions,
            Err(CoreError::NonProjective) => {
                out.skipped_nonprojective += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        out.sources
            .push(src_vocab.encode_line(&ex.source.join(" ")));
        out.targets
            .push(tgt_vocab.encode_line(&ex.target.join(" ")));
        out.actions.push(actions);
    }
    Ok(out)
}

pub fn run(args: &Args) -> CmdResult {
    let config = RunConfig::load(&args.config)?;
    let data = &config.data;
    for (what, path) in [
        ("train_source", &data.train_source),
        ("train_target", &data.train_target),
        ("train_parses", &data.train_parses),
        ("dev_source", &data.dev_source),
        ("dev_target", &data.dev_target),
        ("dev_parses", &data.dev_parses),
    ] {
        if path.as_os_str().is_empty() {
            return Err(CmdError::usage(format!("config is missing data.{what}")));
        }
        if !path.exists() {
            return Err(CmdError::data(anyhow::anyhow!(
                "data.{what}: {} does not exist",
                path.display()
            )));
        }
    }

    let train = load_split(
        "train",
        &data.train_source,
        &data.train_target,
        &data.train_parses,
        data.max_length,
    )?;
    let dev = load_split(
        "dev",
        &data.dev_source,
        &data.dev_target,
        &data.dev_parses,
        data.max_length,
    )?;

    let src_vocab = Vocabulary::build(
        train
            .examples
            .iter()
            .map(|e| e.source.join(" "))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str),
        data.source_min_count,
    )?;
    let tgt_vocab = Vocabulary::build(
        train
            .examples
            .iter()
            .map(|e| e.target.join(" "))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str),
        data.target_min_count,
    )?;
    let labels = LabelVocab::build(
        train
            .examples
            .iter()
            .chain(&dev.examples)
            .flat_map(|e| e.parse.labels.iter().flatten())
            .map(String::as_str),
    )?;

    let train_enc = encode_split(&train, &src_vocab, &tgt_vocab, &labels)?;
    let dev_enc = encode_split(&dev, &src_vocab, &tgt_vocab, &labels)?;

    let dir = &data.data_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CmdError::data(anyhow::anyhow!("creating {}: {e}", dir.display())))?;
    fsio::write_vocab(&dir.join("src.vocab"), &src_vocab)?;
    fsio::write_vocab(&dir.join("tgt.vocab"), &tgt_vocab)?;
    fsio::write_labels(&dir.join("labels.vocab"), &labels)?;
    fsio::write_ids(&dir.join("train.src.ids"), &train_enc.sources)?;
    fsio::write_ids(&dir.join("train.tgt.ids"), &train_enc.targets)?;
    fsio::write_actions(&dir.join("train.actions"), &train_enc.actions, &labels)?;
    fsio::write_ids(&dir.join("dev.src.ids"), &dev_enc.sources)?;
    fsio::write_ids(&dir.join("dev.tgt.ids"), &dev_enc.targets)?;
    fsio::write_actions(&dir.join("dev.actions"), &dev_enc.actions, &labels)?;

    let stats = format!(
        "train_pairs={}\ndev_pairs={}\nvocab_src={}\nvocab_tgt={}\nvocab_act={}\nlabels={}\n\
         train_dropped_long={}\ntrain_dropped_empty={}\ntrain_skipped_nonprojective={}\n\
         dev_dropped_long={}\ndev_dropped_empty={}\ndev_skipped_nonprojective={}\n",
        train_enc.sources.len(),
        dev_enc.sources.len(),
        src_vocab.len(),
        tgt_vocab.len(),
        2 * labels.len() + 1,
        labels.len(),
        train.dropped_long,
        train.dropped_empty,
        train_enc.skipped_nonprojective,
        dev.dropped_long,
        dev.dropped_empty,
        dev_enc.skipped_nonprojective,
    );
    fsio::write_text(&dir.join("stats.txt"), &stats)?;
    print!("{stats}");
    config.echo_to(dir)?;
    Ok(())
}
