//! On-disk formats: vocabulary files (`token<TAB>count` in id order),
//! encoded id files, action files, parse files, and checkpoints.

use std::path::Path;

use anyhow::Context;

use parslate_core::checkpoint::{fnv1a64, Checkpoint};
use parslate_core::oracle::{DepTree, LabelVocab, Vocabulary, EOS_TOKEN};
use parslate_core::transition::Action;

use crate::error::{CmdError, CmdResult};

pub fn read_lines(path: &Path) -> CmdResult<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_lines(path: &Path, lines: &[String]) -> CmdResult {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> CmdResult {
    let lines: Vec<String> = vocab
        .entries()
        .map(|(tok, count)| format!("{tok}\t{count}"))
        .collect();
    write_lines(path, &lines)
}

pub fn read_vocab(path: &Path) -> CmdResult<Vocabulary> {
    let entries = read_counted(path)?;
    Ok(Vocabulary::from_entries(entries, 0))
}

pub fn write_labels(path: &Path, labels: &LabelVocab) -> CmdResult {
    let lines: Vec<String> = labels
        .entries()
        .map(|(label, count)| format!("{label}\t{count}"))
        .collect();
    write_lines(path, &lines)
}

pub fn read_labels(path: &Path) -> CmdResult<LabelVocab> {
    Ok(LabelVocab::from_entries(read_counted(path)?))
}

fn read_counted(path: &Path) -> CmdResult<Vec<(String, u64)>> {
    let mut entries = Vec::new();
    for (no, line) in read_lines(path)?.iter().enumerate() {
        let (token, count) = line.split_once('\t').ok_or_else(|| {
            CmdError::data(anyhow::anyhow!(
                "{}:{}: expected token<TAB>count",
                path.display(),
                no + 1
            ))
        })?;
        let count: u64 = count.trim().parse().map_err(|_| {
            CmdError::data(anyhow::anyhow!(
                "{}:{}: bad count {count:?}",
                path.display(),
                no + 1
            ))
        })?;
        entries.push((token.to_string(), count));
    }
    Ok(entries)
}

pub fn write_ids(path: &Path, sentences: &[Vec<usize>]) -> CmdResult {
    let lines: Vec<String> = sentences
        .iter()
        .map(|ids| {
            ids.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    write_lines(path, &lines)
}

pub fn read_ids(path: &Path) -> CmdResult<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for (no, line) in read_lines(path)?.iter().enumerate() {
        let ids = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                CmdError::data(anyhow::anyhow!("{}:{}: bad id", path.display(), no + 1))
            })?;
        out.push(ids);
    }
    Ok(out)
}

pub fn format_action(action: Action, labels: &LabelVocab) -> CmdResult<String> {
    Ok(match action {
        Action::Shift => "SHIFT".to_string(),
        Action::ReduceLeft(l) => format!("REDUCE-L:{}", labels.name(l)?),
        Action::ReduceRight(l) => format!("REDUCE-R:{}", labels.name(l)?),
    })
}

pub fn parse_action(token: &str, labels: &LabelVocab) -> CmdResult<Action> {
    if token == "SHIFT" {
        return Ok(Action::Shift);
    }
    if let Some(label) = token.strip_prefix("REDUCE-L:") {
        return Ok(Action::ReduceLeft(labels.id(label)?));
    }
    if let Some(label) = token.strip_prefix("REDUCE-R:") {
        return Ok(Action::ReduceRight(labels.id(label)?));
    }
    Err(CmdError::data(anyhow::anyhow!(
        "bad action token {token:?}"
    )))
}

pub fn write_actions(path: &Path, sequences: &[Vec<Action>], labels: &LabelVocab) -> CmdResult {
    let mut lines = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let toks = seq
            .iter()
            .map(|&a| format_action(a, labels))
            .collect::<CmdResult<Vec<_>>>()?;
        lines.push(toks.join(" "));
    }
    write_lines(path, &lines)
}

pub fn read_actions(path: &Path, labels: &LabelVocab) -> CmdResult<Vec<Vec<Action>>> {
    let mut out = Vec::new();
    for line in read_lines(path)? {
        let seq = line
            .split_whitespace()
            .map(|t| parse_action(t, labels))
            .collect::<CmdResult<Vec<_>>>()?;
        out.push(seq);
    }
    Ok(out)
}

/// One parse-file block per sentence: `index<TAB>form<TAB>head<TAB>label`
/// rows, 1-based heads with 0 at the root, EOS row omitted. Roundtrips
/// through the parse reader.
#[allow(clippy::needless_range_loop)] // forms and tree are indexed in parallel
pub fn conll_block(forms: &[String], tree: &DepTree, labels: &LabelVocab) -> CmdResult<String> {
    let drop_eos =
        forms.last().map(String::as_str) == Some(EOS_TOKEN) && tree.root() == forms.len() - 1;
    let rows = if drop_eos {
        forms.len() - 1
    } else {
        forms.len()
    };
    let mut out = String::new();
    for i in 0..rows {
        let head = match tree.head(i) {
            None => 0,
            Some(h) if h >= rows => 0, // attached to the dropped EOS root
            Some(h) => h + 1,
        };
        let label = match tree.label(i) {
            Some(l) => labels.name(l)?.to_string(),
            None => "root".to_string(),
        };
        out.push_str(&format!("{}\t{}\t{}\t{}\n", i + 1, forms[i], head, label));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> CmdResult {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, checkpoint.to_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> CmdResult<Checkpoint> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Checkpoint::from_bytes(&bytes)
        .map_err(|e| CmdError::data(anyhow::anyhow!("{}: {e}", path.display())))
}

/// Hash of the three vocabulary files; stored in checkpoints so decoding
/// refuses to run against drifted vocabularies.
pub fn vocabulary_hash(data_dir: &Path) -> CmdResult<u64> {
    let mut bytes = Vec::new();
    for name in ["src.vocab", "tgt.vocab", "labels.vocab"] {
        let path = data_dir.join(name);
        bytes.extend_from_slice(
            &std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?,
        );
        bytes.push(0);
    }
    Ok(fnv1a64(&bytes))
}
