//! `eval`: corpus BLEU and RIBES for one system, plus paired bootstrap
//! significance when a second hypothesis file is given.

use std::path::PathBuf;

use clap::Args as ClapArgs;

use parslate_core::eval::{bleu, bootstrap_significance, ribes, Metric, Smoothing};

use crate::error::{CmdError, CmdResult};
use crate::fsio;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Hypothesis file (system A), one tokenized sentence per line.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference file, line-aligned with the hypotheses.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Second hypothesis file (system B) for the paired significance test.
    #[arg(long)]
    pub hyp2: Option<PathBuf>,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn tokenize(lines: &[String]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

pub fn run(args: &Args) -> CmdResult {
    let hyp = tokenize(&fsio::read_lines(&args.hyp)?);
    let refs = tokenize(&fsio::read_lines(&args.reference)?);
    if hyp.len() != refs.len() {
        return Err(CmdError::data(anyhow::anyhow!(
            "hypothesis has {} lines but reference has {}",
            hyp.len(),
            refs.len()
        )));
    }

    let bleu_a = bleu(&hyp, &refs, Smoothing::None)?;
    let ribes_a = ribes(&hyp, &refs)?;

    let mut report = String::new();
    report.push_str(&format!(
        "system A: {} ({} sentences)\n  BLEU  = {:.2}\n  RIBES = {:.2}\n",
        args.hyp.display(),
        hyp.len(),
        bleu_a.score,
        ribes_a
    ));
    let mut kv = format!("bleu={:.4}\nribes={:.4}\n", bleu_a.score, ribes_a);

    if let Some(hyp2_path) = &args.hyp2 {
        let hyp2 = tokenize(&fsio::read_lines(hyp2_path)?);
        if hyp2.len() != refs.len() {
            return Err(CmdError::data(anyhow::anyhow!(
                "second hypothesis has {} lines but reference has {}",
                hyp2.len(),
                refs.len()
            )));
        }
        let bleu_b = bleu(&hyp2, &refs, Smoothing::None)?;
        let ribes_b = ribes(&hyp2, &refs)?;
        let p_bleu =
            bootstrap_significance(&hyp, &hyp2, &refs, Metric::Bleu, args.resamples, args.seed)?;
        let p_ribes =
            bootstrap_significance(&hyp, &hyp2, &refs, Metric::Ribes, args.resamples, args.seed)?;
        report.push_str(&format!(
            "system B: {}\n  BLEU  = {:.2}\n  RIBES = {:.2}\n\
             paired bootstrap ({} resamples, seed {}): p(B not better than A)\n\
             \x20 p_bleu  = {:.4}{}\n  p_ribes = {:.4}{}\n",
            hyp2_path.display(),
            bleu_b.score,
            ribes_b,
            args.resamples,
            args.seed,
            p_bleu,
            if p_bleu < 0.005 {
                "  (significant at p < 0.005)"
            } else {
                ""
            },
            p_ribes,
            if p_ribes < 0.005 {
                "  (significant at p < 0.005)"
            } else {
                ""
            },
        ));
        kv.push_str(&format!(
            "bleu2={:.4}\nribes2={:.4}\np_bleu={p_bleu:.4}\np_ribes={p_ribes:.4}\n",
            bleu_b.score, ribes_b
        ));
    }

    print!("{report}{kv}");
    if let Some(path) = &args.report {
        fsio::write_text(path, &format!("{report}{kv}"))?;
    }
    Ok(())
}
