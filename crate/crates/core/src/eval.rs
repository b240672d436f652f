//! Translation metrics (corpus BLEU-4 and RIBES), model perplexity, and
//! paired bootstrap significance testing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Needed for exp/ln/powf in no_std builds; shadowed by inherent methods otherwise.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::model::Model;
use crate::oracle::SentencePair;
use crate::params::ParameterStore;
use crate::tape::Tape;
use crate::tensor::Real;

const MAX_NGRAM: usize = 4;

/// RIBES exponents for the unigram-precision and brevity factors.
const RIBES_ALPHA: f64 = 0.25;
const RIBES_BETA: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Bleu,
    Ribes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Plain corpus BLEU; any zero n-gram precision zeroes the score.
    None,
    /// Add-one smoothing on the n > 1 precisions (sentence-level use).
    AddOne,
}

/// Per-sentence modified n-gram statistics; corpus scores aggregate these,
/// which is also what makes bootstrap resampling cheap.
#[derive(Debug, Clone, Copy, Default)]
pub struct BleuStats {
    pub matches: [u64; MAX_NGRAM],
    pub totals: [u64; MAX_NGRAM],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_NGRAM {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BleuScore {
    /// 0..100.
    pub score: f64,
    pub precisions: [f64; MAX_NGRAM],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], u64> {
    let mut counts: BTreeMap<&[String], u64> = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches of one hypothesis against one reference.
pub fn bleu_sentence_stats(hyp: &[String], reference: &[String]) -> BleuStats {
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_NGRAM {
        let hc = ngram_counts(hyp, n);
        let rc = ngram_counts(reference, n);
        for (gram, &count) in &hc {
            let clip = rc.get(gram).copied().unwrap_or(0);
            stats.matches[n - 1] += count.min(clip);
        }
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
    }
    stats
}

/// Corpus BLEU-4 from aggregated statistics: geometric mean of the modified
/// precisions times the brevity penalty, scaled to 0..100.
pub fn bleu_from_stats(stats: &[BleuStats], smoothing: Smoothing) -> BleuScore {
    let mut total = BleuStats::default();
    for s in stats {
        total.add(s);
    }
    // Orders with no n-grams at all (every sentence shorter than n) are
    // excluded from the geometric mean, so the identity corpus scores 100
    // regardless of sentence lengths.
    let mut precisions = [0.0; MAX_NGRAM];
    let mut log_sum = 0.0;
    let mut orders = 0u32;
    let mut any_zero = false;
    for n in 0..MAX_NGRAM {
        let (mut m, mut t) = (total.matches[n] as f64, total.totals[n] as f64);
        if smoothing == Smoothing::AddOne && n > 0 && t > 0.0 {
            m += 1.0;
            t += 1.0;
        }
        if t == 0.0 {
            continue;
        }
        let p = m / t;
        precisions[n] = p;
        orders += 1;
        if p > 0.0 {
            log_sum += p.ln();
        } else {
            any_zero = true;
        }
    }
    let brevity_penalty = if total.hyp_len == 0 {
        0.0
    } else if total.hyp_len > total.ref_len {
        1.0
    } else {
        (1.0 - total.ref_len as f64 / total.hyp_len as f64).exp()
    };
    let score = if any_zero || orders == 0 {
        0.0
    } else {
        brevity_penalty * (log_sum / orders as f64).exp() * 100.0
    };
    BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len: total.hyp_len,
        ref_len: total.ref_len,
    }
}

pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], smoothing: Smoothing) -> Result<BleuScore> {
    if hyps.len() != refs.len() {
        return Err(CoreError::Misaligned {
            what: "hypotheses/references",
            left: hyps.len(),
            right: refs.len(),
        });
    }
    let stats: Vec<BleuStats> = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| bleu_sentence_stats(h, r))
        .collect();
    Ok(bleu_from_stats(&stats, smoothing))
}

/// Aligns hypothesis words to reference positions: tokens unique on both
/// sides match directly, remaining tokens take the leftmost unused matching
/// reference position.
fn align_ranks(hyp: &[String], reference: &[String]) -> Vec<usize> {
    fn count(tokens: &[String]) -> BTreeMap<&str, usize> {
        let mut m: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *m.entry(t.as_str()).or_insert(0) += 1;
        }
        m
    }
    let hyp_counts = count(hyp);
    let ref_counts = count(reference);
    let mut used = vec![false; reference.len()];
    let mut ranks: Vec<Option<usize>> = vec![None; hyp.len()];

    for (i, w) in hyp.iter().enumerate() {
        if hyp_counts[w.as_str()] == 1 && ref_counts.get(w.as_str()) == Some(&1) {
            let pos = reference.iter().position(|r| r == w).unwrap();
            ranks[i] = Some(pos);
            used[pos] = true;
        }
    }
    for (i, w) in hyp.iter().enumerate() {
        if ranks[i].is_some() {
            continue;
        }
        if let Some(pos) = reference
            .iter()
            .enumerate()
            .position(|(p, r)| r == w && !used[p])
        {
            ranks[i] = Some(pos);
            used[pos] = true;
        }
    }
    ranks.into_iter().flatten().collect()
}

/// Normalized Kendall's tau over the aligned rank list: `(tau + 1) / 2`.
fn normalized_kendall(ranks: &[usize]) -> f64 {
    let n = ranks.len();
    let pairs = n * (n - 1) / 2;
    let mut concordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            if ranks[j] > ranks[i] {
                concordant += 1;
            }
        }
    }
    let tau = (2 * concordant - pairs as i64) as f64 / pairs as f64;
    (tau + 1.0) / 2.0
}

/// Sentence RIBES in 0..1: rank correlation times the unigram-precision and
/// brevity factors.
pub fn ribes_sentence(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let ranks = align_ranks(hyp, reference);
    let nkt = match ranks.len() {
        0 => return 0.0,
        1 => {
            if reference.len() == 1 {
                1.0
            } else {
                return 0.0;
            }
        }
        _ => normalized_kendall(&ranks),
    };
    let precision = ranks.len() as f64 / hyp.len() as f64;
    let bp = if hyp.len() >= reference.len() {
        1.0
    } else {
        (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
    };
    nkt * precision.powf(RIBES_ALPHA) * bp.powf(RIBES_BETA)
}

/// Corpus RIBES in 0..100: the mean sentence score. Sentence scores are
/// summed in sorted order so the corpus score is independent of line order.
pub fn ribes(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(CoreError::Misaligned {
            what: "hypotheses/references",
            left: hyps.len(),
            right: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(CoreError::EmptyInput("ribes"));
    }
    let mut scores: Vec<f64> = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| ribes_sentence(h, r))
        .collect();
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PplMode {
    Words,
    Actions,
    Joint,
}

/// Teacher-forced perplexity: `exp(total NLL / total symbols)` for the
/// selected symbol set. `Words` uses the plain translation path (identical
/// word terms to the joint rollout); the other modes replay gold actions.
pub fn perplexity(
    store: &ParameterStore,
    model: &Model,
    pairs: &[SentencePair],
    mode: PplMode,
) -> Result<Real> {
    if pairs.is_empty() {
        return Err(CoreError::EmptyInput("perplexity corpus"));
    }
    let mut nll = 0.0;
    let mut symbols = 0usize;
    for pair in pairs {
        let mut tape = Tape::new();
        match mode {
            PplMode::Words => {
                let (node, count) = model.nmt_nll(&mut tape, store, &pair.source, &pair.target)?;
                nll += tape.scalar_value(node)?;
                symbols += count;
            }
            PplMode::Actions | PplMode::Joint => {
                let loss =
                    model.joint_nll(&mut tape, store, &pair.source, &pair.target, &pair.actions)?;
                match mode {
                    PplMode::Actions => {
                        nll += tape.scalar_value(loss.action_nll)?;
                        symbols += loss.action_count;
                    }
                    _ => {
                        nll += tape.scalar_value(loss.total)?;
                        symbols += loss.word_count + loss.action_count;
                    }
                }
            }
        }
    }
    Ok((nll / symbols as Real).exp())
}

/// Paired bootstrap: resamples sentence indices with replacement `resamples`
/// times and reports the fraction of resamples where system B does **not**
/// outperform system A on the chosen metric. Deterministic under `seed`.
pub fn bootstrap_significance(
    hyp_a: &[Vec<String>],
    hyp_b: &[Vec<String>],
    refs: &[Vec<String>],
    metric: Metric,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if hyp_a.len() != refs.len() {
        return Err(CoreError::Misaligned {
            what: "system A/references",
            left: hyp_a.len(),
            right: refs.len(),
        });
    }
    if hyp_b.len() != refs.len() {
        return Err(CoreError::Misaligned {
            what: "system B/references",
            left: hyp_b.len(),
            right: refs.len(),
        });
    }
    if refs.is_empty() || resamples == 0 {
        return Err(CoreError::EmptyInput("bootstrap"));
    }

    enum Cached {
        Bleu(Vec<BleuStats>, Vec<BleuStats>),
        Ribes(Vec<f64>, Vec<f64>),
    }
    let cached = match metric {
        Metric::Bleu => Cached::Bleu(
            hyp_a
                .iter()
                .zip(refs)
                .map(|(h, r)| bleu_sentence_stats(h, r))
                .collect(),
            hyp_b
                .iter()
                .zip(refs)
                .map(|(h, r)| bleu_sentence_stats(h, r))
                .collect(),
        ),
        Metric::Ribes => Cached::Ribes(
            hyp_a
                .iter()
                .zip(refs)
                .map(|(h, r)| ribes_sentence(h, r))
                .collect(),
            hyp_b
                .iter()
                .zip(refs)
                .map(|(h, r)| ribes_sentence(h, r))
                .collect(),
        ),
    };

    let n = refs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    for _ in 0..resamples {
        let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let (score_a, score_b) = match &cached {
            Cached::Bleu(a, b) => {
                let pick = |stats: &[BleuStats]| {
                    let sel: Vec<BleuStats> = indices.iter().map(|&i| stats[i]).collect();
                    bleu_from_stats(&sel, Smoothing::None).score
                };
                (pick(a), pick(b))
            }
            Cached::Ribes(a, b) => {
                let pick = |scores: &[f64]| {
                    indices.iter().map(|&i| scores[i]).sum::<f64>() / n as f64 * 100.0
                };
                (pick(a), pick(b))
            }
        };
        if score_b <= score_a {
            not_better += 1;
        }
    }
    Ok(not_better as f64 / resamples as f64)
}
