//! Corpus ingestion primitives and the mapping between dependency trees and
//! arc-standard action sequences.
//!
//! Sentences are EOS-terminated and the EOS token doubles as the tree ROOT:
//! parse files carry the raw sentence, and ingestion appends the EOS node
//! and re-roots the original root token under it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::transition::{Action, LabelId};

pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const UNK_TOKEN: &str = "UNK";
pub const EOS_TOKEN: &str = "EOS";

/// Bidirectional token map with reserved UNK/EOS ids. Ids are deterministic:
/// reserved symbols first, then tokens sorted by descending frequency and
/// ascending spelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized lines, keeping tokens whose
    /// frequency reaches `min_count`.
    pub fn build<'a, I>(lines: I, min_count: u64) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        let mut any = false;
        for line in lines {
            for tok in line.split_whitespace() {
                any = true;
                if tok == UNK_TOKEN || tok == EOS_TOKEN {
                    continue;
                }
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(CoreError::EmptyInput("vocabulary corpus"));
        }
        let mut entries: Vec<(String, u64)> = freq
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::from_entries(entries, min_count))
    }

    /// Reconstructs a vocabulary from `(token, count)` entries in id order
    /// (as read back from a vocabulary file).
    pub fn from_entries(entries: Vec<(String, u64)>, min_count: u64) -> Vocabulary {
        let mut tokens = vec![UNK_TOKEN.to_string(), EOS_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        for (t, c) in entries {
            tokens.push(t);
            counts.push(c);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Non-reserved `(token, count)` entries in id order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .skip(2)
            .map(|(t, &c)| (t.as_str(), c))
    }

    pub fn encode_token(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Encodes a tokenized line and appends EOS.
    pub fn encode_line(&self, line: &str) -> Vec<usize> {
        let mut ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| self.encode_token(t))
            .collect();
        ids.push(EOS_ID);
        ids
    }

    pub fn decode(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(CoreError::IdOutOfRange {
                what: "token",
                id,
                size: self.tokens.len(),
            })
    }
}

/// Dependency-label vocabulary with deterministic ids (frequency then
/// spelling, like [`Vocabulary`] but without reserved symbols).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVocab {
    labels: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, usize>,
}

impl LabelVocab {
    pub fn build<'a, I>(labels: I) -> Result<LabelVocab>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for l in labels {
            *freq.entry(l).or_insert(0) += 1;
        }
        if freq.is_empty() {
            return Err(CoreError::EmptyInput("label set"));
        }
        let mut entries: Vec<(String, u64)> =
            freq.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(entries: Vec<(String, u64)>) -> LabelVocab {
        let labels: Vec<String> = entries.iter().map(|(t, _)| t.clone()).collect();
        let counts = entries.iter().map(|&(_, c)| c).collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        LabelVocab {
            labels,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.labels
            .iter()
            .zip(&self.counts)
            .map(|(t, &c)| (t.as_str(), c))
    }

    pub fn id(&self, label: &str) -> Result<LabelId> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| CoreError::Config(format!("unknown dependency label: {label}")))
    }

    pub fn name(&self, id: LabelId) -> Result<&str> {
        self.labels
            .get(id)
            .map(String::as_str)
            .ok_or(CoreError::IdOutOfRange {
                what: "label",
                id,
                size: self.labels.len(),
            })
    }
}

/// A dependency tree over `len()` tokens, the last of which is the EOS/ROOT
/// node. `head[i]` is `None` exactly at the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    heads: Vec<Option<usize>>,
    labels: Vec<Option<LabelId>>,
}

impl DepTree {
    /// Validates single-rootedness and acyclicity.
    pub fn new(heads: Vec<Option<usize>>, labels: Vec<Option<LabelId>>) -> Result<DepTree> {
        let n = heads.len();
        if n == 0 {
            return Err(CoreError::EmptyInput("dependency tree"));
        }
        if labels.len() != n {
            return Err(CoreError::Misaligned {
                what: "heads/labels",
                left: n,
                right: labels.len(),
            });
        }
        let mut roots = 0;
        for (i, h) in heads.iter().enumerate() {
            match h {
                None => roots += 1,
                Some(h) => {
                    if *h >= n || *h == i {
                        return Err(CoreError::Parse {
                            line: 0,
                            message: format!("head {h} out of range for token {i}"),
                        });
                    }
                }
            }
        }
        if roots != 1 {
            return Err(CoreError::Parse {
                line: 0,
                message: format!("expected exactly one root, found {roots}"),
            });
        }
        // Walk each token to the root; a cycle never reaches it.
        for start in 0..n {
            let mut seen = 0;
            let mut cur = start;
            while let Some(h) = heads[cur] {
                cur = h;
                seen += 1;
                if seen > n {
                    return Err(CoreError::Parse {
                        line: 0,
                        message: format!("cycle through token {start}"),
                    });
                }
            }
        }
        Ok(DepTree { heads, labels })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    pub fn label(&self, i: usize) -> Option<LabelId> {
        self.labels[i]
    }

    pub fn root(&self) -> usize {
        self.heads.iter().position(Option::is_none).unwrap()
    }

    /// `(dependent, head, label)` triples.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, LabelId)> + '_ {
        self.heads
            .iter()
            .enumerate()
            .filter_map(move |(d, h)| h.map(|h| (d, h, self.labels[d].unwrap_or(0))))
    }
}

/// One sentence from a parse file: forms, heads and label strings with the
/// EOS/ROOT node already appended (its head is `None`, its label absent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllSentence {
    pub forms: Vec<String>,
    pub heads: Vec<Option<usize>>,
    pub labels: Vec<Option<String>>,
}

impl ConllSentence {
    /// Token count including the EOS node.
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn to_tree(&self, labels: &LabelVocab) -> Result<DepTree> {
        let ids = self
            .labels
            .iter()
            .map(|l| l.as_deref().map(|l| labels.id(l)).transpose())
            .collect::<Result<Vec<_>>>()?;
        DepTree::new(self.heads.clone(), ids)
    }
}

/// Reads tab-separated parse rows (`index<TAB>form<TAB>head<TAB>label`,
/// 1-based indices, head 0 for the root, blank line between sentences),
/// appending the EOS/ROOT node and re-rooting the original root under it.
pub fn read_conll(input: &str) -> Result<Vec<ConllSentence>> {
    let mut sentences = Vec::new();
    let mut rows: Vec<(usize, String, usize, String, usize)> = Vec::new(); // (idx, form, head, label, line_no)

    let flush = |rows: &mut Vec<(usize, String, usize, String, usize)>,
                 sentences: &mut Vec<ConllSentence>|
     -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let n = rows.len();
        let first_line = rows[0].4;
        let mut forms = Vec::with_capacity(n + 1);
        let mut heads: Vec<Option<usize>> = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for (k, (idx, form, head, label, line)) in rows.iter().enumerate() {
            if *idx != k + 1 {
                return Err(CoreError::Parse {
                    line: *line,
                    message: format!("expected token index {}, found {idx}", k + 1),
                });
            }
            if *head > n {
                return Err(CoreError::Parse {
                    line: *line,
                    message: format!("head {head} out of range (sentence has {n} tokens)"),
                });
            }
            forms.push(form.clone());
            // Head 0 (the original root) re-roots to the appended EOS node.
            heads.push(Some(if *head == 0 { n } else { head - 1 }));
            labels.push(Some(label.clone()));
        }
        forms.push(EOS_TOKEN.to_string());
        heads.push(None);
        labels.push(None);
        // Cycle check via tree validation, reported at the first row.
        DepTree::new(heads.clone(), vec![None; n + 1]).map_err(|e| match e {
            CoreError::Parse { message, .. } => CoreError::Parse {
                line: first_line,
                message,
            },
            other => other,
        })?;
        sentences.push(ConllSentence {
            forms,
            heads,
            labels,
        });
        rows.clear();
        Ok(())
    };

    for (line_no, line) in input.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            flush(&mut rows, &mut sentences)?;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(CoreError::Parse {
                line: line_no,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let idx: usize = cols[0].trim().parse().map_err(|_| CoreError::Parse {
            line: line_no,
            message: format!("bad token index: {:?}", cols[0]),
        })?;
        let head: usize = cols[2].trim().parse().map_err(|_| CoreError::Parse {
            line: line_no,
            message: format!("bad head index: {:?}", cols[2]),
        })?;
        let form = cols[1].trim();
        let label = cols[3].trim();
        if form.is_empty() || label.is_empty() {
            return Err(CoreError::Parse {
                line: line_no,
                message: "empty form or label".into(),
            });
        }
        rows.push((idx, form.to_string(), head, label.to_string(), line_no));
    }
    flush(&mut rows, &mut sentences)?;
    Ok(sentences)
}

/// True iff no arc crosses another when drawn above the sentence;
/// equivalently, every token strictly inside an arc's span is a descendant
/// of that arc's head.
pub fn is_projective(tree: &DepTree) -> bool {
    let n = tree.len();
    for d in 0..n {
        let h = match tree.head(d) {
            Some(h) => h,
            None => continue,
        };
        let (lo, hi) = (d.min(h), d.max(h));
        for inside in lo + 1..hi {
            if !is_descendant(tree, inside, h) {
                return false;
            }
        }
    }
    true
}

fn is_descendant(tree: &DepTree, mut node: usize, ancestor: usize) -> bool {
    loop {
        if node == ancestor {
            return true;
        }
        match tree.head(node) {
            Some(h) => node = h,
            None => return false,
        }
    }
}

/// Arc-standard oracle: converts a projective tree into the canonical
/// bottom-up SHIFT / REDUCE-L / REDUCE-R sequence.
pub fn tree_to_actions(tree: &DepTree) -> Result<Vec<Action>> {
    if !is_projective(tree) {
        return Err(CoreError::NonProjective);
    }
    let n = tree.len();
    let mut pending = vec![0usize; n];
    for (d, _, _) in tree.arcs() {
        pending[tree.head(d).unwrap()] += 1;
    }
    let mut actions = Vec::with_capacity(2 * n - 1);
    let mut stack: Vec<usize> = Vec::new();
    let mut next = 0;
    while !(next == n && stack.len() == 1) {
        if stack.len() >= 2 {
            let a = stack[stack.len() - 1];
            let b = stack[stack.len() - 2];
            if tree.head(b) == Some(a) && pending[b] == 0 {
                actions.push(Action::ReduceLeft(tree.label(b).unwrap_or(0)));
                stack.remove(stack.len() - 2);
                pending[a] -= 1;
                continue;
            }
            if tree.head(a) == Some(b) && pending[a] == 0 {
                actions.push(Action::ReduceRight(tree.label(a).unwrap_or(0)));
                stack.pop();
                pending[b] -= 1;
                continue;
            }
        }
        if next < n {
            actions.push(Action::Shift);
            stack.push(next);
            next += 1;
        } else {
            // Unreachable for a projective tree.
            return Err(CoreError::NonProjective);
        }
    }
    Ok(actions)
}

/// Replays a legal, terminal action sequence over `token_count` tokens and
/// rebuilds the dependency tree it encodes.
pub fn actions_to_tree(actions: &[Action], token_count: usize) -> Result<DepTree> {
    let mut heads: Vec<Option<usize>> = vec![None; token_count];
    let mut labels: Vec<Option<LabelId>> = vec![None; token_count];
    let mut stack: Vec<usize> = Vec::new();
    let mut next = 0;
    for (step, action) in actions.iter().enumerate() {
        match *action {
            Action::Shift => {
                if next >= token_count {
                    return Err(CoreError::IllegalTransition {
                        step,
                        detail: "shift past the last token",
                    });
                }
                stack.push(next);
                next += 1;
            }
            Action::ReduceLeft(label) | Action::ReduceRight(label) => {
                if stack.len() < 2 {
                    return Err(CoreError::IllegalTransition {
                        step,
                        detail: "reduce with stack depth < 2",
                    });
                }
                let top = stack.pop().unwrap();
                let second = stack.pop().unwrap();
                // REDUCE-L: the top item heads its left neighbor;
                // REDUCE-R: the second item heads the top.
                let (head, dep) = match action {
                    Action::ReduceLeft(_) => (top, second),
                    _ => (second, top),
                };
                heads[dep] = Some(head);
                labels[dep] = Some(label);
                stack.push(head);
            }
        }
    }
    if next != token_count || stack.len() != 1 {
        return Err(CoreError::IllegalTransition {
            step: actions.len(),
            detail: "sequence is not terminal",
        });
    }
    DepTree::new(heads, labels)
}

/// A raw training example before encoding: tokenized lines plus the target
/// parse.
#[derive(Debug, Clone)]
pub struct RawExample {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub parse: ConllSentence,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub kept: usize,
    pub dropped_long: usize,
    pub dropped_empty: usize,
}

/// Drops pairs with an empty side or a side longer than `max_len` tokens
/// (EOS excluded).
pub fn filter_corpus(examples: Vec<RawExample>, max_len: usize) -> (Vec<RawExample>, FilterStats) {
    let mut stats = FilterStats::default();
    let kept = examples
        .into_iter()
        .filter(|ex| {
            if ex.source.is_empty() || ex.target.is_empty() {
                stats.dropped_empty += 1;
                false
            } else if ex.source.len() > max_len || ex.target.len() > max_len {
                stats.dropped_long += 1;
                false
            } else {
                stats.kept += 1;
                true
            }
        })
        .collect();
    (kept, stats)
}

/// An encoded sentence pair with gold actions, ready for training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    /// EOS-terminated source ids.
    pub source: Vec<usize>,
    /// EOS-terminated target ids.
    pub target: Vec<usize>,
    /// Gold arc-standard actions; exactly `target.len()` SHIFTs.
    pub actions: Vec<Action>,
}

/// Random projective tree over `len` tokens (EOS root at the last index),
/// built by recursive interval splitting with uniform head choices.
pub fn random_projective_tree<R: Rng>(rng: &mut R, len: usize, num_labels: usize) -> DepTree {
    assert!(len >= 2, "need at least one token plus EOS");
    assert!(num_labels >= 1);
    let mut heads: Vec<Option<usize>> = vec![None; len];
    let mut labels: Vec<Option<LabelId>> = vec![None; len];
    attach(
        rng,
        0,
        len as isize - 2,
        len - 1,
        &mut heads,
        &mut labels,
        num_labels,
    );
    DepTree::new(heads, labels).expect("construction is projective and single-rooted")
}

fn attach<R: Rng>(
    rng: &mut R,
    lo: isize,
    hi: isize,
    head: usize,
    heads: &mut [Option<usize>],
    labels: &mut [Option<LabelId>],
    num_labels: usize,
) {
    if lo > hi {
        return;
    }
    let m = rng.gen_range(lo..=hi);
    heads[m as usize] = Some(head);
    labels[m as usize] = Some(rng.gen_range(0..num_labels));
    attach(rng, lo, m - 1, m as usize, heads, labels, num_labels);
    if m < hi {
        // Either nest the right part under m or hang another child off the
        // same head; both keep every subtree in a contiguous interval.
        let parent = if rng.gen_bool(0.5) { m as usize } else { head };
        attach(rng, m + 1, hi, parent, heads, labels, num_labels);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree(heads: &[isize], labels: &[usize]) -> DepTree {
        let h = heads
            .iter()
            .map(|&x| if x < 0 { None } else { Some(x as usize) })
            .collect();
        let l = heads
            .iter()
            .zip(labels)
            .map(|(&h, &l)| if h < 0 { None } else { Some(l) })
            .collect();
        DepTree::new(h, l).unwrap()
    }

    #[test]
    fn vocab_cutoff_one_keeps_everything() {
        let v = Vocabulary::build(["a b c", "a b", "a"], 1).unwrap();
        for tok in ["a", "b", "c"] {
            assert_ne!(v.encode_token(tok), UNK_ID);
        }
        // frequency then spelling: a(3) b(2) c(1)
        assert_eq!(v.encode_token("a"), 2);
        assert_eq!(v.encode_token("b"), 3);
        assert_eq!(v.encode_token("c"), 4);
    }

    #[test]
    fn singleton_under_cutoff_two_maps_to_unk() {
        let v = Vocabulary::build(["a b", "a"], 2).unwrap();
        assert_ne!(v.encode_token("a"), UNK_ID);
        assert_eq!(v.encode_token("b"), UNK_ID);
    }

    #[test]
    fn encode_decode_roundtrip_and_eos() {
        let v = Vocabulary::build(["x y x"], 1).unwrap();
        let ids = v.encode_line("y x zzz");
        assert_eq!(*ids.last().unwrap(), EOS_ID);
        assert_eq!(ids[2], UNK_ID);
        for id in 0..v.len() {
            let tok = v.decode(id).unwrap().to_string();
            assert_eq!(v.encode_token(&tok), id);
        }
        assert!(v.decode(v.len()).is_err());
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Vocabulary::build(["   ", ""], 1).is_err());
    }

    #[test]
    fn conll_single_token_headed_by_eos() {
        let s = read_conll("1\thello\t0\troot\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].forms, vec!["hello".to_string(), EOS_TOKEN.to_string()]);
        assert_eq!(s[0].heads, vec![Some(1), None]);
    }

    #[test]
    fn conll_three_token_fields_match_file() {
        let input = "1\ta\t2\tdet\n2\tb\t0\troot\n3\tc\t2\tdobj\n";
        let s = read_conll(input).unwrap();
        assert_eq!(s[0].heads, vec![Some(1), Some(3), Some(1), None]);
        assert_eq!(
            s[0].labels,
            vec![
                Some("det".to_string()),
                Some("root".to_string()),
                Some("dobj".to_string()),
                None
            ]
        );
    }

    #[test]
    fn conll_cycle_rejected_with_line() {
        let input = "1\ta\t2\tx\n2\tb\t1\ty\n";
        match read_conll(input) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn conll_malformed_row_names_line() {
        let input = "1\ta\t0\troot\n\n1\tb\tnot-a-number\tx\n";
        match read_conll(input) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn conll_head_out_of_range_rejected() {
        match read_conll("1\ta\t5\tx\n") {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn chain_trees_are_projective() {
        for n in 2..8 {
            let heads: Vec<isize> = (0..n).map(|i| if i + 1 < n { i + 1 } else { -1 }).collect();
            let labels = vec![0; n as usize];
            assert!(is_projective(&tree(&heads, &labels)));
        }
    }

    #[test]
    fn canonical_crossing_is_not_projective() {
        // Tokens 0..3 plus EOS root at 4: arcs 0->2 and 1->3 cross.
        let t = tree(&[2, 3, 4, 2, -1], &[0, 0, 0, 0, 0]);
        assert!(!is_projective(&t));
    }

    /// Brute-force pairwise crossing check used as the independent route.
    fn crossing_pairs(t: &DepTree) -> bool {
        let arcs: Vec<(usize, usize)> = t.arcs().map(|(d, h, _)| (d.min(h), d.max(h))).collect();
        for (i, &(a, b)) in arcs.iter().enumerate() {
            for &(c, d) in arcs.iter().skip(i + 1) {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn projectivity_agrees_with_pairwise_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut non_projective_seen = 0;
        for _ in 0..200 {
            let n = rng.gen_range(3..10);
            // Random single-rooted head assignments, keeping the acyclic ones.
            let mut heads: Vec<Option<usize>> = vec![None; n];
            let root = n - 1;
            for i in 0..n {
                if i == root {
                    continue;
                }
                loop {
                    let h = rng.gen_range(0..n);
                    if h != i {
                        heads[i] = Some(h);
                        break;
                    }
                }
            }
            let labels = vec![Some(0); n];
            let t = match DepTree::new(heads, labels) {
                Ok(t) => t,
                Err(_) => continue,
            };
            if crossing_pairs(&t) {
                non_projective_seen += 1;
            }
            assert_eq!(is_projective(&t), !crossing_pairs(&t));
        }
        assert!(
            non_projective_seen > 10,
            "sweep never hit the crossing case"
        );
    }

    #[test]
    fn oracle_two_token_sequence() {
        // (w1, EOS), head(w1) = EOS
        let t = tree(&[1, -1], &[0, 0]);
        let actions = tree_to_actions(&t).unwrap();
        assert_eq!(
            actions,
            vec![Action::Shift, Action::Shift, Action::ReduceLeft(0)]
        );
        assert_eq!(actions_to_tree(&actions, 2).unwrap(), t);
    }

    #[test]
    fn oracle_three_token_sequence() {
        // (w1, w2, EOS), head(w1) = w2 with label 1, head(w2) = EOS label 0.
        let t = tree(&[1, 2, -1], &[1, 0, 0]);
        let actions = tree_to_actions(&t).unwrap();
        assert_eq!(
            actions,
            vec![
                Action::Shift,
                Action::Shift,
                Action::ReduceLeft(1),
                Action::Shift,
                Action::ReduceLeft(0)
            ]
        );
        assert_eq!(actions_to_tree(&actions, 3).unwrap(), t);
    }

    /// Exhaustive check: of all legal terminal sequences over 3 tokens, the
    /// oracle output is one that reproduces the tree.
    #[test]
    fn oracle_output_among_exhaustive_reproducers() {
        let t = tree(&[1, 2, -1], &[1, 0, 0]);
        let mut found = Vec::new();
        enumerate_sequences(3, 2, &mut Vec::new(), &mut found);
        let reproducing: Vec<_> = found
            .into_iter()
            .filter(|seq| actions_to_tree(seq, 3).map(|x| x == t).unwrap_or(false))
            .collect();
        let oracle = tree_to_actions(&t).unwrap();
        assert!(reproducing.contains(&oracle));
    }

    fn enumerate_sequences(
        tokens: usize,
        labels: usize,
        prefix: &mut Vec<Action>,
        out: &mut Vec<Vec<Action>>,
    ) {
        let shifts = prefix.iter().filter(|a| matches!(a, Action::Shift)).count();
        let depth = shifts - (prefix.len() - shifts);
        if shifts == tokens && depth == 1 {
            out.push(prefix.clone());
            return;
        }
        if prefix.len() >= 2 * tokens - 1 {
            return;
        }
        if shifts < tokens {
            prefix.push(Action::Shift);
            enumerate_sequences(tokens, labels, prefix, out);
            prefix.pop();
        }
        if depth >= 2 {
            for l in 0..labels {
                for a in [Action::ReduceLeft(l), Action::ReduceRight(l)] {
                    prefix.push(a);
                    enumerate_sequences(tokens, labels, prefix, out);
                    prefix.pop();
                }
            }
        }
    }

    #[test]
    fn reduce_right_convention() {
        // [SHIFT, SHIFT, REDUCE-R(x)] on 2 tokens: token 1 headed by token 0.
        let actions = vec![Action::Shift, Action::Shift, Action::ReduceRight(3)];
        let t = actions_to_tree(&actions, 2).unwrap();
        assert_eq!(t.head(1), Some(0));
        assert_eq!(t.label(1), Some(3));
        assert_eq!(t.head(0), None);
    }

    #[test]
    fn truncated_sequence_is_error() {
        let actions = vec![Action::Shift, Action::Shift];
        assert!(matches!(
            actions_to_tree(&actions, 2),
            Err(CoreError::IllegalTransition { .. })
        ));
    }

    #[test]
    fn roundtrip_on_200_random_trees_with_length_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len = rng.gen_range(2..=15);
            let t = random_projective_tree(&mut rng, len, 5);
            let actions = tree_to_actions(&t).unwrap();
            assert_eq!(actions.len(), 2 * len - 1);
            assert_eq!(
                actions
                    .iter()
                    .filter(|a| matches!(a, Action::Shift))
                    .count(),
                len
            );
            let back = actions_to_tree(&actions, len).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn filter_drops_long_and_empty() {
        let parse = read_conll("1\ta\t0\troot\n").unwrap().remove(0);
        let mk = |src: usize, tgt: usize| RawExample {
            source: (0..src).map(|i| format!("s{i}")).collect(),
            target: (0..tgt).map(|i| format!("t{i}")).collect(),
            parse: parse.clone(),
        };
        let (kept, stats) = filter_corpus(vec![mk(51, 3), mk(3, 3), mk(0, 3), mk(3, 51)], 50);
        assert_eq!(kept.len(), 1);
        assert_eq!(stats.kept, 1);
        assert_eq!(stats.dropped_long, 2);
        assert_eq!(stats.dropped_empty, 1);

        let (kept, stats) = filter_corpus(vec![mk(2, 2), mk(50, 50)], 50);
        assert_eq!(kept.len(), 2);
        assert_eq!(stats.dropped_long + stats.dropped_empty, 0);
    }
}
