//! `gradcheck`: verifies analytic gradients of the full joint loss (and its
//! word/action parts) against central finite differences on a tiny model,
//! exiting non-zero when any relative error reaches the threshold.

use clap::Args as ClapArgs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parslate_core::gradcheck::grad_check;
use parslate_core::model::{AblationFlags, ModelConfig};
use parslate_core::oracle::{random_projective_tree, tree_to_actions, SentencePair, EOS_ID};
use parslate_core::trainer::init_parameters;

use crate::error::{CmdError, CmdResult};

#[derive(Debug, ClapArgs)]
pub struct Args {
    #[arg(long, default_value_t = 6)]
    pub word_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub action_dim: usize,
    #[arg(long, default_value_t = 6)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 12)]
    pub src_vocab: usize,
    #[arg(long, default_value_t = 14)]
    pub tgt_vocab: usize,
    #[arg(long, default_value_t = 3)]
    pub labels: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Maximum allowed relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn toy_pairs(args: &Args) -> Vec<SentencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x70_79);
    (0..2)
        .map(|_| {
            let src_len = rng.gen_range(2..=4);
            let tgt_len = rng.gen_range(2..=4);
            let mut source: Vec<usize> = (0..src_len)
                .map(|_| rng.gen_range(2..args.src_vocab))
                .collect();
            source.push(EOS_ID);
            let mut target: Vec<usize> = (0..tgt_len)
                .map(|_| rng.gen_range(2..args.tgt_vocab))
                .collect();
            target.push(EOS_ID);
            let tree = random_projective_tree(&mut rng, target.len(), args.labels);
            SentencePair {
                actions: tree_to_actions(&tree).expect("generated trees are projective"),
                source,
                target,
            }
        })
        .collect()
}

pub fn run(args: &Args) -> CmdResult {
    let config = ModelConfig {
        src_vocab: args.src_vocab,
        tgt_vocab: args.tgt_vocab,
        num_labels: args.labels,
        word_dim: args.word_dim,
        action_dim: args.action_dim,
        hidden_dim: args.hidden_dim,
        ablation: AblationFlags::default(),
    };
    let (mut store, model) = init_parameters(config, args.seed)?;
    // Zero-initialized softmax weights would hide upstream errors behind
    // exactly-zero gradients, so move every slot off its init point.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5eed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for x in store.value_mut(id).data_mut() {
            *x += rng.gen_range(-0.05..=0.05);
        }
    }
    let pairs = toy_pairs(args);
    println!(
        "gradcheck: dims=({}, {}, {}) vocabs=({}, {}) labels={} parameters={} epsilon={} threshold={}",
        args.word_dim,
        args.action_dim,
        args.hidden_dim,
        args.src_vocab,
        args.tgt_vocab,
        args.labels,
        store.num_scalars(),
        args.epsilon,
        args.threshold,
    );

    let mut failed = false;
    for (name, which) in [("joint", 0usize), ("words", 1), ("actions", 2)] {
        let pairs = pairs.clone();
        let model_ref = &model;
        let report = grad_check(
            &mut store,
            move |store, tape| {
                let mut terms = Vec::new();
                for pair in &pairs {
                    let loss = model_ref.joint_nll(
                        tape,
                        store,
                        &pair.source,
                        &pair.target,
                        &pair.actions,
                    )?;
                    terms.push(match which {
                        0 => loss.total,
                        1 => loss.word_nll,
                        _ => loss.action_nll,
                    });
                }
                tape.sum_scalars(&terms)
            },
            args.epsilon,
        )?;
        let verdict = if report.max_rel_err < args.threshold {
            "ok"
        } else {
            failed = true;
            "FAIL"
        };
        println!(
            "loss={name} checked={} max_rel_err={:.3e} worst_slot={}[{}] {verdict}",
            report.checked, report.max_rel_err, report.worst_slot, report.worst_index
        );
    }
    if failed {
        return Err(CmdError::validation(format!(
            "a gradient check exceeded the {} relative-error threshold",
            args.threshold
        )));
    }
    Ok(())
}
