//! Scratch probe: raw validation scores around fine-tuning. Not shipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seizurecast_core::dataset::split_lopo;
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::Model1;
use seizurecast_core::synth::idiosyncratic_corpus;
use seizurecast_core::train::{featurize, score_indices, train_model1, TrainConfig};

fn main() {
    let ds = idiosyncratic_corpus::<f64>(3, 10, 31).unwrap();
    let mfcc = MfccConfig::default();
    let subject = 1u32;
    let (train_ds, held_ds) = split_lopo(&ds, subject).unwrap();
    let train_set = featurize(&train_ds, &mfcc).unwrap();
    let held_set = featurize(&held_ds, &mfcc).unwrap();
    let all: Vec<usize> = (0..train_set.len()).collect();
    let pre_cfg = TrainConfig {
        epochs: 25,
        batch: 20,
        lr: 0.01,
        seed: 18,
        ..TrainConfig::default()
    };
    let mut model: Model1<f64> = Model1::build(pre_cfg.seed).unwrap();
    let report = train_model1(&mut model, &train_set, &all, &pre_cfg).unwrap();
    println!(
        "pretrain loss {:.4} -> {:.4}",
        report.history.first().unwrap().mean_loss,
        report.history.last().unwrap().mean_loss
    );
    let train_scores = score_indices(&model, &train_set, &all).unwrap();
    println!(
        "pretrain train-set score range {:.3}..{:.3}",
        train_scores.iter().cloned().fold(f64::INFINITY, f64::min),
        train_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );
    let acc = {
        let labels = train_set.labels_u8(&all);
        let hits = train_scores
            .iter()
            .zip(&labels)
            .filter(|(s, y)| (**s >= 0.5) == (**y == 1))
            .count();
        hits as f64 / labels.len() as f64
    };
    println!("pretrain train-set accuracy {acc:.3}");

    // Mirror the fine_tune split for seed 100.
    let seed = 100u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..held_set.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (held_set.len() / 5).max(1);
    let (val_idx, pool) = order.split_at(n_val);

    let val_labels = held_set.labels_u8(val_idx);
    let before = score_indices(&model, &held_set, val_idx).unwrap();
    println!("val labels {val_labels:?}");
    println!("val scores before {before:.3?}");

    let mut tuned = model.clone();
    let ft = TrainConfig {
        epochs: 15,
        batch: 6,
        lr: 0.03,
        seed,
        lambda: 1.0,
        ..TrainConfig::default()
    };
    let rep = train_model1(&mut tuned, &held_set, pool, &ft).unwrap();
    println!(
        "tune loss {:.4} -> {:.4} over {} steps",
        rep.history.first().unwrap().mean_loss,
        rep.history.last().unwrap().mean_loss,
        rep.total_steps
    );
    let after = score_indices(&tuned, &held_set, val_idx).unwrap();
    println!("val scores after  {after:.3?}");
    let pool_scores = score_indices(&tuned, &held_set, pool).unwrap();
    let pool_labels = held_set.labels_u8(pool);
    println!("pool labels {pool_labels:?}");
    println!("pool scores after {pool_scores:.3?}");
}
