//! Scratch probe: fine-tune step budgets from a conflicted pretrain.
//! Not shipped.

use seizurecast_core::dataset::split_lopo;
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::Model1;
use seizurecast_core::synth::idiosyncratic_corpus;
use seizurecast_core::train::{featurize, fine_tune, train_model1, TrainConfig};
use std::time::Instant;

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
    train_model1(&mut model, &train_set, &all, &pre_cfg).unwrap();

    for (epochs, lr) in [(15usize, 0.01), (15, 0.03), (30, 0.03), (60, 0.03), (60, 0.1)] {
        let t = Instant::now();
        let cfg = TrainConfig {
            epochs,
            lr,
            seed: 100,
            fine_tune_batch: Some(6),
            ..TrainConfig::default()
        };
        let out = fine_tune(&model, &held_set, subject, None, &cfg).unwrap();
        println!(
            "epochs {epochs:3} lr {lr:<5}: baseline {:.3} tuned {:.3} ({:.0} s)",
            out.baseline.accuracy,
            out.tuned.accuracy,
            t.elapsed().as_secs_f64()
        );
    }
}
