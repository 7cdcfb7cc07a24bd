//! Scratch probe for the transfer acceptance config. Not shipped.

use seizurecast_core::dataset::split_lopo;
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::Model1;
use seizurecast_core::synth::idiosyncratic_corpus;
use seizurecast_core::train::{featurize, fine_tune, train_model1, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let per_class: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let pre_epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(25);
    let pre_lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let ft_epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(15);
    let ft_lr: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.03);

    let t0 = Instant::now();
    let ds = idiosyncratic_corpus::<f64>(3, per_class, 31).unwrap();
    let mfcc = MfccConfig::default();

    for subject in 1..=3u32 {
        let (train_ds, held_ds) = split_lopo(&ds, subject).unwrap();
        let train_set = featurize(&train_ds, &mfcc).unwrap();
        let held_set = featurize(&held_ds, &mfcc).unwrap();
        let all: Vec<usize> = (0..train_set.len()).collect();
        let pre_cfg = TrainConfig {
            epochs: pre_epochs,
            batch: 20,
            lr: pre_lr,
            seed: 17 + subject as u64,
            ..TrainConfig::default()
        };
        let mut model: Model1<f64> = Model1::build(pre_cfg.seed).unwrap();
        let t1 = Instant::now();
        train_model1(&mut model, &train_set, &all, &pre_cfg).unwrap();
        let pre_secs = t1.elapsed().as_secs_f64();

        for seed in [100u64, 101, 102] {
            let cfg = TrainConfig {
                epochs: ft_epochs,
                lr: ft_lr,
                seed,
                fine_tune_batch: Some(6),
                ..TrainConfig::default()
            };
            let out = fine_tune(&model, &held_set, subject, None, &cfg).unwrap();
            println!(
                "subject {subject} seed {seed}: baseline {:.3} tuned {:.3} (n_used {}, batch {}, pretrain {:.0} s)",
                out.baseline.accuracy, out.tuned.accuracy, out.n_used, out.batch_used, pre_secs
            );
        }
    }
    println!("total {:.0} s", t0.elapsed().as_secs_f64());
}
