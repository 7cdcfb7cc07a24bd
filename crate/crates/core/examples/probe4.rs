//! Scratch probe for the end-to-end acceptance config. Not shipped.

use seizurecast_core::dataset::{make_folds, mine_pairs_subset};
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::Model2;
use seizurecast_core::synth::pseudo_corpus;
use seizurecast_core::train::{
    evaluate, featurize, roc_auc, score_indices, train_model2, TrainConfig,
};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let ds = pseudo_corpus::<f64>(3, 12, 40).unwrap();
    let mfcc = MfccConfig::default();
    let set = featurize(&ds, &mfcc).unwrap();
    println!("featurize: {:.1} s", t0.elapsed().as_secs_f64());

    let plan = make_folds(&ds, 4, 9).unwrap();
    let train_idx = plan.train_indices(0);
    let held_idx = plan.fold_indices(0);
    let pairs = mine_pairs_subset(&ds, &train_idx, 21).unwrap();

    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(40);
    let batch: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(27);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.003);

    let cfg = TrainConfig {
        epochs,
        batch,
        lr,
        seed: 13,
        ..TrainConfig::default()
    };
    let mut model: Model2<f64> = Model2::build(5).unwrap();
    let t1 = Instant::now();
    let report = train_model2(&mut model, &set, &pairs, &cfg).unwrap();
    println!(
        "train {} steps in {:.1} s; first/last epoch loss {:.4} / {:.4}",
        report.total_steps,
        t1.elapsed().as_secs_f64(),
        report.history.first().unwrap().mean_loss,
        report.history.last().unwrap().mean_loss
    );

    let scores = score_indices(&model, &set, &held_idx).unwrap();
    let labels = set.labels_u8(&held_idx);
    let auc = roc_auc(&scores, &labels).unwrap();
    let metrics = evaluate(&model, &set, &held_idx, 0.5).unwrap();
    println!("held-out auc {auc:.4} accuracy {:.4}", metrics.accuracy);
    let mut pre: Vec<f64> = Vec::new();
    let mut inter: Vec<f64> = Vec::new();
    for (s, y) in scores.iter().zip(&labels) {
        if *y == 1 {
            pre.push(*s);
        } else {
            inter.push(*s);
        }
    }
    pre.sort_by(f64::total_cmp);
    inter.sort_by(f64::total_cmp);
    println!("pre-ictal scores    {pre:.3?}");
    println!("interictal scores   {inter:.3?}");
    println!("total {:.1} s", t0.elapsed().as_secs_f64());
}
