//! Scratch probe: is the pretrained encoder alive, and is the held
//! subject's data separable from scratch? Not shipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seizurecast_core::dataset::split_lopo;
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::Model1;
use seizurecast_core::nn::graph::Mode;
use seizurecast_core::synth::idiosyncratic_corpus;
use seizurecast_core::tensor::Tensor;
use seizurecast_core::train::{featurize, score_indices, train_model1, FeatureSet, TrainConfig};

fn embedding_spread(model: &Model1<f64>, set: &FeatureSet<f64>, idx: &[usize]) -> (f64, f64) {
    let maps: Vec<&Tensor<f64>> = idx.iter().map(|&i| &set.maps[i]).collect();
    let x = Tensor::stack(&maps).unwrap();
    let fwd = model.graph.forward(&[&x], Mode::Eval, None).unwrap();
    let e = fwd.value(model.embedding);
    let b = e.shape()[0];
    let k = e.shape()[1];
    // Mean range across embedding coordinates, plus overall rms.
    let mut range_sum = 0.0;
    for j in 0..k {
        let col: Vec<f64> = (0..b).map(|i| e.data()[i * k + j]).collect();
        let mn = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        range_sum += mx - mn;
    }
    let rms = (e.data().iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt();
    (range_sum / k as f64, rms)
}

fn main() {
    let ds = idiosyncratic_corpus::<f64>(3, 10, 31).unwrap();
    let mfcc = MfccConfig::default();
    let subject = 1u32;
    let (train_ds, held_ds) = split_lopo(&ds, subject).unwrap();
    let train_set = featurize(&train_ds, &mfcc).unwrap();
    let held_set = featurize(&held_ds, &mfcc).unwrap();
    let all_train: Vec<usize> = (0..train_set.len()).collect();
    let all_held: Vec<usize> = (0..held_set.len()).collect();

    let mut fresh: Model1<f64> = Model1::build(18).unwrap();
    let (r0, rms0) = embedding_spread(&fresh, &held_set, &all_held);
    println!("fresh model: embedding mean-range {r0:.4} rms {rms0:.4}");

    let pre_cfg = TrainConfig {
        epochs: 25,
        batch: 20,
        lr: 0.01,
        seed: 18,
        ..TrainConfig::default()
    };
    train_model1(&mut fresh, &train_set, &all_train, &pre_cfg).unwrap();
    let (r1, rms1) = embedding_spread(&fresh, &held_set, &all_held);
    println!("pretrained (conflict): embedding mean-range {r1:.4} rms {rms1:.4}");

    // From-scratch training on the held subject's pool: is the
    // amplitude coding separable at all?
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut order: Vec<usize> = (0..held_set.len()).collect();
    order.shuffle(&mut rng);
    let (val_idx, pool) = order.split_at(4);
    let mut scratch: Model1<f64> = Model1::build(77).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        batch: 6,
        lr: 0.01,
        seed: 100,
        lambda: 1.0,
        ..TrainConfig::default()
    };
    let rep = train_model1(&mut scratch, &held_set, pool, &cfg).unwrap();
    println!(
        "scratch on held subject: loss {:.4} -> {:.4} over {} steps",
        rep.history.first().unwrap().mean_loss,
        rep.history.last().unwrap().mean_loss,
        rep.total_steps
    );
    let pool_scores = score_indices(&scratch, &held_set, pool).unwrap();
    let pool_labels = held_set.labels_u8(pool);
    let hits = pool_scores
        .iter()
        .zip(&pool_labels)
        .filter(|(s, y)| (**s >= 0.5) == (**y == 1))
        .count();
    println!(
        "scratch train-pool accuracy {:.3}",
        hits as f64 / pool_labels.len() as f64
    );
    let val_scores = score_indices(&scratch, &held_set, val_idx).unwrap();
    println!("scratch val scores {val_scores:.3?}");
    println!("val labels {:?}", held_set.labels_u8(val_idx));
}
