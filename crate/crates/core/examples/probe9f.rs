//! Scratch probe: microscope on fine-tune gradient flow. Not shipped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seizurecast_core::dataset::split_lopo;
use seizurecast_core::mfcc::MfccConfig;
use seizurecast_core::models::{model1_loss, Model1};
use seizurecast_core::nn::adam::{AdamConfig, AdamState};
use seizurecast_core::nn::graph::Mode;
use seizurecast_core::synth::idiosyncratic_corpus;
use seizurecast_core::tensor::Tensor;
use seizurecast_core::train::{featurize, score_indices, train_model1, FeatureSet, TrainConfig};

fn stack(set: &FeatureSet<f64>, idx: &[usize]) -> Tensor<f64> {
    let maps: Vec<&Tensor<f64>> = idx.iter().map(|&i| &set.maps[i]).collect();
    Tensor::stack(&maps).unwrap()
}

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

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut order: Vec<usize> = (0..held_set.len()).collect();
    order.shuffle(&mut rng);
    let (val_idx, pool) = order.split_at(4);
    println!("pool labels {:?}", held_set.labels_u8(pool));

    let adam_cfg = AdamConfig {
        lr: 0.003,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&model.graph.params);
    let mut step_rng = ChaCha8Rng::seed_from_u64(100);
    for step in 0..60 {
        let chunk: Vec<usize> = pool.iter().copied().skip((step * 6) % 16).take(6).collect();
        let chunk = if chunk.len() < 6 { pool[..6].to_vec() } else { chunk };
        let x = stack(&held_set, &chunk);
        let y: Vec<f64> = chunk.iter().map(|&i| held_set.labels[i]).collect();
        let yp: Vec<usize> = chunk
            .iter()
            .map(|&i| held_set.subjects[i] as usize - 1)
            .collect();
        let fwd = model
            .graph
            .forward(&[&x], Mode::Train, Some(&mut step_rng))
            .unwrap();
        let p = fwd.value(model.p_seizure);
        let (loss, gp, gq) = model1_loss(p, fwd.value(model.q_patient), &y, &yp, 1.0).unwrap();
        let grads = model
            .graph
            .backward(&fwd, &[(model.p_seizure, gp), (model.q_patient, gq)])
            .unwrap();
        if step % 10 == 0 || step < 3 {
            let p_str: Vec<String> = p.data().iter().map(|v| format!("{v:.3}")).collect();
            println!(
                "step {step:2} loss {loss:.4} y {:?} p(train) [{}]",
                y.iter().map(|v| *v as u8).collect::<Vec<_>>(),
                p_str.join(", ")
            );
            for id in model.graph.params.ids() {
                let g = grads.param(id);
                let n = g.norm();
                if n > 1e-12 || step == 0 {
                    let w = model.graph.params.get(id).norm();
                    println!("    {:22} |g| {n:10.3e} |w| {w:8.3}", model.graph.params.name(id));
                }
            }
            let val = score_indices(&model, &held_set, val_idx).unwrap();
            println!("    val(eval) {val:.3?}");
        }
        state
            .apply(&mut model.graph.params, &grads, &adam_cfg)
            .unwrap();
        model.apply_maxnorm();
    }
    let val = score_indices(&model, &held_set, val_idx).unwrap();
    println!("final val scores {val:.3?} labels {:?}", held_set.labels_u8(val_idx));
}
