use seizurecast_core::models::Model2;
use seizurecast_core::train::{evaluate, score_indices, train_model2, FeatureSet, TrainConfig};
use seizurecast_core::dataset::{Pair, PairStream};
use seizurecast_core::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn textured_features(per_class: usize, strength: f64, seed: u64) -> FeatureSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Vec::new();
    let mut labels = Vec::new();
    let mut subs = Vec::new();
    for c in 0..2u8 {
        for _ in 0..per_class {
            let sign = if c == 1 { 1.0 } else { -1.0 };
            let mut data = vec![0.0f64; 23 * 13 * 201];
            for ch in 0..23 {
                for co in 0..13 {
                    for t in 0..201 {
                        let mut v = rng.gen_range(-0.1..0.1);
                        if co == 0 {
                            v += 2.0;
                        } else if co <= 4 {
                            v += sign * strength;
                        }
                        data[(ch * 13 + co) * 201 + t] = v;
                    }
                }
            }
            maps.push(Tensor::from_vec(&[23, 13, 201], data).unwrap());
            labels.push(c as f64);
            subs.push(1);
        }
    }
    FeatureSet { maps, labels, subjects: subs }
}

fn run(set: &FeatureSet<f64>, dseed: u64, lr: f64, epochs: usize, batch: usize, mseed: u64) {
    let n = set.maps.len();
    // Every ordered pair without self-pairs.
    let mut pairs = Vec::new();
    for i in 0..n {
        pairs.push(Pair { primary: i, secondary: (i + 1) % n, same_patient: true });
    }
    let stream = PairStream { pairs, seed: 0 };
    let mut model: Model2<f64> = Model2::build(mseed).unwrap();
    let cfg = TrainConfig { epochs, batch, lr, seed: 11, gamma: 0.0, ..TrainConfig::default() };
    let rep = train_model2(&mut model, &set, &stream, &cfg).unwrap();
    let last = rep.history.last().unwrap().mean_loss;
    let idx: Vec<usize> = (0..n).collect();
    let m = evaluate(&model, &set, &idx, 0.5).unwrap();
    let s = score_indices(&model, &set, &idx).unwrap();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "dseed {} mseed {}: loss_end {:.4} acc {:.2} scores [{:.4}, {:.4}]",
        dseed, mseed, last, m.accuracy, smin, smax
    );
}

fn main() {
    for dseed in [9u64, 10] {
        let set = textured_features(2, 0.5, dseed);
        for mseed in [0u64, 1, 2, 3, 4, 5] {
            run(&set, dseed, 0.001, 50, 4, mseed);
        }
    }
}
