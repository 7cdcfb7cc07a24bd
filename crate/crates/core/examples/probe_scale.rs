//! Scratch probe: feature scale and initial pair distance vs corpus
//! amplitudes. Not shipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seizurecast_core::mfcc::{mfcc_map, MfccConfig};
use seizurecast_core::models::Model2;
use seizurecast_core::nn::graph::Mode;
use seizurecast_core::tensor::Tensor;

const FS: f64 = 256.0;
const N: usize = 2560;

fn window(rng: &mut ChaCha8Rng, dc: f64, patient_hz: f64, a_pat: f64, class_hz: f64, a_cls: f64, noise: f64) -> Tensor<f64> {
    let phase_p = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_c = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut data = Vec::with_capacity(23 * N);
    for _ch in 0..23 {
        for i in 0..N {
            let t = i as f64 / FS;
            let mut v = dc;
            v += a_pat * (std::f64::consts::TAU * patient_hz * t + phase_p).sin();
            v += a_cls * (std::f64::consts::TAU * class_hz * t + phase_c).sin();
            v += rng.gen_range(-noise..noise);
            data.push(v);
        }
    }
    Tensor::from_vec(&[23, N], data).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dc_unit: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(12.0);
    let a_pat: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8.0);
    let a_cls: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(30.0);
    let noise: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = MfccConfig::default();

    // Two windows from different pseudo-patients, different classes.
    let w1 = window(&mut rng, dc_unit, 3.0, a_pat, 22.0, a_cls, noise);
    let w2 = window(&mut rng, 2.0 * dc_unit, 5.0, a_pat, 45.0, a_cls, noise);
    let m1 = mfcc_map(&w1, &cfg, FS).unwrap().values;
    let m2 = mfcc_map(&w2, &cfg, FS).unwrap().values;

    for (name, m) in [("map1", &m1), ("map2", &m2)] {
        let d = m.data();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let mn = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
        println!("{name}: mean {mean:+.2} rms {rms:.2} min {mn:+.2} max {mx:+.2}");
    }

    let model: Model2<f64> = Model2::build(5).unwrap();
    let xa = Tensor::stack(&[&m1]).unwrap();
    let xb = Tensor::stack(&[&m2]).unwrap();
    let fwd = model.graph.forward(&[&xa, &xb], Mode::Eval, None).unwrap();
    let d0 = fwd.value(model.distance).data()[0];
    let p0 = fwd.value(model.p_seizure).data()[0];
    println!("initial distance {d0:.3}  p_seizure {p0:.3}");
}
