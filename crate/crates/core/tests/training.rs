use cardindex::armodel::{train, walk_probs, TrainConfig};
use cardindex::data::{gen_synthetic, ExactOracle, SynthKind, SynthParams};

#[test]
fn trained_conditionals_track_the_oracle() {
    let t = gen_synthetic(&SynthParams::new(SynthKind::GaussianClusters, 256, 2, 4, 7)).unwrap();
    let spec = t.bit_spec().unwrap();
    let keys = t.keys(&spec).unwrap();
    let cfg = TrainConfig { epochs: 300, batch_size: 32, learning_rate: 1e-2, link: 8, ell: 8, ..Default::default() };
    let (net, _) = train(&keys, 8, &cfg).unwrap();
    let oracle = ExactOracle::new(keys.clone(), 8).unwrap();
    let mut total = 0.0;
    let mut count = 0.0;
    for &z in &keys {
        for (a, b) in walk_probs(&net, z, 8).iter().zip(walk_probs(&oracle, z, 8)) {
            total += (a - b).abs();
            count += 1.0;
        }
    }
    let mean = total / count;
    assert!(mean < 0.1, "mean conditional gap {mean}");
}
