mod common;

use common::{gradcheck_arch, model_gradient_error, random_tensor, relative_error, FD_STEP};
use polypscope::nnet::{ArchConfig, BlockSpec, ConvLayer, ResidualBlock, Shortcut, Tensor};
use polypscope::RandomStream;

#[test]
fn both_shortcut_types_match_finite_differences() {
    let arch = gradcheck_arch();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let e = model_gradient_error(&arch, seed, 6);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
        worst = worst.max(e);
    }
    eprintln!("worst relative error over 20 seeds: {worst:.2e}");
}

#[test]
fn affine_head_only() {
    let arch = ArchConfig {
        in_channels: 3,
        stem_channels: 4,
        blocks: vec![],
    };
    for seed in 100..110 {
        let e = model_gradient_error(&arch, seed, 4);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn default_layout_spot_check() {
    let arch = ArchConfig {
        blocks: vec![
            BlockSpec { out_channels: 4, stride: 1 },
            BlockSpec { out_channels: 6, stride: 2 },
            BlockSpec { out_channels: 6, stride: 1 },
            BlockSpec { out_channels: 8, stride: 2 },
        ],
        stem_channels: 4,
        in_channels: 3,
    };
    for seed in 200..203 {
        let e = model_gradient_error(&arch, seed, 8);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

/// Loss `sum(y * r)` for a fixed random `r`, so that `dL/dy = r`.
fn block_gradient_error(block: &ResidualBlock, x: &Tensor, r: &Tensor) -> f64 {
    let loss = |b: &ResidualBlock, x: &Tensor| -> f64 {
        let y = b.forward(x).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    let cache = block.forward_cached(x).unwrap();
    let mut grads = ResidualBlock::zeros(block.in_channels(), block.out_channels(), block.stride()).unwrap();
    let dx = block.backward(x, &cache, r, &mut grads).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..x.data().len() {
        let at = |d: f64| {
            let mut xx = x.clone();
            xx.data_mut()[i] += d;
            loss(block, &xx)
        };
        let numeric = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(dx.data()[i], numeric, 1e-6));
    }
    // Spot-check the body weights.
    for i in 0..block.conv1.weights.len() {
        let at = |d: f64| {
            let mut b = block.clone();
            b.conv1.weights[i] += d;
            loss(&b, x)
        };
        let numeric = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(grads.conv1.weights[i], numeric, 1e-6));
    }
    worst
}

fn random_block(cin: usize, cout: usize, stride: usize, rng: &mut RandomStream) -> ResidualBlock {
    let mut c1 = ConvLayer::zeros(3, cin, cout, stride).unwrap();
    let mut c2 = ConvLayer::zeros(3, cout, cout, 1).unwrap();
    c1.init_uniform(rng, 1.0);
    c2.init_uniform(rng, 1.0);
    let shortcut = if cin == cout && stride == 1 {
        Shortcut::Identity
    } else {
        let mut p = ConvLayer::zeros(1, cin, cout, stride).unwrap();
        p.init_uniform(rng, 1.0);
        Shortcut::Projection(p)
    };
    ResidualBlock::new(c1, c2, shortcut).unwrap()
}

#[test]
fn isolated_blocks() {
    for seed in 0..20 {
        let mut rng = RandomStream::new(seed);
        for (cin, cout, stride) in [(3, 3, 1), (3, 5, 2), (2, 4, 1)] {
            let block = random_block(cin, cout, stride, &mut rng);
            let x = random_tensor(vec![cin, 5, 5], &mut rng);
            let out = block.forward(&x).unwrap();
            let r = random_tensor(out.shape().to_vec(), &mut rng);
            let e = block_gradient_error(&block, &x, &r);
            assert!(e < 1e-4, "seed {seed} block {cin}->{cout}/{stride}: {e}");
        }
    }
}
