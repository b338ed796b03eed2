//! Kernels, resampling and the trainer checked against naive reference
//! implementations written here from the definitions.

mod common;

use common::oracle::{mean_loss, naive_conv, naive_pool, random_vec};

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use retrain::augment::{flip_h, resize, rot_plus90, rotate, Image};
use retrain::extractor::{conv2d, maxpool2d, relu, Kernels, Padding, Tensor3};
use retrain::trainer::{
    argmax, cross_entropy, loss_and_gradients, softmax, train, Example, SoftmaxLayer, TrainingConfig,
};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

// ---- conv / pool / relu ----

#[test]
fn conv_pool_relu_match_naive_loops() {
    let mut rng = common::rng(5);
    let mut checked = 0;
    while checked < 250 {
        let (h, w, c) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=4));
        let (n, kh, kw) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=3));
        let stride = rng.random_range(1..=2);
        let same = rng.random_bool(0.5);
        if !same && (kh > h || kw > w) {
            continue;
        }
        let x = random_vec(&mut rng, h * w * c);
        let k = random_vec(&mut rng, n * kh * kw * c);
        let input = Tensor3::new(h, w, c, x.clone()).unwrap();
        let kernels = Kernels::new(n, kh, kw, c, k.clone()).unwrap();
        let padding = if same { Padding::Same } else { Padding::Valid };
        let got = conv2d(&input, &kernels, stride, padding).unwrap();
        let (want, oh, ow) = naive_conv(&x, (h, w, c), &k, (n, kh, kw), stride, same);
        assert_eq!(got.shape(), (oh, ow, n));
        for (a, b) in got.data().iter().zip(&want) {
            assert!(rel_err(*a, *b) <= 1e-6 || (a - b).abs() < 1e-12, "conv {a} vs {b}");
        }

        let r = relu(&x);
        for (a, b) in r.iter().zip(&x) {
            assert_eq!(*a, if *b > 0.0 { *b } else { 0.0 });
        }

        if h >= 2 && w >= 2 {
            let pooled = maxpool2d(&input).unwrap();
            assert_eq!(pooled.shape(), (h / 2, w / 2, c));
            assert_eq!(pooled.data(), naive_pool(&x, (h, w, c)).as_slice());
        } else {
            assert!(maxpool2d(&input).is_err());
        }
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let (h, w, c, n) = (rng.random_range(3..=8), rng.random_range(3..=8), rng.random_range(1..=4), 2);
        let kernels = Kernels::new(n, 3, 3, c, random_vec(&mut rng, n * 9 * c)).unwrap();
        let x = random_vec(&mut rng, h * w * c);
        let y = random_vec(&mut rng, h * w * c);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let run = |v: Vec<f64>| conv2d(&Tensor3::new(h, w, c, v).unwrap(), &kernels, 1, Padding::Same).unwrap();
        let (cx, cy, cm) = (run(x), run(y), run(mix));
        for ((p, q), m) in cx.data().iter().zip(cy.data()).zip(cm.data()) {
            prop_assert!((a * p + q - m).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_is_shift_invariant(v in prop::collection::vec(-20.0f64..20.0, 1..8), s in -500.0f64..500.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
        let (p, q) = (softmax(&v), softmax(&shifted));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_survives_monotone_maps(v in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let i = argmax(&v);
        let cubed: Vec<f64> = v.iter().map(|x| 2.0 * x * x * x + 7.0).collect();
        prop_assert_eq!(argmax(&cubed), i);
        prop_assert_eq!(argmax(&softmax(&v)), i);
        prop_assert!(v.iter().all(|&x| x <= v[i]));
    }
}

// ---- resampling ----

fn naive_bilinear(src: &Image, tw: u32, th: u32) -> Vec<[f64; 3]> {
    let sx = src.width() as f64 / tw as f64;
    let sy = src.height() as f64 / th as f64;
    let mut out = Vec::new();
    for y in 0..th {
        for x in 0..tw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0).min(src.width() as f64 - 1.0);
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0).min(src.height() as f64 - 1.0);
            let (x0, y0) = (fx.floor() as u32, fy.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(src.width() - 1), (y0 + 1).min(src.height() - 1));
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            let mut px = [0.0; 3];
            for (c, v) in px.iter_mut().enumerate() {
                let g = |x, y| src.get(x, y)[c] as f64;
                *v = g(x0, y0) * (1.0 - ax) * (1.0 - ay)
                    + g(x1, y0) * ax * (1.0 - ay)
                    + g(x0, y1) * (1.0 - ax) * ay
                    + g(x1, y1) * ax * ay;
            }
            out.push(px);
        }
    }
    out
}

#[test]
fn resize_matches_naive_bilinear_on_checkerboard() {
    for square in [1, 7] {
        let mut src = Image::filled(400, 300, [0, 0, 0]).unwrap();
        for y in 0..300 {
            for x in 0..400 {
                if (x / square + y / square) % 2 == 0 {
                    src.put(x, y, [255, 200, 30]);
                }
            }
        }
        let got = resize(&src, 200, 150).unwrap();
        assert_eq!((got.width(), got.height()), (200, 150));
        for (i, want) in naive_bilinear(&src, 200, 150).iter().enumerate() {
            let have = got.get(i as u32 % 200, i as u32 / 200);
            for c in 0..3 {
                assert!((have[c] as f64 - want[c]).abs() <= 1.0, "pixel {i}: {have:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn rotation_matches_forward_affine_oracle() {
    // Channels encode source coordinates, so bilinear sampling is exact on them.
    let (w, h) = (100u32, 80u32);
    let mut src = Image::filled(w, h, [0, 0, 0]).unwrap();
    for y in 0..h {
        for x in 0..w {
            src.put(x, y, [(2 * x) as u8, (3 * y) as u8, 77]);
        }
    }
    for deg in [30.0f64, -30.0] {
        let out = rotate(&src, deg, [0, 0, 0]);
        let t = deg.to_radians();
        // Visual counterclockwise turn in a y-down frame.
        let bw = (w as f64 * t.cos().abs() + h as f64 * t.sin().abs()).ceil() as u32;
        let bh = (w as f64 * t.sin().abs() + h as f64 * t.cos().abs()).ceil() as u32;
        assert_eq!((out.width(), out.height()), (bw, bh));
        for y in 2..h - 2 {
            for x in 2..w - 2 {
                let dx = x as f64 + 0.5 - w as f64 / 2.0;
                let dy = y as f64 + 0.5 - h as f64 / 2.0;
                let ox = dx * t.cos() + dy * t.sin() + bw as f64 / 2.0;
                let oy = -dx * t.sin() + dy * t.cos() + bh as f64 / 2.0;
                let px = out.get(ox.floor() as u32, oy.floor() as u32);
                assert!((px[0] as f64 - 2.0 * x as f64).abs() <= 3.0, "{deg}: ({x},{y}) -> {px:?}");
                assert!((px[1] as f64 - 3.0 * y as f64).abs() <= 4.0, "{deg}: ({x},{y}) -> {px:?}");
                assert_eq!(px[2], 77);
            }
        }
        // Corners of the canvas lie outside the rotated source.
        assert_eq!(out.get(0, 0), [0, 0, 0]);
        assert_eq!(out.get(bw - 1, bh - 1), [0, 0, 0]);
    }
}

#[test]
fn flips_and_quarter_turns_compose_to_identity() {
    let mut rng = common::rng(9);
    for _ in 0..25 {
        let img = common::random_image(&mut rng, 40);
        assert_eq!(flip_h(&flip_h(&img)), img);
        let mut r = img.clone();
        for _ in 0..4 {
            r = rot_plus90(&r);
        }
        assert_eq!(r, img);
    }
}

// ---- trainer ----

fn random_layer(rng: &mut ChaCha8Rng, k: usize, d: usize) -> SoftmaxLayer {
    SoftmaxLayer::from_parts(k, d, random_vec(rng, k * d), random_vec(rng, k)).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Example> {
    (0..rng.random_range(1..=6))
        .map(|_| Example::new(random_vec(rng, d), rng.random_range(0..k)))
        .collect()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = common::rng(11);
    let eps = 1e-5;
    for _ in 0..120 {
        let (k, d) = (rng.random_range(2..=5), rng.random_range(1..=16));
        let layer = random_layer(&mut rng, k, d);
        let batch = random_batch(&mut rng, k, d);
        let refs: Vec<&Example> = batch.iter().collect();
        let (loss, gw, gb) = loss_and_gradients(&layer, &refs).unwrap();
        assert!(rel_err(loss, mean_loss(&layer, &batch)) < 1e-12);

        let nudge = |i: usize, delta: f64| {
            let mut w = layer.weights().to_vec();
            let mut b = layer.biases().to_vec();
            if i < k * d {
                w[i] += delta;
            } else {
                b[i - k * d] += delta;
            }
            mean_loss(&SoftmaxLayer::from_parts(k, d, w, b).unwrap(), &batch)
        };
        for (i, analytic) in gw.iter().chain(&gb).enumerate() {
            let numeric = (nudge(i, eps) - nudge(i, -eps)) / (2.0 * eps);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(err < 1e-5, "coordinate {i}: {analytic} vs {numeric}");
        }
    }
}

#[test]
fn forward_and_loss_match_definitions() {
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let (k, d) = (rng.random_range(1..=5), rng.random_range(1..=16));
        let layer = random_layer(&mut rng, k, d);
        let x = random_vec(&mut rng, d);
        let z = layer.forward(&x).unwrap();
        for c in 0..k {
            let mut s = layer.biases()[c];
            for j in 0..d {
                s += layer.weights()[c * d + j] * x[j];
            }
            assert!((z[c] - s).abs() < 1e-12);
        }
        let p = softmax(&z);
        let label = rng.random_range(0..k);
        let by_definition: f64 = (0..k)
            .map(|c| if c == label { -p[c].ln() } else { 0.0 })
            .sum();
        assert!((cross_entropy(&p, label) - by_definition).abs() < 1e-12);
    }
}

/// Linearly separable two-class points, labeled by a hidden hyperplane with
/// a margin.
fn separable_set(rng: &mut ChaCha8Rng) -> Vec<Example> {
    let normal = [1.0, -2.0, 0.5, 1.5];
    let mut out = Vec::new();
    while out.len() < 60 {
        let x = random_vec(rng, 4);
        let s: f64 = x.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() + 0.2;
        if s.abs() > 0.5 {
            out.push(Example::new(x, usize::from(s > 0.0)));
        }
    }
    out
}

fn perceptron_separates(set: &[Example]) -> bool {
    let (mut w, mut b) = ([0.0f64; 4], 0.0);
    for _ in 0..10_000 {
        let mut mistakes = 0;
        for e in set {
            let y = if e.label == 1 { 1.0 } else { -1.0 };
            let s: f64 = w.iter().zip(&e.features).map(|(a, x)| a * x).sum::<f64>() + b;
            if y * s <= 0.0 {
                for (wi, x) in w.iter_mut().zip(&e.features) {
                    *wi += y * x;
                }
                b += y;
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

#[test]
fn separable_fixture_is_fit_exactly() {
    let mut rng = common::rng(13);
    let set = separable_set(&mut rng);
    assert!(perceptron_separates(&set));
    let config = TrainingConfig {
        steps: 4000,
        batch_size: 10,
        learning_rate: 0.5,
        seed: 3,
        val_fraction: 0.0,
        eval_interval: 10,
    };
    let run = train(&config, 2, &set, &[]).unwrap();
    let correct = set.iter().filter(|e| run.layer.predict(&e.features).unwrap() == e.label).count();
    assert_eq!(correct, set.len());
    assert_eq!(run.curve.len(), 400);
    assert!(run.curve.iter().all(|p| p.validation_accuracy.is_none()));
}

#[test]
fn loss_moving_average_decreases() {
    let mut rng = common::rng(14);
    let centers: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 8)).collect();
    let set: Vec<Example> = (0..200)
        .map(|i| {
            let c = i % 4;
            let x = centers[c].iter().map(|v| 2.0 * v + rng.random_range(-0.4..0.4)).collect();
            Example::new(x, c)
        })
        .collect();
    let config = TrainingConfig {
        steps: 1000,
        seed: 1,
        ..TrainingConfig::default()
    };
    let run = train(&config, 4, &set, &[]).unwrap();
    let mean = |r: std::ops::Range<usize>| run.step_losses[r].iter().sum::<f64>() / 100.0;
    assert!(mean(900..1000) < mean(0..100));
}
