use proptest::prelude::*;
use simba_core::autodiff::{grad_check, Tape};
use simba_core::nets::*;
use simba_core::rng::{normal, rng_from_seed};
use simba_core::Tensor;

// ---- straight-line oracle over plain vectors ----

fn mat_vec(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    assert_eq!(x.len(), rows);
    (0..cols)
        .map(|j| (0..rows).map(|i| x[i] * w.data()[i * cols + j]).sum::<f64>() + b.data()[j])
        .collect()
}

fn ln(x: &[f64], gain: &Tensor, bias: &Tensor) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mean) / (var + 1e-5).sqrt() * gain.data()[i] + bias.data()[i])
        .collect()
}

fn relu(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.max(0.0)).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn oracle_features(spec: &NetworkSpec, p: &Params, x: &[f64]) -> Vec<f64> {
    let g = |n: &str| p.get(n).unwrap_or_else(|| panic!("missing {n}"));
    let lin = |x: &[f64], n: &str| mat_vec(x, g(&format!("{n}.w")), g(&format!("{n}.b")));
    let norm = |x: &[f64], n: &str| ln(x, g(&format!("{n}.gain")), g(&format!("{n}.bias")));
    match spec.variant {
        Variant::Mlp | Variant::MlpLn => {
            let mut h = relu(lin(x, "layer0"));
            for i in 1..spec.num_blocks {
                if spec.variant == Variant::MlpLn {
                    h = norm(&h, &format!("ln{i}"));
                }
                h = relu(lin(&h, &format!("layer{i}")));
            }
            if spec.variant == Variant::MlpLn {
                h = norm(&h, "head_ln");
            }
            h
        }
        Variant::MlpRes => {
            let mut h = relu(lin(x, "layer0"));
            for l in 0..spec.num_blocks {
                let a = relu(lin(&h, &format!("block{l}.fc_a")));
                let b = relu(lin(&a, &format!("block{l}.fc_b")));
                h = add(&h, &b);
            }
            h
        }
        v => {
            let mut h = lin(x, "embed");
            for l in 0..spec.num_blocks {
                let input = if v == Variant::SimbaNoPreLn {
                    h.clone()
                } else {
                    norm(&h, &format!("block{l}.ln"))
                };
                let mid = relu(lin(&input, &format!("block{l}.fc1")));
                let branch = lin(&mid, &format!("block{l}.fc2"));
                h = if v == Variant::SimbaNoResidual { branch } else { add(&h, &branch) };
            }
            if v != Variant::SimbaNoPostLn {
                h = norm(&h, "post_ln");
            }
            h
        }
    }
}

fn oracle_head(spec: &NetworkSpec, p: &Params, x: &[f64]) -> Vec<f64> {
    let z = oracle_features(spec, p, x);
    mat_vec(&z, p.get("head.w").unwrap(), p.get("head.b").unwrap())
}

/// Replace every tensor with random values so biases and gains are non-trivial.
fn randomize(spec: &NetworkSpec, seed: u64) -> Params {
    let base = Params::init(spec, seed).unwrap();
    let mut rng = rng_from_seed(seed ^ 0xABCD);
    let tensors = base
        .tensors()
        .iter()
        .map(|t| Tensor::new(t.shape().to_vec(), (0..t.numel()).map(|_| 0.5 * normal(&mut rng)).collect()).unwrap())
        .collect();
    Params::from_parts(spec, tensors, seed).unwrap()
}

fn random_input(n: usize, d: usize, seed: u64) -> Tensor {
    let mut rng = rng_from_seed(seed);
    Tensor::new(vec![n, d], (0..n * d).map(|_| normal(&mut rng)).collect()).unwrap()
}

fn features(spec: &NetworkSpec, p: &Params, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let vars = p.register(&mut tape, false);
    let input = tape.constant(x.clone());
    let out = forward(&mut tape, spec, &vars, input).unwrap();
    tape.value(out.features).clone()
}

// ---- layer norm ----

#[test]
fn layer_norm_examples() {
    let run = |x: Vec<f64>| {
        let mut tape = Tape::new();
        let d = x.len();
        let v = tape.constant(Tensor::row(x));
        let g = tape.constant(Tensor::ones(&[1, d]));
        let b = tape.constant(Tensor::zeros(&[1, d]));
        let y = layer_norm(&mut tape, v, g, b).unwrap();
        tape.value(y).data().to_vec()
    };
    assert_eq!(run(vec![1.0, 1.0, 1.0]), vec![0.0, 0.0, 0.0]);
    let y = run(vec![1.0, -1.0]);
    let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
    assert!((y[0] - expected).abs() < 1e-12 && (y[1] + expected).abs() < 1e-12);
    assert!((y[0] - 1.0).abs() < 1e-4);

    let mut rng = rng_from_seed(1);
    for _ in 0..1000 {
        let scale = 10f64.powf(1.0 + normal(&mut rng).tanh());
        let x: Vec<f64> = (0..16).map(|_| scale * normal(&mut rng) + 3.0).collect();
        let y = run(x);
        let m = y.iter().sum::<f64>() / 16.0;
        let v = y.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 16.0;
        assert!(m.abs() < 1e-4 && (v - 1.0).abs() < 1e-4, "mean {m} var {v}");
    }
    let y = run(vec![2.0, 4.0, 6.0]);
    let m = y.iter().sum::<f64>() / 3.0;
    let v = y.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 3.0;
    assert!(m.abs() < 1e-4 && (v - 1.0).abs() < 1e-4);
}

// ---- embed and block ----

#[test]
fn embed_examples() {
    let mut tape = Tape::new();
    let o = tape.constant(Tensor::row(vec![1.0, 2.0]));
    let eye = tape.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let zero_b = tape.constant(Tensor::zeros(&[1, 2]));
    let y = embed(&mut tape, o, eye, zero_b).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 2.0]);

    let zero_w = tape.constant(Tensor::zeros(&[2, 2]));
    let five = tape.constant(Tensor::row(vec![5.0, 5.0]));
    let y = embed(&mut tape, o, zero_w, five).unwrap();
    assert_eq!(tape.value(y).data(), &[5.0, 5.0]);

    let w3 = tape.constant(Tensor::zeros(&[3, 2]));
    assert!(embed(&mut tape, o, w3, five).is_err());

    let mut rng = rng_from_seed(3);
    let w = Tensor::new(vec![5, 7], (0..35).map(|_| normal(&mut rng)).collect()).unwrap();
    let b = Tensor::new(vec![1, 7], (0..7).map(|_| normal(&mut rng)).collect()).unwrap();
    let x: Vec<f64> = (0..5).map(|_| normal(&mut rng)).collect();
    let (xv, wv, bv) = (
        tape.constant(Tensor::row(x.clone())),
        tape.constant(w.clone()),
        tape.constant(b.clone()),
    );
    let y = embed(&mut tape, xv, wv, bv).unwrap();
    for (a, e) in tape.value(y).data().iter().zip(mat_vec(&x, &w, &b)) {
        assert!((a - e).abs() < 1e-12);
    }
}

fn block_case(x: Vec<f64>, zero_w2: bool, zero_b1: bool, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let d = x.len();
    let mut rng = rng_from_seed(seed);
    let mut rand = |r: usize, c: usize| Tensor::new(vec![r, c], (0..r * c).map(|_| normal(&mut rng)).collect()).unwrap();
    let (g, bb, w1, mut b1, mut w2, b2) = (rand(1, d), rand(1, d), rand(d, 4 * d), rand(1, 4 * d), rand(4 * d, d), rand(1, d));
    if zero_w2 {
        w2 = Tensor::zeros(&[4 * d, d]);
    }
    if zero_b1 {
        b1 = Tensor::zeros(&[1, 4 * d]);
    }
    let b2 = if zero_w2 { Tensor::zeros(&[1, d]) } else { b2 };
    let mut tape = Tape::new();
    let mut c = |t: &Tensor| tape.constant(t.clone());
    let (gv, bbv, w1v, b1v, w2v, b2v) = (c(&g), c(&bb), c(&w1), c(&b1), c(&w2), c(&b2));
    let xv = tape.constant(Tensor::row(x.clone()));
    let block = BlockVars {
        ln: Some((gv, bbv)),
        fc1: (w1v, b1v),
        fc2: (w2v, b2v),
    };
    let (y, _) = residual_block(&mut tape, xv, block, true).unwrap();
    let branch = mat_vec(&relu(mat_vec(&ln(&x, &g, &bb), &w1, &b1)), &w2, &b2);
    (tape.value(y).data().to_vec(), add(&x, &branch))
}

#[test]
fn residual_block_examples() {
    let x = vec![0.3, -1.2, 2.5, 0.7];
    let (y, _) = block_case(x.clone(), true, false, 1);
    assert_eq!(y, x);

    // x = 0 gives LN(0) = bias, so the branch is zero only through relu(0)
    let mut tape = Tape::new();
    let d = 3;
    let xv = tape.constant(Tensor::zeros(&[1, d]));
    let g = tape.constant(Tensor::ones(&[1, d]));
    let b = tape.constant(Tensor::zeros(&[1, d]));
    let w1 = tape.constant(Tensor::ones(&[d, 4 * d]));
    let b1 = tape.constant(Tensor::zeros(&[1, 4 * d]));
    let w2 = tape.constant(Tensor::ones(&[4 * d, d]));
    let b2 = tape.constant(Tensor::zeros(&[1, d]));
    let block = BlockVars {
        ln: Some((g, b)),
        fc1: (w1, b1),
        fc2: (w2, b2),
    };
    let (y, _) = residual_block(&mut tape, xv, block, true).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0; 3]);

    for seed in 0..20 {
        let (y, e) = block_case(vec![0.1, -0.4, 1.9, -2.2, 0.8], false, false, seed);
        for (a, b) in y.iter().zip(e) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

// ---- forward ----

#[test]
fn every_variant_matches_straight_line_oracle() {
    for v in Variant::ALL {
        for (d_h, l) in [(4, 0), (6, 1), (5, 3)] {
            if matches!(v, Variant::Mlp | Variant::MlpLn) && l == 0 {
                continue;
            }
            let spec = NetworkSpec::new(v, 3, d_h, l, 2, HeadKind::Raw);
            let p = randomize(&spec, 7 + l as u64);
            let x = random_input(6, 3, 11);
            let head = evaluate(&spec, &p, &x).unwrap();
            for i in 0..6 {
                let want = oracle_head(&spec, &p, x.row_slice(i));
                for (a, b) in head.row_slice(i).iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12, "{v} d_h={d_h} L={l}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn zero_depth_simba_is_normed_embedding() {
    let spec = NetworkSpec::new(Variant::Simba, 3, 5, 0, 1, HeadKind::Raw);
    let p = randomize(&spec, 2);
    let x = random_input(4, 3, 5);
    let z = features(&spec, &p, &x);
    for i in 0..4 {
        let e = mat_vec(x.row_slice(i), p.get("embed.w").unwrap(), p.get("embed.b").unwrap());
        let want = ln(&e, p.get("post_ln.gain").unwrap(), p.get("post_ln.bias").unwrap());
        for (a, b) in z.row_slice(i).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

fn zero_branches(spec: &NetworkSpec, p: &Params) -> Params {
    let mut q = p.clone();
    for l in 0..spec.num_blocks {
        for suffix in ["w", "b"] {
            let t = q.get_mut(&format!("block{l}.fc2.{suffix}")).unwrap();
            *t = Tensor::zeros(t.shape());
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_pathway(seed in any::<u64>(), d_h in 1usize..8, l in 0usize..4, d_o in 1usize..5) {
        let spec = NetworkSpec::new(Variant::Simba, d_o, d_h, l, 1, HeadKind::Raw);
        let p = zero_branches(&spec, &randomize(&spec, seed));
        let x = random_input(3, d_o, seed.wrapping_add(1));
        let mut tape = Tape::new();
        let vars = p.register(&mut tape, false);
        let input = tape.constant(x.clone());
        let z = forward(&mut tape, &spec, &vars, input).unwrap().features;
        let (w, b, g, bb) = (vars.0[0], vars.0[1], vars.0[vars.0.len() - 4], vars.0[vars.0.len() - 3]);
        let e = embed(&mut tape, input, w, b).unwrap();
        let direct = layer_norm(&mut tape, e, g, bb).unwrap();
        prop_assert_eq!(tape.value(z).data(), tape.value(direct).data());
    }

    #[test]
    fn param_count_increases_with_width_and_depth(d_o in 1usize..70, d_h in 1usize..64, l in 0usize..4) {
        let at = |d_h, l| count_params(&NetworkSpec::new(Variant::Simba, d_o, d_h, l, 1, HeadKind::QValue));
        prop_assert!(at(d_h + 1, l) > at(d_h, l));
        prop_assert!(at(d_h, l + 1) > at(d_h, l));
    }
}

#[test]
fn count_params_closed_forms() {
    let mlp = NetworkSpec::new(Variant::Mlp, 2, 4, 2, 1, HeadKind::Raw);
    assert_eq!(count_params(&mlp), 37);
    assert_eq!(Params::init(&mlp, 0).unwrap().count(), 37);

    let (d_o, d_h, l) = (67usize, 512usize, 2usize);
    let embed = d_o * d_h + d_h;
    let block = 2 * d_h + (d_h * 4 * d_h + 4 * d_h) + (4 * d_h * d_h + d_h);
    let post = 2 * d_h;
    let head = d_h + 1;
    let simba = NetworkSpec::new(Variant::Simba, d_o, d_h, l, 1, HeadKind::QValue);
    assert_eq!(count_params(&simba), embed + l * block + post + head);
    assert_eq!(count_params(&simba), 4_237_825);
}

#[test]
fn init_conventions() {
    let spec = NetworkSpec::new(Variant::Simba, 3, 8, 2, 2, HeadKind::GaussianPolicy);
    let p = Params::init(&spec, 5).unwrap();
    for (name, t) in p.iter() {
        if name.ends_with(".b") || name.ends_with(".bias") {
            assert!(t.data().iter().all(|v| *v == 0.0), "{name}");
        }
        if name.ends_with(".gain") {
            assert!(t.data().iter().all(|v| *v == 1.0), "{name}");
        }
    }
    // orthogonal columns of fc1 ([8, 32]: rows orthonormal) scaled by √2
    let w = p.get("block0.fc1.w").unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let dot: f64 = (0..32).map(|k| w.data()[i * 32 + k] * w.data()[j * 32 + k]).sum();
            let want = if i == j { 2.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10);
        }
    }
    let head = p.get("head.w").unwrap();
    let col_norm: f64 = (0..8).map(|k| head.data()[k * 4].powi(2)).sum::<f64>().sqrt();
    assert!((col_norm - 1e-2).abs() < 1e-12);

    let q = Params::init(&spec, 5).unwrap();
    assert_eq!(p, q);
    let x = random_input(3, 3, 0);
    assert_eq!(evaluate(&spec, &p, &x).unwrap(), evaluate(&spec, &q, &x).unwrap());
    let r = p.reset(&spec, 6).unwrap();
    assert_ne!(r, p);
    assert_eq!(r, Params::init(&spec, 6).unwrap());
}

#[test]
fn heads() {
    let mut tape = Tape::new();
    let head = tape.constant(Tensor::row(vec![0.0, 100.0]));
    let (mean, log_std) = gaussian_params(&mut tape, head).unwrap();
    assert_eq!(tape.value(mean).data(), &[0.0]);
    assert_eq!(tape.value(log_std).data(), &[2.0]);

    let head = tape.constant(Tensor::row(vec![0.0, 0.0]));
    let (mean, log_std) = gaussian_params(&mut tape, head).unwrap();
    assert_eq!(tape.value(log_std).data(), &[0.0]);
    let (a, logp) = sample_tanh_gaussian(&mut tape, mean, log_std, &Tensor::row(vec![0.0])).unwrap();
    assert_eq!(tape.value(a).data(), &[0.0]);
    let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0f64 + 1e-6).ln();
    assert!((tape.value(logp).item() - want).abs() < 1e-12);

    let big = tape.constant(Tensor::row(vec![1e6]));
    let a = deterministic_action(&mut tape, big).unwrap();
    assert_eq!(scale_action(tape.value(a).data(), &[-2.0], &[2.0]), vec![2.0]);

    let spec = NetworkSpec::new(Variant::Simba, 3, 4, 1, 2, HeadKind::QValue);
    let zero = Params::from_parts(
        &spec,
        spec.layout().iter().map(|s| Tensor::zeros(&s.shape)).collect(),
        0,
    )
    .unwrap();
    assert_eq!(evaluate(&spec, &zero, &random_input(2, 3, 0)).unwrap().shape(), &[2, 1]);
}

#[test]
fn every_variant_passes_grad_check() {
    for v in Variant::ALL {
        let spec = NetworkSpec::new(v, 3, 4, 2, 1, HeadKind::Raw);
        let p = randomize(&spec, 13);
        for t in 0..p.tensors().len() {
            let f = |tape: &mut Tape, x: simba_core::autodiff::Var| {
                let mut vars = p.register(tape, false);
                vars.0[t] = x;
                let input = tape.constant(random_input(4, 3, 2));
                let out = forward(tape, &spec, &vars, input)?;
                let sq = tape.square(out.head)?;
                tape.sum(sq)
            };
            let err = grad_check(f, &p.tensors()[t], 1e-5).unwrap();
            assert!(err < 1e-4, "{v} {}: {err}", p.names()[t]);
        }
    }
}

#[test]
fn param_matching_within_one_percent() {
    let reference = NetworkSpec::new(Variant::Simba, 2, 32, 2, 1, HeadKind::Raw);
    let target = count_params(&reference) as f64;
    for v in Variant::ALL {
        let s = matched_spec(&reference, v, 0.01).unwrap();
        let gap = (count_params(&s) as f64 - target).abs() / target;
        assert!(gap <= 0.01, "{v}: {gap}");
    }
}

#[test]
fn variant_names_round_trip() {
    let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
    assert_eq!(
        names,
        ["mlp", "mlp+res", "mlp+ln", "simba", "simba-residual", "simba-preln", "simba-postln"]
    );
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
    }
    assert!("bronet".parse::<Variant>().is_err());
}
