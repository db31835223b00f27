use tnw_cate::datagen::{Dataset, Family, GeneratorSpec, Group};
use tnw_cate::nn::{KernelArch, KernelMLP, Matrix};
use tnw_cate::tnw::*;

fn small_config() -> TnwConfig {
    TnwConfig {
        n: SubsetSize::Count(6),
        m: SubsetSize::Count(3),
        epochs: 8,
        batch_size: 4,
        hidden: vec![8, 8],
        seed: 21,
        ..TnwConfig::default()
    }
}

fn spiral_data(c: usize, t: usize) -> (Dataset, Dataset) {
    let spec = GeneratorSpec::sample(Family::Spiral, 4, 0.0, 8).unwrap();
    (
        spec.generate(c, Group::Control, 0).unwrap(),
        spec.generate(t, Group::Treatment, 0).unwrap(),
    )
}

#[test]
fn alpha_zero_kernel_ignores_treatment_outcomes() {
    let (c, t) = spiral_data(20, 8);
    let other = t
        .with_outcomes(t.outcomes().iter().map(|h| -3.0 * h + 100.0).collect())
        .unwrap();
    let cfg = TnwConfig {
        alpha: Some(0.0),
        ..small_config()
    };
    let (a, ra) = train_tnw(&c, &t, &cfg).unwrap();
    let (b, rb) = train_tnw(&c, &other, &cfg).unwrap();
    let bits = |m: &TnwModel| m.kernel().params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ra.loss_history, rb.loss_history);
    // With a positive weight the treatment outcomes do matter.
    let cfg = TnwConfig {
        alpha: Some(0.5),
        ..small_config()
    };
    let (a, _) = train_tnw(&c, &t, &cfg).unwrap();
    let (b, _) = train_tnw(&c, &other, &cfg).unwrap();
    assert_ne!(bits(&a), bits(&b));
}

#[test]
fn constant_outcomes_predict_the_constant() {
    let (c, t) = spiral_data(15, 6);
    let c = c.with_outcomes(vec![2.5; 15]).unwrap();
    let t = t.with_outcomes(vec![-1.25; 6]).unwrap();
    let (model, report) = train_tnw(&c, &t, &small_config()).unwrap();
    assert!(report.loss_history.iter().all(|&l| l == 0.0));
    for i in 0..5 {
        let q = c.features().row(i);
        assert_eq!(model.predict_response(Group::Control, q).unwrap(), 2.5);
        assert_eq!(model.predict_response(Group::Treatment, q).unwrap(), -1.25);
        assert_eq!(model.estimate_cate(q).unwrap(), -3.75);
    }
}

#[test]
fn training_loss_goes_down_and_is_deterministic() {
    let (c, t) = spiral_data(40, 10);
    let cfg = TnwConfig {
        epochs: 30,
        ..small_config()
    };
    let (m1, r1) = train_tnw(&c, &t, &cfg).unwrap();
    let (m2, r2) = train_tnw(&c, &t, &cfg).unwrap();
    assert_eq!(r1.loss_history.len(), 30);
    assert!(r1.loss_history.iter().all(|l| l.is_finite()));
    assert!(r1.loss_history.last().unwrap() <= r1.loss_history.first().unwrap());
    assert_eq!(r1.loss_history, r2.loss_history);
    assert_eq!(m1.kernel().params(), m2.kernel().params());
    assert_eq!(r1.alpha, 0.5);
    assert_eq!((r1.n, r1.m), (6, 3));
}

#[test]
fn config_errors() {
    let (c, t) = spiral_data(10, 4);
    let bad = [
        TnwConfig {
            n: SubsetSize::Count(10),
            ..small_config()
        },
        TnwConfig {
            m: SubsetSize::Count(4),
            ..small_config()
        },
        TnwConfig {
            alpha: Some(-1.0),
            ..small_config()
        },
        TnwConfig {
            subsets_per_control: 0,
            ..small_config()
        },
        TnwConfig {
            batch_size: 0,
            ..small_config()
        },
    ];
    for cfg in bad {
        assert!(train_tnw(&c, &t, &cfg).is_err(), "{cfg:?}");
    }
    let toml_cfg: TnwConfig = toml::from_str("n = 0.4\nm = 3\nepochs = 2").unwrap();
    assert_eq!(toml_cfg.n, SubsetSize::Fraction(0.4));
    assert_eq!(toml_cfg.m, SubsetSize::Count(3));
    assert!(toml::from_str::<TnwConfig>("epoch = 2").is_err());
}

/// A model around a hand-built kernel with identity feature scaling.
fn fixed_model(c: &Dataset, t: &Dataset, seed: u64) -> TnwModel {
    let d = c.dim();
    let arch = KernelArch {
        input_dim: PairEncoding::ConcatDifference.width(d),
        hidden: vec![5],
        activation: tnw_cate::nn::Activation::Tanh,
    };
    let kernel = KernelMLP::new(&arch, seed).unwrap();
    let norm = tnw_cate::datagen::GroupNorm {
        control: tnw_cate::datagen::NormStats::identity(Group::Control),
        treatment: tnw_cate::datagen::NormStats::identity(Group::Treatment),
    };
    TnwModel::new(kernel, FeatureScaler::identity(d), norm, c.clone(), t.clone()).unwrap()
}

fn rows(data: &[f64], d: usize, y: Vec<f64>, g: Group) -> Dataset {
    Dataset::single_group(Matrix::new(data.len() / d, d, data.to_vec()).unwrap(), y, g).unwrap()
}

#[test]
fn inference_examples() {
    let c = rows(&[0.0, 1.0], 2, vec![1.0], Group::Control);
    let t = rows(&[5.0, -2.0], 2, vec![4.0], Group::Treatment);
    let m = fixed_model(&c, &t, 1);
    for q in [[0.0, 0.0], [3.0, -7.0]] {
        assert_eq!(m.predict_response(Group::Control, &q).unwrap(), 1.0);
        assert_eq!(estimate_cate(&m, &q).unwrap(), 3.0);
    }
    assert!(m.predict_response(Group::Control, &[1.0]).is_err());

    // Identical stored sets give zero effect everywhere.
    let xs = [0.1, 0.2, -0.5, 0.9, 1.5, -1.0];
    let y = vec![1.0, -2.0, 0.5];
    let m = fixed_model(
        &rows(&xs, 2, y.clone(), Group::Control),
        &rows(&xs, 2, y, Group::Treatment),
        2,
    );
    for q in [[0.0, 0.0], [1.0, 2.0]] {
        assert_eq!(m.estimate_cate(&q).unwrap(), 0.0);
    }
}

#[test]
fn heads_share_one_kernel_and_scale_linearly() {
    let xs = [0.1, 0.2, -0.5, 0.9, 1.5, -1.0, 0.3, 0.3];
    let c = rows(&xs, 2, vec![1.0, -2.0, 0.5, 4.0], Group::Control);
    let t = rows(&xs, 2, vec![3.0, 1.0, 0.0, -1.0], Group::Treatment);
    let m = fixed_model(&c, &t, 5);
    let q = [0.25, -0.4];
    // Same stored features in both groups: the heads must produce the same weights.
    let wc = m.weights(Group::Control, &q).unwrap();
    let wt = m.weights(Group::Treatment, &q).unwrap();
    assert_eq!(wc, wt);
    assert!((wc.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let before = m.predict_response(Group::Treatment, &q).unwrap();
    let scaled = m
        .with_outcomes(
            Group::Treatment,
            &t.outcomes().iter().map(|h| 3.0 * h).collect::<Vec<_>>(),
        )
        .unwrap();
    let after = scaled.predict_response(Group::Treatment, &q).unwrap();
    assert!((after - 3.0 * before).abs() < 1e-12);
}

#[test]
fn inference_leaves_the_model_untouched() {
    let (c, t) = spiral_data(12, 5);
    let (model, _) = train_tnw(&c, &t, &small_config()).unwrap();
    let snapshot = model.kernel().params();
    let stored = model.stored(Group::Control).clone();
    let first = model.estimate_cate(c.features().row(0)).unwrap();
    for i in 0..12 {
        model.estimate_cate(c.features().row(i)).unwrap();
    }
    assert_eq!(model.estimate_cate(c.features().row(0)).unwrap(), first);
    assert_eq!(model.kernel().params(), snapshot);
    assert_eq!(model.stored(Group::Control), &stored);
}

#[test]
fn bundle_round_trip() {
    let (c, t) = spiral_data(12, 5);
    let (model, _) = train_tnw(&c, &t, &small_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save_dir(dir.path()).unwrap();
    let loaded = TnwModel::load_dir(dir.path()).unwrap();
    assert_eq!(loaded.kernel().params(), model.kernel().params());
    assert_eq!(loaded.encoding(), model.encoding());
    for i in 0..5 {
        let q = t.features().row(i);
        assert_eq!(loaded.estimate_cate(q).unwrap(), model.estimate_cate(q).unwrap());
    }
    assert!(TnwModel::load_dir(&dir.path().join("missing")).is_err());
}

#[test]
fn concat_encoding_still_trains() {
    let (c, t) = spiral_data(20, 6);
    let cfg = TnwConfig {
        pair_encoding: PairEncoding::Concat,
        ..small_config()
    };
    let (model, _) = train_tnw(&c, &t, &cfg).unwrap();
    assert_eq!(model.kernel().input_dim(), 8);
    assert_eq!(model.encoding(), PairEncoding::Concat);
    assert!(model.estimate_cate(c.features().row(0)).unwrap().is_finite());
}
