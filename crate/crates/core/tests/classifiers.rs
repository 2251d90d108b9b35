use loudclass::bisgaard::BisgaardClass;
use loudclass::classifiers::tree::DecisionTreeParams;
use loudclass::classifiers::{
    argmax_first, BinaryModel, ClassifierSpec, LogisticModel, LogisticParams, StandardScaler, TrainedModel, Variant,
};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const CLASSES: [BisgaardClass; 3] = [BisgaardClass::N2, BisgaardClass::N4, BisgaardClass::S1];

fn blobs(per_class: usize, spread: f64, seed: u64) -> (Array2<f64>, Vec<BisgaardClass>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).unwrap();
    let mut x = Array2::zeros((per_class * CLASSES.len(), 4));
    let mut y = Vec::new();
    for (c, &class) in CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let row = c * per_class + i;
            for j in 0..4 {
                let centre = if j == c { 4.0 } else { 0.0 };
                x[[row, j]] = centre + 10.0 * j as f64 + noise.sample(&mut rng);
            }
            y.push(class);
        }
    }
    (x, y)
}

#[test]
fn every_variant_is_deterministic() {
    let (x, y) = blobs(12, 1.5, 3);
    for v in Variant::ALL {
        let spec = ClassifierSpec::default_for(v);
        let a = TrainedModel::fit(&spec, x.view(), &y).unwrap();
        let b = TrainedModel::fit(&spec, x.view(), &y).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap(), "{v}");
    }
}

#[test]
fn scaler_uses_training_rows_only() {
    let (x, y) = blobs(15, 1.0, 5);
    let train: Vec<usize> = (0..x.nrows()).filter(|i| i % 3 != 0).collect();
    let xt = x.select(Axis(0), &train);
    let yt: Vec<_> = train.iter().map(|&i| y[i]).collect();
    let m = TrainedModel::fit(&ClassifierSpec::default_for(Variant::Lr), xt.view(), &yt).unwrap();
    let mean = xt.mean_axis(Axis(0)).unwrap();
    let sd = xt.std_axis(Axis(0), 0.0);
    for j in 0..4 {
        assert!((m.scaler.mean[j] - mean[j]).abs() < 1e-12);
        assert!((m.scaler.scale[j] - sd[j]).abs() < 1e-12);
    }
    // held-out rows play no part in the fit
    let mut other = x.clone();
    for i in (0..x.nrows()).filter(|i| i % 3 == 0) {
        other.row_mut(i).fill(1e6);
    }
    let xo = other.select(Axis(0), &train);
    let m2 = TrainedModel::fit(&ClassifierSpec::default_for(Variant::Lr), xo.view(), &yt).unwrap();
    assert_eq!(m.to_json().unwrap(), m2.to_json().unwrap());
}

#[test]
fn one_vs_rest_matches_binary_logistic_fits() {
    let (x, y) = blobs(20, 2.5, 9);
    let m = TrainedModel::fit(&ClassifierSpec::default_for(Variant::Lr), x.view(), &y).unwrap();
    let scaler = StandardScaler::fit(x.view()).unwrap();
    let z = scaler.transform(x.view()).unwrap();
    let proba = m.predict_proba(x.view()).unwrap();
    for (c, class) in CLASSES.iter().enumerate() {
        let target: Vec<bool> = y.iter().map(|l| l == class).collect();
        let params = LogisticParams {
            seed: c as u64,
            ..Default::default()
        };
        let binary = LogisticModel::fit(z.view(), &target, &params);
        match &m.submodels[c] {
            BinaryModel::Lr(inner) => assert_eq!(inner, &binary),
            other => panic!("unexpected submodel {other:?}"),
        }
        for (i, row) in z.rows().into_iter().enumerate() {
            assert_eq!(proba[[i, c]], binary.score(row));
        }
    }
}

#[test]
fn four_samples_give_one_leaf() {
    let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
    let y = [BisgaardClass::N2, BisgaardClass::N2, BisgaardClass::S1, BisgaardClass::S1];
    let m = TrainedModel::fit(&ClassifierSpec::Dt(DecisionTreeParams::default()), x.view(), &y).unwrap();
    let p = m.predict_proba(x.view()).unwrap();
    assert!(p.iter().all(|&v| v == 0.5));
    assert_eq!(m.predict(x.view()).unwrap(), vec![BisgaardClass::N2; 4]);
}

#[test]
fn decision_tree_ignores_monotone_feature_maps() {
    let (x, y) = blobs(15, 2.0, 21);
    let spec = ClassifierSpec::default_for(Variant::Dt);
    let a = TrainedModel::fit(&spec, x.view(), &y).unwrap().predict(x.view()).unwrap();
    let warped = x.mapv(|v| (v / 8.0).exp() + v.powi(3));
    let b = TrainedModel::fit(&spec, warped.view(), &y).unwrap().predict(warped.view()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_survives_monotone_maps(row in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let r = Array1::from(row);
        let mapped = r.mapv(|v| 3.0 * v.tanh() + 0.1 * v);
        prop_assert_eq!(argmax_first(r.view()), argmax_first(mapped.view()));
    }

    #[test]
    fn predictions_follow_row_order(seed in 0u64..200, variant in 0usize..7) {
        let (x, y) = blobs(8, 1.0, seed);
        let v = Variant::ALL[variant];
        let m = TrainedModel::fit(&ClassifierSpec::default_for(v), x.view(), &y).unwrap();
        let whole = m.predict(x.view()).unwrap();
        for i in [0, 9, 17] {
            let single = m.predict(x.slice(ndarray::s![i..i + 1, ..])).unwrap();
            prop_assert_eq!(single[0], whole[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn two_class_ovr_agrees_with_one_binary_fit(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x = Array2::from_shape_fn((40, 3), |_| noise.sample(&mut rng));
        let y: Vec<BisgaardClass> = x
            .rows()
            .into_iter()
            .map(|r| if r[0] + 0.5 * r[1] + noise.sample(&mut rng) > 0.0 { BisgaardClass::S3 } else { BisgaardClass::N2 })
            .collect();
        prop_assume!(y.iter().filter(|&&c| c == BisgaardClass::N2).count() >= 2);
        prop_assume!(y.iter().filter(|&&c| c == BisgaardClass::S3).count() >= 2);
        let m = TrainedModel::fit(&ClassifierSpec::default_for(Variant::Lr), x.view(), &y).unwrap();
        let ovr = m.predict(x.view()).unwrap();
        let z = m.scaler.transform(x.view()).unwrap();
        let target: Vec<bool> = y.iter().map(|&c| c == BisgaardClass::N2).collect();
        let binary = LogisticModel::fit(z.view(), &target, &LogisticParams::default());
        for (i, row) in z.rows().into_iter().enumerate() {
            let p = binary.score(row);
            if p != 0.5 {
                let expected = if p > 0.5 { BisgaardClass::N2 } else { BisgaardClass::S3 };
                prop_assert_eq!(ovr[i], expected);
            }
        }
    }
}
