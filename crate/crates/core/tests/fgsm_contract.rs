use candle_core::{Device, Tensor};
use leaflife_core::adversarial::{fgsm_perturb, loss_input_gradient};
use leaflife_core::dataset::PreprocessingMode;
use leaflife_core::model::one_hot;
use leaflife_core::model::toy::{LinearSoftmax, ToyConvNet};
use leaflife_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: usize = 4;
const W: usize = 4;
const D: usize = 3 * H * W;
const CLASSES: usize = 3;

struct LinearCase {
    weight: Vec<f32>,
    bias: Vec<f32>,
    images: Vec<f32>,
    labels: Vec<usize>,
    batch: usize,
}

fn linear_case(seed: u64, batch: usize) -> LinearCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinearCase {
        weight: (0..CLASSES * D).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bias: (0..CLASSES).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        images: (0..batch * D).map(|_| rng.gen_range(0.0..1.0)).collect(),
        labels: (0..batch).map(|_| rng.gen_range(0..CLASSES)).collect(),
        batch,
    }
}

impl LinearCase {
    fn model(&self) -> LinearSoftmax {
        LinearSoftmax::new(self.weight.clone(), self.bias.clone(), PreprocessingMode::ScaleSymmetric).unwrap()
    }

    fn images(&self) -> Tensor {
        Tensor::from_vec(self.images.clone(), (self.batch, 3, H, W), &Device::Cpu).unwrap()
    }

    fn labels(&self) -> Tensor {
        one_hot(&self.labels, CLASSES).unwrap()
    }

    /// Mean cross-entropy computed in f64 straight from the weights, with
    /// the symmetric input scaling `2u - 1`.
    fn loss(&self, unit: &[f64]) -> f64 {
        let mut total = 0.0;
        for b in 0..self.batch {
            let x = &unit[b * D..(b + 1) * D];
            let z: Vec<f64> = (0..CLASSES)
                .map(|c| {
                    self.bias[c] as f64
                        + (0..D).map(|i| self.weight[c * D + i] as f64 * (2.0 * x[i] - 1.0)).sum::<f64>()
                })
                .collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - z[self.labels[b]];
        }
        total / self.batch as f64
    }
}

fn flat(t: &Tensor) -> Vec<f32> {
    t.flatten_all().unwrap().to_vec1().unwrap()
}

#[test]
fn gradient_sign_matches_finite_differences() {
    let case = linear_case(11, 4);
    let grad = flat(&loss_input_gradient(&case.model(), &case.images(), &case.labels()).unwrap());
    let base: Vec<f64> = case.images.iter().map(|v| *v as f64).collect();
    let h = 1e-4;
    let (mut checked, mut agree) = (0, 0);
    for i in 0..base.len() {
        if grad[i].abs() <= 1e-6 {
            continue;
        }
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (case.loss(&plus) - case.loss(&minus)) / (2.0 * h);
        checked += 1;
        if fd.signum() == (grad[i] as f64).signum() {
            agree += 1;
        }
    }
    assert!(checked > base.len() / 2, "only {checked} non-flat coordinates");
    assert!(agree as f64 >= 0.99 * checked as f64, "{agree}/{checked} signs agree");
}

#[test]
fn negative_epsilon_rejected() {
    let case = linear_case(1, 2);
    assert!(matches!(
        fgsm_perturb(&case.model(), &case.images(), &case.labels(), -0.1),
        Err(Error::InvalidEpsilon(_))
    ));
    assert!(matches!(
        fgsm_perturb(&case.model(), &case.images(), &case.labels(), f64::NAN),
        Err(Error::InvalidEpsilon(_))
    ));
}

#[test]
fn conv_model_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let conv: Vec<f32> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let head: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let model = ToyConvNet::new(conv, head, vec![0.0, 0.1], PreprocessingMode::ScaleSymmetric).unwrap();
    let x: Vec<f32> = (0..2 * 3 * 8 * 8).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::from_vec(x, (2, 3, 8, 8), &Device::Cpu).unwrap();
    let y = one_hot(&[0, 1], 2).unwrap();
    for eps in [0.0, 0.1, 0.2] {
        let adv = fgsm_perturb(&model, &x, &y, eps).unwrap();
        let diff = (&adv - &x).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(diff as f64 <= eps + 1e-7);
        assert!(flat(&adv).iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linf_bound_and_range(seed in any::<u64>(), batch in 1usize..5, eps_idx in 0usize..3) {
        let eps = [0.0, 0.1, 0.2][eps_idx];
        let case = linear_case(seed, batch);
        let x = case.images();
        let adv = fgsm_perturb(&case.model(), &x, &case.labels(), eps).unwrap();
        let (a, b) = (flat(&adv), flat(&x));
        for (u, v) in a.iter().zip(&b) {
            prop_assert!(((u - v).abs() as f64) <= eps + 1e-7);
            prop_assert!((0.0..=1.0).contains(u));
        }
        if eps == 0.0 {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn linear_loss_does_not_decrease(seed in any::<u64>(), batch in 1usize..4) {
        let case = linear_case(seed, batch);
        let adv = fgsm_perturb(&case.model(), &case.images(), &case.labels(), 0.01).unwrap();
        let before: Vec<f64> = case.images.iter().map(|v| *v as f64).collect();
        let after: Vec<f64> = flat(&adv).iter().map(|v| *v as f64).collect();
        prop_assert!(case.loss(&after) >= case.loss(&before) - 1e-9);
    }
}
