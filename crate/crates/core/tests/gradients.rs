mod common;

use common::{gradient_check, random_batch};
use fedsim_core::data::ImageShape;
use fedsim_core::learners::{init_weights, Architecture, LearnerSpec, ProximalConfig};

const TOLERANCE: f64 = 1e-4;

fn zoo() -> Vec<Architecture> {
    vec![
        Architecture::Linear,
        Architecture::Mlp { hidden: vec![12, 8] },
        Architecture::LeNetStyle,
        Architecture::TinyResidual,
    ]
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let shape = ImageShape::new(16, 16, 3);
    for (a, arch) in zoo().into_iter().enumerate() {
        let spec = LearnerSpec::new(arch.clone(), shape, 5);
        let w = init_weights(&spec, 10 + a as u64).unwrap();
        let (images, labels) = random_batch(shape, 5, 3, 20 + a as u64);
        let err = gradient_check(&spec, &w, &images, &labels, None, 50, a as u64);
        assert!(err <= TOLERANCE, "{arch}: relative error {err:e}");
        for mu in [0.01, 1.0] {
            let anchor = init_weights(&spec, 99).unwrap();
            let prox = ProximalConfig { mu, anchor };
            let err = gradient_check(&spec, &w, &images, &labels, Some(&prox), 50, 7 + a as u64);
            assert!(err <= TOLERANCE, "{arch} mu={mu}: relative error {err:e}");
        }
    }
}
