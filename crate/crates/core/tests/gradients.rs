mod common;

use anomix::encoder::{joint_loss, joint_loss_gradient};
use common::*;

const REL: f64 = 1e-4;
const FLOOR: f64 = 1e-8;
const STEP: f64 = 1e-6;

#[test]
fn joint_loss_gradient_matches_finite_differences() {
    for seed in 0..50u64 {
        let inst = random_grad_instance(seed);
        let (grads, _) = joint_loss_gradient(&inst.params, Some(&inst.mixture), inst.x.view()).unwrap();
        let numeric = finite_difference(&inst.params, STEP, |p| {
            joint_loss(p, Some(&inst.mixture), inst.x.view()).unwrap().total()
        });
        if let Some(msg) = gradient_mismatch(&grads, &numeric, REL, FLOOR) {
            panic!("seed {seed}: {msg}");
        }
    }
}

#[test]
fn reconstruction_only_gradient_matches_finite_differences() {
    for seed in 0..20u64 {
        let inst = random_grad_instance(1000 + seed);
        let (grads, loss) = joint_loss_gradient(&inst.params, None, inst.x.view()).unwrap();
        assert_eq!(loss.likelihood, 0.0);
        let numeric = finite_difference(&inst.params, STEP, |p| {
            joint_loss(p, None, inst.x.view()).unwrap().total()
        });
        if let Some(msg) = gradient_mismatch(&grads, &numeric, REL, FLOOR) {
            panic!("seed {seed}: {msg}");
        }
    }
}
