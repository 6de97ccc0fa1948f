//! FGSM perturbations, adversarial training and the epsilon sweep.

mod fgsm;
mod sweep;

pub use fgsm::{fgsm_perturb, loss_input_gradient, model_to_unit, sign, unit_to_model};
pub use sweep::{
    adversarial_train, epsilon_sweep, epsilon_sweep_with, sweep_to_csv, write_sweep_csv,
    AdversarialConfig, SweepRow, REFERENCE_EPSILONS,
};
