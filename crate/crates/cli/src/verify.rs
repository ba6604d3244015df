//! Oracle cross-checks of the iterative solver and the closed forms.
//!
//! `perturb` is added to one coupling of every fixture on the solver side
//! only, so a nonzero value must make the comparisons fail.

use ionspin::couplings::{closed_form_estimates, ClosedFormParams, CouplingSet, TripleCoupling};
use ionspin::oracles::{classical_enumerate, dense_spectrum, tfi_free_fermion, DENSE_MAX_SPINS};
use ionspin::spin_model::{ground_cluster, CouplingRange, SpinHamiltonian};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

const RANDOM_INSTANCES: usize = 20;

pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: error {:.3e} (tolerance {:.0e})",
            if self.passed() { "ok" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance
        )
    }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, h: f64) -> Result<CouplingSet, CliError> {
    let mut j2 = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..j {
            let v = rng.gen_range(-1.0..1.0);
            j2[(j, k)] = v;
            j2[(k, j)] = v;
        }
    }
    let mut j3 = Vec::new();
    for j in 0..n {
        for k in 0..j {
            for l in 0..k {
                if rng.gen_bool(0.3) {
                    j3.push(TripleCoupling { j, k, l, value: rng.gen_range(-1.0..1.0) });
                }
            }
        }
    }
    Ok(CouplingSet::new(j2, j3, h)?)
}

fn perturbed(set: &CouplingSet, eps: f64) -> CouplingSet {
    let mut p = set.clone();
    p.j2[(0, 1)] += eps;
    p.j2[(1, 0)] += eps;
    p
}

fn lowest(set: &CouplingSet, n: usize, seed: u64) -> Result<f64, CliError> {
    let h = SpinHamiltonian::from_couplings(set, n, CouplingRange::Full)?;
    Ok(ground_cluster(&h, seed)?.ground_energy())
}

pub fn run(n_max: usize, perturb: f64, seed: u64) -> Result<Vec<Check>, CliError> {
    if n_max > DENSE_MAX_SPINS {
        return Err(CliError::Refused(format!(
            "refusing --n-max {n_max}: dense oracles are capped at {DENSE_MAX_SPINS} spins"
        )));
    }
    if n_max < 3 {
        return Err(CliError::validation(format!("--n-max must be at least 3, got {n_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dense_err, mut classical_err) = (0.0f64, 0.0f64);
    for i in 0..RANDOM_INSTANCES {
        let n = rng.gen_range(2..=n_max);
        let h = rng.gen_range(0.1..2.0);
        let set = random_set(&mut rng, n, h)?;
        let oracle = dense_spectrum(&SpinHamiltonian::from_couplings(&set, n, CouplingRange::Full)?)?[0];
        dense_err = dense_err.max((lowest(&perturbed(&set, perturb), n, seed ^ i as u64)? - oracle).abs());

        let classical = CouplingSet { field_h: 0.0, ..set };
        let c = classical_enumerate(n, &classical.j2, &classical.j3)?;
        classical_err = classical_err.max((lowest(&perturbed(&classical, perturb), n, seed ^ i as u64)? - c.energy).abs());
    }

    let mut ff_err = 0.0f64;
    for n in 2..=n_max {
        for ratio in [0.2, 1.0, 5.0] {
            let h = SpinHamiltonian::nearest_neighbour_chain(n, ratio + perturb, 0.0, 1.0)?;
            let e = ground_cluster(&h, seed)?.ground_energy();
            ff_err = ff_err.max((e - tfi_free_fermion(n, ratio, 1.0)).abs());
        }
    }

    let cf = closed_form_estimates(&ClosedFormParams {
        beta_x: 0.05,
        omega_x: 10.0,
        delta_x: 1.25,
        force: 0.125 + perturb,
        squeeze: 0.125,
        phase: 0.0,
        chi: 0.0,
    })?;
    let cf_err = ((cf.j2_khz - 0.625) / 0.625).abs().max(((cf.j3_khz - 0.6) / 0.6).abs());

    Ok(vec![
        Check {
            name: format!("iterative vs dense, {RANDOM_INSTANCES} random instances, N <= {n_max}"),
            error: dense_err,
            tolerance: 1e-10,
        },
        Check {
            name: "iterative at h = 0 vs classical enumeration".into(),
            error: classical_err,
            tolerance: 1e-12,
        },
        Check {
            name: format!("transverse-field Ising vs free fermions, N = 2..{n_max}"),
            error: ff_err,
            tolerance: 1e-10,
        },
        Check {
            name: "closed-form magnitudes at the benchmark (relative)".into(),
            error: cf_err,
            tolerance: 1e-6,
        },
    ])
}
