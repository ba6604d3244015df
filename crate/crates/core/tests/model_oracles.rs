//! Iterative solver, dense spectrum, classical enumeration and free fermions
//! cross-checked on random and structured instances.

use ionspin::couplings::{CouplingSet, TripleCoupling};
use ionspin::dynamics::{evolve, fidelity, paul_trap_hamiltonian, FidelityTarget, RampGeometry, RampPoint, RampSchedule};
use ionspin::oracles::{classical_enumerate, dense_spectrum, tfi_free_fermion};
use ionspin::spin_model::{ground_cluster, ground_state, order_af, CouplingRange, SpinHamiltonian, SpinState};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_couplings(rng: &mut ChaCha8Rng, n: usize, h: f64) -> CouplingSet {
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
                if rng.gen_bool(0.5) {
                    j3.push(TripleCoupling { j, k, l, value: rng.gen_range(-1.0..1.0) });
                }
            }
        }
    }
    CouplingSet::new(j2, j3, h).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iterative_matches_dense(seed in 0u64..10_000, n in 2usize..9, h in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_couplings(&mut rng, n, h);
        let ham = SpinHamiltonian::from_couplings(&set, n, CouplingRange::Full).unwrap();
        let e = ground_state(&ham, 1).unwrap().ground_energy();
        let dense = dense_spectrum(&ham).unwrap()[0];
        prop_assert!((e - dense).abs() < 1e-10, "{} vs {}", e, dense);
    }

    #[test]
    fn classical_limit_matches_enumeration(seed in 0u64..10_000, n in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_couplings(&mut rng, n, 0.0);
        let ham = SpinHamiltonian::from_couplings(&set, n, CouplingRange::Full).unwrap();
        let s = ground_cluster(&ham, seed).unwrap();
        let c = classical_enumerate(n, &set.j2, &set.j3).unwrap();
        prop_assert!((s.ground_energy() - c.energy).abs() < 1e-12);
        prop_assert_eq!(s.ground_degeneracy, c.minimizers.len());
    }

    #[test]
    fn spectrum_is_hermitian_and_traceless(seed in 0u64..10_000, n in 1usize..7, h in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_couplings(&mut rng, n, h);
        let ham = SpinHamiltonian::from_couplings(&set, n, CouplingRange::Full).unwrap();
        let spec = dense_spectrum(&ham).unwrap();
        prop_assert!(spec.iter().sum::<f64>().abs() < 1e-10);
    }
}

#[test]
fn free_fermions_agree_with_dense_spectrum() {
    for n in 2..=10 {
        for (j, h) in [(0.2, 1.0), (1.0, 1.0), (5.0, 1.0), (1.0, 0.2), (1.0, 5.0)] {
            let ham = SpinHamiltonian::nearest_neighbour_chain(n, j, 0.0, h).unwrap();
            let dense = dense_spectrum(&ham).unwrap()[0];
            assert!((dense - tfi_free_fermion(n, j, h)).abs() < 1e-10, "n={n} j={j} h={h}");
        }
    }
}

#[test]
fn ordered_chain_resolves_quasi_degenerate_doublet() {
    // deep in the ordered phase the two lowest levels are split by ~(h/J)^N
    for n in [12, 14] {
        let h = SpinHamiltonian::nearest_neighbour_chain(n, 5.0, 0.0, 1.0).unwrap();
        let e = ground_state(&h, 1).unwrap().ground_energy();
        assert!((e - tfi_free_fermion(n, 5.0, 1.0)).abs() < 1e-10, "N = {n}");
    }
}

#[test]
fn order_parameter_steepens_with_size() {
    // slope of O_AF across the transition grows with N
    let slope = |n: usize| {
        let at = |j2: f64| {
            let h = SpinHamiltonian::nearest_neighbour_chain(n, j2, 0.0, 1.0).unwrap();
            order_af(&ground_cluster(&h, 7).unwrap().ground_states())
        };
        (at(1.2) - at(0.8)) / 0.4
    };
    assert!(slope(10) > slope(6));
}

#[test]
fn ghz_fidelity_grows_with_ramp_time() {
    let j = 1.0;
    let start = RampPoint { j2: -j, j3: 0.0, h: 5.0 * j };
    let end = RampPoint { j2: -j, j3: 0.0, h: 0.05 * j };
    let mut last = 0.0;
    for t in [5.0, 20.0, 80.0] {
        let s = RampSchedule::linear(RampGeometry::PaulTrap, start, end, t / j, (40.0 * t) as usize).unwrap();
        let r = evolve(&SpinState::x_polarized(3), &s, &[FidelityTarget::Ghz], usize::MAX).unwrap();
        let f = r.samples.last().unwrap().fidelities[0];
        assert!(f >= last - 1e-3, "T={t}: {f} < {last}");
        last = f;
    }
    assert!(last > 0.9);
}

#[test]
fn slow_ramp_tracks_instantaneous_ground_state() {
    let start = RampPoint { j2: -1.0, j3: 0.0, h: 5.0 };
    let end = RampPoint { j2: -1.0, j3: 0.0, h: 0.5 };
    let s = RampSchedule::linear(RampGeometry::PaulTrap, start, end, 80.0, 3200).unwrap();
    let r = evolve(&SpinState::x_polarized(3), &s, &[], 100).unwrap();
    for smp in &r.samples {
        assert!(smp.energy >= smp.ground_energy - 1e-9);
        assert!(smp.energy <= smp.ground_energy + 0.5 * smp.gap, "t={}", smp.time);
    }
}

#[test]
fn three_body_ramp_lands_in_ferrimagnetic_manifold() {
    let start = RampPoint { j2: 0.1, j3: -1.0, h: 5.0 };
    let end = RampPoint { j2: 0.1, j3: -1.0, h: 0.05 };
    let s = RampSchedule::linear(RampGeometry::PaulTrap, start, end, 50.0, 2000).unwrap();
    let r = evolve(&SpinState::x_polarized(3), &s, &[FidelityTarget::FerrimagneticManifold], 500).unwrap();
    assert!(r.samples.last().unwrap().fidelities[0] >= 0.8);
}

#[test]
fn paul_trap_free_paramagnet() {
    let h = paul_trap_hamiltonian(0.0, 0.0, 1.0).unwrap();
    let s = ground_state(&h, 1).unwrap();
    let f = fidelity(&s.levels[0].state, &FidelityTarget::Custom { state: SpinState::x_polarized(3) }).unwrap();
    assert!((f - 1.0).abs() < 1e-9);
}
