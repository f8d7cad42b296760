mod common;

use adapt_core::pauli::PauliString;
use adapt_core::simulator::{energy, energy_and_gradient, partial_derivative, prepare, AnsatzState, Generator};
use adapt_core::{CostLedger, PauliSum};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_string(rng: &mut ChaCha8Rng, n: usize) -> PauliString {
    let full = (1u64 << n) - 1;
    loop {
        let (x, z) = (rng.gen::<u64>() & full, rng.gen::<u64>() & full);
        if x | z != 0 {
            return PauliString::from_masks(n, x, z).unwrap();
        }
    }
}

fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliSum {
    let mut h = PauliSum::zero(n).unwrap();
    for _ in 0..terms {
        h.add_term(random_string(rng, n), Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
    }
    h
}

/// Sum of one to three `i c P` terms: anti-Hermitian whether or not the
/// strings commute.
fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> Generator {
    loop {
        let mut g = PauliSum::zero(n).unwrap();
        for _ in 0..rng.gen_range(1..=3) {
            g.add_term(random_string(rng, n), Complex64::new(0.0, rng.gen_range(-1.0..1.0))).unwrap();
        }
        if !g.is_empty() {
            return Generator::new(g).unwrap();
        }
    }
}

fn random_ansatz(seed: u64, n: usize, len: usize) -> (AnsatzState, PauliSum) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hamiltonian(&mut rng, n, 3 * n);
    let mut a = AnsatzState::new(n, rng.gen_range(0..1usize << n)).unwrap();
    for _ in 0..len {
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        a.push(random_generator(&mut rng, n), theta).unwrap();
    }
    (a, h)
}

fn central_difference(a: &AnsatzState, h: &PauliSum, step: f64) -> Vec<f64> {
    let x = a.parameters();
    let mut ledger = CostLedger::new();
    (0..x.len())
        .map(|j| {
            let mut plus = x.clone();
            plus[j] += step;
            let mut minus = x.clone();
            minus[j] -= step;
            let fp = energy(&a.with_parameters(&plus).unwrap(), h, &mut ledger).unwrap();
            let fm = energy(&a.with_parameters(&minus).unwrap(), h, &mut ledger).unwrap();
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>(), n in 1usize..=8, len in 1usize..=6) {
        let (a, h) = random_ansatz(seed, n, len);
        let mut ledger = CostLedger::new();
        let (_, g) = energy_and_gradient(&a, &h, &mut ledger).unwrap();
        let fd = central_difference(&a, &h, 1e-5);
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
        let rel = norm(&diff) / norm(&g).max(1e-3);
        prop_assert!(rel < 1e-6, "relative error {rel:e}");
        prop_assert_eq!(ledger.function_evaluations(), 1 + 2 * len as u64);
    }

    #[test]
    fn partials_match_the_full_gradient(seed in any::<u64>(), n in 1usize..=6, len in 1usize..=5) {
        let (a, h) = random_ansatz(seed, n, len);
        let mut ledger = CostLedger::new();
        let (e, g) = energy_and_gradient(&a, &h, &mut ledger).unwrap();
        let before = ledger.function_evaluations();
        for (j, gj) in g.iter().enumerate() {
            let p = partial_derivative(&a, &h, j, &mut ledger).unwrap();
            prop_assert!((p - gj).abs() < 1e-10 * (1.0 + gj.abs()));
        }
        prop_assert_eq!(ledger.function_evaluations() - before, 2 * len as u64);
        let e2 = energy(&a, &h, &mut ledger).unwrap();
        prop_assert!((e - e2).abs() < 1e-12 * (1.0 + e.abs()));
    }

    #[test]
    fn prepared_states_are_normalized(seed in any::<u64>(), n in 1usize..=8, len in 0usize..=8) {
        let (a, _) = random_ansatz(seed, n, len);
        let psi = prepare(&a).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
