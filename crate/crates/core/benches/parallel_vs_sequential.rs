//! Pool screening and Hessian kernels on the default rayon pool against a
//! single-thread pool. The single-thread pool runs the same closures in index
//! order, matching the `--no-default-features` build.

use adapt_core::diagnostics::{exact_hessian, HessianOptions};
use adapt_core::driver::PoolGradientEvaluator;
use adapt_core::io::load_hamiltonian;
use adapt_core::pools::{build_qe_pool, QePoolOptions};
use adapt_core::simulator::{prepare, AnsatzState, Generator};
use adapt_core::CostLedger;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

const H4: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/h4_linear_sto3g_1p0.json");

fn kernels(c: &mut Criterion) {
    let loaded = load_hamiltonian(H4).expect("fixture");
    let n_qubits = loaded.hamiltonian.n_qubits();
    let n_electrons = loaded.metadata.n_electrons.expect("molecular fixture");
    let pool = build_qe_pool(n_qubits, n_electrons, QePoolOptions::default()).expect("pool");
    let evaluator = PoolGradientEvaluator::new(&loaded.hamiltonian, &pool, None).expect("evaluator");

    let mut ansatz = AnsatzState::new(n_qubits, loaded.reference_index()).expect("ansatz");
    for (k, op) in pool.operators().iter().take(12).enumerate() {
        let theta = 0.05 * (k as f64 + 1.0);
        ansatz.push(Generator::new(op.clone()).expect("generator"), theta).expect("push");
    }
    let state = prepare(&ansatz).expect("state");
    let options = HessianOptions::default();

    let threads = [("sequential", 1), ("parallel", rayon::current_num_threads())];
    let mut group = c.benchmark_group("parallel_vs_sequential");
    group.sample_size(20);
    for (label, n) in threads {
        let workers = ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
        group.bench_with_input(BenchmarkId::new(format!("pool_gradients/{label}"), n), &n, |b, _| {
            b.iter(|| {
                workers.install(|| {
                    let mut ledger = CostLedger::new();
                    evaluator.evaluate(&state, &mut ledger).expect("gradients")
                })
            })
        });
        group.bench_with_input(BenchmarkId::new(format!("exact_hessian/{label}"), n), &n, |b, _| {
            b.iter(|| workers.install(|| exact_hessian(&ansatz, &loaded.hamiltonian, &options).expect("hessian")))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
