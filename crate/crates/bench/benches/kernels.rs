//! Microbenchmarks of the hot numerical kernels: gate application,
//! coherent copies, reduced-state entropies and fidelity.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use erasurelab_core::{
    fidelity, random_pure_state_with, run_rng, DensityOp, Gate, LabeledState, Party, SystemLabel,
};

fn fresh_labels(n: usize, party: Party) -> Vec<SystemLabel> {
    (0..n).map(|_| SystemLabel::fresh(party)).collect()
}

fn random_state(qubits: usize, stream: u64) -> LabeledState {
    let mut rng = run_rng(90, stream);
    random_pure_state_with(fresh_labels(qubits, Party::Alice), &mut rng).expect("state")
}

fn bench_gates(c: &mut Criterion) {
    let state = random_state(8, 0);
    let ids = state.ids();
    c.bench_function("cx_8_qubits", |b| {
        b.iter(|| black_box(&state).apply_gate(Gate::Cx, &[ids[0], ids[7]]).expect("gate"))
    });
    c.bench_function("cz_8_qubits", |b| {
        b.iter(|| black_box(&state).apply_gate(Gate::Cz, &[ids[2], ids[5]]).expect("gate"))
    });
    c.bench_function("h_8_qubits", |b| {
        b.iter(|| black_box(&state).apply_gate(Gate::H, &[ids[3]]).expect("gate"))
    });
    c.bench_function("bell_basis_change_8_qubits", |b| {
        b.iter(|| {
            black_box(&state)
                .apply_gate(Gate::BellBasisChange, &[ids[1], ids[4]])
                .expect("gate")
        })
    });
}

fn bench_copies(c: &mut Criterion) {
    let state = random_state(8, 1);
    let src = state.ids()[0];
    c.bench_function("coherent_copy_8_to_9_qubits", |b| {
        b.iter(|| {
            black_box(&state)
                .coherent_copy(src, SystemLabel::fresh(Party::Alice))
                .expect("copy")
        })
    });
}

fn bench_entropies(c: &mut Criterion) {
    let state = random_state(8, 2);
    let ids = state.ids();
    c.bench_function("entropy_half_of_8_qubits", |b| {
        b.iter(|| black_box(&state).entropy_of(&ids[0..4]).expect("entropy"))
    });
    c.bench_function("mutual_information_2_vs_3_of_8", |b| {
        b.iter(|| {
            black_box(&state)
                .mutual_information(&ids[0..2], &ids[2..5])
                .expect("information")
        })
    });
}

fn bench_fidelity(c: &mut Criterion) {
    let keep = fresh_labels(2, Party::Alice);
    let build = |stream: u64| -> DensityOp {
        let mut rng = run_rng(91, stream);
        let mut labels = keep.clone();
        labels.extend(fresh_labels(2, Party::Reference));
        let pure = random_pure_state_with(labels, &mut rng).expect("state");
        pure.partial_trace(&[keep[0].id, keep[1].id]).expect("marginal")
    };
    let rho = build(0);
    let sigma = build(1);
    c.bench_function("fidelity_two_qubit_mixed", |b| {
        b.iter(|| fidelity(black_box(&rho), black_box(&sigma)).expect("fidelity"))
    });
}

fn bench_sampling(c: &mut Criterion) {
    c.bench_function("random_pure_state_8_qubits", |b| {
        let mut stream = 0;
        b.iter(|| {
            stream += 1;
            random_state(8, stream)
        })
    });
}

criterion_group!(
    kernels,
    bench_gates,
    bench_copies,
    bench_entropies,
    bench_fidelity,
    bench_sampling
);
criterion_main!(kernels);
