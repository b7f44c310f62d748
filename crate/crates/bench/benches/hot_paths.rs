//! Benchmarks for the inner loops the grid scans and the solver live in:
//! barrier evaluation, eigenvalue extraction, the H̃ ratio, the small dense
//! eigensolver, envelope construction and solver relaxation.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use maholder::barrier::{eval_barrier, hessian_eigenvalues, BarrierParams};
use maholder::geometry::{ConvexDomain, Point2};
use maholder::masolver::{power_rhs, solve_dirichlet_ma, BoundaryData, SolveConfig};
use maholder::operators::{convex_envelope, h_tilde, BoundaryEnvelope, EnvelopeKind, PowerOperator, RhsBound, RhsKind};
use maholder::smalleig::{jacobi_eigenvalues, SymMatrix};
use maholder::verifier::affine_sphere;

fn bench_barrier(c: &mut Criterion) {
    let bp = BarrierParams::new(2.0, 2.0, 0.1, 0.1).unwrap();
    c.bench_function("barrier_eval", |b| {
        b.iter(|| eval_barrier(black_box(0.05), black_box(0.3), &bp).unwrap())
    });
    let be = eval_barrier(0.05, 0.3, &bp).unwrap();
    c.bench_function("hessian_eigenvalues_n4", |b| {
        b.iter(|| hessian_eigenvalues(black_box(&be), 4).unwrap())
    });
}

fn bench_h_tilde(c: &mut Criterion) {
    let p = affine_sphere::structure_params(2);
    let rb = RhsBound::new(
        RhsKind::UpperF3,
        p,
        BoundaryEnvelope::affine(EnvelopeKind::Convex, [0.0, 0.0, 0.0]),
    )
    .unwrap();
    let op = PowerOperator { amp: 1.0, s: 1.0, t: 1.0 };
    let bp = BarrierParams::new(2.0, 2.0, 0.1, 0.1).unwrap();
    let be = eval_barrier(0.05, 0.3, &bp).unwrap();
    let es = hessian_eigenvalues(&be, 2).unwrap();
    c.bench_function("h_tilde_point", |b| {
        b.iter(|| {
            h_tilde(
                black_box(&es),
                be.w,
                [be.w_r, be.w_n],
                [0.05, 0.3],
                0.28,
                &rb,
                &op,
            )
            .unwrap()
        })
    });
}

fn bench_jacobi(c: &mut Criterion) {
    let mut m = SymMatrix::zeros(6);
    for i in 0..6 {
        for j in i..6 {
            m.set(i, j, ((i * 7 + j * 3) % 11) as f64 / 11.0 + if i == j { 2.0 } else { 0.0 });
        }
    }
    c.bench_function("jacobi_6x6", |b| b.iter(|| jacobi_eigenvalues(black_box(&m)).unwrap()));
}

fn bench_envelope(c: &mut Criterion) {
    let dom = affine_sphere::domain();
    for m in [256usize, 1024] {
        let samples: Vec<(Point2, f64)> = dom
            .boundary_samples(m)
            .into_iter()
            .map(|q| (q, affine_sphere::boundary_phi(q)))
            .collect();
        c.bench_with_input(BenchmarkId::new("convex_envelope_build", m), &samples, |b, s| {
            b.iter(|| convex_envelope(black_box(s), &dom).unwrap())
        });
    }
}

fn bench_solver(c: &mut Criterion) {
    let dom = ConvexDomain::disk([0.0, 0.0], 0.45).unwrap();
    let phi = |x: Point2| 0.5 * (x[0] * x[0] + x[1] * x[1]);
    let f = power_rhs(1.0, 0.0, 1e-6); // f = 1
    let mut group = c.benchmark_group("ma_solve_quadratic");
    group.sample_size(10);
    group.bench_function("h_1_32", |b| {
        b.iter(|| {
            let cfg = SolveConfig { h: 1.0 / 32.0, tol: 1e-8, ..Default::default() };
            solve_dirichlet_ma(&dom, &f, &BoundaryData::Func(&phi), &cfg, None).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_barrier,
    bench_h_tilde,
    bench_jacobi,
    bench_envelope,
    bench_solver
);
criterion_main!(benches);
