//! Benchmarks for the three hot kernels: the tridiagonal spectral solve,
//! the OU Poisson solver, and the discrete W1 flow.

use be_stability_core::functionals::GridFunction;
use be_stability_core::measure::{Interval, LogConcaveMeasure1D, PotentialFamily};
use be_stability_core::spectral::poincare_spectrum;
use be_stability_core::stein::ou_poisson_solve;
use be_stability_core::transport::{w1_discrete, Atom};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_spectral(c: &mut Criterion) {
    let m = LogConcaveMeasure1D::from_family(PotentialFamily::Quartic { delta: 0.1 }, 2001).unwrap();
    c.bench_function("poincare_spectrum quartic 2001", |b| {
        b.iter(|| poincare_spectrum(&m, 3).unwrap())
    });
}

fn bench_poisson(c: &mut Criterion) {
    let f = GridFunction::from_fn(Interval::symmetric(8.0, 641).unwrap(), f64::abs);
    c.bench_function("ou_poisson_solve |y| 641", |b| b.iter(|| ou_poisson_solve(&f).unwrap()));
}

fn bench_flow(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cloud = |n: usize| -> Vec<Atom> {
        let atoms: Vec<Atom> = (0..n)
            .map(|_| Atom::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)))
            .collect();
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        atoms
            .into_iter()
            .map(|a| Atom { pos: a.pos, mass: a.mass / total })
            .collect()
    };
    let source = cloud(400);
    let target = cloud(400);
    c.bench_function("w1_discrete 400x400", |b| b.iter(|| w1_discrete(&source, &target).unwrap()));
}

criterion_group!(benches, bench_spectral, bench_poisson, bench_flow);
criterion_main!(benches);
