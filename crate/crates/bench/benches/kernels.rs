use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use lumen_bench::fixture;
use lumen_core::adiabatic::eigensolve;
use lumen_core::coupling::{assemble, field_free, CouplingFlags};
use lumen_core::driver::Simulation;
use lumen_core::propagator::{step, ElectronState, StaticSource, StepControl};

fn kernels(c: &mut Criterion) {
    let cfg = fixture("triatomic.toml");
    let table = cfg.pair_table().unwrap();
    let geom = cfg.geometry(&table).unwrap();
    let pulse = cfg.pulse().unwrap();
    let t = 0.5 * pulse.tau;
    let (abar, ebar) = (pulse.a_bar(t), pulse.e_bar(t));

    c.bench_function("assemble", |b| {
        b.iter(|| assemble(black_box(&geom), &table, abar, ebar, CouplingFlags::default(), t))
    });
    c.bench_function("eigensolve", |b| b.iter(|| eigensolve(black_box(&geom), &table).unwrap()));

    let (s, h) = field_free(&geom, &table);
    let basis = eigensolve(&geom, &table).unwrap();
    let state = ElectronState::from_columns(&basis.vectors, &[0, 1], &[2.0, 2.0], 0.0);
    let src = StaticSource { s, h };
    let control = StepControl::default();
    c.bench_function("electron_step", |b| {
        b.iter(|| step(black_box(&state), &src, 0.02, &control).unwrap())
    });

    let sim = Simulation::new(cfg).unwrap();
    c.bench_function("nuclear_step", |b| {
        b.iter_batched(|| fresh(&sim), |mut s| s.advance().unwrap(), criterion::BatchSize::SmallInput)
    });
}

fn fresh(sim: &Simulation) -> Simulation {
    Simulation::resume(sim.checkpoint(None), None, None).unwrap().0
}

criterion_group!(benches, kernels);
criterion_main!(benches);
