use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use polyharm::density::{Density, UnitWeight};
use polyharm::discretization::{BoundaryCondition, DiscreteSpace};
use polyharm::geometry::Domain;
use polyharm::spectrum::{solve_generalized, SolverConfig};

fn bench_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    group.sample_size(10);
    for &n in &[64usize, 128] {
        let dom = Domain::unit_square();
        let space = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("stiffness_2d", n), &space, |b, s| {
            b.iter(|| s.assemble_stiffness())
        });
        let rho = Density::point_concentration(&dom, 1, 0.1, 0.1, vec![0.5, 0.5]).unwrap();
        group.bench_with_input(BenchmarkId::new("mass_interface_2d", n), &space, |b, s| {
            b.iter(|| s.assemble_mass(&rho))
        });
    }
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for &n in &[512usize, 2048] {
        let dom = Domain::unit_interval();
        let space = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 2).unwrap();
        let k = space.assemble_stiffness();
        let m = space.assemble_mass(&UnitWeight).matrix;
        let cfg = SolverConfig::for_domain(&dom).with_seed(1);
        group.bench_with_input(BenchmarkId::new("string_10_pairs", n), &n, |b, _| {
            b.iter(|| solve_generalized(&k, &m, 10, &cfg).unwrap())
        });
    }
    let dom = Domain::unit_square();
    let space = DiscreteSpace::build(&dom, 2, 24, BoundaryCondition::Natural, 3).unwrap();
    let k = space.assemble_stiffness();
    let m = space.assemble_mass(&UnitWeight).matrix;
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    group.bench_function("plate_m2_24x24_6_pairs", |b| {
        b.iter(|| solve_generalized(&k, &m, 6, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_assembly, bench_solve);
criterion_main!(benches);
