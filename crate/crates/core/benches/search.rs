use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use marc_core::models::*;
use marc_core::necessary::joint_input_space;
use marc_core::objectives::PsomarcFast;
use marc_core::search::{maximize_with, Exec, SearchSpec};
use marc_core::sim::run_scheme;
use marc_core::sufficient::per_symbol_space;

fn cutset_grid(c: &mut Criterion) {
    let ch = Psomarc::tables45(0.1).unwrap();
    let fast = PsomarcFast::new(&ch);
    let space = joint_input_space(&ch);
    let spec = SearchSpec::single(0.02);
    let mut g = c.benchmark_group("cutset_step_0.02");
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| {
                b.iter(|| maximize_with(&space, &spec, |p| Some(fast.cutset(p)), exec).unwrap())
            },
        );
    }
    g.finish();
}

fn isuff_two_stage(c: &mut Criterion) {
    let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, Some(0.1)).unwrap();
    let ch = sc.channel.as_psomarc().unwrap().clone();
    let fast = PsomarcFast::new(&ch);
    let (space, inputs) = per_symbol_space(&sc, &ch);
    let spec = SearchSpec::two_stage(0.02, 0.1);
    let objective = |p: &[f64]| {
        let mut px = [0.0; 4];
        inputs.input_joint(p, &mut px);
        Some(fast.suff(&px))
    };
    let mut g = c.benchmark_group("isuff_two_stage_0.02");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| maximize_with(&space, &spec, objective, exec).unwrap()),
        );
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None).unwrap();
    let mut g = c.benchmark_group("simulate_n100_b1000");
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| run_scheme(black_box(&sc), 100, 1000, 7, exec).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(benches, cutset_grid, isuff_two_stage, simulate);
criterion_main!(benches);
