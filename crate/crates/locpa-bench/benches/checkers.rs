use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use locpa_bench::{env, separation_pairs, term, wide_parallel};
use locpa_core::alphabet::Alphabet;
use locpa_core::equiv::{check, Flavor, RelationKind, Strength};
use locpa_core::laws::{run_suite, LawOptions, Suite};
use locpa_core::pes::term_to_pes;
use locpa_core::rewrite::{default_fuel, normalize};
use locpa_core::sos::{build_lts, Bounds, Mode};
use locpa_core::term::System;

fn kind(flavor: Flavor) -> RelationKind {
    RelationKind::new(flavor, Mode::Static, Strength::Strong)
}

fn rewriting(c: &mut Criterion) {
    let env = env();
    let t = term("((a + b) ; (l1 :: c + d)) ; (e + l2 :: (a ; b)) // (f || g)");
    c.bench_function("normalize/proj", |b| {
        b.iter(|| normalize(&env, &t, System::Proj, default_fuel(&t)).unwrap())
    });
}

fn state_spaces(c: &mut Criterion) {
    let env = env();
    let mut group = c.benchmark_group("build_lts");
    for n in [2, 3, 4] {
        let t = wide_parallel(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| build_lts(&env, t, Mode::Static, Bounds::default()).unwrap())
        });
    }
    group.finish();
    let t = wide_parallel(3);
    c.bench_function("term_to_pes/3", |b| b.iter(|| term_to_pes(&env, &t, Mode::Static).unwrap()));
}

fn equivalence(c: &mut Criterion) {
    let env = env();
    let pairs = separation_pairs();
    let mut group = c.benchmark_group("check");
    for flavor in [Flavor::Step, Flavor::Pomset, Flavor::Hp, Flavor::Hhp] {
        group.bench_function(BenchmarkId::from_parameter(flavor), |b| {
            b.iter(|| {
                for (l, r) in &pairs {
                    check(&env, l, r, kind(flavor), Bounds::default()).unwrap();
                }
            })
        });
    }
    group.finish();
    let (l, r) = (term("a ; (tau ; (b + c))"), term("a ; (b + c)"));
    let rb = RelationKind::new(Flavor::Step, Mode::Static, Strength::RootedBranching);
    c.bench_function("check/rb-step", |b| b.iter(|| check(&env, &l, &r, rb, Bounds::default()).unwrap()));
}

fn suites(c: &mut Criterion) {
    let alph = Alphabet::law_suite();
    let mut opts = LawOptions::new(20, 7);
    opts.threads = 1;
    let mut group = c.benchmark_group("laws");
    group.sample_size(10);
    for suite in [Suite::Batc, Suite::Aptc, Suite::Tau] {
        group.bench_function(suite.name(), |b| b.iter(|| run_suite(suite, &alph, &opts)));
    }
    group.finish();
}

criterion_group!(benches, rewriting, state_spaces, equivalence, suites);
criterion_main!(benches);
