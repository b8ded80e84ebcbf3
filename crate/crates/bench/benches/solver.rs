use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use faircode_core::solver::{solve, solve_x_star, SolverOptions};
use faircode_core::synth::{random_scenario, SynthOptions};
use faircode_core::{validate, Scenario};

fn golden(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn solves(c: &mut Criterion) {
    let options = SolverOptions::default();
    for name in ["example1.json", "example2.json"] {
        let s = golden(name);
        c.bench_function(&format!("solve/{name}"), |b| b.iter(|| solve(black_box(&s), &options).unwrap()));
    }
    let synth = random_scenario(&SynthOptions::default(), 11);
    c.bench_function("solve/synth_10x20", |b| b.iter(|| solve(black_box(&synth), &options).unwrap()));
}

fn best_response(c: &mut Criterion) {
    let s = golden("example1.json");
    let ch = validate(&s).unwrap().remove(0);
    c.bench_function("solve_x_star/k10", |b| {
        b.iter(|| solve_x_star(black_box(&ch), 10, black_box(3.3), 1e-13).unwrap())
    });
}

criterion_group!(benches, solves, best_response);
criterion_main!(benches);
