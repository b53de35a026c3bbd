use assembler_bench::loaded_reservoir;
use assembler_core::{compile, decode, plan, Calibration, Embedding, MoveTiming, PlannerOptions};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bench_waveform(c: &mut Criterion) {
    let (array, pattern, occ) = loaded_reservoir(25, Embedding::Compact, 5.0);
    let p = plan(&array, &occ, &pattern, &PlannerOptions::default()).unwrap();
    let cal = Calibration::for_array(&array);
    let timing = MoveTiming::default();

    c.bench_function("waveform/compile/25", |b| {
        b.iter(|| compile(black_box(&p), &cal, &timing).unwrap())
    });
    let wf = compile(&p, &cal, &timing).unwrap();
    c.bench_function("waveform/decode/25", |b| {
        b.iter(|| decode(black_box(&wf), &cal).unwrap())
    });
    c.bench_function("waveform/to_bytes/25", |b| {
        b.iter(|| black_box(&wf).to_bytes())
    });
}

criterion_group!(benches, bench_waveform);
criterion_main!(benches);
