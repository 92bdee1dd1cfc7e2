use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use olive::{decode_message, encode_message};
use olive_bench::bushy_message;
use std::hint::black_box;

fn codec(c: &mut Criterion) {
    let mut group = c.benchmark_group("codec");
    for (width, depth) in [(2, 2), (4, 4), (8, 4)] {
        let msg = bushy_message(width, depth);
        let frame = encode_message(&msg).unwrap();
        group.throughput(Throughput::Bytes(frame.len() as u64));
        let id = format!("{width}x{depth}");
        group.bench_with_input(BenchmarkId::new("encode", &id), &msg, |b, m| {
            b.iter(|| encode_message(black_box(m)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("decode", &id), &frame, |b, f| {
            b.iter(|| decode_message(black_box(f)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, codec);
criterion_main!(benches);
