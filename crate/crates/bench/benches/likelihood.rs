use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixreg_core::deepnet::init_network;
use mixreg_core::simulate::{simulate, Scenario};
use mixreg_core::{assemble, grad_nll, mixdistreg_spec, Activation, Family, Formula, NetworkDecl};
use ndarray::Array2;
use std::hint::black_box;

fn f(s: &str) -> Formula {
    s.parse().unwrap()
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("grad_nll");
    for n in [100usize, 1000] {
        let data = simulate(Scenario::Hetero, n / 2, 1).unwrap().to_dataset().unwrap();
        let forms = [f("~1 + s(x, k = 8)"), f("~1 + x"), f("~1 + x + xsq"), f("~1")];
        let spec = mixdistreg_spec(&[Family::Normal, Family::Normal], 2, &forms, None, vec![]).unwrap();
        let model = assemble(&spec, &data, 0).unwrap();
        let rows = model.all_rows();
        group.bench_with_input(BenchmarkId::new("spline_mixture", n), &rows, |b, rows| {
            b.iter(|| grad_nll(black_box(&model), rows).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("objective_only", n), &rows, |b, rows| {
            b.iter(|| black_box(&model).penalized_nll(rows).unwrap())
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let decl = NetworkDecl::mdn_default("net", Activation::Identity);
    let mut net = init_network(&decl.layers, 2, 0).unwrap();
    let rows = 512;
    let inputs = Array2::from_shape_fn((rows, 2), |(i, j)| (i * 7 + j * 3) as f64 / rows as f64);
    c.bench_function("network_forward_512", |b| b.iter(|| net.predict(black_box(&inputs)).unwrap()));
    net.forward(&inputs).unwrap();
    let upstream = vec![1.0; rows];
    c.bench_function("network_backward_512", |b| b.iter(|| net.backward(black_box(&upstream)).unwrap()));
}

criterion_group!(benches, gradient, network);
criterion_main!(benches);
