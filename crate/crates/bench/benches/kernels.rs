use criterion::{black_box, criterion_group, criterion_main, Criterion};

use orlicz_hjb::{
    solve, Field, Grid, JumpDistribution, JumpQuadrature, Logistic1d, MacrophyteModel, RiskParams,
    SolverConfig,
};

fn benchmark_risk() -> RiskParams {
    RiskParams {
        p: 2.0,
        psi: 0.01,
        delta: 0.1,
        lambda_n: 0.05,
        lambda_z: 0.0,
    }
}

fn bench_solve_1d(c: &mut Criterion) {
    let jumps = JumpDistribution::uniform(-1.0, 0.0).unwrap();
    let model = Logistic1d {
        a: 0.02,
        alpha: 1.0,
        jumps,
    };
    let grid = Grid::new_1d(1.0, 100).unwrap();
    let quad = JumpQuadrature::build(&model.jumps, 100).unwrap();
    let config = SolverConfig {
        tol: 1e-10,
        max_iters: 5000,
        ..Default::default()
    };
    c.bench_function("solve_1d_logistic_100", |b| {
        b.iter(|| solve(&model, grid, &quad, &benchmark_risk(), &config).unwrap())
    });
}

fn bench_sweep_2d(c: &mut Criterion) {
    // one full residual evaluation stands in for a sweep's arithmetic
    let model = MacrophyteModel::station7();
    let grid = Grid::new_2d([1.0, 1.0], [60, 60]).unwrap();
    let quad = JumpQuadrature::build(&model.jumps, 30).unwrap();
    let params = RiskParams {
        p: 2.0,
        psi: 10.0,
        delta: 1.0 / 30.0,
        lambda_n: 0.02,
        lambda_z: 1.0 / 30.0,
    };
    let config = SolverConfig {
        control_stride: 2,
        ..Default::default()
    };
    let disc =
        orlicz_hjb::Discretization::new(&model, grid, &quad, params, config).unwrap();
    let field = Field::from_fn(grid, |p| 30.0 + 10.0 * p[0] + 20.0 * p[1]);
    c.bench_function("residual_2d_61x61_m30", |b| {
        b.iter(|| disc.residual(black_box(&field)).unwrap())
    });
}

fn bench_quadrature(c: &mut Criterion) {
    let dist = JumpDistribution::linear_down(0.0, 1.0).unwrap();
    c.bench_function("build_quadrature_m300", |b| {
        b.iter(|| JumpQuadrature::build(black_box(&dist), 300).unwrap())
    });
}

fn bench_interpolation(c: &mut Criterion) {
    let grid = Grid::new_2d([1.0, 1.0], [100, 100]).unwrap();
    let field = Field::from_fn(grid, |p| (p[0] * 3.0).sin() + p[1]);
    c.bench_function("bilinear_interpolate", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..1000 {
                let t = k as f64 / 1000.0;
                acc += field.interpolate(black_box([t, 1.0 - t]));
            }
            acc
        })
    });
}

criterion_group!(
    benches,
    bench_solve_1d,
    bench_sweep_2d,
    bench_quadrature,
    bench_interpolation
);
criterion_main!(benches);
