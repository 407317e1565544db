use criterion::{criterion_group, criterion_main, Criterion};
use railyard_bench::{busiest_rh_problem, packing_lp, packing_milp, scenario};
use railyard_core::ems::{baseline_cost, solve_ems};
use railyard_core::ev::{optimize_charging, simulate_day, uncoordinated_profile, DayOptions};
use railyard_core::solver::{solve_lp, solve_milp};
use railyard_core::{EmsParams, LineLimit, MilpOptions};

fn lp(c: &mut Criterion) {
    let model = packing_lp(1, 40, 60);
    c.bench_function("lp/packing_40x60", |b| b.iter(|| solve_lp(&model).unwrap()));
}

fn milp(c: &mut Criterion) {
    let model = packing_milp(2, 3, 20);
    let options = MilpOptions::exact();
    c.bench_function("milp/packing_3x20", |b| {
        b.iter(|| solve_milp(&model, &options).unwrap())
    });
}

fn charging(c: &mut Criterion) {
    let s = scenario(1);
    let problem = busiest_rh_problem(&s);
    c.bench_function("ev/rh_lp_busiest_step", |b| {
        b.iter(|| optimize_charging(&problem).unwrap())
    });
    let opts = DayOptions::optimized(LineLimit::unlimited());
    let mut group = c.benchmark_group("ev/day");
    group.sample_size(10);
    group.bench_function("optimized", |b| b.iter(|| simulate_day(&s, &opts).unwrap()));
    group.bench_function("uncoordinated", |b| b.iter(|| uncoordinated_profile(&s)));
    group.finish();
}

fn dispatch(c: &mut Criterion) {
    let s = scenario(1);
    let p_ev = uncoordinated_profile(&s).aggregate_kw;
    let params = EmsParams::default();
    let options = MilpOptions::default();
    let mut group = c.benchmark_group("ems");
    group.sample_size(10);
    group.bench_function("case1_milp", |b| {
        b.iter(|| solve_ems(&s, &p_ev, &params, &options).unwrap())
    });
    group.bench_function("case2_baseline", |b| b.iter(|| baseline_cost(&s, &p_ev).unwrap()));
    group.finish();
}

criterion_group!(benches, lp, milp, charging, dispatch);
criterion_main!(benches);
