mod distances {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/distances.rs"));
}

#[test]
fn distances_example_runs() {
    distances::run_example().expect("distances example should run");
}

mod zakai_filter {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/zakai_filter.rs"));
}

#[test]
fn zakai_filter_example_runs() {
    zakai_filter::run_example().expect("zakai_filter example should run");
}

mod particle_filter {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/particle_filter.rs"));
}

#[test]
fn particle_filter_example_runs() {
    particle_filter::run_example().expect("particle_filter example should run");
}

mod benes_filter {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/benes_filter.rs"));
}

#[test]
fn benes_filter_example_runs() {
    benes_filter::run_example().expect("benes_filter example should run");
}

mod population {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/population.rs"));
}

#[test]
fn population_example_runs() {
    population::run_example().expect("population example should run");
}

mod hjb {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hjb.rs"));
}

#[test]
fn hjb_example_runs() {
    hjb::run_example().expect("hjb example should run");
}

mod mfg_fixed_point {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mfg_fixed_point.rs"));
}

#[test]
fn mfg_fixed_point_example_runs() {
    mfg_fixed_point::run_example().expect("mfg_fixed_point example should run");
}

mod mv_rate {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mv_rate.rs"));
}

#[test]
fn mv_rate_example_runs() {
    mv_rate::run_example().expect("mv_rate example should run");
}

mod nash_audit {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/nash_audit.rs"));
}

#[test]
fn nash_audit_example_runs() {
    nash_audit::run_example().expect("nash_audit example should run");
}

mod cli_run {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_run.rs"));
}

#[test]
fn cli_run_example_runs() {
    cli_run::run_example().expect("cli_run example should run");
}
