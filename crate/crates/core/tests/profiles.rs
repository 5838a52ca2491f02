use proptest::prelude::*;

use streamalloc_core::fixtures;
use streamalloc_core::profiles::{fit_profile, Profile, ResourceKind, Scaling};
use streamalloc_core::simulator::generate_test_run;

fn linear_kinds(p: &Profile) -> impl Iterator<Item = ResourceKind> + '_ {
    ResourceKind::ALL.into_iter().filter(|k| p.scaling.get(*k) == Scaling::LinearInRate)
}

fn slope(p: &Profile, kind: ResourceKind) -> f64 {
    p.utilization.get(kind) / p.reference_rate_fps
}

proptest! {
    #[test]
    fn linear_kinds_are_homogeneous(idx in 0usize..4, rate in 0.01f64..10.0, k in 0.01f64..20.0) {
        let store = fixtures::profiles();
        let p = &store.profiles()[idx];
        let base = p.demand_fraction(rate);
        let scaled = p.demand_fraction(k * rate);
        for kind in linear_kinds(p) {
            let (a, b) = (scaled.get(kind), k * base.get(kind));
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(f64::MIN_POSITIVE), "{kind}: {a} vs {b}");
        }
        for kind in ResourceKind::ALL.into_iter().filter(|k| p.scaling.get(*k) == Scaling::Constant) {
            prop_assert_eq!(scaled.get(kind), base.get(kind));
        }
    }

    #[test]
    fn linear_demand_is_monotone(idx in 0usize..4, r1 in 0.01f64..10.0, r2 in 0.01f64..10.0) {
        let store = fixtures::profiles();
        let p = &store.profiles()[idx];
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        for kind in linear_kinds(p) {
            prop_assert!(p.demand_fraction(lo).get(kind) <= p.demand_fraction(hi).get(kind));
        }
    }

    #[test]
    fn noiseless_runs_round_trip(idx in 0usize..4, rates in prop::collection::vec(0.01f64..0.25, 1..5)) {
        let store = fixtures::profiles();
        let truth = &store.profiles()[idx];
        let samples: Vec<_> = rates
            .iter()
            .flat_map(|&r| generate_test_run(truth, r, 2, 0.0, 0).unwrap())
            .collect();
        let fitted = fit_profile(truth.key(), &samples, truth.reference_machine, truth.scaling).unwrap();
        for kind in linear_kinds(truth) {
            let (got, want) = (slope(&fitted, kind), slope(truth, kind));
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(f64::MIN_POSITIVE), "{kind}: {got} vs {want}");
        }
    }

    #[test]
    fn demand_vectors_are_zero_off_their_slot(idx in 0usize..4, rate in 0.01f64..3.0, slot in 0usize..4) {
        let store = fixtures::profiles();
        let p = &store.profiles()[idx];
        let gpu_slot = (p.device == streamalloc_core::profiles::Device::GpuAssisted).then_some(slot);
        let v = p.demand_vector(rate, 4, gpu_slot).unwrap();
        for d in 2..v.dims() {
            let on_slot = gpu_slot.is_some_and(|g| d == 2 + 2 * g || d == 3 + 2 * g);
            if !on_slot {
                prop_assert_eq!(v[d], 0.0);
            }
        }
    }
}

#[test]
fn noisy_fit_lands_within_three_standard_errors() {
    let store = fixtures::profiles();
    let truth = store.lookup("VGG-16", fixtures::profiles().profiles()[0].frame_size, streamalloc_core::profiles::Device::GpuAssisted).unwrap();
    let (rate, n, sd) = (0.2, 50, 0.005);
    let standard_error = sd / (rate * (n as f64).sqrt());
    let mut within = 0;
    for seed in 0..100 {
        let samples = generate_test_run(truth, rate, n, sd, seed).unwrap();
        let fitted = fit_profile(truth.key(), &samples, truth.reference_machine, truth.scaling).unwrap();
        let err = (slope(&fitted, ResourceKind::Cpu) - slope(truth, ResourceKind::Cpu)).abs();
        if seed == 0 {
            assert!(err <= 3.0 * standard_error, "seed 0: {err} > {}", 3.0 * standard_error);
        }
        if err <= 3.0 * standard_error {
            within += 1;
        }
    }
    // 3 sigma covers 99.7%; allow a couple of misses over 100 seeds.
    assert!(within >= 97, "{within}/100 within 3 sd");
}

#[test]
fn bundled_samples_fit_bundled_profiles() {
    let store = fixtures::profiles();
    let pairs = [
        (fixtures::SAMPLES_VGG16_CPU, 0),
        (fixtures::SAMPLES_VGG16_GPU, 1),
        (fixtures::SAMPLES_ZF_CPU, 2),
        (fixtures::SAMPLES_ZF_GPU, 3),
    ];
    for (json, idx) in pairs {
        let truth = &store.profiles()[idx];
        let fitted = fit_profile(truth.key(), &fixtures::samples(json), truth.reference_machine, truth.scaling).unwrap();
        for kind in ResourceKind::ALL {
            assert!((fitted.utilization.get(kind) - truth.utilization.get(kind)).abs() < 1e-12);
        }
    }
}
