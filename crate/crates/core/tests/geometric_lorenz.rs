use attractor_lab::cantor::GapSchedule;
use attractor_lab::geometric_lorenz::{
    cross_section_stats, derive_return_map, flow_box_volume, flow_integrate, return_step, section_config, FlowPoint,
    ReturnMapSpec, SuspensionSpec,
};
use attractor_lab::lorenz_map::{Branch, ExtensionParams, LorenzMapSpec};
use attractor_lab::volume_lab::BoxCollection;
use attractor_lab::LabError;
use proptest::prelude::*;

#[test]
fn saddle_exponents() {
    let s = SuspensionSpec::default();
    assert_eq!(s.rho(), 0.75);
    assert_eq!(s.s(), 1.2);
    assert_eq!(s.exit_time((-2.0f64).exp()), 2.0);
}

#[test]
fn volume_contracting_saddle_is_rejected() {
    let s = SuspensionSpec {
        lambda3: -1.5,
        ..SuspensionSpec::default()
    };
    assert!(matches!(derive_return_map(&s), Err(LabError::Contract(_))));
}

#[test]
fn return_step_closed_form() {
    let spec = ReturnMapSpec::default_power_law();
    let (p, d) = return_step(&spec, [0.5, 0.0]).unwrap();
    assert!((p[0] - (1.8 * 0.5f64.powf(0.75) - 0.75)).abs() < 1e-15);
    assert!((p[1] - 0.4 * 0.5f64.powf(1.2)).abs() < 1e-15);
    let (_, d2) = return_step(&spec, [0.5, 0.37]).unwrap();
    assert!((d[(1, 1)] - 0.25 * 0.5f64.powf(1.2)).abs() < 1e-15);
    assert_eq!(d[(1, 1)], d2[(1, 1)]);
    assert_eq!(d[(0, 1)], 0.0);
}

#[test]
fn exit_face_closed_form() {
    let susp = SuspensionSpec::default();
    let (x, y) = (0.3, -0.4);
    match flow_integrate(&susp, FlowPoint::on_section(x, y), susp.exit_time(x)).unwrap() {
        FlowPoint::Tube { side, u, w, elapsed } => {
            assert_eq!(side, Branch::Plus);
            assert!((u - y * x.powf(1.2)).abs() < 1e-15);
            assert!((w - x.powf(0.75)).abs() < 1e-15);
            assert_eq!(elapsed, 0.0);
        }
        other => panic!("expected the exit face, got {other:?}"),
    }
}

#[test]
fn zero_time_is_identity() {
    let susp = SuspensionSpec::default();
    let p = FlowPoint::on_section(-0.2, 0.1);
    assert_eq!(flow_integrate(&susp, p, 0.0).unwrap(), p);
}

#[test]
fn depth_zero_section() {
    let spec = ReturnMapSpec::default_power_law();
    let stats = cross_section_stats(&spec, 0, &section_config(&spec, 0, 1)).unwrap();
    assert_eq!(stats.series[0].area, 2.25);
    assert_eq!(stats.series[0].projection, 1.5);
}

#[test]
fn power_law_covers_nest_and_shrink() {
    let spec = ReturnMapSpec::default_power_law();
    let stats = cross_section_stats(&spec, 10, &section_config(&spec, 10, 3)).unwrap();
    for w in stats.covers.windows(2) {
        assert!(w[1].nested_in(&w[0]));
    }
    for w in stats.series.windows(2) {
        assert!(w[1].area <= w[0].area);
    }
    assert!(stats.last().area < 0.1 * 2.25);
}

#[test]
fn flow_box_examples() {
    let susp = SuspensionSpec::default();
    let cover = BoxCollection::root(vec![(-0.75, 0.75), (-0.75, 0.75)]);
    assert_eq!(flow_box_volume(&susp, &cover, 0.0).unwrap().volume, 0.0);
    let fb = flow_box_volume(&susp, &cover, 0.01).unwrap();
    assert_eq!(fb.volume, 0.015 * 2.25);
    assert!(flow_box_volume(&susp, &cover, 0.5).is_err());
}

#[test]
fn cantor_extension_projection() {
    let base = LorenzMapSpec::cantor_extension(GapSchedule::InverseSquare, ExtensionParams::default()).unwrap();
    let spec = ReturnMapSpec::with_base(base).unwrap();
    let stats = cross_section_stats(&spec, 12, &section_config(&spec, 12, 3)).unwrap();
    assert!((stats.last().projection - 0.3582).abs() <= 0.07, "{}", stats.last().projection);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn odd_symmetry(x in 0.001f64..0.75, y in -0.75f64..0.75) {
        let spec = ReturnMapSpec::default_power_law();
        let a = spec.image([x, -y]).unwrap();
        let b = spec.image([-x, y]).unwrap();
        prop_assert!((a[1] + b[1]).abs() < 1e-15);
        prop_assert!((a[0] + b[0]).abs() < 1e-15);
    }

    #[test]
    fn vertical_foliation_is_invariant(x in -0.75f64..0.75, y in -0.75f64..0.75) {
        prop_assume!(x != 0.0);
        let spec = ReturnMapSpec::default_power_law();
        prop_assert_eq!(spec.image([x, y]).unwrap()[0], spec.base.value(x).unwrap());
    }

    #[test]
    fn fibers_contract(x in -0.75f64..0.75, y1 in -0.75f64..0.75, y2 in -0.75f64..0.75) {
        prop_assume!(x != 0.0 && y1 != y2);
        let spec = ReturnMapSpec::default_power_law();
        let g1 = spec.image([x, y1]).unwrap()[1];
        let g2 = spec.image([x, y2]).unwrap()[1];
        let bound = 0.25 * 0.75f64.powf(1.2) * (y1 - y2).abs();
        prop_assert!((g1 - g2).abs() <= bound * (1.0 + 1e-12) && bound < (y1 - y2).abs());
    }

    #[test]
    fn flow_round_trip(x in -0.75f64..0.75, y in -0.75f64..0.75) {
        prop_assume!(x != 0.0);
        let susp = SuspensionSpec::default();
        let spec = derive_return_map(&susp).unwrap();
        let (p, _) = return_step(&spec, [x, y]).unwrap();
        let q = flow_integrate(&susp, FlowPoint::on_section(x, y), susp.exit_time(x) + susp.transit_time).unwrap();
        match q {
            FlowPoint::Chart([qx, qy, qz]) => {
                prop_assert_eq!(qz, 1.0);
                prop_assert!((qx - p[0]).abs() <= 1e-10 && (qy - p[1]).abs() <= 1e-10);
            }
            other => prop_assert!(false, "ended in {:?}", other),
        }
    }

    #[test]
    fn flow_box_is_a_product(eps in 0.0f64..0.05, keys in prop::collection::btree_set(0u64..256, 1..40)) {
        let cover = BoxCollection::from_keys(vec![(-0.75, 0.75), (-0.75, 0.75)], 4, keys.into_iter().collect()).unwrap();
        let fb = flow_box_volume(&SuspensionSpec::default(), &cover, eps).unwrap();
        prop_assert_eq!(fb.volume, 2.0 * eps * 0.75 * cover.measure());
    }
}
