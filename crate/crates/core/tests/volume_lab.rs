use attractor_lab::geometric_lorenz::{section_root, PhaseFlow, ReturnMapSpec, SuspensionSpec};
use attractor_lab::lorenz_map::LorenzMapSpec;
use attractor_lab::seeding;
use attractor_lab::volume_lab::{
    check_trapping, escape_fraction, fit_classify, relative_attractor, trapped_volume_series, BoxCollection,
    SeriesParameter, SubdivisionConfig, TrappingRegion, VolumeClass, VolumeSeries,
};
use attractor_lab::{LabError, Model, ModelHandle};
use proptest::prelude::*;
use rand::Rng;

fn halving() -> ModelHandle {
    ModelHandle::new(Model::Affine1d {
        slope: 0.5,
        offset: 0.0,
        domain: (-1.0, 1.0),
    })
    .unwrap()
}

fn series(values: &[f64]) -> VolumeSeries {
    VolumeSeries::new(
        SeriesParameter::Depth,
        values.iter().enumerate().map(|(k, &m)| (k as f64, m)).collect(),
        vec![1; values.len()],
    )
    .unwrap()
}

#[test]
fn doubling_keeps_everything() {
    let m = ModelHandle::new(Model::CircleDoubling).unwrap();
    let covers = relative_attractor(&m, &[(0.0, 1.0)], 10, &SubdivisionConfig::new(10, 1)).unwrap();
    for c in &covers {
        assert_eq!(c.measure(), 1.0);
        assert_eq!(c.len(), 1 << c.depth());
    }
}

#[test]
fn geometric_series_decays() {
    let s = series(&(0..10).map(|k| 0.9f64.powi(k)).collect::<Vec<_>>());
    let c = fit_classify(&s, 5, 0.01).unwrap();
    assert_eq!(c.class, VolumeClass::DecayToZero);
    assert!((c.slope.unwrap() - 0.9f64.ln()).abs() < 1e-12);
}

#[test]
fn perturbed_constant_is_a_plateau() {
    let s = series(&(0..15).map(|k| 0.3582 + 0.1 * 2f64.powi(-k)).collect::<Vec<_>>());
    let c = fit_classify(&s, 5, 0.01).unwrap();
    assert_eq!(c.class, VolumeClass::Plateau);
    let flat = fit_classify(&series(&[0.5; 6]), 3, 0.01).unwrap();
    assert_eq!(flat.slope, Some(0.0));
    assert_eq!(flat.class, VolumeClass::Plateau);
}

#[test]
fn window_larger_than_series() {
    assert!(fit_classify(&series(&[1.0, 0.5, 0.25]), 5, 0.01).is_err());
}

#[test]
fn escape_controls() {
    let m = halving();
    let inside = escape_fraction(&m, &[(-1.0, 1.0)], 1000, 5, 3).unwrap();
    assert_eq!(inside.fraction, 1.0);
    let out = escape_fraction(&m, &[(0.5, 1.0)], 1000, 1, 3).unwrap();
    assert_eq!(out.fraction, 0.0);
}

#[test]
fn trapped_series_starts_at_the_region() {
    let flow = PhaseFlow::from_suspension(&SuspensionSpec::default()).unwrap();
    let region = TrappingRegion::default();
    let ts = trapped_volume_series(&flow, &region, &[0.0, 1.0, 2.0, 4.0, 8.0], 5, 2).unwrap();
    assert_eq!(ts.series.points[0].1, region.area());
    assert!(ts.series.is_non_increasing());
    assert!(ts.series.boxes.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn narrow_region_is_not_trapping() {
    let flow = PhaseFlow::from_suspension(&SuspensionSpec::default()).unwrap();
    let region = TrappingRegion {
        x: (-0.75, 0.75),
        y: (-0.1, 0.1),
    };
    assert!(matches!(check_trapping(&flow, &region, 512, 1), Err(LabError::NonTrapping(_))));
    assert!(matches!(
        trapped_volume_series(&flow, &region, &[0.0, 1.0], 4, 1),
        Err(LabError::NonTrapping(_))
    ));
}

#[test]
fn section_cover_holds_seeded_orbits() {
    let spec = ReturnMapSpec::default_power_law();
    let model = ModelHandle::new(Model::ReturnMap(spec.clone())).unwrap();
    let depth = 8;
    let covers = relative_attractor(&model, &section_root(), depth, &SubdivisionConfig::new(depth, 5)).unwrap();
    for i in 0..10_000u64 {
        let mut rng = seeding::rng_for(21, 1, i);
        let mut p = [rng.gen::<f64>() * 1.5 - 0.75, rng.gen::<f64>() * 1.5 - 0.75];
        for (d, c) in covers.iter().enumerate() {
            assert!(c.contains_point(&p), "orbit {i} leaves the depth-{d} cover at {p:?}");
            if d < covers.len() - 1 {
                p = spec.image(p).unwrap();
            }
        }
    }
}

#[test]
fn covers_agree_across_thread_counts() {
    let spec = ReturnMapSpec::default_power_law();
    let model = ModelHandle::new(Model::ReturnMap(spec)).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| relative_attractor(&model, &section_root(), 9, &SubdivisionConfig::new(9, 5)).unwrap())
    };
    let one = run(1);
    let four = run(4);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.keys(), b.keys());
        assert_eq!(a.measure().to_bits(), b.measure().to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn contraction_cover_shrinks(k in 2u32..12, seed in 0u64..1000) {
        let covers = relative_attractor(&halving(), &[(-1.0, 1.0)], k, &SubdivisionConfig::new(k, seed)).unwrap();
        let last = covers.last().unwrap();
        prop_assert!(last.measure() <= 4.0 * 2f64.powi(-(k as i32)));
        prop_assert!(last.contains_point(&[0.0]));
    }

    #[test]
    fn measure_is_count_times_box_volume(keys in prop::collection::btree_set(0u64..4096, 1..200)) {
        let c = BoxCollection::from_keys(vec![(-0.75, 0.75), (-0.75, 0.75)], 6, keys.into_iter().collect()).unwrap();
        prop_assert_eq!(c.measure(), c.len() as f64 * c.box_volume());
    }

    #[test]
    fn successive_covers_nest(k in 1u32..8, seed in 0u64..100) {
        let m = ModelHandle::new(Model::ReturnMap(ReturnMapSpec::default_power_law())).unwrap();
        let covers = relative_attractor(&m, &section_root(), k, &SubdivisionConfig::new(k, seed)).unwrap();
        for w in covers.windows(2) {
            prop_assert!(w[1].nested_in(&w[0]));
            prop_assert!(w[1].measure() <= w[0].measure());
        }
    }

    #[test]
    fn escape_is_deterministic(seed in 0u64..1000) {
        let m = ModelHandle::new(Model::Lorenz(LorenzMapSpec::default())).unwrap();
        let a = escape_fraction(&m, &[(-0.5, 0.5)], 500, 3, seed).unwrap();
        let b = escape_fraction(&m, &[(-0.5, 0.5)], 500, 3, seed).unwrap();
        prop_assert!(a.fraction > 0.0 && a.fraction < 1.0);
        prop_assert_eq!(a, b);
    }
}
