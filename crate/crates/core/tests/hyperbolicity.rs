use attractor_lab::geometric_lorenz::ReturnMapSpec;
use attractor_lab::hyperbolicity::{
    cone_coordinate, cone_invariance, preball_contraction, splitting_estimate, ConeSpec, FrameField,
    PreballDynamics, SliceDisk,
};
use attractor_lab::lorenz_map::{Branch, LorenzMapSpec};
use attractor_lab::seeding;
use attractor_lab::{Model, ModelHandle};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn linear(rows: &[f64]) -> ModelHandle {
    ModelHandle::new(Model::Linear {
        matrix: DMatrix::from_row_slice(2, 2, rows),
        domain: None,
    })
    .unwrap()
}

fn plane_seeds() -> Vec<Vec<f64>> {
    vec![vec![0.3, -0.2], vec![0.1, 0.5], vec![-0.6, 0.4]]
}

fn section_seeds(spec: &ReturnMapSpec, count: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = seeding::rng_for(17, 0, i);
            let mut p = [rng.gen::<f64>() * 1.5 - 0.75, rng.gen::<f64>() * 1.5 - 0.75];
            for _ in 0..20 {
                p = spec.image(p).unwrap();
            }
            p.to_vec()
        })
        .collect()
}

#[test]
fn diagonal_splitting() {
    let r = splitting_estimate(&linear(&[0.5, 0.0, 0.0, 3.0]), &plane_seeds(), 10, 1, 0.0).unwrap();
    assert!(r.pass);
    assert!((r.lambda - 1.0 / 6.0).abs() < 1e-12);
    assert!((r.prefactor - 1.0).abs() < 1e-9);
    for s in &r.segments {
        assert!(s.domination.iter().all(|m| (m - 1.0).abs() < 1e-9));
        for (n, e) in s.expansion.iter().enumerate() {
            let exact = 3f64.powi(n as i32 + 1);
            assert!((e - exact).abs() <= 1e-8 * exact);
        }
    }
}

#[test]
fn identity_is_not_dominated() {
    let r = splitting_estimate(&linear(&[1.0, 0.0, 0.0, 1.0]), &plane_seeds(), 20, 1, 0.0).unwrap();
    assert!(!r.pass);
}

#[test]
fn return_map_splitting() {
    let spec = ReturnMapSpec::default_power_law();
    let seeds = section_seeds(&spec, 200);
    let model = ModelHandle::new(Model::ReturnMap(spec)).unwrap();
    let r = splitting_estimate(&model, &seeds, 50, 1, 0.0).unwrap();
    assert!(r.pass && r.lambda <= 0.13, "lambda {}", r.lambda);
    for s in &r.segments {
        let e = DVector::from_vec(s.e_hat[0].clone());
        let f = DVector::from_vec(s.f_hat[0].clone());
        assert!(e.dot(&f).abs() < 1e-8);
        assert!((e.norm() - 1.0).abs() < 1e-12 && (f.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn diagonal_cone_ratio() {
    let cone = ConeSpec::new(FrameField::Constant(DMatrix::identity(2, 2)), 1, 1.0).unwrap();
    let r = cone_invariance(&linear(&[0.5, 0.0, 0.0, 3.0]), &cone, &plane_seeds(), 4, 1).unwrap();
    assert!(r.pass);
    assert!((r.forward_ratio - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn adapted_cones_on_the_return_map() {
    let spec = ReturnMapSpec::default_power_law();
    let seeds = section_seeds(&spec, 300);
    let model = ModelHandle::new(Model::ReturnMap(spec)).unwrap();
    let cone = ConeSpec::new(FrameField::OrbitAdapted { warmup: 20 }, 1, 0.5).unwrap();
    let r = cone_invariance(&model, &cone, &seeds, 10, 4).unwrap();
    assert!(r.pass && r.forward_ratio <= 0.2, "{r:?}");
}

#[test]
fn power_law_inverse_branches_contract() {
    let spec = LorenzMapSpec::default();
    let lambda = 1.4507f64.powi(-2);
    // itinerary of a forward orbit, read backwards from its tenth point
    let mut x = 0.2;
    let mut symbols = Vec::new();
    for _ in 0..10 {
        symbols.push(Branch::of(x));
        x = spec.value(x).unwrap();
    }
    symbols.reverse();
    let dynamics = PreballDynamics::InverseBranch { spec, itinerary: symbols };
    let disk = SliceDisk {
        center: vec![x],
        directions: DMatrix::from_element(1, 1, 1.0),
        radius: 1e-4,
    };
    let t = preball_contraction(&dynamics, &disk, 10, lambda, 64, 3).unwrap();
    assert!(t.pass);
    for row in &t.rows {
        assert!(row.max_ratio <= 1.4507f64.powi(-(row.k as i32)) * (1.0 + 1e-9), "{row:?}");
    }
    assert!(preball_contraction(&dynamics, &disk, 0, lambda, 64, 3).unwrap().rows.is_empty());
}

#[test]
fn diagonal_e_segment_contracts() {
    let disk = SliceDisk {
        center: vec![0.0, 0.0],
        directions: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        radius: 0.1,
    };
    let t = preball_contraction(&PreballDynamics::Forward(linear(&[0.5, 0.0, 0.0, 3.0])), &disk, 5, 0.25, 16, 9).unwrap();
    assert!((t.rows[1].max_ratio - 0.25).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotation_never_preserves_cones(a in 0.01f64..=1.0) {
        let cone = ConeSpec::new(FrameField::Constant(DMatrix::identity(2, 2)), 1, a).unwrap();
        let r = cone_invariance(&linear(&[0.0, -1.0, 1.0, 0.0]), &cone, &plane_seeds(), 4, 1).unwrap();
        prop_assert!(!r.pass);
    }

    #[test]
    fn cone_coordinate_is_homogeneous(x in -1.0f64..1.0, y in 0.01f64..1.0, c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], t in 0.0f64..6.28) {
        let frame = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let v = DVector::from_vec(vec![x, y]);
        let a = cone_coordinate(&frame, 1, &v);
        let b = cone_coordinate(&frame, 1, &(v * c));
        prop_assume!(a.is_finite());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn diagonal_lambda_is_the_eigenvalue_ratio(p in 0.05f64..0.9, q in 1.1f64..5.0) {
        let r = splitting_estimate(&linear(&[p, 0.0, 0.0, q]), &plane_seeds(), 8, 1, 0.0).unwrap();
        prop_assert!((r.lambda - p / q).abs() <= 1e-12 * (p / q).max(1e-3));
        prop_assert_eq!(r.pass, true);
    }
}
