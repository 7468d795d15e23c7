use facepolicy_core::metrics::{fdd, mve, RegionMask};
use facepolicy_core::{FaceTemplate, VertexSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, v: usize, n: usize) -> VertexSequence {
    VertexSequence::new(v, 60.0, (0..v * n * 3).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn template(rng: &mut ChaCha8Rng, v: usize) -> FaceTemplate {
    FaceTemplate::new(
        (0..v)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
            .collect(),
    )
    .unwrap()
}

#[test]
fn toy_cases() {
    let gt = VertexSequence::new(2, 60.0, vec![0.0; 6 * 2]).unwrap();
    let pred = VertexSequence::new(
        2,
        60.0,
        vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    // errors 5, 0, 1, 0 over two frames and two vertices
    assert!((mve(&pred, &gt).unwrap() - 1.5).abs() < 1e-12);

    let t = FaceTemplate::new(vec![[0.0; 3]]).unwrap();
    let mask = RegionMask::new("all", vec![0], 1).unwrap();
    let still = VertexSequence::new(1, 60.0, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    let moving = VertexSequence::new(1, 60.0, vec![1.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
    // magnitudes 1 and 3: population std 1
    assert!((fdd(&moving, &still, &t, &mask).unwrap() - 1.0).abs() < 1e-12);
    assert!((fdd(&still, &moving, &t, &mask).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn identity_and_antisymmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let (v, n) = (rng.random_range(2..20), rng.random_range(1..30));
        let (a, b, t) = (random(&mut rng, v, n), random(&mut rng, v, n), template(&mut rng, v));
        let mask = RegionMask::new("m", (0..v).step_by(2).collect(), v).unwrap();
        assert_eq!(mve(&a, &a).unwrap(), 0.0);
        assert_eq!(fdd(&a, &a, &t, &mask).unwrap(), 0.0);
        assert!((mve(&a, &b).unwrap() - mve(&b, &a).unwrap()).abs() < 1e-12);
        assert!((fdd(&a, &b, &t, &mask).unwrap() + fdd(&b, &a, &t, &mask).unwrap()).abs() < 1e-12);
        assert!(mve(&a, &b).unwrap() > 0.0);
    }
}

#[test]
fn scale_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let (v, n) = (rng.random_range(2..20), rng.random_range(2..30));
        let (a, b, t) = (random(&mut rng, v, n), random(&mut rng, v, n), template(&mut rng, v));
        let mask = RegionMask::new("m", (0..v).collect(), v).unwrap();
        for c in [0.5, 2.0] {
            let (ca, cb) = (a.map(|x| c * x), b.map(|x| c * x));
            let ct = FaceTemplate::from_flat(&t.flat().iter().map(|x| c * x).collect::<Vec<_>>()).unwrap();
            assert!((mve(&ca, &cb).unwrap() - c * mve(&a, &b).unwrap()).abs() < 1e-9);
            assert!((fdd(&ca, &cb, &ct, &mask).unwrap() - c * fdd(&a, &b, &t, &mask).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn mismatches_are_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (random(&mut rng, 3, 4), random(&mut rng, 3, 5));
    assert!(mve(&a, &b).is_err());
    let t = template(&mut rng, 3);
    assert!(RegionMask::new("m", vec![3], 3).is_err());
    assert!(RegionMask::new("m", vec![1, 1], 3).is_err());
    let empty = RegionMask::new("m", vec![], 3).unwrap();
    assert!(fdd(&a, &a, &t, &empty).is_err());
}
