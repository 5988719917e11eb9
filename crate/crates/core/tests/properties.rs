use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tiltcheck::linalg::{random_orthogonal, random_sym};
use tiltcheck::polyfun::prox::VectorProx;
use tiltcheck::polyfun::{PolyhedralSpec, Preset};
use tiltcheck::spectral::eigen_frame;
use tiltcheck::SymMatrix;

#[derive(Serialize, Deserialize)]
struct Wrap(#[serde(with = "tiltcheck::ext_real")] f64);

fn ext() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::INFINITY), Just(f64::NEG_INFINITY), any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn preset() -> impl Strategy<Value = Preset> {
    prop_oneof![Just(Preset::LambdaMax), Just(Preset::SdpCone), Just(Preset::KyFan2Sdp), Just(Preset::Free)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ext_real_round_trips(v in ext()) {
        let text = serde_json::to_string(&Wrap(v)).unwrap();
        let back: Wrap = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.0, v);
    }

    #[test]
    fn svec_is_an_isometry(seed in any::<u64>(), n in 1usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sym(n, &mut r);
        let b = random_sym(n, &mut r);
        let back = SymMatrix::from_svec(n, &a.svec()).unwrap();
        prop_assert!(back.sub(&a).norm() < 1e-14);
        prop_assert!((a.svec().dot(&b.svec()) - a.inner(&b)).abs() < 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn eigen_frame_reconstructs(seed in any::<u64>(), n in 1usize..7) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let x = random_sym(n, &mut r);
        let f = eigen_frame(&x, 1e-12).unwrap();
        prop_assert!(f.lam.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = SymMatrix::from_eigen(&f.p, &f.lam);
        prop_assert!(rebuilt.sub(&x).norm() < 1e-10 * (1.0 + x.norm()));
        let hat = f.rotate(&x);
        prop_assert!(f.unrotate(&hat).sub(&x).norm() < 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn spectral_value_is_orthogonally_invariant(seed in any::<u64>(), n in 2usize..6, p in preset()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let spec = PolyhedralSpec::preset(p, n).unwrap();
        let x = random_sym(n, &mut r);
        let q = random_orthogonal(n, &mut r);
        let lx = x.eigenvalues().unwrap();
        let lq = x.congruence(&q).eigenvalues().unwrap();
        let (a, b) = (spec.theta_eval(&lx), spec.theta_eval(&lq));
        prop_assert!(a == b || (a - b).abs() < 1e-10 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn prox_beats_nearby_feasible_points(seed in any::<u64>(), n in 2usize..5, p in preset(), tau in 0.05f64..2.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let spec = PolyhedralSpec::preset(p, n).unwrap();
        let z: Vec<f64> = random_sym(n, &mut r).diagonal();
        let x = VectorProx::new(&spec).prox(&z, tau).unwrap();
        prop_assert!(spec.is_feasible(&x));
        let obj = |w: &[f64]| {
            let d: f64 = w.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
            0.5 * d + tau * spec.theta_eval(w)
        };
        let fx = obj(&x);
        for _ in 0..20 {
            let step = random_sym(n, &mut r).diagonal();
            let w: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + 0.1 * s).collect();
            if spec.is_feasible(&w) {
                prop_assert!(fx <= obj(&w) + 1e-9 * (1.0 + fx.abs()));
            }
        }
    }
}
