use proptest::prelude::*;

use simon::align::{infonce_loss, AlignBatch, AlignParams};
use simon::embedding::{aggregate_views, decode_emb1, encode_emb1, EmbeddingMatrix};
use simon::foveation::{foveate, radial_sigma, BlurPyramid, FoveationConfig};
use simon::imaging::{threshold_mask, GrayMap, Image, PixelPoint};
use simon::lorentz::{LorentzManifold, TangentAtOrigin};
use simon::retrieval::{topk_accuracy, Metric};
use simon::sas::{min_distance_field, sas_sample, SamplingConfig};
use simon::synth::oracle_sas;

fn gray_map(max: usize) -> impl Strategy<Value = GrayMap> {
    (3..=max, 3..=max).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0.0f64..=1.0, h * w).prop_map(move |d| GrayMap::new(h, w, d).unwrap())
    })
}

/// Saliency and matte of the same shape; the matte is mostly foreground.
fn sas_case() -> impl Strategy<Value = (GrayMap, GrayMap, usize, f64)> {
    (3usize..=14, 3usize..=14).prop_flat_map(|(h, w)| {
        (
            proptest::collection::vec(0.0f64..=1.0, h * w),
            proptest::collection::vec(prop_oneof![3 => Just(1.0), 1 => Just(0.0), 1 => 0.0f64..=1.0], h * w),
            1usize..=4,
            prop_oneof![Just(0.0), Just(0.5), Just(1.0), Just(2.0)],
        )
            .prop_map(move |(s, m, k, g)| {
                (GrayMap::new(h, w, s).unwrap(), GrayMap::new(h, w, m).unwrap(), k, g)
            })
    })
}

fn tangent_vec() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=8).prop_flat_map(|n| proptest::collection::vec(-2.0f64..2.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sas_matches_oracle_and_keeps_centers_in_region((s, m, k, gamma) in sas_case()) {
        let cfg = SamplingConfig { k, gamma, ..SamplingConfig::default() };
        let omega = threshold_mask(&m, cfg.tau);
        let available = if omega.is_empty() { s.len() } else { omega.count() };
        match sas_sample(&s, &m, &cfg) {
            Ok(set) => {
                prop_assert_eq!(&set, &sas_sample(&s, &m, &cfg).unwrap());
                prop_assert_eq!(set.centers.clone(), oracle_sas(&s, &m, &cfg).unwrap());
                for (i, a) in set.centers.iter().enumerate() {
                    prop_assert!(omega.is_empty() || omega.get(a.x, a.y));
                    for b in &set.centers[i + 1..] {
                        prop_assert_ne!(a, b);
                    }
                }
            }
            Err(_) => prop_assert!(k > available),
        }
    }

    #[test]
    fn coverage_improves_with_k((s, m, _, gamma) in sas_case()) {
        let big = SamplingConfig { k: 4, gamma, ..SamplingConfig::default() };
        if let Ok(set) = sas_sample(&s, &m, &big) {
            let omega = threshold_mask(&m, big.tau);
            let omega = if omega.is_empty() { simon::imaging::Mask::full(s.height(), s.width()) } else { omega };
            let mut prev = f64::INFINITY;
            for k in 1..=set.centers.len() {
                let field = min_distance_field(&omega, &set.centers[..k]).unwrap();
                let worst = omega.pixels().map(|p| field[p.y * s.width() + p.x]).fold(0.0, f64::max);
                prop_assert!(worst <= prev);
                prev = worst;
            }
        }
    }

    #[test]
    fn seed_ignores_saliency_scale((s, m, _, _) in sas_case(), scale in 0.05f64..1.0) {
        let cfg = SamplingConfig { k: 1, ..SamplingConfig::default() };
        let scaled = GrayMap::new(s.height(), s.width(), s.data().iter().map(|v| v * scale).collect()).unwrap();
        if let (Ok(a), Ok(b)) = (sas_sample(&s, &m, &cfg), sas_sample(&scaled, &m, &cfg)) {
            prop_assert_eq!(a.centers, b.centers);
        }
    }

    #[test]
    fn exp_log_are_inverse(v in tangent_vec(), c in prop_oneof![Just(0.5), Just(1.0), Just(2.0)]) {
        let m = LorentzManifold::new(c, v.len()).unwrap();
        let x = m.exp_origin(&TangentAtOrigin { spatial: v.clone() }).unwrap();
        prop_assert!(x.time() > 0.0);
        prop_assert!(m.constraint_violation(&x) < 1e-6);
        let back = m.log_origin(&x).unwrap();
        let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
        for (a, b) in back.spatial.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn distance_is_a_metric(
        (u, v) in (1usize..=6).prop_flat_map(|n| (
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(-2.0f64..2.0, n),
        )),
        c in 0.25f64..3.0,
    ) {
        let m = LorentzManifold::new(c, u.len()).unwrap();
        let x = m.exp_origin(&TangentAtOrigin { spatial: u }).unwrap();
        let y = m.exp_origin(&TangentAtOrigin { spatial: v }).unwrap();
        let d = m.dist(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - m.dist(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(m.dist(&x, &x).unwrap() < 1e-7);
        for t in [0.25, 0.5, 0.75] {
            let g = m.geodesic(&x, &y, t).unwrap();
            prop_assert!(m.constraint_violation(&g) < 1e-6);
            prop_assert!((m.dist(&x, &g).unwrap() - t * d).abs() < 1e-6);
        }
    }

    #[test]
    fn aggregation_is_order_and_scale_free(
        rows in (1usize..5, 1usize..6).prop_flat_map(|(k, d)| proptest::collection::vec(
            proptest::collection::vec(0.1f64..3.0, d), k)),
        lambda in 0.01f64..100.0,
    ) {
        let base = aggregate_views(&EmbeddingMatrix::from_rows(&rows).unwrap()).unwrap();
        let mut reversed = rows.clone();
        reversed.reverse();
        reversed[0].iter_mut().for_each(|v| *v *= lambda);
        let other = aggregate_views(&EmbeddingMatrix::from_rows(&reversed).unwrap()).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let norm = base.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm <= 1.0 + 1e-12);
    }

    #[test]
    fn emb1_round_trips_f32_values(data in proptest::collection::vec(-1e6f32..1e6, 0..40), dim in 1usize..5) {
        let rows = data.len() / dim;
        let values: Vec<f64> = data[..rows * dim].iter().map(|&v| f64::from(v)).collect();
        let m = EmbeddingMatrix::new(rows, dim, values).unwrap();
        prop_assert_eq!(decode_emb1(&encode_emb1(&m)).unwrap(), m);
    }

    #[test]
    fn foveated_views_stay_in_range(map in gray_map(12), cx in 0usize..12, cy in 0usize..12, sigma_max in 0.0f64..6.0) {
        let img = map.to_image();
        let center = PixelPoint::new((cx % map.width()) as f64, (cy % map.height()) as f64);
        let cfg = FoveationConfig { sigma_max, ..FoveationConfig::default() };
        let view = foveate(&img, center, &cfg).unwrap().image;
        prop_assert!(view.data().iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
        let pyramid = BlurPyramid::build(&img, sigma_max, cfg.pyramid_levels).unwrap();
        let r_max = cfg.resolved_r_max(map.width(), map.height());
        for r in [0.0, 0.3, 1.7, 4.0, 9.9, 50.0] {
            let (_, lo, hi) = pyramid.blend_weights(radial_sigma(r, sigma_max, r_max));
            prop_assert_eq!(lo + hi, 1.0);
        }
    }

    #[test]
    fn constant_images_are_fixed_points(h in 2usize..10, w in 2usize..10, level in 0.0f64..=1.0, x in 0usize..10, y in 0usize..10) {
        let img = Image::filled(h, w, 3, level).unwrap();
        let view = foveate(&img, PixelPoint::new((x % w) as f64, (y % h) as f64), &FoveationConfig::default()).unwrap();
        prop_assert!(view.image.data().iter().all(|v| (v - level).abs() < 1e-12));
    }

    #[test]
    fn accuracy_is_monotone_in_k(
        data in proptest::collection::vec(-1.0f64..1.0, 40),
        noise in proptest::collection::vec(-0.5f64..0.5, 40),
    ) {
        let gallery = EmbeddingMatrix::new(10, 4, data.clone()).unwrap();
        let queries = EmbeddingMatrix::new(10, 4, data.iter().zip(&noise).map(|(a, b)| a + b).collect()).unwrap();
        let truth: Vec<usize> = (0..10).collect();
        let ks: Vec<usize> = (1..=10).collect();
        for metric in [Metric::Cosine, Metric::Hyperbolic { curvature: 1.0 }] {
            let report = topk_accuracy(&queries, &gallery, &truth, &ks, metric, None).unwrap();
            prop_assert!(report.accuracy_at_k.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(report.accuracy(10), Some(1.0));
        }
    }

    #[test]
    fn loss_is_nonnegative_and_order_free(
        sem in proptest::collection::vec(-1.0f64..1.0, 12),
        brain in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let params = AlignParams::init(3, 3);
        let m = LorentzManifold::new(1.0, 3).unwrap();
        let make = |s: Vec<f64>, b: Vec<f64>| AlignBatch::new(
            EmbeddingMatrix::new(4, 3, s).unwrap(), None, EmbeddingMatrix::new(4, 3, b).unwrap(), 0.0).unwrap();
        let loss = infonce_loss(&make(sem.clone(), brain.clone()), &params, &m).unwrap();
        prop_assert!(loss >= 0.0);
        let swap = |v: &[f64]| [&v[9..12], &v[3..9], &v[0..3]].concat();
        let swapped = infonce_loss(&make(swap(&sem), swap(&brain)), &params, &m).unwrap();
        prop_assert!((loss - swapped).abs() < 1e-12);
    }
}
