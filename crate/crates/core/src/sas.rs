//! Saliency-aware fixation sampling and the baseline samplers.
//!
//! The saliency-aware sampler seeds at the saliency centroid of the
//! foreground region and then greedily adds the pixel maximising
//! `J(p) = D(p) * s(p)^gamma`, where `D` is the distance to the closest
//! already-selected center. All argmax ties go to the smallest row-major
//! index, which makes the sampler a total deterministic function.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{masked_centroid, threshold_mask, GrayMap, Mask, Pixel, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    SaliencyAware,
    Random,
    Ring,
    GeometricCenter,
    NonSalient,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SaliencyAware => "saliency_aware",
            Strategy::Random => "random",
            Strategy::Ring => "ring",
            Strategy::GeometricCenter => "geometric_center",
            Strategy::NonSalient => "non_salient",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "saliency_aware" => Strategy::SaliencyAware,
            "random" => Strategy::Random,
            "ring" => Strategy::Ring,
            "geometric_center" => Strategy::GeometricCenter,
            "non_salient" => Strategy::NonSalient,
            other => {
                return Err(Error::Config(format!("unknown sampling strategy '{other}'")));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub k: usize,
    pub tau: f64,
    pub gamma: f64,
    pub strategy: Strategy,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            k: 3,
            tau: 0.5,
            gamma: 1.0,
            strategy: Strategy::SaliencyAware,
            rng_seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("sampling.k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("sampling.tau must lie in [0, 1], got {}", self.tau)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("sampling.gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Ordered fixation centers with the score each was selected at.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    pub centers: Vec<Pixel>,
    pub scores: Vec<f64>,
}

impl FixationSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// The candidate region Omega, with a flag set when the threshold left it
/// empty and the whole image was substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRegion {
    pub mask: Mask,
    pub fallback: bool,
}

pub fn candidate_region(m_fg: &GrayMap, tau: f64) -> CandidateRegion {
    let mask = threshold_mask(m_fg, tau);
    if mask.is_empty() {
        CandidateRegion {
            mask: Mask::full(m_fg.height(), m_fg.width()),
            fallback: true,
        }
    } else {
        CandidateRegion {
            mask,
            fallback: false,
        }
    }
}

/// Exact distance from every pixel to its closest center. Row-major over the
/// full raster; callers read it on Omega.
pub fn min_distance_field(omega: &Mask, centers: &[Pixel]) -> Result<Vec<f64>> {
    if centers.is_empty() {
        return Err(Error::Argument("distance field needs at least one center".into()));
    }
    let w = omega.width();
    let mut field = vec![f64::INFINITY; w * omega.height()];
    for &c in centers {
        update_distance_field(&mut field, w, c);
    }
    Ok(field)
}

fn update_distance_field(field: &mut [f64], width: usize, center: Pixel) {
    for (i, d) in field.iter_mut().enumerate() {
        let p = Pixel::new(i % width, i / width);
        let dist = p.distance(center);
        if dist < *d {
            *d = dist;
        }
    }
}

/// Nearest member of `omega` to `target`, skipping `taken`; ties resolve to
/// the smallest row-major index.
pub fn snap_to_region(omega: &Mask, target: PixelPoint, taken: &[Pixel]) -> Option<Pixel> {
    let mut best: Option<(f64, Pixel)> = None;
    for p in omega.pixels() {
        if taken.contains(&p) {
            continue;
        }
        let d = p.to_point().distance(&target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    best.map(|(_, p)| p)
}

fn check_shapes(s_att: &GrayMap, m_fg: &GrayMap) -> Result<()> {
    if !s_att.same_shape(m_fg) {
        return Err(Error::dims(
            format!("{}x{}", s_att.width(), s_att.height()),
            format!("{}x{}", m_fg.width(), m_fg.height()),
        ));
    }
    if s_att.is_empty() {
        return Err(Error::Argument("sampling on a zero-sized map".into()));
    }
    Ok(())
}

fn check_capacity(k: usize, omega: &Mask) -> Result<()> {
    let available = omega.count();
    if k > available {
        return Err(Error::RegionTooSmall {
            requested: k,
            available,
            deficit: k - available,
        });
    }
    Ok(())
}

fn seed(s_att: &GrayMap, omega: &Mask) -> Result<Pixel> {
    let centroid = masked_centroid(s_att, omega)?;
    Ok(snap_to_region(omega, centroid, &[]).expect("region is non-empty"))
}

/// Greedy selection over `omega`; shared by the saliency-aware and
/// non-salient samplers.
fn greedy(s_att: &GrayMap, omega: &Mask, k: usize, gamma: f64) -> Result<FixationSet> {
    check_capacity(k, omega)?;
    let first = seed(s_att, omega)?;
    let width = omega.width();
    let weight: Vec<f64> = s_att.data().iter().map(|s| s.powf(gamma)).collect();

    let mut centers = vec![first];
    let mut scores = vec![0.0];
    let mut field = vec![f64::INFINITY; s_att.len()];
    update_distance_field(&mut field, width, first);
    let mut chosen = vec![false; s_att.len()];
    chosen[first.y * width + first.x] = true;

    while centers.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, &member) in omega.data().iter().enumerate() {
            if !member || chosen[i] {
                continue;
            }
            let score = field[i] * weight[i];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let (idx, score) = best.expect("capacity checked");
        let next = Pixel::new(idx % width, idx / width);
        chosen[idx] = true;
        update_distance_field(&mut field, width, next);
        centers.push(next);
        scores.push(score);
    }
    Ok(FixationSet { centers, scores })
}

/// Saliency-aware sampling of `config.k` fixation centers.
pub fn sas_sample(s_att: &GrayMap, m_fg: &GrayMap, config: &SamplingConfig) -> Result<FixationSet> {
    config.validate()?;
    if config.strategy != Strategy::SaliencyAware {
        return Err(Error::Config(format!(
            "sas_sample called with strategy {}",
            config.strategy
        )));
    }
    check_shapes(s_att, m_fg)?;
    let region = candidate_region(m_fg, config.tau);
    greedy(s_att, &region.mask, config.k, config.gamma)
}

/// The ablation samplers: random, ring, geometric center and non-salient.
pub fn baseline_sample(s_att: &GrayMap, m_fg: &GrayMap, config: &SamplingConfig) -> Result<FixationSet> {
    config.validate()?;
    check_shapes(s_att, m_fg)?;
    let region = candidate_region(m_fg, config.tau);
    let omega = &region.mask;
    match config.strategy {
        Strategy::SaliencyAware => Err(Error::Config(
            "baseline_sample does not handle saliency_aware".into(),
        )),
        Strategy::Random => {
            check_capacity(config.k, omega)?;
            let members: Vec<Pixel> = omega.pixels().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let centers: Vec<Pixel> = rand::seq::index::sample(&mut rng, members.len(), config.k)
                .into_iter()
                .map(|i| members[i])
                .collect();
            let scores = vec![0.0; centers.len()];
            Ok(FixationSet { centers, scores })
        }
        Strategy::Ring => {
            check_capacity(config.k, omega)?;
            let first = seed(s_att, omega)?;
            let radius = s_att.height().min(s_att.width()) as f64 / 4.0;
            let others = config.k - 1;
            let mut centers = vec![first];
            for j in 0..others {
                let angle = std::f64::consts::TAU * j as f64 / others as f64;
                let target = PixelPoint::new(
                    first.x as f64 + radius * angle.cos(),
                    first.y as f64 + radius * angle.sin(),
                );
                let p = snap_to_region(omega, target, &centers).expect("capacity checked");
                centers.push(p);
            }
            let scores = vec![0.0; centers.len()];
            Ok(FixationSet { centers, scores })
        }
        Strategy::GeometricCenter => {
            let center = Pixel::new((s_att.width() - 1) / 2, (s_att.height() - 1) / 2);
            Ok(FixationSet {
                centers: vec![center],
                scores: vec![0.0],
            })
        }
        Strategy::NonSalient => greedy(&s_att.inverted(), omega, config.k, config.gamma),
    }
}

/// Dispatches on `config.strategy`.
pub fn sample(s_att: &GrayMap, m_fg: &GrayMap, config: &SamplingConfig) -> Result<FixationSet> {
    match config.strategy {
        Strategy::SaliencyAware => sas_sample(s_att, m_fg, config),
        _ => baseline_sample(s_att, m_fg, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, gamma: f64) -> SamplingConfig {
        SamplingConfig {
            k,
            gamma,
            ..SamplingConfig::default()
        }
    }

    /// Full-scan argmax oracle for one greedy step.
    fn scan_argmax(s: &GrayMap, omega: &Mask, centers: &[Pixel], gamma: f64) -> Pixel {
        let mut best = (f64::NEG_INFINITY, Pixel::new(0, 0));
        for p in omega.pixels() {
            if centers.contains(&p) {
                continue;
            }
            let d = centers
                .iter()
                .map(|c| {
                    let dx = p.x as f64 - c.x as f64;
                    let dy = p.y as f64 - c.y as f64;
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            let j = d * s.get(p.x, p.y).powf(gamma);
            if j > best.0 {
                best = (j, p);
            }
        }
        best.1
    }

    #[test]
    fn candidate_region_examples() {
        let ones = GrayMap::filled(4, 4, 1.0).unwrap();
        let r = candidate_region(&ones, 0.5);
        assert!(!r.fallback);
        assert_eq!(r.mask.count(), 16);

        let low = GrayMap::filled(4, 4, 0.2).unwrap();
        let r = candidate_region(&low, 0.5);
        assert!(r.fallback);
        assert_eq!(r.mask.count(), 16);

        let checker = GrayMap::from_fn(4, 4, |x, y| ((x + y) % 2) as f64).unwrap();
        let r = candidate_region(&checker, 0.5);
        assert!(!r.fallback);
        for p in r.mask.pixels() {
            assert_eq!((p.x + p.y) % 2, 1);
        }
        assert_eq!(r.mask.count(), 8);
    }

    #[test]
    fn distance_field_examples() {
        let omega = Mask::full(6, 6);
        let f = min_distance_field(&omega, &[Pixel::new(2, 3)]).unwrap();
        assert_eq!(f[3 * 6 + 2], 0.0);
        let f = min_distance_field(&omega, &[Pixel::new(0, 0)]).unwrap();
        assert_eq!(f[4 * 6 + 3], 5.0);
        assert!(min_distance_field(&omega, &[]).is_err());

        let centers = [Pixel::new(1, 1), Pixel::new(5, 4)];
        let f = min_distance_field(&omega, &centers).unwrap();
        for p in omega.pixels() {
            let brute = centers.iter().map(|c| p.distance(*c)).fold(f64::INFINITY, f64::min);
            assert_eq!(f[p.y * 6 + p.x], brute);
        }
    }

    #[test]
    fn single_view_is_the_snapped_centroid() {
        let s = GrayMap::from_fn(9, 9, |x, y| f64::from(x == 6 && y == 2)).unwrap();
        let m = GrayMap::filled(9, 9, 1.0).unwrap();
        let set = sas_sample(&s, &m, &cfg(1, 1.0)).unwrap();
        assert_eq!(set.centers, vec![Pixel::new(6, 2)]);
        assert_eq!(set.scores, vec![0.0]);
    }

    #[test]
    fn two_deltas_tie_break_row_major() {
        let s = GrayMap::from_fn(101, 101, |x, y| f64::from(y == 10 && (x == 10 || x == 90))).unwrap();
        let m = GrayMap::filled(101, 101, 1.0).unwrap();
        let set = sas_sample(&s, &m, &cfg(2, 1.0)).unwrap();
        assert_eq!(set.centers, vec![Pixel::new(50, 10), Pixel::new(10, 10)]);
        assert_eq!(set.scores[1], 40.0);
        let omega = Mask::full(101, 101);
        assert_eq!(scan_argmax(&s, &omega, &set.centers[..1], 1.0), set.centers[1]);
    }

    #[test]
    fn gamma_zero_is_farthest_point() {
        let s = GrayMap::filled(101, 101, 1.0).unwrap();
        let m = GrayMap::filled(101, 101, 1.0).unwrap();
        let set = sas_sample(&s, &m, &cfg(2, 0.0)).unwrap();
        assert_eq!(set.centers, vec![Pixel::new(50, 50), Pixel::new(0, 0)]);

        // Zero saliency with gamma = 0 still covers the region (0^0 = 1).
        let z = GrayMap::filled(21, 21, 0.0).unwrap();
        let set = sas_sample(&z, &m_like(&z), &cfg(3, 0.0)).unwrap();
        assert_eq!(set.centers[1], Pixel::new(0, 0));
        // (20, 0) and (20, 20) tie at distance sqrt(200); row-major order wins.
        assert_eq!(set.centers[2], Pixel::new(20, 0));
    }

    fn m_like(s: &GrayMap) -> GrayMap {
        GrayMap::filled(s.height(), s.width(), 1.0).unwrap()
    }

    #[test]
    fn zero_saliency_never_duplicates_centers() {
        let s = GrayMap::filled(4, 4, 0.0).unwrap();
        let set = sas_sample(&s, &m_like(&s), &cfg(16, 1.0)).unwrap();
        let mut sorted = set.centers.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
    }

    #[test]
    fn too_many_centers_reports_deficit() {
        let s = GrayMap::filled(2, 2, 1.0).unwrap();
        let err = sas_sample(&s, &m_like(&s), &cfg(6, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::RegionTooSmall {
                requested: 6,
                available: 4,
                deficit: 2
            }
        ));
    }

    #[test]
    fn greedy_steps_match_full_scan() {
        let s = GrayMap::from_fn(40, 33, |x, y| {
            let v = ((x * 37 + y * 91) % 101) as f64 / 100.0;
            v * v
        })
        .unwrap();
        let m = GrayMap::from_fn(40, 33, |x, y| f64::from((x as i32 - 16).pow(2) + (y as i32 - 20).pow(2) < 200)).unwrap();
        let omega = threshold_mask(&m, 0.5);
        for gamma in [0.0, 0.5, 1.0, 2.0] {
            let set = sas_sample(&s, &m, &cfg(6, gamma)).unwrap();
            for k in 1..set.centers.len() {
                assert_eq!(scan_argmax(&s, &omega, &set.centers[..k], gamma), set.centers[k]);
            }
        }
    }

    #[test]
    fn geometric_center_is_floored() {
        let s = GrayMap::filled(100, 100, 0.3).unwrap();
        let set = baseline_sample(
            &s,
            &m_like(&s),
            &SamplingConfig {
                strategy: Strategy::GeometricCenter,
                ..SamplingConfig::default()
            },
        )
        .unwrap();
        assert_eq!(set.centers, vec![Pixel::new(49, 49)]);
    }

    #[test]
    fn random_is_reproducible_and_in_region() {
        let s = GrayMap::filled(30, 30, 0.5).unwrap();
        let m = GrayMap::from_fn(30, 30, |x, _| f64::from(x >= 20)).unwrap();
        let config = SamplingConfig {
            k: 5,
            strategy: Strategy::Random,
            rng_seed: 17,
            ..SamplingConfig::default()
        };
        let a = baseline_sample(&s, &m, &config).unwrap();
        let b = baseline_sample(&s, &m, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.centers.iter().all(|p| p.x >= 20));
        let other = baseline_sample(&s, &m, &SamplingConfig { rng_seed: 18, ..config }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn ring_spreads_around_seed() {
        let s = GrayMap::filled(65, 65, 1.0).unwrap();
        let config = SamplingConfig {
            k: 5,
            strategy: Strategy::Ring,
            ..SamplingConfig::default()
        };
        let set = baseline_sample(&s, &m_like(&s), &config).unwrap();
        let seed = Pixel::new(32, 32);
        assert_eq!(set.centers[0], seed);
        assert_eq!(
            &set.centers[1..],
            &[Pixel::new(48, 32), Pixel::new(32, 48), Pixel::new(16, 32), Pixel::new(32, 16)]
        );
    }

    #[test]
    fn non_salient_avoids_bright_blob() {
        let s = GrayMap::from_fn(48, 48, |x, y| {
            let d2 = (x as f64 - 12.0).powi(2) + (y as f64 - 12.0).powi(2);
            (-d2 / 50.0).exp()
        })
        .unwrap();
        let config = SamplingConfig {
            k: 4,
            strategy: Strategy::NonSalient,
            ..SamplingConfig::default()
        };
        let set = baseline_sample(&s, &m_like(&s), &config).unwrap();
        for c in &set.centers {
            assert!(s.get(c.x, c.y) < 0.05, "{c:?} sits on the blob");
        }
    }

    #[test]
    fn seed_is_scale_invariant() {
        let s = GrayMap::from_fn(20, 30, |x, y| ((x * y) % 13) as f64 / 26.0).unwrap();
        let doubled = GrayMap::new(20, 30, s.data().iter().map(|v| v * 2.0).collect()).unwrap();
        let m = m_like(&s);
        let a = sas_sample(&s, &m, &cfg(1, 1.0)).unwrap();
        let b = sas_sample(&doubled, &m, &cfg(1, 1.0)).unwrap();
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn coverage_is_monotone_in_k() {
        let s = GrayMap::from_fn(25, 25, |x, y| ((x + 3 * y) % 7) as f64 / 6.0).unwrap();
        let m = m_like(&s);
        let omega = Mask::full(25, 25);
        let mut previous = f64::INFINITY;
        for k in 1..8 {
            let set = sas_sample(&s, &m, &cfg(k, 1.0)).unwrap();
            let field = min_distance_field(&omega, &set.centers).unwrap();
            let worst = field.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= previous);
            previous = worst;
        }
    }
}
