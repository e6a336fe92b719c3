//! Lorentz-model hyperbolic geometry.
//!
//! Points live on the upper sheet of `<x, x>_L = -1/c` in `R^{n+1}` with the
//! Minkowski form `<u, v>_L = -u0 v0 + sum_i ui vi`. The origin is
//! `(1/sqrt(c), 0, ..., 0)`; tangent vectors at the origin have a zero time
//! component and are stored by their `n` spatial entries.

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Tolerance on `|c <x,x>_L + 1|` for accepting a point as on-manifold.
pub const MANIFOLD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    pub coords: Vec<f64>,
}

impl LorentzPoint {
    pub fn time(&self) -> f64 {
        self.coords[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.coords[1..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentAtOrigin {
    pub spatial: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzManifold {
    curvature: f64,
    dim: usize,
}

pub fn minkowski_inner(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let spatial: f64 = u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
    spatial - u[0] * v[0]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LorentzManifold {
    pub fn new(curvature: f64, dim: usize) -> Result<Self> {
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::Config(format!("curvature must be > 0, got {curvature}")));
        }
        if dim == 0 {
            return Err(Error::Config("manifold dimension must be >= 1".into()));
        }
        Ok(Self { curvature, dim })
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> LorentzPoint {
        let mut coords = vec![0.0; self.dim + 1];
        coords[0] = 1.0 / self.curvature.sqrt();
        LorentzPoint { coords }
    }

    /// Minkowski product with a dimension check.
    pub fn inner(&self, u: &LorentzPoint, v: &LorentzPoint) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(minkowski_inner(&u.coords, &v.coords))
    }

    fn check_len(&self, x: &LorentzPoint) -> Result<()> {
        if x.coords.len() != self.dim + 1 {
            return Err(Error::dims(self.dim + 1, x.coords.len()));
        }
        Ok(())
    }

    /// `|c <x,x>_L + 1|`.
    pub fn constraint_violation(&self, x: &LorentzPoint) -> f64 {
        (self.curvature * minkowski_inner(&x.coords, &x.coords) + 1.0).abs()
    }

    pub fn check_point(&self, x: &LorentzPoint) -> Result<()> {
        self.check_len(x)?;
        if let Some(i) = x.coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "Lorentz point",
                index: i,
            });
        }
        let violation = self.constraint_violation(x);
        if x.time() <= 0.0 || violation > MANIFOLD_TOLERANCE * (1.0 + self.curvature * x.time() * x.time()) {
            return Err(Error::Geometry(format!(
                "point is off the hyperboloid (|c<x,x>+1| = {violation:e}, x0 = {})",
                x.time()
            )));
        }
        Ok(())
    }

    /// Recomputes the time coordinate from the spatial part.
    pub fn project(&self, spatial: &[f64]) -> LorentzPoint {
        let sq: f64 = spatial.iter().map(|v| v * v).sum();
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push((1.0 / self.curvature + sq).sqrt());
        coords.extend_from_slice(spatial);
        LorentzPoint { coords }
    }

    pub fn exp_origin(&self, v: &TangentAtOrigin) -> Result<LorentzPoint> {
        if v.spatial.len() != self.dim {
            return Err(Error::dims(self.dim, v.spatial.len()));
        }
        if let Some(i) = v.spatial.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                what: "tangent vector",
                index: i,
            });
        }
        Ok(self.exp_unchecked(&v.spatial))
    }

    pub(crate) fn exp_unchecked(&self, v: &[f64]) -> LorentzPoint {
        let sqrt_c = self.curvature.sqrt();
        let r = sqrt_c * norm(v);
        let mut coords = Vec::with_capacity(v.len() + 1);
        coords.push(r.cosh() / sqrt_c);
        let scale = sinhc(r);
        coords.extend(v.iter().map(|x| x * scale));
        LorentzPoint { coords }
    }

    pub fn log_origin(&self, x: &LorentzPoint) -> Result<TangentAtOrigin> {
        self.check_point(x)?;
        let sqrt_c = self.curvature.sqrt();
        let s = norm(x.spatial());
        if s == 0.0 {
            return Ok(TangentAtOrigin {
                spatial: vec![0.0; self.dim],
            });
        }
        let dist = (sqrt_c * s).asinh() / sqrt_c;
        Ok(TangentAtOrigin {
            spatial: x.spatial().iter().map(|v| v * dist / s).collect(),
        })
    }

    /// Geodesic distance.
    pub fn dist(&self, u: &LorentzPoint, v: &LorentzPoint) -> Result<f64> {
        self.check_point(u)?;
        self.check_point(v)?;
        Ok(self.dist_unchecked(&u.coords, &v.coords))
    }

    /// Distance from the spatial parts alone, via
    /// `sinh^2(theta/2) = sinh^2((r1 - r2)/2) + c |u| |v| |u^ - v^|^2 / 4`
    /// with `r = asinh(sqrt(c) |x|)` and unit directions `u^`, `v^`. Every
    /// term is non-negative, so nothing cancels far from the origin.
    pub(crate) fn dist_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        let c = self.curvature;
        let sqrt_c = c.sqrt();
        let (us, vs) = (&u[1..], &v[1..]);
        let (nu, nv) = (norm(us), norm(vs));
        let radial = ((sqrt_c * nu).asinh() - (sqrt_c * nv).asinh()) / 2.0;
        let mut half_sq = radial.sinh().powi(2);
        if nu > 0.0 && nv > 0.0 {
            let chord_sq: f64 = us.iter().zip(vs).map(|(a, b)| (a / nu - b / nv).powi(2)).sum();
            half_sq += c * nu * nv * chord_sq / 4.0;
        }
        2.0 * half_sq.sqrt().asinh() / sqrt_c
    }

    /// Constant-speed geodesic from `u` (t = 0) to `v` (t = 1).
    pub fn geodesic(&self, u: &LorentzPoint, v: &LorentzPoint, t: f64) -> Result<LorentzPoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("geodesic parameter {t} outside [0, 1]")));
        }
        self.check_point(u)?;
        self.check_point(v)?;
        Ok(self.geodesic_unchecked(&u.coords, &v.coords, t))
    }

    pub(crate) fn geodesic_unchecked(&self, u: &[f64], v: &[f64], t: f64) -> LorentzPoint {
        let (a, b) = geodesic_coefficients(self.curvature.sqrt() * self.dist_unchecked(u, v), t);
        let spatial: Vec<f64> = u[1..].iter().zip(&v[1..]).map(|(x, y)| a * x + b * y).collect();
        self.project(&spatial)
    }

    /// `exp_origin(alpha * (w z))`, with `w` defaulting to the identity.
    pub fn lift(&self, z: &[f64], alpha: f64, w: Option<&EmbeddingMatrix>) -> Result<LorentzPoint> {
        let tangent = match w {
            Some(w) => {
                if w.dim() != z.len() {
                    return Err(Error::dims(w.dim(), z.len()));
                }
                matvec(w, z).into_iter().map(|v| alpha * v).collect()
            }
            None => z.iter().map(|v| alpha * v).collect(),
        };
        self.exp_origin(&TangentAtOrigin { spatial: tangent })
    }

    /// Vector-Jacobian product of `exp_origin` at tangent `u` for an upstream
    /// gradient `g` over the `n + 1` ambient coordinates.
    pub(crate) fn exp_origin_vjp(&self, u: &[f64], g: &[f64]) -> Vec<f64> {
        let c = self.curvature;
        let sqrt_c = c.sqrt();
        let r = sqrt_c * norm(u);
        let f = sinhc(r);
        let f_prime_over_r = if r < 1e-2 {
            let r2 = r * r;
            1.0 / 3.0 + r2 / 30.0 + r2 * r2 / 840.0
        } else {
            (r * r.cosh() - r.sinh()) / (r * r * r)
        };
        let gs = &g[1..];
        let gs_dot_u: f64 = gs.iter().zip(u).map(|(a, b)| a * b).sum();
        let radial = g[0] * sqrt_c * f + c * f_prime_over_r * gs_dot_u;
        u.iter().zip(gs).map(|(ui, gi)| radial * ui + f * gi).collect()
    }
}

/// `sinh(r)/r`, continuous at zero.
fn sinhc(r: f64) -> f64 {
    if r < 1e-4 {
        1.0 + r * r / 6.0
    } else {
        r.sinh() / r
    }
}

/// Blend coefficients `(sinh((1-t)theta), sinh(t theta)) / sinh(theta)`,
/// degenerating to `(1 - t, t)` as `theta -> 0`.
pub(crate) fn geodesic_coefficients(theta: f64, t: f64) -> (f64, f64) {
    if theta < 1e-8 {
        (1.0 - t, t)
    } else {
        let s = theta.sinh();
        (((1.0 - t) * theta).sinh() / s, (t * theta).sinh() / s)
    }
}

/// Derivatives of [`geodesic_coefficients`] with respect to `theta`.
pub(crate) fn geodesic_coefficient_derivs(theta: f64, t: f64) -> (f64, f64) {
    if theta < 1e-8 {
        return (0.0, 0.0);
    }
    let (s, ch) = (theta.sinh(), theta.cosh());
    let s2 = s * s;
    let ta = (1.0 - t) * theta;
    let tb = t * theta;
    (
        ((1.0 - t) * ta.cosh() * s - ta.sinh() * ch) / s2,
        (t * tb.cosh() * s - tb.sinh() * ch) / s2,
    )
}

pub fn matvec(w: &EmbeddingMatrix, z: &[f64]) -> Vec<f64> {
    w.iter_rows()
        .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tangent(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = rng.gen_range(0.0..max_norm);
        let nv = norm(&v).max(1e-12);
        v.iter().map(|x| x * target / nv).collect()
    }

    #[test]
    fn origin_inner_products() {
        let m = LorentzManifold::new(1.0, 4).unwrap();
        let o = m.origin();
        assert_eq!(m.inner(&o, &o).unwrap(), -1.0);
        let two = LorentzManifold::new(1.0, 1).unwrap();
        let p = LorentzPoint { coords: vec![1.0, 0.0] };
        assert_eq!(two.inner(&p, &p).unwrap(), -1.0);
        assert!(m.inner(&o, &p).is_err());
    }

    #[test]
    fn exp_examples() {
        let m = LorentzManifold::new(1.0, 3).unwrap();
        let x = m.exp_origin(&TangentAtOrigin { spatial: vec![0.0; 3] }).unwrap();
        assert_eq!(x, m.origin());
        let a: f64 = 1.7;
        let x = m.exp_origin(&TangentAtOrigin { spatial: vec![a, 0.0, 0.0] }).unwrap();
        assert!((x.coords[0] - a.cosh()).abs() < 1e-12);
        assert!((x.coords[1] - a.sinh()).abs() < 1e-12);
        assert_eq!(&x.coords[2..], &[0.0, 0.0]);
        assert!(m.exp_origin(&TangentAtOrigin { spatial: vec![f64::NAN, 0.0, 0.0] }).is_err());
    }

    #[test]
    fn log_examples() {
        let m = LorentzManifold::new(1.0, 3).unwrap();
        assert_eq!(m.log_origin(&m.origin()).unwrap().spatial, vec![0.0; 3]);
        let x = LorentzPoint {
            coords: vec![2f64.cosh(), 2f64.sinh(), 0.0, 0.0],
        };
        let v = m.log_origin(&x).unwrap();
        assert!((v.spatial[0] - 2.0).abs() < 1e-12);
        let off = LorentzPoint {
            coords: vec![1.0, 1.0, 0.0, 0.0],
        };
        assert!(matches!(m.log_origin(&off), Err(Error::Geometry(_))));
    }

    #[test]
    fn radial_distance_equals_tangent_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in [0.5, 1.0, 2.0] {
            let m = LorentzManifold::new(c, 5).unwrap();
            for _ in 0..200 {
                let v = random_tangent(&mut rng, 5, 10.0);
                let x = m.exp_unchecked(&v);
                let d = m.dist(&x, &m.origin()).unwrap();
                assert!((d - norm(&v)).abs() < 1e-9, "c={c} |v|={} d={d}", norm(&v));
            }
        }
        let m = LorentzManifold::new(1.0, 2).unwrap();
        let tiny = m.exp_unchecked(&[1e-9, 0.0]);
        assert!((m.dist(&tiny, &m.origin()).unwrap() - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn geodesic_endpoints_and_degenerate() {
        let m = LorentzManifold::new(1.0, 3).unwrap();
        let u = m.exp_unchecked(&[0.3, -1.2, 0.5]);
        let v = m.exp_unchecked(&[-2.0, 0.1, 1.0]);
        let g0 = m.geodesic(&u, &v, 0.0).unwrap();
        let g1 = m.geodesic(&u, &v, 1.0).unwrap();
        for i in 0..4 {
            assert!((g0.coords[i] - u.coords[i]).abs() < 1e-9);
            assert!((g1.coords[i] - v.coords[i]).abs() < 1e-9);
        }
        let same = m.geodesic(&u, &u, 0.37).unwrap();
        for i in 0..4 {
            assert!((same.coords[i] - u.coords[i]).abs() < 1e-9);
        }
        assert!(m.geodesic(&u, &v, 1.5).is_err());
    }

    #[test]
    fn geodesic_is_distance_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = LorentzManifold::new(2.0, 6).unwrap();
        for _ in 0..100 {
            let u = m.exp_unchecked(&random_tangent(&mut rng, 6, 5.0));
            let v = m.exp_unchecked(&random_tangent(&mut rng, 6, 5.0));
            let total = m.dist(&u, &v).unwrap();
            for t in [0.25, 0.5, 0.75] {
                let g = m.geodesic(&u, &v, t).unwrap();
                assert!(m.constraint_violation(&g) < 1e-6);
                assert!((m.dist(&u, &g).unwrap() - t * total).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lift_examples() {
        let m = LorentzManifold::new(1.0, 3).unwrap();
        assert_eq!(m.lift(&[0.0; 3], 2.0, None).unwrap(), m.origin());
        let z = [0.4, -0.2, 0.9];
        assert_eq!(m.lift(&z, 1.0, None).unwrap(), m.exp_unchecked(&z));
        let eye = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(m.lift(&z, 1.0, Some(&eye)).unwrap(), m.exp_unchecked(&z));
        let d1 = m.dist(&m.origin(), &m.lift(&z, 1.0, None).unwrap()).unwrap();
        let d2 = m.dist(&m.origin(), &m.lift(&z, 2.0, None).unwrap()).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-9);
        let narrow = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(m.lift(&z, 1.0, Some(&narrow)).is_err());
    }

    #[test]
    fn exp_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for c in [0.5, 1.0, 2.0] {
            let m = LorentzManifold::new(c, 4).unwrap();
            for scale in [1e-6, 1e-3, 0.5, 3.0] {
                let u = random_tangent(&mut rng, 4, scale);
                let g: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let analytic = m.exp_origin_vjp(&u, &g);
                let h = 1e-6;
                for i in 0..4 {
                    let mut up = u.clone();
                    up[i] += h;
                    let mut dn = u.clone();
                    dn[i] -= h;
                    let fp: f64 = m.exp_unchecked(&up).coords.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let fm: f64 = m.exp_unchecked(&dn).coords.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let fd = (fp - fm) / (2.0 * h);
                    assert!((fd - analytic[i]).abs() < 1e-6 * (1.0 + fd.abs()), "c={c} scale={scale}");
                }
            }
        }
    }
}
