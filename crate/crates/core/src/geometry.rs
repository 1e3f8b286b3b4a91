//! Euclidean, complex, and Poincare-ball kernels shared by the scoring
//! functions.
//!
//! All functions are pure and reentrant. Ball points live strictly inside the
//! ball of curvature `c` (radius 1/sqrt(c)); [`project_to_ball`] clamps to
//! radius `(1 - 1e-5)/sqrt(c)` so that `artanh` stays finite.

use serde::{Deserialize, Serialize};

/// Margin kept between projected points and the ball boundary.
pub const BALL_EPS: f64 = 1e-5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("point lies on or outside the ball boundary")]
    OutsideBall,
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// tanh(sqrt(z))/sqrt(z), continuously extended through z = 0.
pub fn tanhc_sqrt(z: f64) -> f64 {
    if z < 1e-12 {
        1.0 - z / 3.0 + 2.0 * z * z / 15.0
    } else {
        let s = z.sqrt();
        s.tanh() / s
    }
}

/// artanh(sqrt(z))/sqrt(z), continuously extended through z = 0.
pub fn artanhc_sqrt(z: f64) -> f64 {
    if z < 1e-12 {
        1.0 + z / 3.0 + z * z / 5.0
    } else {
        let s = z.sqrt();
        s.atanh() / s
    }
}

/// If `c * ||x||^2 >= 1`, rescale onto radius `(1 - BALL_EPS)/sqrt(c)`.
pub fn project_to_ball(c: f64, x: &mut [f64]) {
    let max_norm = (1.0 - BALL_EPS) / c.sqrt();
    let n = norm(x);
    if n > max_norm {
        let f = max_norm / n;
        for v in x.iter_mut() {
            *v *= f;
        }
    }
}

/// Mobius addition on the ball of curvature `c`:
/// `((1 + 2c<x,y> + c|y|^2) x + (1 - c|x|^2) y) / (1 + 2c<x,y> + c^2 |x|^2 |y|^2)`.
pub fn mobius_add(c: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    let mut out: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (a * xi + b * yi) / den)
        .collect();
    project_to_ball(c, &mut out);
    out
}

/// Exponential map at the origin: `tanh(sqrt(c)|v|) v / (sqrt(c)|v|)`.
pub fn exp_map_zero(c: f64, v: &[f64]) -> Vec<f64> {
    let f = tanhc_sqrt(c * norm_sq(v));
    let mut out: Vec<f64> = v.iter().map(|vi| vi * f).collect();
    project_to_ball(c, &mut out);
    out
}

/// Logarithm map at the origin: `artanh(sqrt(c)|p|) p / (sqrt(c)|p|)`.
pub fn log_map_zero(c: f64, p: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let z = c * norm_sq(p);
    if z >= 1.0 {
        return Err(GeometryError::OutsideBall);
    }
    let f = artanhc_sqrt(z);
    Ok(p.iter().map(|pi| pi * f).collect())
}

/// Geodesic distance `(2/sqrt(c)) artanh(sqrt(c) |(-x) (+)_c y|)`.
pub fn hyp_distance(c: f64, x: &[f64], y: &[f64]) -> f64 {
    let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let m = mobius_add(c, &neg_x, y);
    let sc = c.sqrt();
    let arg = (sc * norm(&m)).min(1.0 - BALL_EPS);
    2.0 / sc * arg.atanh()
}

/// Block-diagonal 2x2 rotation by `angles` (one angle per pair of
/// coordinates). An odd trailing coordinate passes through unchanged.
pub fn givens_rotate(angles: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (i, &th) in angles.iter().enumerate() {
        let (a, b) = (x[2 * i], x[2 * i + 1]);
        let (s, c) = th.sin_cos();
        out[2 * i] = c * a - s * b;
        out[2 * i + 1] = s * a + c * b;
    }
    out
}

/// Block-diagonal 2x2 reflection `[[cos, sin], [sin, -cos]]` by `angles`.
/// Applying it twice is the identity.
pub fn givens_reflect(angles: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (i, &th) in angles.iter().enumerate() {
        let (a, b) = (x[2 * i], x[2 * i + 1]);
        let (s, c) = th.sin_cos();
        out[2 * i] = c * a + s * b;
        out[2 * i + 1] = s * a - c * b;
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax-weighted blend of two tangent vectors with logits `<a, q_rot>`
/// and `<a, q_ref>` (temperature 1, no bias).
pub fn tangent_attention(q_rot: &[f64], q_ref: &[f64], a: &[f64]) -> Result<Vec<f64>, GeometryError> {
    if q_rot.len() != q_ref.len() {
        return Err(GeometryError::DimensionMismatch(q_rot.len(), q_ref.len()));
    }
    if a.len() != q_rot.len() {
        return Err(GeometryError::DimensionMismatch(a.len(), q_rot.len()));
    }
    let alpha = sigmoid(dot(a, q_rot) - dot(a, q_ref));
    Ok(q_rot
        .iter()
        .zip(q_ref)
        .map(|(r, f)| alpha * r + (1.0 - alpha) * f)
        .collect())
}

/// Dense complex vector stored as parallel real/imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self, GeometryError> {
        if re.len() != im.len() {
            return Err(GeometryError::DimensionMismatch(re.len(), im.len()));
        }
        Ok(ComplexVector { re, im })
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        ComplexVector {
            re: phases.iter().map(|p| p.cos()).collect(),
            im: phases.iter().map(|p| p.sin()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Element-wise complex product `h o r`; callers pass `r` with unit-modulus
/// entries when a pure rotation is intended.
pub fn complex_rotate(h: &ComplexVector, r: &ComplexVector) -> Result<ComplexVector, GeometryError> {
    if h.len() != r.len() {
        return Err(GeometryError::DimensionMismatch(h.len(), r.len()));
    }
    let mut re = Vec::with_capacity(h.len());
    let mut im = Vec::with_capacity(h.len());
    for k in 0..h.len() {
        re.push(h.re[k] * r.re[k] - h.im[k] * r.im[k]);
        im.push(h.re[k] * r.im[k] + h.im[k] * r.re[k]);
    }
    Ok(ComplexVector { re, im })
}

/// `Re(sum_k h_k r_k conj(t_k))`.
pub fn complex_trilinear(h: &ComplexVector, r: &ComplexVector, t: &ComplexVector) -> Result<f64, GeometryError> {
    if h.len() != r.len() {
        return Err(GeometryError::DimensionMismatch(h.len(), r.len()));
    }
    if h.len() != t.len() {
        return Err(GeometryError::DimensionMismatch(h.len(), t.len()));
    }
    let mut acc = 0.0;
    for k in 0..h.len() {
        let hr_re = h.re[k] * r.re[k] - h.im[k] * r.im[k];
        let hr_im = h.re[k] * r.im[k] + h.im[k] * r.re[k];
        acc += hr_re * t.re[k] + hr_im * t.im[k];
    }
    Ok(acc)
}

/// A point strictly inside the Poincare ball of curvature `c`; construction
/// projects onto the ball if needed.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    curvature: f64,
}

impl BallPoint {
    pub fn new(mut coords: Vec<f64>, curvature: f64) -> Self {
        assert!(curvature > 0.0, "curvature must be positive");
        project_to_ball(curvature, &mut coords);
        BallPoint { coords, curvature }
    }

    pub fn origin(dim: usize, curvature: f64) -> Self {
        BallPoint::new(vec![0.0; dim], curvature)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    fn check_curvature(&self, other: &BallPoint) -> Result<(), GeometryError> {
        if self.curvature != other.curvature {
            return Err(GeometryError::CurvatureMismatch(self.curvature, other.curvature));
        }
        Ok(())
    }

    pub fn mobius_add(&self, other: &BallPoint) -> Result<BallPoint, GeometryError> {
        self.check_curvature(other)?;
        Ok(BallPoint {
            coords: mobius_add(self.curvature, &self.coords, &other.coords),
            curvature: self.curvature,
        })
    }

    pub fn distance(&self, other: &BallPoint) -> Result<f64, GeometryError> {
        self.check_curvature(other)?;
        Ok(hyp_distance(self.curvature, &self.coords, &other.coords))
    }

    pub fn log_zero(&self) -> Vec<f64> {
        // construction keeps the point inside the ball
        log_map_zero(self.curvature, &self.coords).expect("ball point inside ball")
    }

    pub fn exp_zero(curvature: f64, v: &[f64]) -> BallPoint {
        BallPoint { coords: exp_map_zero(curvature, v), curvature }
    }
}

/// Angles for block-diagonal Givens rotations/reflections over dimension `d`
/// (`floor(d/2)` angles; odd trailing coordinate is untouched).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GivensParams {
    pub angles: Vec<f64>,
}

impl GivensParams {
    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        givens_rotate(&self.angles, x)
    }

    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        givens_reflect(&self.angles, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
    }

    #[test]
    fn mobius_identity_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 4, 0.45); // stays inside the unit ball
            let zero = vec![0.0; 4];
            let r = mobius_add(1.0, &x, &zero);
            for (a, b) in r.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mobius_spec_value() {
        // x = y = (0.3, 0), c = 1 -> (0.55046..., 0)
        let r = mobius_add(1.0, &[0.3, 0.0], &[0.3, 0.0]);
        assert!((r[0] - 0.654 / 1.1881).abs() < 1e-12);
        assert!((r[0] - 0.55046).abs() < 1e-5);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn mobius_euclidean_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 3, 0.5);
            let y = rand_vec(&mut rng, 3, 0.5);
            let r = mobius_add(1e-8, &x, &y);
            for i in 0..3 {
                assert!((r[i] - (x[i] + y[i])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn exp_log_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &c in &[0.1f64, 1.0, 10.0] {
            for _ in 0..200 {
                let v = rand_vec(&mut rng, 5, 3.0 / c.max(1.0));
                let p = exp_map_zero(c, &v);
                let back = log_map_zero(c, &p).unwrap();
                for i in 0..5 {
                    assert!((back[i] - v[i]).abs() < 1e-9, "c={c}");
                }
            }
        }
    }

    #[test]
    fn exp_map_saturates_inside_ball() {
        let p = exp_map_zero(1.0, &[10.0, 0.0, 0.0]);
        assert!(norm(&p) < 1.0);
    }

    #[test]
    fn log_map_rejects_boundary() {
        assert_eq!(log_map_zero(1.0, &[1.0, 0.0]), Err(GeometryError::OutsideBall));
    }

    #[test]
    fn distance_spec_value() {
        let d = hyp_distance(1.0, &[0.0, 0.0], &[0.5, 0.0]);
        assert!((d - 2.0 * 0.5f64.atanh()).abs() < 1e-12);
        assert!((d - 1.09861).abs() < 1e-5);
    }

    #[test]
    fn distance_symmetry_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 4, 0.7);
            let y = rand_vec(&mut rng, 4, 0.7);
            let dxy = hyp_distance(1.0, &x, &y);
            let dyx = hyp_distance(1.0, &y, &x);
            assert!((dxy - dyx).abs() < 1e-10);
            assert!(hyp_distance(1.0, &x, &x) < 1e-12);
        }
    }

    #[test]
    fn distance_flat_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = 1e-8;
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 4, 0.9);
            let y = rand_vec(&mut rng, 4, 0.9);
            let d = hyp_distance(c, &x, &y);
            let e: f64 = 2.0 * x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if e > 1e-3 {
                assert!((d / e - 1.0).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn givens_quarter_turn() {
        let y = givens_rotate(&[std::f64::consts::FRAC_PI_2], &[1.0, 0.0]);
        assert!((y[0]).abs() < 1e-15);
        assert!((y[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn givens_preserves_norm_and_reflect_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 7, 2.0); // odd dim: trailing passthrough
            let th = rand_vec(&mut rng, 3, std::f64::consts::PI);
            let r = givens_rotate(&th, &x);
            assert!((norm(&r) - norm(&x)).abs() < 1e-12);
            let f = givens_reflect(&th, &x);
            assert!((norm(&f) - norm(&x)).abs() < 1e-12);
            let ff = givens_reflect(&th, &f);
            for i in 0..7 {
                assert!((ff[i] - x[i]).abs() < 1e-12);
            }
            assert_eq!(r[6], x[6]);
        }
    }

    #[test]
    fn attention_symmetry_and_midpoint() {
        let q = vec![0.5, -0.2, 0.1];
        let a = vec![3.0, 1.0, -2.0];
        let same = tangent_attention(&q, &q, &a).unwrap();
        for i in 0..3 {
            assert!((same[i] - q[i]).abs() < 1e-15);
        }
        let q2 = vec![-0.1, 0.4, 0.9];
        let mid = tangent_attention(&q, &q2, &[0.0, 0.0, 0.0]).unwrap();
        for i in 0..3 {
            assert!((mid[i] - 0.5 * (q[i] + q2[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_saturates() {
        let q_rot = vec![1.0, 0.0];
        let q_ref = vec![0.0, 1.0];
        // logit difference = <a, q_rot - q_ref> = 200 -> alpha ~ 1
        let out = tangent_attention(&q_rot, &q_ref, &[100.0, -100.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-9);
        assert!(out[1].abs() < 1e-9);
    }

    #[test]
    fn complex_rotate_identity_phases() {
        let h = ComplexVector::new(vec![0.3, -0.4], vec![0.1, 0.2]).unwrap();
        let r = ComplexVector::from_phases(&[0.0, 0.0]);
        let out = complex_rotate(&h, &r).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn complex_rotation_spec_case() {
        // h = i, r = i -> h o r = -1
        let h = ComplexVector::new(vec![0.0], vec![1.0]).unwrap();
        let r = ComplexVector::new(vec![0.0], vec![1.0]).unwrap();
        let t = ComplexVector::new(vec![-1.0], vec![0.0]).unwrap();
        let hr = complex_rotate(&h, &r).unwrap();
        assert!((hr.re[0] - t.re[0]).abs() < 1e-15);
        assert!((hr.im[0] - t.im[0]).abs() < 1e-15);
    }

    #[test]
    fn trilinear_scalar_one() {
        let one = ComplexVector::new(vec![1.0], vec![0.0]).unwrap();
        assert!((complex_trilinear(&one, &one, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ball_point_curvature_mismatch() {
        let a = BallPoint::new(vec![0.1, 0.0], 1.0);
        let b = BallPoint::new(vec![0.1, 0.0], 2.0);
        assert!(matches!(a.mobius_add(&b), Err(GeometryError::CurvatureMismatch(_, _))));
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let x = rand_vec(&mut rng, 3, 0.8);
            let y = rand_vec(&mut rng, 3, 0.8);
            let z = rand_vec(&mut rng, 3, 0.8);
            let dxz = hyp_distance(1.0, &x, &z);
            let dxy = hyp_distance(1.0, &x, &y);
            let dyz = hyp_distance(1.0, &y, &z);
            assert!(dxz <= dxy + dyz + 1e-8);
        }
    }
}
