//! Small dense-vector helpers on `&[f64]`.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn unit(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0).then(|| scale(a, 1.0 / n))
}

pub fn basis_vector(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

pub fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Angle between `w` and `v` in `[0, pi]`, `None` when either vector is zero.
///
/// Uses `2 atan2(|a - b|, |a + b|)` on the normalized vectors, which keeps full
/// relative precision near 0 and pi where `acos` of the cosine does not.
pub fn angle(w: &[f64], v: &[f64]) -> Option<f64> {
    let a = unit(w)?;
    let b = unit(v)?;
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(&b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    Some(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Orthonormal basis `(e1, e2)` of `span{w, v}` with `e1` along `w`.
pub fn orthonormal_pair(w: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(w.len(), v.len())?;
    let e1 = unit(w).ok_or(Error::DegenerateSubspace)?;
    let mut r = v.to_vec();
    axpy(-dot(&e1, v), &e1, &mut r);
    let rn = norm(&r);
    if rn <= 1e-12 * norm(v).max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSubspace);
    }
    Ok((e1, scale(&r, 1.0 / rn)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn angle_basic() {
        assert!((angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(angle(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((angle(&[-1.0, 0.0], &[1.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!(angle(&[0.0, 0.0], &[1.0, 0.0]).is_none());
    }

    #[test]
    fn angle_precise_near_zero() {
        let t = 1e-9_f64;
        let a = angle(&[t.cos(), t.sin()], &[1.0, 0.0]).unwrap();
        assert!((a - t).abs() < 1e-20);
    }

    #[test]
    fn orthonormal_pair_rejects_parallel() {
        assert!(matches!(
            orthonormal_pair(&[1.0, 2.0], &[-2.0, -4.0]),
            Err(Error::DegenerateSubspace)
        ));
        let (e1, e2) = orthonormal_pair(&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!(dot(&e1, &e2).abs() < 1e-15);
        assert!((norm(&e2) - 1.0).abs() < 1e-15);
    }
}
