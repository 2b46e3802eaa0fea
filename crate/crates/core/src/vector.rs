//! Dense vector kernels. All reductions run in ascending index order so
//! results are bit-reproducible.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        s += a * b;
    }
    s
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

pub fn copy(src: &[f64], dst: &mut [f64]) {
    dst.copy_from_slice(src);
}

/// `b - y`, elementwise.
pub fn sub(b: &[f64], y: &[f64]) -> Vec<f64> {
    b.iter().zip(y).map(|(a, c)| a - c).collect()
}

pub fn is_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_kernels() {
        let x = [3.0, -4.0];
        assert_eq!(norm2(&x), 5.0);
        assert_eq!(norm_inf(&x), 4.0);
        let mut y = [1.0, 1.0];
        axpy(2.0, &x, &mut y);
        assert_eq!(y, [7.0, -7.0]);
        scale(0.5, &mut y);
        assert_eq!(y, [3.5, -3.5]);
        let mut z = [0.0; 2];
        copy(&y, &mut z);
        assert_eq!(z, y);
        assert_eq!(sub(&[1.0, 2.0], &[1.0, 1.0]), vec![0.0, 1.0]);
        assert!(!is_finite(&[1.0, f64::NAN]));
    }
}
