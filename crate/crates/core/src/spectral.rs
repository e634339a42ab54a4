//! Multi-dimensional FFT helpers for cubic periodic grids `[0,2π)^d`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Integer wavenumber of FFT bin `m` on an `n`-point grid.
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if 2 * m <= n {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Wavenumber used for odd-order derivatives; the Nyquist bin is zeroed so that
/// real data stays real.
pub fn odd_wavenumber(m: usize, n: usize) -> f64 {
    if n % 2 == 0 && 2 * m == n {
        0.0
    } else {
        wavenumber(m, n) as f64
    }
}

/// In-place FFT of a row-major `n^dims` array along a single axis position.
pub fn fft_axis(data: &mut [Complex64], n: usize, dims: usize, axis: usize, inverse: bool) {
    if dims == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let stride = n.pow((dims - 1 - axis) as u32);
    let block = stride * n;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for outer in (0..data.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for m in 0..n {
                line[m] = data[base + m * stride];
            }
            fft.process(&mut line);
            for m in 0..n {
                data[base + m * stride] = line[m];
            }
        }
    }
}

/// Forward transform over all axes, normalized so bin 0 is the mean.
pub fn forward(data: &[f64], n: usize, dims: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for axis in 0..dims {
        fft_axis(&mut buf, n, dims, axis, false);
    }
    let scale = 1.0 / data.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`forward`]; returns the real part.
pub fn inverse(freq: &[Complex64], n: usize, dims: usize) -> Vec<f64> {
    let mut buf = freq.to_vec();
    for axis in 0..dims {
        fft_axis(&mut buf, n, dims, axis, true);
    }
    buf.iter().map(|c| c.re).collect()
}

/// Multi-index of a row-major flat index (first axis slowest).
pub fn unflatten(mut idx: usize, n: usize, dims: usize) -> Vec<usize> {
    let mut out = vec![0; dims];
    for d in (0..dims).rev() {
        out[d] = idx % n;
        idx /= n;
    }
    out
}

pub fn flatten(multi: &[usize], n: usize) -> usize {
    multi.iter().fold(0, |acc, &m| acc * n + m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let n = 8;
        let data: Vec<f64> = (0..n * n * n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = inverse(&forward(&data, n, 3), n, 3);
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_inverts_unflatten() {
        for idx in 0..125 {
            assert_eq!(flatten(&unflatten(idx, 5, 3), 5), idx);
        }
    }

    #[test]
    fn wavenumbers() {
        assert_eq!(wavenumber(3, 8), 3);
        assert_eq!(wavenumber(4, 8), 4);
        assert_eq!(wavenumber(5, 8), -3);
        assert_eq!(odd_wavenumber(4, 8), 0.0);
    }
}
