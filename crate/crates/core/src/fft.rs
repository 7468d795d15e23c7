//! In-place iterative radix-2 FFT, enough for per-frame power spectra.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // float methods come from std when it is linked
use num_traits::Float;

/// Power spectrum `|X_j|^2` for `j = 0..=n/2` of a real signal whose length
/// is a power of two.
pub(crate) fn power_spectrum(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    debug_assert!(n.is_power_of_two());
    let mut re = signal.to_vec();
    let mut im = vec![0.0; n];

    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let angle = -2.0 * PI / len as f64;
        for k in 0..len / 2 {
            let (wr, wi) = ((angle * k as f64).cos(), (angle * k as f64).sin());
            for base in (0..n).step_by(len) {
                let (a, b) = (base + k, base + k + len / 2);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }

    (0..=n / 2).map(|j| re[j] * re[j] + im[j] * im[j]).collect()
}
