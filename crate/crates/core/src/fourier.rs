//! Discrete Fourier transforms on `Z_N` and `Z_N x Z_N`.
//!
//! Forward: `F(r) = sum_k f(k) e(-k r)` with `e(x) = exp(2 pi i x / N)`.
//! Powers of two go through an iterative radix-2 FFT, every other length
//! through Bluestein's chirp convolution on a power-of-two buffer.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::zn::{Arity, ComplexField};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    arity: Arity,
    modulus: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn at(&self, r: usize) -> Complex64 {
        self.coeffs[r]
    }

    pub fn at2(&self, r1: usize, r2: usize) -> Complex64 {
        self.coeffs[r1 * self.modulus + r2]
    }

    /// `sum |F(r)|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `sum |F(r)|^4`.
    pub fn fourth_moment(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr() * c.norm_sqr()).sum()
    }

    /// Frequency of largest magnitude among nonzero frequencies; ties go to
    /// the lexicographically smallest index.
    pub fn argmax_nonzero(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            let v = c.norm();
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best
    }
}

fn fft_pow2(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        let twiddles: Vec<Complex64> = (0..half).map(|j| Complex64::from_polar(1.0, ang * j as f64)).collect();
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let u = buf[start + j];
                let v = buf[start + j + half] * twiddles[j];
                buf[start + j] = u + v;
                buf[start + j + half] = u - v;
            }
        }
        len <<= 1;
    }
}

fn bluestein(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    // exp(sign * pi i j^2 / n), with j^2 reduced mod 2n to keep the angle small
    let chirp: Vec<Complex64> = (0..n)
        .map(|j| {
            let q = (j as u128 * j as u128 % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, sign * PI * q / n as f64)
        })
        .collect();
    let mut a = vec![Complex64::zero(); m];
    for k in 0..n {
        a[k] = input[k] * chirp[k];
    }
    let mut b = vec![Complex64::zero(); m];
    b[0] = chirp[0].conj();
    for j in 1..n {
        b[j] = chirp[j].conj();
        b[m - j] = chirp[j].conj();
    }
    fft_pow2(&mut a, -1.0);
    fft_pow2(&mut b, -1.0);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_pow2(&mut a, 1.0);
    let scale = 1.0 / m as f64;
    (0..n).map(|r| a[r] * scale * chirp[r]).collect()
}

/// Unnormalized transform `sum_k x_k exp(sign * 2 pi i k r / n)`.
fn transform(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        fft_pow2(&mut buf, sign);
        buf
    } else {
        bluestein(input, sign)
    }
}

fn transform_2d(values: &[Complex64], n: usize, sign: f64) -> Vec<Complex64> {
    let mut out = values.to_vec();
    for k in 0..n {
        let row = transform(&out[k * n..(k + 1) * n], sign);
        out[k * n..(k + 1) * n].copy_from_slice(&row);
    }
    let mut col = vec![Complex64::zero(); n];
    for m in 0..n {
        for k in 0..n {
            col[k] = out[k * n + m];
        }
        let t = transform(&col, sign);
        for k in 0..n {
            out[k * n + m] = t[k];
        }
    }
    out
}

fn forward(f: &ComplexField) -> Vec<Complex64> {
    match f.arity() {
        Arity::One => transform(f.values(), -1.0),
        Arity::Two => transform_2d(f.values(), f.modulus(), -1.0),
    }
}

pub fn dft_1d(f: &ComplexField) -> Result<Spectrum> {
    if f.arity() != Arity::One {
        return Err(crate::Error::ArityMismatch);
    }
    Ok(dft(f))
}

pub fn dft_2d(f: &ComplexField) -> Result<Spectrum> {
    if f.arity() != Arity::Two {
        return Err(crate::Error::ArityMismatch);
    }
    Ok(dft(f))
}

/// Transform of either arity.
pub fn dft(f: &ComplexField) -> Spectrum {
    Spectrum { arity: f.arity(), modulus: f.modulus(), coeffs: forward(f) }
}

/// `f(k) = N^-arity sum_r F(r) e(k r)`.
pub fn inverse(s: &Spectrum) -> ComplexField {
    let n = s.modulus;
    let raw = match s.arity {
        Arity::One => transform(&s.coeffs, 1.0),
        Arity::Two => transform_2d(&s.coeffs, n, 1.0),
    };
    let scale = 1.0 / (n.pow(s.arity.dims()) as f64);
    let values = raw.into_iter().map(|v| v * scale).collect();
    ComplexField::new(s.arity, n, values).expect("shape preserved by transform")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationMethod {
    Direct,
    Spectral,
}

/// `k -> sum_s f(s) conj(g(s - k))`, indices reduced mod `N` on each axis.
pub fn cross_correlation(f: &ComplexField, g: &ComplexField, method: CorrelationMethod) -> Result<ComplexField> {
    f.same_shape(g)?;
    let n = f.modulus();
    match method {
        CorrelationMethod::Direct => Ok(match f.arity() {
            Arity::One => ComplexField::from_fn_1d(n, |k| {
                (0..n).map(|s| f.at(s) * g.at((s + n - k) % n).conj()).sum()
            }),
            Arity::Two => ComplexField::from_fn_2d(n, |k1, k2| {
                let mut acc = Complex64::zero();
                for s1 in 0..n {
                    let t1 = (s1 + n - k1) % n;
                    for s2 in 0..n {
                        acc += f.at2(s1, s2) * g.at2(t1, (s2 + n - k2) % n).conj();
                    }
                }
                acc
            }),
        }),
        CorrelationMethod::Spectral => {
            let fh = dft(f);
            let gh = dft(g);
            let coeffs = fh.coeffs.iter().zip(&gh.coeffs).map(|(a, b)| a * b.conj()).collect();
            Ok(inverse(&Spectrum { arity: f.arity(), modulus: n, coeffs }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Oracle: the defining double / quadruple sum, evaluated term by term.
    fn direct(f: &ComplexField) -> Vec<Complex64> {
        let n = f.modulus();
        let e = |x: usize| Complex64::from_polar(1.0, -2.0 * PI * (x % n) as f64 / n as f64);
        match f.arity() {
            Arity::One => (0..n).map(|r| (0..n).map(|k| f.at(k) * e(k * r)).sum()).collect(),
            Arity::Two => (0..n * n)
                .map(|i| {
                    let (r1, r2) = (i / n, i % n);
                    let mut acc = Complex64::zero();
                    for k in 0..n {
                        for m in 0..n {
                            acc += f.at2(k, m) * e(k * r1 + m * r2);
                        }
                    }
                    acc
                })
                .collect(),
        }
    }

    fn random_field(rng: &mut ChaCha8Rng, arity: Arity, n: usize) -> ComplexField {
        let len = n.pow(arity.dims());
        let v = (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        ComplexField::new(arity, n, v).unwrap()
    }

    fn l2(v: &[Complex64]) -> f64 {
        v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
        let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        l2(&d) / l2(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn point_mass_transforms_to_ones() {
        let f = ComplexField::from_fn_1d(8, |k| Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0));
        let s = dft_1d(&f).unwrap();
        assert!(s.coeffs().iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn constant_transforms_to_spike() {
        let s = dft_1d(&ComplexField::from_fn_1d(8, |_| Complex64::new(1.0, 0.0))).unwrap();
        assert!((s.at(0) - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-12));
        let s2 = dft_2d(&ComplexField::from_fn_2d(4, |_, _| Complex64::new(1.0, 0.0))).unwrap();
        assert!((s2.at2(0, 0) - Complex64::new(16.0, 0.0)).norm() < 1e-12);
        assert!(s2.coeffs()[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn two_point_alternating() {
        let f = ComplexField::new(Arity::One, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
        let s = dft_1d(&f).unwrap();
        assert!(s.at(0).norm() < 1e-15);
        assert!((s.at(1) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sign_convention_puts_single_frequency_at_r() {
        // f(k) = e(3k) transforms to N at r = 3, not at N - 3
        let n = 12;
        let f = ComplexField::from_fn_1d(n, |k| Complex64::from_polar(1.0, 2.0 * PI * (3 * k) as f64 / n as f64));
        let s = dft_1d(&f).unwrap();
        assert!((s.at(3).re - n as f64).abs() < 1e-9);
        assert!(s.at(n - 3).norm() < 1e-9);
    }

    #[test]
    fn fast_paths_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 7, 8, 12, 16, 17, 60, 64, 97] {
            let f = random_field(&mut rng, Arity::One, n);
            assert!(rel_l2(dft(&f).coeffs(), &direct(&f)) < tolerance::DIRECT_SUM, "n = {n}");
        }
        for n in [1, 3, 4, 6, 8, 9, 16] {
            let f = random_field(&mut rng, Arity::Two, n);
            assert!(rel_l2(dft(&f).coeffs(), &direct(&f)) < tolerance::DIRECT_SUM, "n = {n}");
        }
    }

    #[test]
    fn correlation_of_constants() {
        let one = ComplexField::from_fn_1d(4, |_| Complex64::new(1.0, 0.0));
        for method in [CorrelationMethod::Direct, CorrelationMethod::Spectral] {
            let c = cross_correlation(&one, &one, method).unwrap();
            assert!(c.values().iter().all(|v| (v - Complex64::new(4.0, 0.0)).norm() < 1e-12));
        }
        let delta = ComplexField::from_fn_1d(4, |k| Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0));
        let c = cross_correlation(&delta, &delta, CorrelationMethod::Direct).unwrap();
        assert_eq!(c.values(), delta.values());
    }

    #[test]
    fn correlation_rejects_shape_mismatch() {
        let a = ComplexField::zeros(Arity::One, 4);
        let b = ComplexField::zeros(Arity::One, 5);
        let c = ComplexField::zeros(Arity::Two, 4);
        assert!(cross_correlation(&a, &b, CorrelationMethod::Direct).is_err());
        assert!(cross_correlation(&a, &c, CorrelationMethod::Spectral).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn identities_hold(seed in any::<u64>(), n in 1usize..20, two in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let arity = if two { Arity::Two } else { Arity::One };
            let n = if two { n.min(10) } else { n };
            let f = random_field(&mut rng, arity, n);
            let g = random_field(&mut rng, arity, n);
            let (fh, gh) = (dft(&f), dft(&g));
            let scale = n.pow(arity.dims()) as f64;

            let lhs = scale * f.energy();
            prop_assert!(tolerance::close(lhs, fh.energy(), tolerance::PARSEVAL));

            let ip = f.inner(&g) * scale;
            let sp: Complex64 = fh.coeffs().iter().zip(gh.coeffs()).map(|(a, b)| a * b.conj()).sum();
            prop_assert!((ip - sp).norm() <= tolerance::PARSEVAL * (scale * f.energy().sqrt() * g.energy().sqrt()));

            let direct_c = cross_correlation(&f, &g, CorrelationMethod::Direct).unwrap();
            let spectral_c = cross_correlation(&f, &g, CorrelationMethod::Spectral).unwrap();
            prop_assert!(rel_l2(spectral_c.values(), direct_c.values()) < tolerance::CORRELATION_AGREEMENT);
            let corr_energy = scale * direct_c.energy();
            let spec: f64 = fh.coeffs().iter().zip(gh.coeffs()).map(|(a, b)| a.norm_sqr() * b.norm_sqr()).sum();
            prop_assert!(tolerance::close(corr_energy, spec, tolerance::PARSEVAL));

            let back = inverse(&fh);
            prop_assert!(rel_l2(back.values(), f.values()) < tolerance::ROUND_TRIP);
        }
    }
}
