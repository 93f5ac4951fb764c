//! Small statistics helpers for Monte-Carlo reductions.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::numerics::{CMatrix, C64};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running first and second moments of a real sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: u64,
    s1: CompensatedSum,
    s2: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.s1.value() / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.s2.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Entry-wise moments of complex matrix samples.
///
/// The standard error of a complex entry is `sqrt((Var re + Var im)/n)`.
#[derive(Clone, Debug)]
pub struct MatrixMoments {
    rows: usize,
    cols: usize,
    re: Vec<Moments>,
    im: Vec<Moments>,
}

impl MatrixMoments {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: alloc::vec![Moments::default(); rows * cols],
            im: alloc::vec![Moments::default(); rows * cols],
        }
    }

    pub fn push(&mut self, m: &CMatrix) {
        assert_eq!((m.rows(), m.cols()), (self.rows, self.cols), "shape mismatch");
        for (k, z) in m.as_slice().iter().enumerate() {
            self.re[k].push(z.re);
            self.im[k].push(z.im);
        }
    }

    pub fn count(&self) -> u64 {
        self.re.first().map_or(0, |m| m.count())
    }

    pub fn mean(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            C64::new(self.re[k].mean(), self.im[k].mean())
        })
    }

    /// Real-valued matrix of entry standard errors (imaginary parts zero).
    pub fn stderr(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            let v = self.re[k].stderr().powi(2) + self.im[k].stderr().powi(2);
            C64::new(v.sqrt(), 0.0)
        })
    }

    /// Moments of the real and imaginary part of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> (&Moments, &Moments) {
        let k = i * self.cols + j;
        (&self.re[k], &self.im[k])
    }
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical law of
/// `sample` and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}
