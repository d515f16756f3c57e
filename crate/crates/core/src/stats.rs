//! Small statistics helpers shared by the averaging and comparison paths.

use num_complex::Complex64 as C64;

/// Kahan (compensated) summation; keeps disorder averages independent of
/// accumulation batching to well below 1e-12.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanComplex {
    re: KahanSum,
    im: KahanSum,
}

impl KahanComplex {
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Mean and standard error of the mean (sample-variance based, n ≥ 2).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 1);
    let mut acc = KahanSum::default();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.value() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let mut sq = KahanSum::default();
    for &v in values {
        sq.add((v - mean) * (v - mean));
    }
    let var = sq.value() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
