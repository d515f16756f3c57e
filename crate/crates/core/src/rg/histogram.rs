//! Binned probability density of effective resonance frequencies.

use serde::{Deserialize, Serialize};

/// Histogram of `ω_eff` (or `ω_eff/η` when `rescaled`), normalized as a
/// probability density: the binned density plus the recorded out-of-range
/// mass integrates to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceHistogram {
    pub min: f64,
    pub max: f64,
    /// Probability density per bin.
    pub density: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_samples: u64,
    pub out_of_range: u64,
    pub eta: f64,
    pub rescaled: bool,
}

/// Bin `values` over ±10η (in `Γ0`; the same span becomes ±10 on the
/// rescaled `ω/η` axis), recording out-of-range mass instead of dropping it.
pub fn histogram_from_values(values: &[f64], eta: f64, bins: usize, rescale: bool) -> ResonanceHistogram {
    let span = if rescale { 10.0 } else { 10.0 * eta };
    let scale = if rescale { 1.0 / eta } else { 1.0 };
    let (min, max) = (-span, span);
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut out_of_range = 0u64;
    for &v in values {
        let x = v * scale;
        if !(min..max).contains(&x) {
            if x == max {
                counts[bins - 1] += 1;
            } else {
                out_of_range += 1;
            }
            continue;
        }
        let b = (((x - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = values.len() as u64;
    let density = counts
        .iter()
        .map(|&c| if total > 0 { c as f64 / (total as f64 * width) } else { 0.0 })
        .collect();
    ResonanceHistogram {
        min,
        max,
        density,
        counts,
        total_samples: total,
        out_of_range,
        eta,
        rescaled: rescale,
    }
}

impl ResonanceHistogram {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.bins() as f64
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.min + (b as f64 + 0.5) * self.bin_width()
    }

    /// Fraction of the recorded samples that fell outside the range.
    pub fn out_of_range_mass(&self) -> f64 {
        if self.total_samples == 0 {
            0.0
        } else {
            self.out_of_range as f64 / self.total_samples as f64
        }
    }

    /// `∫_a^b P dx` with fractional coverage of the boundary bins
    /// (the density is treated as uniform within a bin).
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let width = self.bin_width();
        let mut total = 0.0;
        for (idx, &d) in self.density.iter().enumerate() {
            let lo = self.min + idx as f64 * width;
            let hi = lo + width;
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            total += d * overlap;
        }
        total
    }

    /// Mean and standard error of the binned samples (bin-center estimate).
    pub fn sample_mean_and_stderr(&self) -> (f64, f64) {
        let n: u64 = self.counts.iter().sum();
        if n == 0 {
            return (0.0, f64::NAN);
        }
        let mean = self
            .counts
            .iter()
            .enumerate()
            .map(|(b, &c)| c as f64 * self.bin_center(b))
            .sum::<f64>()
            / n as f64;
        let var = self
            .counts
            .iter()
            .enumerate()
            .map(|(b, &c)| c as f64 * (self.bin_center(b) - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        (mean, (var / n as f64).sqrt())
    }

    /// Normalization defect: |binned mass + out-of-range mass − 1|.
    pub fn normalization_defect(&self) -> f64 {
        let binned: f64 = self.density.iter().map(|d| d * self.bin_width()).sum();
        (binned + self.out_of_range_mass() - 1.0).abs()
    }

    /// CSV rows `bin_center,density,count`; the first column is named
    /// `omega_over_eta` or `omega` according to the axis.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), super::RgError> {
        let mut w = csv::Writer::from_path(path)?;
        let axis = if self.rescaled { "omega_over_eta" } else { "omega" };
        w.write_record([axis, "density", "count"])?;
        for b in 0..self.bins() {
            w.write_record([
                format!("{:.12e}", self.bin_center(b)),
                format!("{:.12e}", self.density[b]),
                self.counts[b].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
