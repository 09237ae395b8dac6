//! Gaussian kernel density estimates for plot overlays.

use thiserror::Error;

/// Number of points at which a curve is evaluated.
pub const KDE_POINTS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("need at least two values with positive spread")]
    DegenerateData,
    #[error("weights must be nonnegative, match the values in length, and not all be zero")]
    InvalidWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl KdeCurve {
    pub fn max_density(&self) -> f64 {
        self.ys.iter().copied().fold(0.0, f64::max)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
/// Falls back to the SD when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Density estimate on 256 points spanning the data range padded by three
/// bandwidths. Optional weights are normalized to sum to one; the bandwidth
/// comes from the positively weighted values.
pub fn kde(values: &[f64], weights: Option<&[f64]>) -> Result<KdeCurve, KdeError> {
    let (points, w): (Vec<f64>, Vec<f64>) = match weights {
        Some(ws) => {
            if ws.len() != values.len() || ws.iter().any(|&w| w.is_nan() || w < 0.0) {
                return Err(KdeError::InvalidWeights);
            }
            values
                .iter()
                .zip(ws)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&v, &w)| (v, w))
                .unzip()
        }
        None => (values.to_vec(), vec![1.0; values.len()]),
    };
    if points.len() < 2 {
        return Err(KdeError::DegenerateData);
    }
    let min = points.iter().copied().fold(f64::INFINITY, f64::min);
    let max = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max <= min {
        return Err(KdeError::DegenerateData);
    }
    let h = silverman_bandwidth(&points);
    if h.is_nan() || h <= 0.0 {
        return Err(KdeError::DegenerateData);
    }
    let total: f64 = w.iter().sum();
    let norm = 1.0 / (total * h * (2.0 * std::f64::consts::PI).sqrt());
    let lo = min - 3.0 * h;
    let step = (max - min + 6.0 * h) / (KDE_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..KDE_POINTS).map(|k| lo + step * k as f64).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            points
                .iter()
                .zip(&w)
                .map(|(&p, &wi)| {
                    let u = (x - p) / h;
                    wi * (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(KdeCurve {
        bandwidth: h,
        xs,
        ys,
    })
}
