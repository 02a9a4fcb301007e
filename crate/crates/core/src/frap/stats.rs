use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal and lag-one conditional event frequency at one aggregation scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStat {
    pub scale: usize,
    pub marginal: f64,
    /// `P̂(1 | previous block 1)`; `None` when no block is followed after a 1.
    pub conditional: Option<f64>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    blocks: usize,
    ones: usize,
    prev_ones: usize,
    both: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.blocks += other.blocks;
        self.ones += other.ones;
        self.prev_ones += other.prev_ones;
        self.both += other.both;
    }

    fn stat(self, scale: usize) -> ScaleStat {
        ScaleStat {
            scale,
            marginal: self.ones as f64 / self.blocks as f64,
            conditional: (self.prev_ones > 0).then(|| self.both as f64 / self.prev_ones as f64),
        }
    }
}

fn check_scale(len: usize, scale: usize) -> Result<()> {
    if scale == 0 || 2 * scale > len {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} needs at least two blocks in a series of length {len}"
        )));
    }
    Ok(())
}

/// Block maxima over complete blocks; a trailing partial block is dropped.
fn counts(series: &[u8], scale: usize) -> Counts {
    let blocks: Vec<bool> = series.chunks_exact(scale).map(|b| b.contains(&1)).collect();
    let mut c = Counts {
        blocks: blocks.len(),
        ones: blocks.iter().filter(|&&b| b).count(),
        ..Counts::default()
    };
    for w in blocks.windows(2) {
        if w[0] {
            c.prev_ones += 1;
            c.both += usize::from(w[1]);
        }
    }
    c
}

pub fn scale_statistics(series: &[u8], scales: &[usize]) -> Result<Vec<ScaleStat>> {
    scale_statistics_panel(&[series.to_vec()], scales)
}

/// Counts pooled over all rows before forming the frequencies.
pub fn scale_statistics_panel(rows: &[Vec<u8>], scales: &[usize]) -> Result<Vec<ScaleStat>> {
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    scales
        .iter()
        .map(|&m| {
            let mut total = Counts::default();
            for row in rows {
                check_scale(row.len(), m)?;
                total.add(counts(row, m));
            }
            Ok(total.stat(m))
        })
        .collect()
}

/// Average over rows of the per-row conditional frequency, skipping rows where
/// it is undefined.
pub fn mean_series_conditional(rows: &[Vec<u8>], scales: &[usize]) -> Result<Vec<Option<f64>>> {
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    scales
        .iter()
        .map(|&m| {
            let mut acc = 0.0;
            let mut k = 0usize;
            for row in rows {
                check_scale(row.len(), m)?;
                if let Some(c) = counts(row, m).stat(m).conditional {
                    acc += c;
                    k += 1;
                }
            }
            Ok((k > 0).then(|| acc / k as f64))
        })
        .collect()
}

/// Ratio of squared empirical norms `‖f_true − f_hat‖² / ‖f_true‖²`.
pub fn remse(f_hat: &[f64], f_true: &[f64]) -> Result<f64> {
    if f_hat.len() != f_true.len() || f_true.is_empty() {
        return Err(Error::InvalidArgument(
            "remse needs equal, non-empty lengths".into(),
        ));
    }
    let denom: f64 = f_true.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("true trend is identically zero".into()));
    }
    let num: f64 = f_hat.iter().zip(f_true).map(|(a, b)| (b - a).powi(2)).sum();
    Ok(num / denom)
}

/// Centred moving average; windows shrink symmetrically at the edges.
pub fn smooth_curve(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "window must be odd, got {window}"
        )));
    }
    if window > series.len() {
        return Err(Error::InvalidArgument("window longer than series".into()));
    }
    let half = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let s = &series[i - h..=i + h];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn all_ones() {
        let s = scale_statistics(&[1u8; 40], &[1, 2, 5, 20]).unwrap();
        for st in s {
            assert_eq!(st.marginal, 1.0);
            assert_eq!(st.conditional, Some(1.0));
        }
    }

    #[test]
    fn all_zeros_has_no_conditional() {
        let s = scale_statistics(&[0u8; 10], &[1]).unwrap();
        assert_eq!(s[0].marginal, 0.0);
        assert_eq!(s[0].conditional, None);
    }

    #[test]
    fn iid_aggregation() {
        let mut r = seeded(5);
        let z: Vec<u8> = (0..100_000).map(|_| u8::from(r.random::<f64>() < 0.2)).collect();
        let s = scale_statistics(&z, &[4]).unwrap();
        assert!((s[0].marginal - 0.5904).abs() < 0.02);
        assert!((s[0].conditional.unwrap() - 0.5904).abs() < 0.02);
    }

    #[test]
    fn scale_bounds() {
        assert!(scale_statistics(&[0, 1, 0, 1, 1], &[3]).is_err());
        assert!(scale_statistics(&[0, 1, 0, 1], &[0]).is_err());
        assert!(scale_statistics(&[0, 1, 0, 1], &[2]).is_ok());
    }

    #[test]
    fn pooled_vs_averaged() {
        let rows = vec![vec![1, 1, 1, 0], vec![1, 0, 1, 0]];
        let pooled = scale_statistics_panel(&rows, &[1]).unwrap();
        assert!((pooled[0].conditional.unwrap() - 2.0 / 5.0).abs() < 1e-15);
        let avg = mean_series_conditional(&rows, &[1]).unwrap();
        assert!((avg[0].unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn remse_cases() {
        let f = [1.0, -2.0, 3.0];
        assert_eq!(remse(&f, &f).unwrap(), 0.0);
        assert_eq!(remse(&[0.0; 3], &f).unwrap(), 1.0);
        assert_eq!(remse(&[2.0, -4.0, 6.0], &f).unwrap(), 1.0);
        assert!(remse(&f, &[0.0; 3]).is_err());
    }

    #[test]
    fn smoothing() {
        let s = [0.0, 0.0, 3.0, 0.0, 0.0];
        assert_eq!(smooth_curve(&s, 1).unwrap(), s.to_vec());
        assert_eq!(smooth_curve(&s, 3).unwrap(), vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(smooth_curve(&[2.0; 6], 5).unwrap(), vec![2.0; 6]);
        assert!(smooth_curve(&s, 2).is_err());
    }
}
