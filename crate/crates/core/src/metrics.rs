//! Task metrics, all reported as percentages.

use crate::bits::BitVector;
use crate::error::{check_len, Result};

/// Average per-label classification error: wrong bits over all bits.
pub fn per_label_error(predictions: &[BitVector], targets: &[BitVector]) -> Result<f64> {
    check_len("prediction count", targets.len(), predictions.len())?;
    let mut wrong = 0usize;
    let mut total = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        check_len("prediction width", t.len(), p.len())?;
        wrong += p.hamming(t);
        total += t.len();
    }
    Ok(percent(wrong, total))
}

/// Pixel errors for denoising.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseErrors {
    /// Wrong pixels among all pixels.
    pub all: f64,
    /// Wrong pixels among the pixels the noise process changed
    /// (`NaN` when nothing was changed).
    pub changed: f64,
}

pub fn denoise_errors(
    predictions: &[BitVector],
    clean: &[BitVector],
    noisy: &[Vec<f64>],
) -> Result<DenoiseErrors> {
    check_len("prediction count", clean.len(), predictions.len())?;
    check_len("noisy count", clean.len(), noisy.len())?;
    let (mut wrong, mut total, mut wrong_changed, mut changed) = (0, 0, 0, 0);
    for ((p, v), u) in predictions.iter().zip(clean).zip(noisy) {
        check_len("prediction width", v.len(), p.len())?;
        check_len("noisy width", v.len(), u.len())?;
        for i in 0..v.len() {
            let miss = p.get(i) != v.get(i);
            let was_changed = (u[i] >= 0.5) != v.get(i);
            wrong += usize::from(miss);
            total += 1;
            if was_changed {
                changed += 1;
                wrong_changed += usize::from(miss);
            }
        }
    }
    Ok(DenoiseErrors {
        all: percent(wrong, total),
        changed: percent(wrong_changed, changed),
    })
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> BitVector {
        BitVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn one_wrong_label_of_four() {
        let preds = [bits(&[1, 0]), bits(&[1, 1])];
        let targets = [bits(&[1, 0]), bits(&[0, 1])];
        assert_eq!(per_label_error(&preds, &targets).unwrap(), 25.0);
    }

    #[test]
    fn identity_baseline_misses_every_changed_pixel() {
        let clean = [bits(&[1, 0, 1, 0])];
        let noisy = [vec![1.0, 1.0, 0.0, 0.0]];
        let baseline = [BitVector::threshold(&noisy[0], 0.5)];
        let e = denoise_errors(&baseline, &clean, &noisy).unwrap();
        assert_eq!(e.all, 50.0);
        assert_eq!(e.changed, 100.0);
        let perfect = denoise_errors(&clean, &clean, &noisy).unwrap();
        assert_eq!((perfect.all, perfect.changed), (0.0, 0.0));
    }

    #[test]
    fn mismatched_lengths_are_errors() {
        assert!(per_label_error(&[bits(&[1])], &[]).is_err());
        assert!(per_label_error(&[bits(&[1])], &[bits(&[1, 0])]).is_err());
    }
}
