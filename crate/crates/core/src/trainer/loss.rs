use std::f64::consts::PI;

fn softmax(counts: &[f64]) -> Vec<f64> {
    let max = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = counts.iter().map(|c| (c - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Cross-entropy of `softmax(counts)` against `label`.
pub fn rate_loss(counts: &[f64], label: usize) -> f64 {
    let max = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + counts.iter().map(|c| (c - max).exp()).sum::<f64>().ln();
    lse - counts[label]
}

/// Loss and its gradient with respect to the counts.
pub fn rate_loss_grad(counts: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut g = softmax(counts);
    g[label] -= 1.0;
    (rate_loss(counts, label), g)
}

/// Index of the largest count; ties go to the lowest index.
pub fn predict(counts: &[f64]) -> usize {
    counts
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
        .0
}

pub fn cosine_lr(epoch: usize, total_epochs: usize, lr0: f64, lr_min: f64) -> f64 {
    if total_epochs == 0 {
        return lr0;
    }
    let frac = epoch.min(total_epochs) as f64 / total_epochs as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (PI * frac).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert!((rate_loss(&[2.0; 4], 1) - 4f64.ln()).abs() < 1e-12);
        assert!(rate_loss(&[50.0, 0.0, 0.0], 0) < 1e-20);
        // -ln(e^3 / (e^3 + e^1)) = ln(1 + e^-2)
        let expect = (1.0 + (-2f64).exp()).ln();
        assert!((rate_loss(&[3.0, 1.0], 0) - expect).abs() < 1e-12);
        assert!((rate_loss(&[3.0, 1.0], 0) - 0.1269).abs() < 1e-4);
    }

    #[test]
    fn loss_gradient_matches_differences() {
        let c = [1.0, 4.0, 2.5];
        let (_, g) = rate_loss_grad(&c, 2);
        for i in 0..3 {
            let mut a = c;
            let mut b = c;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (rate_loss(&a, 2) - rate_loss(&b, 2)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(cosine_lr(0, 10, 0.1, 0.001), 0.1);
        assert!((cosine_lr(10, 10, 0.1, 0.001) - 0.001).abs() < 1e-15);
        assert!((cosine_lr(5, 10, 0.1, 0.001) - 0.0505).abs() < 1e-15);
    }

    #[test]
    fn prediction_ties_pick_first() {
        assert_eq!(predict(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(predict(&[1.0, 3.0, 3.0]), 1);
    }
}
