//! Reference computations written from the definitions, sharing no code
//! with the library. Slow and direct on purpose.

/// Weighted precision, recall, F1 and accuracy recomputed per class from
/// raw label vectors. Undefined ratios count as zero.
pub fn weighted_prf(y_true: &[u8], y_pred: &[u8]) -> [f64; 4] {
    let n = y_true.len() as f64;
    let mut out = [0.0; 4];
    for class in [0u8, 1] {
        let hits = y_true.iter().zip(y_pred).filter(|(t, p)| **t == class && **p == class).count() as f64;
        let predicted = y_pred.iter().filter(|p| **p == class).count() as f64;
        let actual = y_true.iter().filter(|t| **t == class).count() as f64;
        let precision = if predicted == 0.0 { 0.0 } else { hits / predicted };
        let recall = if actual == 0.0 { 0.0 } else { hits / actual };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let weight = actual / n;
        out[0] += weight * precision;
        out[1] += weight * recall;
        out[2] += weight * f1;
    }
    out[3] = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count() as f64 / n;
    out
}

/// Cohen's kappa from the 2x2 agreement table.
pub fn kappa(a: &[u8], b: &[u8]) -> f64 {
    let mut table = [[0f64; 2]; 2];
    for (x, y) in a.iter().zip(b) {
        table[*x as usize][*y as usize] += 1.0;
    }
    let n = a.len() as f64;
    let po = (table[0][0] + table[1][1]) / n;
    let row1 = table[1][0] + table[1][1];
    let col1 = table[0][1] + table[1][1];
    let pe = (row1 * col1 + (n - row1) * (n - col1)) / (n * n);
    if pe == 1.0 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// One labeling-function vote: +1 positive, -1 negative, 0 abstain.
#[derive(Debug, Clone, Copy)]
pub struct RawVote {
    pub sign: i8,
    pub confidence: f64,
    pub threshold: Option<f64>,
}

/// Majority among non-abstaining votes that clear their threshold; `None`
/// on a tie, including the case of no surviving vote.
pub fn gated_majority(votes: &[RawVote]) -> Option<u8> {
    let mut balance = 0i64;
    for v in votes {
        let passes = match v.threshold {
            Some(t) => v.confidence >= t,
            None => true,
        };
        if v.sign != 0 && passes {
            balance += i64::from(v.sign);
        }
    }
    match balance {
        0 => None,
        b if b > 0 => Some(1),
        _ => Some(0),
    }
}

/// Lower (`q == 1`) or upper (`q == 3`) quartile of ascending integers with
/// linear interpolation at position `(n - 1) * q / 4`, in integer steps.
pub fn quartile(sorted: &[u32], q: usize) -> f64 {
    let scaled = (sorted.len() - 1) * q;
    let (lo, rem) = (scaled / 4, scaled % 4);
    if rem == 0 {
        return f64::from(sorted[lo]);
    }
    let (a, b) = (f64::from(sorted[lo]), f64::from(sorted[lo + 1]));
    a + (b - a) * rem as f64 / 4.0
}

/// Minimum total word cost over every way of cutting `token` into words for
/// which `cost` is defined, by plain enumeration.
pub fn min_segmentation_cost(token: &[char], cost: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
    if token.is_empty() {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    for cut in 1..=token.len() {
        let head: String = token[..cut].iter().collect();
        let Some(c) = cost(&head) else { continue };
        if let Some(rest) = min_segmentation_cost(&token[cut..], cost) {
            let total = c + rest;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_on_hand_cases() {
        let w = weighted_prf(&[1, 1, 0, 0], &[1, 0, 0, 0]);
        assert!((w[2] - 11.0 / 15.0).abs() < 1e-15);
        assert_eq!(w[3], 0.75);
        assert_eq!(kappa(&[1, 1, 1, 0], &[1, 1, 0, 0]), 0.5);
        assert_eq!(quartile(&[1, 2, 3, 4, 5], 1), 2.0);
        assert_eq!(quartile(&[1, 2, 3, 4], 3), 3.25);
        let v = |sign, confidence| RawVote {
            sign,
            confidence,
            threshold: Some(0.5),
        };
        assert_eq!(gated_majority(&[v(1, 0.9), v(-1, 0.4)]), Some(1));
        assert_eq!(gated_majority(&[v(1, 0.9), v(-1, 0.5)]), None);
        let cost = |w: &str| match w {
            "ab" => Some(1.0),
            "a" | "b" => Some(0.75),
            _ => None,
        };
        let chars: Vec<char> = "abab".chars().collect();
        assert_eq!(min_segmentation_cost(&chars, &cost), Some(2.0));
        assert_eq!(min_segmentation_cost(&['c'], &cost), None);
    }
}
