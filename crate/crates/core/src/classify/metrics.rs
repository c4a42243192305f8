//! Classification metrics: accuracy, macro-averaged precision/recall and
//! the F_beta score used for model selection.

use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub f_beta: f64,
}

/// `(1 + β²)·P·R / (β²·P + R)`, defined as 0 when the denominator is 0.
pub fn f_beta_score(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Macro averages run over the classes present in either vector, so an
/// absent class cannot dilute them; F_beta is computed from the macro
/// precision and recall.
pub fn evaluate(
    preds: &[usize],
    truth: &[usize],
    n_classes: usize,
    beta: f64,
) -> Result<EvalMetrics, ClassifyError> {
    if preds.len() != truth.len() {
        return Err(ClassifyError::LengthMismatch(preds.len(), truth.len()));
    }
    if preds.is_empty() {
        return Ok(EvalMetrics::default());
    }
    if let Some(&bad) = preds.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(ClassifyError::BadInput(format!(
            "class {bad} out of range for {n_classes} classes"
        )));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_count = vec![0usize; n_classes];
    let mut correct = 0usize;
    for (&p, &t) in preds.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_count[t] += 1;
        }
    }
    let mut present = 0usize;
    let (mut sum_p, mut sum_r) = (0.0, 0.0);
    for c in 0..n_classes {
        if tp[c] + fp[c] + fn_count[c] == 0 {
            continue;
        }
        present += 1;
        if tp[c] + fp[c] > 0 {
            sum_p += tp[c] as f64 / (tp[c] + fp[c]) as f64;
        }
        if tp[c] + fn_count[c] > 0 {
            sum_r += tp[c] as f64 / (tp[c] + fn_count[c]) as f64;
        }
    }
    let macro_precision = sum_p / present as f64;
    let macro_recall = sum_r / present as f64;
    Ok(EvalMetrics {
        accuracy: correct as f64 / preds.len() as f64,
        macro_precision,
        macro_recall,
        f_beta: f_beta_score(macro_precision, macro_recall, beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_precision_and_recall_give_that_f1() {
        for x in [0.0, 0.25, 0.5, 0.9, 1.0] {
            assert!((f_beta_score(x, x, 1.0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn published_operating_point_reproduces() {
        let f1 = f_beta_score(0.757, 0.864, 1.0);
        assert!((f1 - 0.807).abs() < 1e-3, "got {f1}");
    }

    #[test]
    fn zero_denominator_is_zero() {
        assert_eq!(f_beta_score(0.0, 0.0, 1.0), 0.0);
        assert_eq!(f_beta_score(0.0, 0.0, 2.0), 0.0);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let m = evaluate(&[0, 1, 2, 1], &[0, 1, 2, 1], 3, 1.0).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_precision, 1.0);
        assert_eq!(m.macro_recall, 1.0);
        assert_eq!(m.f_beta, 1.0);
    }

    #[test]
    fn macro_averages_match_hand_confusion() {
        // class 0: tp 1; class 1: tp 1, fp 1; class 2: fn 1
        let m = evaluate(&[0, 1, 1], &[0, 1, 2], 3, 1.0).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.macro_precision - (1.0 + 0.5 + 0.0) / 3.0).abs() < 1e-12);
        assert!((m.macro_recall - (1.0 + 1.0 + 0.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            evaluate(&[0], &[0, 1], 2, 1.0),
            Err(ClassifyError::LengthMismatch(1, 2))
        ));
    }
}
