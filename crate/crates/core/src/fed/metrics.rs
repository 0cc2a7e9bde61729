use crate::error::{Error, Result};

/// Accuracy and macro-averaged precision, recall and F1. A class with an empty
/// denominator scores zero for that quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn compute(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::contract(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        if classes == 0 {
            return Err(Error::contract("metrics need at least one class"));
        }
        if let Some(&bad) = truth.iter().chain(predicted).find(|&&c| c >= classes) {
            return Err(Error::contract(format!(
                "class {bad} out of range for {classes} classes"
            )));
        }
        if truth.is_empty() {
            return Ok(Self::default());
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for c in 0..classes {
            let tp = confusion[c][c];
            let predicted_c: usize = (0..classes).map(|t| confusion[t][c]).sum();
            let actual_c: usize = confusion[c].iter().sum();
            let p = ratio(tp, predicted_c);
            let r = ratio(tp, actual_c);
            p_sum += p;
            r_sum += r;
            f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        }
        let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let k = classes as f64;
        Ok(Self {
            accuracy: correct as f64 / truth.len() as f64,
            precision: p_sum / k,
            recall: r_sum / k,
            f1: f_sum / k,
        })
    }
}

/// Most frequent label at each index across clients; ties go to the first client's label.
pub fn majority_labels(per_client: &[&[usize]], n: usize) -> Result<Vec<usize>> {
    if per_client.iter().any(|l| l.len() < n) {
        return Err(Error::contract("a client has fewer labels than aggregated samples"));
    }
    Ok((0..n)
        .map(|j| {
            let votes: Vec<usize> = per_client.iter().map(|l| l[j]).collect();
            let count = |c: usize| votes.iter().filter(|&&v| v == c).count();
            let mut best = votes[0];
            for &v in &votes[1..] {
                if count(v) > count(best) {
                    best = v;
                }
            }
            best
        })
        .collect())
}
