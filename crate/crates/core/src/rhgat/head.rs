use super::forward::pool;
use super::matrix::{axpy, Matrix};
use super::params::{RHgatParams, Task};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Class(usize),
    Value(f64),
}

/// Mean-pools `output` and applies the affine head: class logits, or a
/// single-element vector for regression.
pub fn pool_and_head(output: &Matrix, params: &RHgatParams) -> Vec<f64> {
    let pooled = pool(output);
    let head = &params.head;
    head.weight
        .matvec(&pooled)
        .iter()
        .zip(&head.bias)
        .map(|(x, b)| x + b)
        .collect()
}

/// Softmax cross-entropy or squared error, with the gradient with respect to
/// `prediction`.
pub fn loss(prediction: &[f64], target: Target, task: Task) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != task.outputs() {
        return Err(Error::Dimension(format!(
            "{} predictions for a head with {} outputs",
            prediction.len(),
            task.outputs()
        )));
    }
    match (task, target) {
        (Task::Classify { classes }, Target::Class(t)) => {
            if t >= classes {
                return Err(Error::ClassOutOfRange { index: t, classes });
            }
            let max = prediction.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = prediction.iter().map(|l| (l - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let loss = max + sum.ln() - prediction[t];
            let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
            grad[t] -= 1.0;
            Ok((loss, grad))
        }
        (Task::Regress, Target::Value(y)) => {
            let r = prediction[0] - y;
            Ok((r * r, vec![2.0 * r]))
        }
        _ => Err(Error::Config("target kind does not match the task".into())),
    }
}

/// Accumulates head gradients into `grads` and returns `d loss / d output`.
pub fn head_backward(
    output: &Matrix,
    params: &RHgatParams,
    d_prediction: &[f64],
    grads: &mut RHgatParams,
) -> Matrix {
    let pooled = pool(output);
    grads.head.weight.add_outer(d_prediction, &pooled);
    axpy(&mut grads.head.bias, 1.0, d_prediction);
    let d_pooled = params.head.weight.matvec_t(d_prediction);
    let m = output.rows();
    let scale = 1.0 / m as f64;
    Matrix::from_fn(m, output.cols(), |_, k| d_pooled[k] * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhgat::params::ModelDims;

    #[test]
    fn uniform_logits() {
        let (l, g) = loss(&[0.3; 4], Target::Class(2), Task::Classify { classes: 4 }).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g[2] + 0.75).abs() < 1e-12 && (g[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn regression_at_target() {
        let (l, g) = loss(&[1.5], Target::Value(1.5), Task::Regress).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0]));
    }

    #[test]
    fn cross_entropy_gradient_matches_differences() {
        let logits = [0.7, -1.2, 2.1, 0.05];
        let task = Task::Classify { classes: 4 };
        let (_, g) = loss(&logits, Target::Class(1), task).unwrap();
        for k in 0..4 {
            let mut plus = logits;
            let mut minus = logits;
            plus[k] += 1e-5;
            minus[k] -= 1e-5;
            let fd = (loss(&plus, Target::Class(1), task).unwrap().0
                - loss(&minus, Target::Class(1), task).unwrap().0)
                / 2e-5;
            assert!((fd - g[k]).abs() < 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn bad_targets() {
        let task = Task::Classify { classes: 2 };
        assert!(matches!(
            loss(&[0.0, 0.0], Target::Class(2), task),
            Err(Error::ClassOutOfRange { .. })
        ));
        assert!(loss(&[0.0, 0.0], Target::Value(1.0), task).is_err());
        assert!(loss(&[0.0], Target::Class(0), task).is_err());
    }

    #[test]
    fn pooling_constant_rows() {
        let params = RHgatParams::init(ModelDims::new(3, 2, Task::Regress), 0).unwrap();
        let row = vec![0.5, -1.0, 2.0];
        let out = Matrix::from_rows(&[row.clone(), row.clone(), row.clone()]).unwrap();
        assert_eq!(pool(&out), row);
        let single = Matrix::from_rows(std::slice::from_ref(&row)).unwrap();
        assert_eq!(pool_and_head(&single, &params), pool_and_head(&out, &params));
    }
}
