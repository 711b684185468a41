use serde::{Deserialize, Serialize};

use crate::error::{config_err, usage, Result};
use crate::tensor_nn::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MmdKernel {
    /// Identity feature map: MMD is the distance between the two means.
    #[default]
    Linear,
    /// `exp(-|x - y|^2 / (2 bandwidth^2))`, biased estimator.
    Rbf { bandwidth: f64 },
}

impl MmdKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MmdKernel::Rbf { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(config_err!("rbf bandwidth must be positive, got {bandwidth}"))
            }
            _ => Ok(()),
        }
    }
}

/// Squared MMD and its gradients with respect to both inputs.
#[derive(Clone, Debug)]
pub struct MmdGrad<T: Scalar> {
    pub mmd2: f64,
    pub grad_source: Tensor<T>,
    pub grad_target: Tensor<T>,
}

fn rows<T: Scalar>(t: &Tensor<T>) -> Vec<Vec<f64>> {
    let d = t.dim(1);
    t.data().chunks(d).map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect()
}

fn check<T: Scalar>(s: &Tensor<T>, t: &Tensor<T>) -> Result<()> {
    if s.ndim() != 2 || t.ndim() != 2 || s.dim(1) != t.dim(1) || s.dim(0) == 0 || t.dim(0) == 0 {
        return Err(usage!(
            "mmd needs non-empty [Ns,D] and [Nt,D], got {:?} and {:?}",
            s.shape(),
            t.shape()
        ));
    }
    Ok(())
}

fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// MMD between two feature sets (not squared). Always `>= 0`.
pub fn compute_mmd<T: Scalar>(source: &Tensor<T>, target: &Tensor<T>, kernel: MmdKernel) -> Result<f64> {
    Ok(mmd_squared(source, target, kernel)?.max(0.0).sqrt())
}

pub fn mmd_squared<T: Scalar>(source: &Tensor<T>, target: &Tensor<T>, kernel: MmdKernel) -> Result<f64> {
    check(source, target)?;
    kernel.validate()?;
    let (s, t) = (rows(source), rows(target));
    Ok(match kernel {
        MmdKernel::Linear => sq_dist(&mean(&s), &mean(&t)),
        MmdKernel::Rbf { bandwidth } => {
            let k = |a: &[f64], b: &[f64]| (-sq_dist(a, b) / (2.0 * bandwidth * bandwidth)).exp();
            let avg = |x: &[Vec<f64>], y: &[Vec<f64>]| {
                let mut acc = 0.0;
                for a in x {
                    for b in y {
                        acc += k(a, b);
                    }
                }
                acc / (x.len() * y.len()) as f64
            };
            (avg(&s, &s) + avg(&t, &t) - 2.0 * avg(&s, &t)).max(0.0)
        }
    })
}

/// Squared MMD with analytic gradients.
pub fn mmd_squared_with_grad<T: Scalar>(source: &Tensor<T>, target: &Tensor<T>, kernel: MmdKernel) -> Result<MmdGrad<T>> {
    check(source, target)?;
    kernel.validate()?;
    let (s, t) = (rows(source), rows(target));
    let (ns, nt, d) = (s.len() as f64, t.len() as f64, source.dim(1));
    let mut gs = vec![vec![0.0; d]; s.len()];
    let mut gt = vec![vec![0.0; d]; t.len()];
    let mmd2 = match kernel {
        MmdKernel::Linear => {
            let diff: Vec<f64> = mean(&s).iter().zip(mean(&t)).map(|(a, b)| a - b).collect();
            for g in &mut gs {
                for (gi, di) in g.iter_mut().zip(&diff) {
                    *gi = 2.0 * di / ns;
                }
            }
            for g in &mut gt {
                for (gi, di) in g.iter_mut().zip(&diff) {
                    *gi = -2.0 * di / nt;
                }
            }
            diff.iter().map(|v| v * v).sum()
        }
        MmdKernel::Rbf { bandwidth } => {
            let inv = 1.0 / (bandwidth * bandwidth);
            let k = |a: &[f64], b: &[f64]| (-0.5 * sq_dist(a, b) * inv).exp();
            let mut total = 0.0;
            // each pair term c·k(a,b) adds -c·k·(a-b)/σ² to ∂a and the negation to ∂b
            let mut pair = |xa: &[Vec<f64>], xb: &[Vec<f64>], ga: &mut [Vec<f64>], gb: &mut [Vec<f64>], c: f64| {
                for (i, a) in xa.iter().enumerate() {
                    for (j, b) in xb.iter().enumerate() {
                        let kv = k(a, b);
                        total += c * kv;
                        for q in 0..a.len() {
                            let g = -c * kv * (a[q] - b[q]) * inv;
                            ga[i][q] += g;
                            gb[j][q] -= g;
                        }
                    }
                }
            };
            let mut gs2 = vec![vec![0.0; d]; s.len()];
            pair(&s, &s, &mut gs, &mut gs2, 1.0 / (ns * ns));
            for (a, b) in gs.iter_mut().zip(&gs2) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            let mut gt2 = vec![vec![0.0; d]; t.len()];
            pair(&t, &t, &mut gt, &mut gt2, 1.0 / (nt * nt));
            for (a, b) in gt.iter_mut().zip(&gt2) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            pair(&s, &t, &mut gs, &mut gt, -2.0 / (ns * nt));
            total
        }
    };
    let to_tensor = |g: Vec<Vec<f64>>, n: usize| {
        Tensor::new(vec![n, d], g.into_iter().flatten().map(T::from_f64_lossy).collect())
    };
    Ok(MmdGrad {
        mmd2,
        grad_source: to_tensor(gs, s.len())?,
        grad_target: to_tensor(gt, t.len())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let s = Tensor::<f64>::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let t = Tensor::<f64>::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        assert_eq!(compute_mmd(&s, &t, MmdKernel::Linear).unwrap(), 5.0);
    }

    #[test]
    fn identical_sets_are_zero() {
        let s = Tensor::<f64>::from_fn(&[5, 3], |i| (i as f64).sin());
        for k in [MmdKernel::Linear, MmdKernel::Rbf { bandwidth: 1.0 }] {
            assert!(compute_mmd(&s, &s, k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let s = Tensor::<f64>::zeros(&[2, 3]);
        let t = Tensor::<f64>::zeros(&[2, 4]);
        assert!(compute_mmd(&s, &t, MmdKernel::Linear).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let s = Tensor::<f64>::from_fn(&[4, 3], |i| ((i * 7) % 5) as f64 * 0.3 - 0.4);
        let t = Tensor::<f64>::from_fn(&[3, 3], |i| ((i * 3) % 4) as f64 * 0.25);
        for kernel in [MmdKernel::Linear, MmdKernel::Rbf { bandwidth: 0.8 }] {
            let g = mmd_squared_with_grad(&s, &t, kernel).unwrap();
            let h = 1e-6;
            for (which, base) in [(0, &s), (1, &t)] {
                let analytic = if which == 0 { &g.grad_source } else { &g.grad_target };
                for i in 0..base.len() {
                    let mut plus = base.clone();
                    plus.data_mut()[i] += h;
                    let mut minus = base.clone();
                    minus.data_mut()[i] -= h;
                    let f = |x: &Tensor<f64>| {
                        if which == 0 {
                            mmd_squared(x, &t, kernel).unwrap()
                        } else {
                            mmd_squared(&s, x, kernel).unwrap()
                        }
                    };
                    let num = (f(&plus) - f(&minus)) / (2.0 * h);
                    assert!((num - analytic.data()[i]).abs() < 1e-7, "{kernel:?} {which} {i}: {num} vs {}", analytic.data()[i]);
                }
            }
        }
    }
}
