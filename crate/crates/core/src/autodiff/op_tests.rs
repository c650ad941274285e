use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tensor with entries kept at least `gap` away from zero so kinked
/// activations are probed away from their kink.
fn away_from_zero(rows: usize, cols: usize, gap: f64, r: &mut ChaCha8Rng) -> Tensor {
    Tensor::randn(rows, cols, r).map(|x| if x.abs() < gap { x.signum() * gap + x } else { x })
}

/// Fixed random weighting so the checked scalar depends on every output.
fn weighted_sum(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(v).shape();
    let w = tape.constant(Tensor::randn(r, c, &mut rng(seed)));
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

use crate::error::Result;

#[test]
fn matmul_identity_and_hand_example() {
    let m = Tensor::randn(3, 4, &mut rng(1));
    assert_eq!(Tensor::eye(3).matmul(&m).unwrap(), m);
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    let b = tape.constant(Tensor::column(vec![1.0, 1.0]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    assert!(tape.matmul(b, b).is_err());
}

#[test]
fn matmul_gradient_of_sum() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let a = Tensor::randn(3, 4, &mut r);
        let b = Tensor::randn(4, 2, &mut r);
        let err = finite_difference_check(
            |t, x| {
                let bb = t.constant(b.clone());
                let c = t.matmul(x, bb)?;
                Ok(t.sum(c))
            },
            &a,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
        let err = finite_difference_check(
            |t, x| {
                let aa = t.constant(a.clone());
                let c = t.matmul(aa, x)?;
                weighted_sum(t, c, 9)
            },
            &b,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn spmm_gradient_matches_dense_oracle() {
    let mut r = rng(7);
    let mut entries = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            if r.random::<f64>() < 0.4 {
                entries.push((i, j, r.random_range(-1.0..1.0)));
            }
        }
    }
    let adj = Arc::new(SparseAdjacency::from_entries(5, &entries).unwrap());
    let dense = adj.to_dense();
    let h = Tensor::randn(5, 3, &mut r);
    let upstream = Tensor::randn(5, 3, &mut r);

    let grad_of = |sparse: bool| {
        let mut tape = Tape::new();
        let x = tape.param(h.clone());
        let y = if sparse {
            tape.spmm(&adj, x).unwrap()
        } else {
            let d = tape.constant(dense.clone());
            tape.matmul(d, x).unwrap()
        };
        let w = tape.constant(upstream.clone());
        let p = tape.mul(y, w).unwrap();
        let s = tape.sum(p);
        (tape.value(y).clone(), tape.backward(s).take(x).unwrap())
    };
    let (ys, gs) = grad_of(true);
    let (yd, gd) = grad_of(false);
    assert!(ys.max_abs_diff(&yd) < 1e-12);
    assert!(gs.max_abs_diff(&gd) < 1e-12);
}

#[test]
fn activation_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::scalar(-1.0));
    let y = tape.leaky_relu(x, 0.2);
    assert!((tape.value(y).item() + 0.2).abs() < 1e-15);
    let s = tape.row_softmax(x);
    assert_eq!(tape.value(s).item(), 1.0);
    let e = tape.elu(x, 1.0);
    assert!((tape.value(e).item() - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    let g = tape.sigmoid(x);
    assert!((tape.value(g).item() - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-15);
    let r = tape.relu(x);
    assert_eq!(tape.value(r).item(), 0.0);
}

#[test]
fn row_softmax_rows_sum_to_one_and_shift_invariant() {
    let mut r = rng(3);
    let x = Tensor::randn(6, 5, &mut r).map(|v| 10.0 * v);
    let shifted = x.map(|v| v + 123.456);
    let mut tape = Tape::new();
    let a = tape.constant(x);
    let b = tape.constant(shifted);
    let sa = tape.row_softmax(a);
    let sb = tape.row_softmax(b);
    let (pa, pb) = (tape.value(sa), tape.value(sb));
    for row in 0..6 {
        assert!((pa.row(row).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(pa.max_abs_diff(pb) < 1e-12);
}

#[test]
fn smooth_activation_gradients() {
    for seed in 0..4 {
        let x = Tensor::randn(3, 4, &mut rng(seed));
        let checks: Vec<Box<dyn Fn(&mut Tape, Var) -> Result<Var>>> = vec![
            Box::new(|t, v| {
                let y = t.sigmoid(v);
                weighted_sum(t, y, 1)
            }),
            Box::new(|t, v| {
                let y = t.row_softmax(v);
                weighted_sum(t, y, 2)
            }),
            Box::new(|t, v| {
                let y = t.scale(v, -1.7);
                weighted_sum(t, y, 3)
            }),
        ];
        for f in checks {
            let err = finite_difference_check(f, &x, 1e-6).unwrap();
            assert!(err < 1e-6, "{err}");
        }
    }
}

#[test]
fn kinked_activation_gradients() {
    for seed in 0..4 {
        let x = away_from_zero(4, 3, 1e-3, &mut rng(seed));
        let checks: Vec<Box<dyn Fn(&mut Tape, Var) -> Result<Var>>> = vec![
            Box::new(|t, v| {
                let y = t.relu(v);
                weighted_sum(t, y, 1)
            }),
            Box::new(|t, v| {
                let y = t.leaky_relu(v, 0.2);
                weighted_sum(t, y, 2)
            }),
            Box::new(|t, v| {
                let y = t.elu(v, 1.0);
                weighted_sum(t, y, 3)
            }),
        ];
        for f in checks {
            let err = finite_difference_check(f, &x, 1e-6).unwrap();
            assert!(err < 1e-6, "{err}");
        }
    }
}

#[test]
fn dropout_contract() {
    let mut r = rng(5);
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::full(1, 100_000, 1.0));
    assert_eq!(tape.dropout(x, 0.0, true, &mut r).unwrap(), x);
    assert_eq!(tape.dropout(x, 0.9, false, &mut r).unwrap(), x);
    assert!(tape.dropout(x, 1.0, true, &mut r).is_err());
    let y = tape.dropout(x, 0.5, true, &mut r).unwrap();
    let mean = tape.value(y).sum() / 100_000.0;
    assert!((0.98..1.02).contains(&mean), "{mean}");
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
}

#[test]
fn dropout_gradient_uses_mask() {
    let x = Tensor::randn(5, 4, &mut rng(2));
    // a fresh rng per evaluation keeps the mask fixed across probes
    let err = finite_difference_check(
        |t, v| {
            let y = t.dropout(v, 0.3, true, &mut rng(11))?;
            weighted_sum(t, y, 4)
        },
        &x,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn structural_op_gradients() {
    let mut r = rng(8);
    let x = Tensor::randn(5, 3, &mut r);
    let w = Tensor::randn(7, 1, &mut r);
    let bias = Tensor::randn(1, 3, &mut r);
    let idx: Vec<usize> = vec![0, 2, 2, 4, 1, 3, 0];
    let dst: Vec<usize> = vec![1, 1, 0, 2, 2, 2, 0];
    let checks: Vec<Box<dyn Fn(&mut Tape, Var) -> Result<Var>>> = vec![
        Box::new(|t, v| {
            let g = t.gather_rows(v, idx.clone())?;
            let ww = t.constant(w.clone());
            let s = t.scale_rows(g, ww)?;
            let o = t.scatter_add_rows(s, dst.clone(), 3)?;
            weighted_sum(t, o, 1)
        }),
        Box::new(|t, v| {
            let b = t.constant(bias.clone());
            let y = t.add_row(v, b)?;
            let z = t.add(y, v)?;
            weighted_sum(t, z, 2)
        }),
        Box::new(|t, v| {
            let s = t.slice_rows(v, 1, 3)?;
            let o = t.slice_rows(v, 2, 3)?;
            let d = t.row_dot(s, o)?;
            weighted_sum(t, d, 3)
        }),
        Box::new(|t, v| {
            let m = t.mean(v);
            let y = t.mul(v, v)?;
            let s = t.sum(y);
            let out = t.add(m, s)?;
            Ok(out)
        }),
    ];
    for f in checks {
        let err = finite_difference_check(f, &x, 1e-6).unwrap();
        assert!(err < 1e-6, "{err}");
    }
    // the row weights and bias themselves
    let err = finite_difference_check(
        |t, v| {
            let xx = t.constant(x.clone());
            let g = t.gather_rows(xx, idx.clone())?;
            let s = t.scale_rows(g, v)?;
            weighted_sum(t, s, 5)
        },
        &w,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
    let err = finite_difference_check(
        |t, v| {
            let xx = t.constant(x.clone());
            let y = t.add_row(xx, v)?;
            weighted_sum(t, y, 6)
        },
        &bias,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn segment_softmax_value_and_gradient() {
    let x = Tensor::randn(7, 1, &mut rng(4));
    let offsets: Vec<usize> = vec![0, 1, 4, 4, 7];
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let s = tape.segment_softmax(v, offsets.clone()).unwrap();
    let y = tape.value(s);
    assert_eq!(y.data()[0], 1.0);
    assert!((y.data()[1..4].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((y.data()[4..7].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let err = finite_difference_check(
        |t, v| {
            let s = t.segment_softmax(v, offsets.clone())?;
            weighted_sum(t, s, 8)
        },
        &x,
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
    assert!(tape.segment_softmax(v, vec![0, 3]).is_err());
}

#[test]
fn loss_values() {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::scalar(0.0));
    let b = tape.bce_with_logits(z, &[1.0]).unwrap();
    assert!((tape.value(b).item() - std::f64::consts::LN_2).abs() < 1e-15);

    let mut last = f64::INFINITY;
    for margin in [1.0, 5.0, 20.0, 100.0] {
        let l = tape.constant(Tensor::from_rows(&[vec![margin, 0.0]]).unwrap());
        let ce = tape
            .softmax_cross_entropy(l, &Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap())
            .unwrap();
        let v = tape.value(ce).item();
        assert!(v < last);
        last = v;
    }
    assert!(last < 1e-40);

    let a = tape.constant(Tensor::column(vec![1.0, 2.0]));
    let c = tape.constant(Tensor::column(vec![1.0, 4.0]));
    let m = tape.mse(a, c).unwrap();
    assert_eq!(tape.value(m).item(), 2.0);
    assert!(tape.mse(a, z).is_err());
    assert!(tape.bce_with_logits(a, &[1.0]).is_err());
}

#[test]
fn loss_gradients() {
    for seed in 0..4 {
        let mut r = rng(seed);
        let logits = Tensor::randn(5, 3, &mut r);
        let mut onehot = Tensor::zeros(5, 3);
        for i in 0..5 {
            onehot.set(i, r.random_range(0..3), 1.0);
        }
        let labels: Vec<f64> = (0..5).map(|i| (i % 2) as f64).collect();
        let target = Tensor::randn(5, 3, &mut r);

        let err = finite_difference_check(|t, v| t.softmax_cross_entropy(v, &onehot), &logits, 1e-6).unwrap();
        assert!(err < 1e-6, "ce {err}");
        let col = Tensor::randn(5, 1, &mut r);
        let err = finite_difference_check(|t, v| t.bce_with_logits(v, &labels), &col, 1e-6).unwrap();
        assert!(err < 1e-6, "bce {err}");
        let err = finite_difference_check(
            |t, v| {
                let c = t.constant(target.clone());
                t.mse(v, c)
            },
            &logits,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "mse {err}");
        let err = finite_difference_check(
            |t, v| {
                let c = t.constant(target.clone());
                t.mse(c, v)
            },
            &logits,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "mse rhs {err}");
    }
}

#[test]
fn gradcheck_edge_cases() {
    let x = Tensor::randn(3, 3, &mut rng(1));
    let err = finite_difference_check(
        |t, v| {
            let y = t.mul(v, v)?;
            Ok(t.sum(y))
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-8, "{err}");
    let err = finite_difference_check(|t, _| Ok(t.constant(Tensor::scalar(3.0))), &x, 1e-5).unwrap();
    assert_eq!(err, 0.0);
}

#[test]
fn constants_get_no_gradient() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::scalar(2.0));
    let b = tape.param(Tensor::scalar(3.0));
    let c = tape.mul(a, b).unwrap();
    let grads = tape.backward(c);
    assert!(grads.get(a).is_none());
    assert_eq!(grads.get(b).unwrap().item(), 2.0);
}
