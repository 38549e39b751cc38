//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The [`Tape`] records a computation graph once; [`Tape::forward`] runs it
//! against a set of leaf [`Bindings`] and [`Tape::backward`] produces the
//! gradient of a scalar root with respect to any leaves, including input
//! batches, which is what the perturbation-based detector and the
//! sensitivity maps need. A guided-ReLU backward rule is selectable per
//! call without re-running the forward pass.

mod linalg;
mod tape;
mod tensor;

pub use tape::{BackwardMode, Bindings, Gradients, NodeId, Tape, Values};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Central-difference gradient estimate of a scalar function at `point`:
/// `(f(p + h e_i) - f(p - h e_i)) / 2h` per coordinate.
///
/// This is the independent oracle the gradient tests compare the tape
/// against; it deliberately shares no code with [`Tape::backward`].
pub fn finite_difference<F>(mut f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::Config(format!("finite difference step must be positive, got {h}")));
    }
    let mut probe = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe)?;
        probe[i] = orig - h;
        let minus = f(&probe)?;
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "finite difference probe at coordinate {i} produced non-finite values ({plus}, {minus})"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Compare an analytic gradient against a finite-difference estimate with
/// the tolerance scheme used throughout the tests: relative error at most
/// `rel_tol`, falling back to an absolute comparison where the reference is
/// smaller than `small` in magnitude.
pub fn gradients_close(analytic: &[f64], numeric: &[f64], rel_tol: f64, abs_tol: f64, small: f64) -> bool {
    analytic.len() == numeric.len()
        && analytic.iter().zip(numeric).all(|(a, n)| {
            if n.abs() < small {
                (a - n).abs() <= abs_tol
            } else {
                (a - n).abs() <= rel_tol * n.abs()
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_chain_passes_values_through() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 3);
        let y = tape.add_scalar(x, 0.0);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![1.0, 2.0, 3.0]));
        let vals = tape.forward(&b).unwrap();
        assert_eq!(vals.output(y).values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn relu_forward_matches_definition() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 3);
        let y = tape.relu(x);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![-1.0, 0.0, 2.0]));
        let vals = tape.forward(&b).unwrap();
        assert_eq!(vals.output(y).values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn log_softmax_of_equal_logits_is_minus_log_k() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 4);
        let y = tape.log_softmax(x);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![0.7; 4]));
        let vals = tape.forward(&b).unwrap();
        for v in vals.output(y).values() {
            assert!((v - (-(4.0f64).ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_rows_exponentiate_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut tape = Tape::new();
        let x = tape.leaf("x", 5, 6);
        let y = tape.log_softmax(x);
        let vals_in: Vec<f64> = (0..30).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let mut b = Bindings::new();
        b.set("x", Tensor::new(5, 6, vals_in).unwrap());
        let vals = tape.forward(&b).unwrap();
        for r in 0..5 {
            let sum: f64 = vals.output(y).row_slice(r).iter().map(|v| v.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {r} sums to {sum}");
        }
    }

    #[test]
    fn log_softmax_is_shift_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let shift: f64 = rng.gen_range(-30.0..30.0);
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();

            let mut tape = Tape::new();
            let x = tape.leaf("x", 1, 4);
            let y = tape.log_softmax(x);
            let mut b = Bindings::new();
            b.set("x", Tensor::row(logits));
            let base = tape.forward(&b).unwrap();
            b.set("x", Tensor::row(shifted));
            let moved = tape.forward(&b).unwrap();
            for (u, v) in base.output(y).values().iter().zip(moved.output(y).values()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 2, 3);
        let s = tape.sum_all(x);
        let mut b = Bindings::new();
        b.set("x", Tensor::new(2, 3, vec![0.5, -1.0, 2.0, 3.0, -4.0, 5.0]).unwrap());
        let vals = tape.forward(&b).unwrap();
        let grads = tape.backward(&vals, s, &["x"], BackwardMode::Standard).unwrap();
        assert_eq!(grads.get("x").values(), &[1.0; 6]);
    }

    #[test]
    fn sigmoid_derivative_at_zero_is_quarter() {
        let mut tape = Tape::new();
        let t = tape.leaf("t", 1, 1);
        let s = tape.sigmoid(t);
        let root = tape.sum_all(s);
        let mut b = Bindings::new();
        b.set("t", Tensor::scalar(0.0));
        let vals = tape.forward(&b).unwrap();
        let grads = tape.backward(&vals, root, &["t"], BackwardMode::Standard).unwrap();
        assert!((grads.get("t").scalar_value() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 2, 2);
        let y = tape.relu(x);
        let mut b = Bindings::new();
        b.set("x", Tensor::zeros(2, 2));
        let vals = tape.forward(&b).unwrap();
        assert!(tape.backward(&vals, y, &["x"], BackwardMode::Standard).is_err());
    }

    #[test]
    fn unbound_leaf_is_reported_by_name() {
        let mut tape = Tape::new();
        let x = tape.leaf("features", 1, 2);
        let _ = tape.relu(x);
        let err = tape.forward(&Bindings::new()).unwrap_err();
        assert!(err.to_string().contains("features"), "{err}");
    }

    #[test]
    fn wrong_binding_shape_is_reported() {
        let mut tape = Tape::new();
        let _ = tape.leaf("x", 2, 2);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![1.0, 2.0]));
        let err = tape.forward(&b).unwrap_err();
        assert!(err.to_string().contains('x'), "{err}");
    }

    /// A random three-layer network with every primitive in play; gradients
    /// with respect to both parameters and the input batch must match
    /// central finite differences.
    #[test]
    fn random_net_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let (n, d, h, k) = (3, 4, 5, 3);
            let sizes = [("x", n * d), ("w0", d * h), ("b0", h), ("w1", h * h), ("b1", h), ("w2", h * k), ("b2", k)];

            let build = |tape: &mut Tape| -> NodeId {
                let x = tape.leaf("x", n, d);
                let w0 = tape.leaf("w0", d, h);
                let b0 = tape.leaf("b0", 1, h);
                let w1 = tape.leaf("w1", h, h);
                let b1 = tape.leaf("b1", 1, h);
                let w2 = tape.leaf("w2", h, k);
                let b2 = tape.leaf("b2", 1, k);
                let a0 = tape.matmul(x, w0);
                let a0 = tape.add_row(a0, b0);
                let h0 = tape.relu(a0);
                let a1 = tape.matmul(h0, w1);
                let a1 = tape.add_row(a1, b1);
                let h1 = tape.leaky_relu(a1, 0.2);
                let a2 = tape.matmul(h1, w2);
                let a2 = tape.add_row(a2, b2);
                let lp = tape.log_softmax(a2);
                let sq = tape.square(lp);
                let m = tape.mean_all(sq);
                let sg = tape.sigmoid(m);
                let e = tape.exp(sg);
                tape.sum_all(e)
            };

            let mut tape = Tape::new();
            let root = build(&mut tape);

            let flat: Vec<f64> = (0..sizes.iter().map(|(_, s)| s).sum::<usize>())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let unpack = |flat: &[f64]| {
                let mut b = Bindings::new();
                let mut off = 0;
                for (name, size) in sizes {
                    let (rows, cols) = match name {
                        "x" => (n, d),
                        "w0" => (d, h),
                        "w1" => (h, h),
                        "w2" => (h, k),
                        "b0" | "b1" => (1, h),
                        _ => (1, k),
                    };
                    b.set(name, Tensor::from_raw(rows, cols, flat[off..off + size].to_vec()));
                    off += size;
                }
                b
            };

            let vals = tape.forward(&unpack(&flat)).unwrap();
            let names: Vec<&str> = sizes.iter().map(|(n, _)| *n).collect();
            let grads = tape.backward(&vals, root, &names, BackwardMode::Standard).unwrap();
            let analytic: Vec<f64> = names
                .iter()
                .flat_map(|n| grads.get(n).values().to_vec())
                .collect();

            let numeric = finite_difference(
                |p| {
                    let vals = tape.forward(&unpack(p))?;
                    Ok(vals.output(root).scalar_value())
                },
                &flat,
                1e-5,
            )
            .unwrap();

            assert!(
                gradients_close(&analytic, &numeric, 1e-4, 1e-7, 1e-3),
                "seed {seed}: gradient mismatch"
            );
        }
    }

    #[test]
    fn finite_difference_closed_forms() {
        // f(p) = p^2 at p = 3
        let g = finite_difference(|p| Ok(p[0] * p[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-9);

        // constant function
        let g = finite_difference(|_| Ok(42.0), &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0]);

        // f(p) = sum(p)
        let g = finite_difference(|p| Ok(p.iter().sum()), &[0.3, 0.7, -5.0], 1e-5).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_difference_rejects_non_finite_probes() {
        let err = finite_difference(|p| Ok(1.0 / p[0]), &[0.0], 1e-5);
        // 1/h is finite, so construct a genuinely non-finite case instead.
        assert!(err.is_ok());
        let err = finite_difference(|p| Ok((p[0] - 1e-6).ln()), &[0.0], 1e-5).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn guided_backward_gates_relu_paths() {
        // One ReLU with mixed signs downstream: y = sum(relu(x) .* w) where w
        // has both signs, so the incoming gradient at the ReLU is +/-.
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 4);
        let w = tape.leaf("w", 1, 4);
        let r = tape.relu(x);
        let p = tape.mul(r, w);
        let root = tape.sum_all(p);

        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![1.0, -1.0, 2.0, 3.0]));
        b.set("w", Tensor::row(vec![1.5, 2.0, -1.0, 0.5]));
        let vals = tape.forward(&b).unwrap();

        let std = tape.backward(&vals, root, &["x"], BackwardMode::Standard).unwrap();
        let guided = tape.backward(&vals, root, &["x"], BackwardMode::GuidedRelu).unwrap();

        // x[0]: act > 0, incoming grad 1.5 > 0 -> passes in both modes.
        // x[1]: act <= 0 -> zero in both.
        // x[2]: act > 0 but incoming grad -1.0 -> zero only under guided.
        // x[3]: act > 0, grad 0.5 > 0 -> passes in both.
        assert_eq!(std.get("x").values(), &[1.5, 0.0, -1.0, 0.5]);
        assert_eq!(guided.get("x").values(), &[1.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn repeated_backward_from_one_forward() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 3);
        let r = tape.relu(x);
        let root = tape.sum_all(r);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![1.0, -2.0, 3.0]));
        let vals = tape.forward(&b).unwrap();
        let g1 = tape.backward(&vals, root, &["x"], BackwardMode::Standard).unwrap();
        let g2 = tape.backward(&vals, root, &["x"], BackwardMode::GuidedRelu).unwrap();
        let g3 = tape.backward(&vals, root, &["x"], BackwardMode::Standard).unwrap();
        assert_eq!(g1.get("x").values(), g3.get("x").values());
        assert_eq!(g2.get("x").values(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn leaf_off_the_gradient_path_gets_zeros() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", 1, 2);
        let unused = tape.leaf("unused", 2, 2);
        let _ = unused;
        let root = tape.sum_all(x);
        let mut b = Bindings::new();
        b.set("x", Tensor::row(vec![1.0, 2.0]));
        b.set("unused", Tensor::zeros(2, 2));
        let vals = tape.forward(&b).unwrap();
        let g = tape
            .backward(&vals, root, &["x", "unused"], BackwardMode::Standard)
            .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.get("unused").values(), &[0.0; 4]);
    }
}
