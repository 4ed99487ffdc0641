use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_map(dims: Dims, seed: u64) -> DenseMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMap::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
}

/// Builds `weighted_sum(op(inputs), w)` and returns value + input gradients.
fn check_op(
    inputs: &[DenseMap<f64>],
    build: impl Fn(&mut Tape<f64>, &[NodeId]) -> NodeId,
) -> GradCheckReport {
    let f = |ps: &[DenseMap<f64>]| {
        let mut tape = Tape::new();
        let ids: Vec<_> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = build(&mut tape, &ids);
        let w = random_map(tape.dims(out), 99);
        let loss = tape.weighted_sum(out, w);
        let grads = tape.backward(loss)?;
        let gs = ids
            .iter()
            .zip(ps)
            .map(|(&id, p)| grads.get_or_zeros(id, p.dims()))
            .collect();
        Ok((tape.scalar(loss), gs))
    };
    grad_check(f, inputs, 1e-5).unwrap()
}

#[test]
fn identity_kernel_leaves_input_unchanged() {
    let x = random_map(Dims::new(5, 4, 3), 1);
    let kernel = DenseMap::from_fn(Dims::new(3, 3, 3), |y, x, _| if y == 1 && x == 1 { 1.0 } else { 0.0 });
    let bias = DenseMap::zeros(Dims::new(1, 1, 3));
    assert_eq!(conv_depthwise(&x, &kernel, &bias).unwrap(), x);
}

#[test]
fn all_ones_kernel_counts_neighbours_with_zero_padding() {
    let x = DenseMap::filled(Dims::new(3, 3, 1), 1.0f64);
    let kernel = DenseMap::filled(Dims::new(3, 3, 1), 1.0);
    let bias = DenseMap::zeros(Dims::new(1, 1, 1));
    let out = conv_depthwise(&x, &kernel, &bias).unwrap();
    assert_eq!(out.get(1, 1, 0), 9.0);
    for (y, x) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
        assert_eq!(out.get(y, x, 0), 4.0);
    }
    assert_eq!(out.get(0, 1, 0), 6.0);
}

#[test]
fn conv_channel_count_mismatch_is_shape_error() {
    let x = DenseMap::<f64>::zeros(Dims::new(3, 3, 2));
    let kernel = DenseMap::zeros(Dims::new(3, 3, 3));
    let bias = DenseMap::zeros(Dims::new(1, 1, 3));
    assert!(matches!(conv_depthwise(&x, &kernel, &bias), Err(crate::Error::Shape(_))));
    let even = DenseMap::zeros(Dims::new(2, 2, 2));
    let bias = DenseMap::zeros(Dims::new(1, 1, 2));
    assert!(conv_depthwise(&x, &even, &bias).is_err());
}

#[test]
fn conv_channels_are_independent() {
    let mut x = random_map(Dims::new(4, 4, 2), 3);
    let kernel = random_map(Dims::new(3, 3, 2), 4);
    let bias = random_map(Dims::new(1, 1, 2), 5);
    let before = conv_depthwise(&x, &kernel, &bias).unwrap();
    x.set(2, 2, 1, 10.0);
    let after = conv_depthwise(&x, &kernel, &bias).unwrap();
    for y in 0..4 {
        for xx in 0..4 {
            assert_eq!(before.get(y, xx, 0), after.get(y, xx, 0));
        }
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    let inputs = [
        random_map(Dims::new(5, 6, 3), 10),
        random_map(Dims::new(3, 3, 3), 11),
        random_map(Dims::new(1, 1, 3), 12),
    ];
    let r = check_op(&inputs, |t, ids| t.conv_depthwise(ids[0], ids[1], ids[2]).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn channel_max_examples() {
    let x = DenseMap::from_vec(Dims::new(1, 1, 3), vec![3.0f64, -1.0, 7.0]).unwrap();
    let (m, arg) = channel_max(&x).unwrap();
    assert_eq!(m.values(), &[7.0]);
    assert_eq!(arg, vec![2]);

    let single = random_map(Dims::new(3, 2, 1), 7);
    assert_eq!(channel_max(&single).unwrap().0, single);
}

#[test]
fn channel_max_tie_routes_gradient_to_first_index() {
    let x = DenseMap::from_vec(Dims::new(1, 1, 2), vec![5.0f64, 5.0]).unwrap();
    let mut tape = Tape::new();
    let id = tape.param(x.clone());
    let m = tape.channel_max(id).unwrap();
    let s = tape.sum(m);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(id).unwrap().values(), &[1.0, 0.0]);

    // One-sided perturbation oracle: raising entry 0 raises the max; raising
    // entry 1 alone does not move it off the tie from below.
    let eps = 1e-6;
    let f = |v: [f64; 2]| v[0].max(v[1]);
    let down0 = (f([5.0, 5.0]) - f([5.0 - eps, 5.0])) / eps;
    let down1 = (f([5.0, 5.0]) - f([5.0, 5.0 - eps])) / eps;
    assert_eq!((down0, down1), (0.0, 0.0));
    let up0 = (f([5.0 + eps, 5.0]) - f([5.0, 5.0])) / eps;
    assert!((up0 - 1.0).abs() < 1e-6);
}

#[test]
fn channel_max_gradients_match_finite_differences() {
    let inputs = [random_map(Dims::new(4, 3, 5), 20)];
    let r = check_op(&inputs, |t, ids| t.channel_max(ids[0]).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn relu_and_broadcast_add() {
    let x = DenseMap::from_vec(Dims::new(1, 2, 1), vec![-2.0f64, 3.0]).unwrap();
    assert_eq!(relu(&x).values(), &[0.0, 3.0]);

    let a = random_map(Dims::new(2, 2, 3), 30);
    let b = random_map(Dims::new(2, 2, 1), 31);
    let sum = pointwise_add(&a, &b).unwrap();
    for y in 0..2 {
        for x in 0..2 {
            for c in 0..3 {
                assert_eq!(sum.get(y, x, c), a.get(y, x, c) + b.get(y, x, 0));
            }
        }
    }
    let bad = random_map(Dims::new(2, 1, 1), 32);
    assert!(pointwise_add(&a, &bad).is_err());
    assert_eq!(scale(&x, 2.0).values(), &[-4.0, 6.0]);
}

#[test]
fn elementwise_gradients_match_finite_differences() {
    // Keep relu inputs away from the kink.
    let mut x = random_map(Dims::new(3, 3, 2), 40);
    x.values_mut().iter_mut().for_each(|v| {
        if v.abs() < 0.05 {
            *v += 0.1
        }
    });
    let r = check_op(&[x], |t, ids| t.relu(ids[0]));
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let inputs = [random_map(Dims::new(3, 3, 4), 41), random_map(Dims::new(3, 3, 1), 42)];
    let r = check_op(&inputs, |t, ids| t.add(ids[0], ids[1]).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let inputs = [random_map(Dims::new(3, 3, 4), 43), random_map(Dims::new(3, 3, 4), 44)];
    let r = check_op(&inputs, |t, ids| t.add(ids[0], ids[1]).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let r = check_op(&[random_map(Dims::new(2, 2, 2), 45)], |t, ids| t.scale(ids[0], -1.7));
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn upsample_identity_and_constant() {
    let x = random_map(Dims::new(3, 2, 2), 50);
    assert_eq!(bilinear_upsample(&x, 1).unwrap(), x);
    assert!(matches!(bilinear_upsample(&x, 0), Err(crate::Error::Shape(_))));

    let c = DenseMap::filled(Dims::new(3, 2, 2), 0.375f64);
    let up = bilinear_upsample(&c, 3).unwrap();
    assert_eq!(up.dims(), Dims::new(9, 6, 2));
    assert!(up.values().iter().all(|&v| v == 0.375));
}

#[test]
fn upsample_2x2_matches_hand_grid() {
    // Half-pixel centres: output rows/cols 0..4 sample source coordinates
    // -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to the last row).
    let x = DenseMap::from_vec(Dims::new(2, 2, 1), vec![0.0f64, 1.0, 2.0, 3.0]).unwrap();
    let weights = [[1.0, 0.0], [0.75, 0.25], [0.25, 0.75], [0.0, 1.0]];
    let up = bilinear_upsample(&x, 2).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let mut expected = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    expected += weights[i][a] * weights[j][b] * x.get(a, b, 0);
                }
            }
            assert!((up.get(i, j, 0) - expected).abs() < 1e-12, "({i},{j})");
        }
    }
    let expected_row1 = [0.5, 0.75, 1.25, 1.5];
    for (j, e) in expected_row1.iter().enumerate() {
        assert!((up.get(1, j, 0) - e).abs() < 1e-12);
    }
}

#[test]
fn upsample_gradients_match_finite_differences() {
    for factor in [2, 3] {
        let r = check_op(&[random_map(Dims::new(3, 4, 2), 60)], |t, ids| {
            t.bilinear_upsample(ids[0], factor).unwrap()
        });
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}

#[test]
fn remaining_ops_gradients_match_finite_differences() {
    let inputs = [
        random_map(Dims::new(3, 2, 4), 70),
        random_map(Dims::new(1, 4, 5), 71),
        random_map(Dims::new(1, 1, 5), 72),
    ];
    let r = check_op(&inputs, |t, ids| t.linear(ids[0], ids[1], Some(ids[2])).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let inputs = [random_map(Dims::new(3, 2, 4), 73), random_map(Dims::new(1, 3, 4), 74)];
    let r = check_op(&inputs, |t, ids| t.correlate(ids[0], ids[1]).unwrap());
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let r = check_op(&[random_map(Dims::new(4, 4, 2), 75)], |t, ids| {
        t.space_to_depth(ids[0], 2).unwrap()
    });
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let r = check_op(&[random_map(Dims::new(3, 3, 4), 76)], |t, ids| t.l2_normalize(ids[0], 1e-12));
    assert!(r.max_rel_error < 1e-4, "{r:?}");

    let r = check_op(&[random_map(Dims::new(2, 3, 1), 77)], |t, ids| {
        t.tile_channels(ids[0], 4).unwrap()
    });
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn space_to_depth_layout() {
    let x = DenseMap::from_fn(Dims::new(4, 4, 1), |y, x, _| (y * 4 + x) as f64);
    let s = space_to_depth(&x, 2).unwrap();
    assert_eq!(s.dims(), Dims::new(2, 2, 4));
    assert_eq!(s.pixel(0, 1), &[2.0, 3.0, 6.0, 7.0]);
    assert!(space_to_depth(&x, 3).is_err());
}

#[test]
fn grad_check_of_plain_sum_is_exact() {
    let f = |ps: &[DenseMap<f64>]| {
        let grads = ps.iter().map(|p| DenseMap::filled(p.dims(), 1.0)).collect();
        Ok((ps.iter().map(|p| p.sum()).sum(), grads))
    };
    let params = [random_map(Dims::new(2, 2, 2), 80)];
    let r = grad_check(f, &params, 1e-5).unwrap();
    assert!(r.max_rel_error < 1e-9, "{r:?}");
    assert_eq!(r.entries_checked, 8);
}

#[test]
fn grad_check_detects_corrupted_gradient() {
    // f = 0.5 * sum(x); a gradient doubled by mistake reads 1.0 against 0.5.
    let f = |ps: &[DenseMap<f64>]| {
        let grads = vec![DenseMap::filled(ps[0].dims(), 2.0 * 0.5)];
        Ok((0.5 * ps[0].sum(), grads))
    };
    let r = grad_check(f, &[random_map(Dims::new(2, 2, 1), 81)], 1e-5).unwrap();
    assert!((r.max_rel_error - 0.5).abs() < 1e-6, "{r:?}");
    assert!(!r.passes(1e-4));
}

#[test]
fn grad_check_rejects_non_finite_objective() {
    let f = |_: &[DenseMap<f64>]| Ok((f64::NAN, vec![DenseMap::zeros(Dims::new(1, 1, 1))]));
    let err = grad_check(f, &[DenseMap::zeros(Dims::new(1, 1, 1))], 1e-5).unwrap_err();
    assert!(matches!(err, crate::Error::Numeric(_)));
}

#[test]
fn unused_parameter_gets_exact_zero() {
    let mut tape = Tape::<f64>::new();
    let used = tape.param(random_map(Dims::new(2, 2, 1), 90));
    let unused = tape.param(random_map(Dims::new(2, 2, 1), 91));
    let s = tape.sum(used);
    let g = tape.backward(s).unwrap();
    assert!(g.get(unused).is_none());
    assert!(g.get_or_zeros(unused, Dims::new(2, 2, 1)).values().iter().all(|&v| v == 0.0));
}

#[test]
fn backward_requires_scalar() {
    let mut tape = Tape::<f32>::new();
    let x = tape.param(DenseMap::zeros(Dims::new(2, 1, 1)));
    assert!(tape.backward(x).is_err());
}

proptest! {
    #[test]
    fn channelwise_ops_commute_with_channel_permutation(
        seed in 0u64..1000,
        perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let x = random_map(Dims::new(4, 3, 5), seed);
        let px = x.permute_channels(&perm).unwrap();
        let kernel = DenseMap::from_fn(Dims::new(3, 3, 5), |y, xx, _| (y * 3 + xx) as f64 * 0.1 - 0.3);
        let bias = DenseMap::filled(Dims::new(1, 1, 5), 0.2);

        let a = conv_depthwise(&x, &kernel, &bias).unwrap().permute_channels(&perm).unwrap();
        prop_assert_eq!(a, conv_depthwise(&px, &kernel, &bias).unwrap());

        let a = bilinear_upsample(&x, 2).unwrap().permute_channels(&perm).unwrap();
        prop_assert_eq!(a, bilinear_upsample(&px, 2).unwrap());

        prop_assert_eq!(relu(&x).permute_channels(&perm).unwrap(), relu(&px));
        prop_assert_eq!(channel_max(&x).unwrap().0, channel_max(&px).unwrap().0);
    }

    #[test]
    fn finite_inputs_stay_finite(seed in 0u64..1000) {
        let x = random_map(Dims::new(3, 3, 2), seed).cast::<f32>();
        let k = random_map(Dims::new(3, 3, 2), seed + 1).cast::<f32>();
        let b = random_map(Dims::new(1, 1, 2), seed + 2).cast::<f32>();
        prop_assert!(conv_depthwise(&x, &k, &b).unwrap().is_finite());
        prop_assert!(bilinear_upsample(&x, 4).unwrap().is_finite());
    }
}
