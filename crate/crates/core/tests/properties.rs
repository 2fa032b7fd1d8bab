use bregman_pnp::convolution::{ConvolutionOperator, Kernel};
use bregman_pnp::geometry::LegendrePotential;
use bregman_pnp::harness::{ExperimentConfig, Task};
use bregman_pnp::noise::sample_ig_noise;
use bregman_pnp::poisson::{sample_poisson, DataFidelity};
use bregman_pnp::solver::{bred_step, diagnostics, SolverTrace, TraceRow};
use proptest::prelude::*;

fn side_and_pixels(max_side: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (3usize..=max_side).prop_flat_map(|s| (Just(s), prop::collection::vec(1e-3f64..=1.0, s * s)))
}

fn kernel() -> impl Strategy<Value = Kernel> {
    (0usize..3, 0usize..3).prop_flat_map(|(a, b)| {
        let (h, w) = (2 * a + 1, 2 * b + 1);
        prop::collection::vec(0.01f64..1.0, h * w).prop_map(move |d| Kernel::new(h, w, d).unwrap().normalized().unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bred_step_stays_in_the_box(
        cells in prop::collection::vec((1e-3f64..=1.0, -1e3f64..1e3), 1..40),
        tau in 1e-3f64..10.0,
    ) {
        let (x, g): (Vec<f64>, Vec<f64>) = cells.into_iter().unzip();
        let next = bred_step(&x, &g, tau, 1.0).unwrap();
        prop_assert!(next.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn convolution_adjoint_is_the_transpose((side, x) in side_and_pixels(12), k in kernel(), seed in 0u64..1000) {
        let op = ConvolutionOperator::new(k, side, side).unwrap();
        let v: Vec<f64> = (0..side * side).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0).collect();
        let ax = op.apply_forward(&x).unwrap();
        let atv = op.apply_adjoint(&v).unwrap();
        let lhs: f64 = ax.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&atv).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn blur_preserves_total_intensity((side, x) in side_and_pixels(12), k in kernel()) {
        let op = ConvolutionOperator::new(k, side, side).unwrap();
        let ax = op.apply_forward(&x).unwrap();
        let (a, b): (f64, f64) = (ax.iter().sum(), x.iter().sum());
        prop_assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn poisson_fidelity_is_relatively_smooth(
        (side, truth) in side_and_pixels(8),
        xs in prop::collection::vec((1e-3f64..=1.0, 1e-3f64..=1.0), 64),
        alpha in 1.0f64..100.0,
        seed in 0u64..1000,
    ) {
        let op = ConvolutionOperator::new(Kernel::new(3, 3, vec![1.0 / 9.0; 9]).unwrap(), side, side).unwrap();
        let data = sample_poisson(&truth, &op, alpha, seed).unwrap();
        let n = side * side;
        let x: Vec<f64> = xs[..n].iter().map(|p| p.0).collect();
        let xp: Vec<f64> = xs[..n].iter().map(|p| p.1).collect();
        let h = LegendrePotential::burg(n);
        let fx = data.value(&x).unwrap();
        let fxp = data.value(&xp).unwrap();
        let g = data.grad(&xp).unwrap();
        let df = fx - fxp - g.iter().zip(x.iter().zip(&xp)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
        prop_assert!(fx >= -1e-9 && fxp >= -1e-9);
        prop_assert!(df <= data.smoothness_bound() * h.bregman_div(&x, &xp).unwrap() + 1e-9);
    }

    #[test]
    fn inverse_gamma_noise_is_positive(x in prop::collection::vec(1e-3f64..=1.0, 1..50), gamma in 1.5f64..200.0, seed in any::<u64>()) {
        let y = sample_ig_noise(&x, gamma, seed).unwrap();
        prop_assert!(y.iter().all(|v| *v > 0.0 && v.is_finite()));
        prop_assert_eq!(y, sample_ig_noise(&x, gamma, seed).unwrap());
    }

    #[test]
    fn kernel_text_round_trips(k in kernel()) {
        let back = Kernel::parse_text(&k.to_text()).unwrap();
        prop_assert_eq!((back.height, back.width), (k.height, k.width));
        for (a, b) in back.data.iter().zip(&k.data) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn config_text_round_trips(alpha in 1.0f64..100.0, seed in any::<u64>(), bred in any::<bool>(), iters in 1usize..1000) {
        let c = ExperimentConfig::new(Task::Deblur)
            .with("alpha", alpha).unwrap()
            .with("seed", seed).unwrap()
            .with("mode", if bred { "bred" } else { "bpnp" }).unwrap()
            .with("max_iter", iters).unwrap();
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), c.to_text());
        prop_assert_eq!(back.alpha(), alpha);
    }

    #[test]
    fn one_injected_increase_is_one_violation(decrements in prop::collection::vec(1e-3f64..1.0, 3..40), at in any::<prop::sample::Index>()) {
        let mut trace = SolverTrace::default();
        let mut objective = 100.0;
        let bump = 1 + at.index(decrements.len() - 1);
        for (k, d) in decrements.iter().enumerate() {
            objective += if k == bump { 1.0 } else { -d };
            trace.push(TraceRow {
                iter: k,
                objective,
                dh_residual: Some(*d),
                step_sq: Some(*d),
                tau: 1.0,
                bt_trials: 0,
                psnr: None,
                flags: Vec::new(),
            });
        }
        prop_assert_eq!(diagnostics(&trace).monotonicity_violations, vec![bump]);
    }
}
