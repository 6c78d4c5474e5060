use bulkq_core::headway::{y_moments, y_pgf, HeadwayModel};
use bulkq_core::model::{ensure_valid, expand_grid, validate, Scenario, SweepParam};
use bulkq_core::roots::PolarPoint;
use bulkq_core::solver::{boarding_matrix, step_alighting, DiscreteDist, QueueFront};
use bulkq_core::Complex64;
use proptest::prelude::*;

fn dist(len: usize) -> impl Strategy<Value = DiscreteDist> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("zero mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| DiscreteDist::new(w.iter().map(|x| x / total).collect()).unwrap())
    })
}

proptest! {
    #[test]
    fn arrival_pgf_is_a_pgf(
        lambda in 0.0f64..3.0,
        mu in 0.5f64..12.0,
        sigma in 0.0f64..6.0,
        r in 0.0f64..1.0,
        phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let m = HeadwayModel::new(mu, sigma);
        let one = y_pgf(Complex64::new(1.0, 0.0), lambda, &m).unwrap();
        prop_assert!((one - 1.0).norm() < 1e-12);
        let z = Complex64::from_polar(r, phi);
        let y = y_pgf(z, lambda, &m).unwrap();
        prop_assert!(y.norm() <= 1.0 + 1e-12, "{y}");
        let y0 = y_pgf(Complex64::new(0.0, 0.0), lambda, &m).unwrap();
        prop_assert!(y0.im.abs() < 1e-15 && y0.re > 0.0);
        let mom = y_moments(lambda, &m);
        prop_assert!(mom.mean >= 0.0 && mom.central2 >= mom.mean - 1e-9);
    }

    #[test]
    fn alighting_conserves_mass(v in dist(21), alpha in 0.0f64..=1.0) {
        let (g, s) = step_alighting(&v, alpha).unwrap();
        let mg: f64 = g.probs().iter().sum();
        prop_assert!((mg - 1.0).abs() < 1e-12);
        prop_assert!(g.probs().iter().all(|&p| p >= 0.0));
        let rev = g.reversed();
        prop_assert_eq!(s.probs(), rev.probs());
        prop_assert!((g.mean() - (1.0 - alpha) * v.mean()).abs() < 1e-9);
    }

    #[test]
    fn boarding_rows_are_distributions(w in prop::collection::vec(0.0f64..1.0, 1..30), cap in 1usize..25) {
        let total: f64 = w.iter().sum::<f64>() + 1e-3;
        let q = QueueFront::new(w.iter().map(|x| x / total).collect()).unwrap();
        let b = boarding_matrix(&q, cap);
        for i in 0..=cap {
            let row: f64 = b.row(i).iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-12, "row {i}: {row}");
            prop_assert!(b.row(i)[..i].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn validation_is_stable(
        gamma in -0.5f64..1.0,
        theta in -0.5f64..3.0,
        alpha in -0.5f64..1.5,
        cap in 0usize..50,
    ) {
        let mut sc = Scenario::reference();
        sc.incidents.gamma = gamma;
        sc.incidents.theta = theta;
        sc.route.stations[2].alpha = alpha;
        sc.route.capacity = cap;
        let first = validate(&sc);
        prop_assert_eq!(&first, &validate(&sc.clone()));
        prop_assert_eq!(first.is_empty(), ensure_valid(&sc).is_ok());
        let valid = gamma >= 0.0 && theta > 0.0 && (0.0..=1.0).contains(&alpha) && cap >= 1;
        prop_assert_eq!(first.is_empty(), valid);
    }

    #[test]
    fn adjusted_headway_grows_with_incidents(
        g1 in 0.0f64..1.0, dg in 0.0f64..1.0,
        t1 in 0.2f64..4.0, dt in 0.0f64..2.0,
    ) {
        let mut a = Scenario::reference();
        a.incidents.gamma = g1;
        a.incidents.theta = t1 + dt;
        let mut b = a.clone();
        b.incidents.gamma = g1 + dg;
        b.incidents.theta = t1;
        prop_assert!(b.adjusted_headway() >= a.adjusted_headway());
        prop_assert!(a.adjusted_headway() >= a.route.nominal_headway);
    }

    #[test]
    fn grid_expansion_touches_one_field(idx in 0usize..5, v in 1u32..60) {
        let base = Scenario::reference();
        let param = SweepParam::ALL[idx];
        let value = v as f64 * if param == SweepParam::Capacity { 1.0 } else { 0.05 };
        let sc = expand_grid(&base, param, &[value]).unwrap().remove(0);
        prop_assert_eq!(param.get(&sc), value);
        for other in SweepParam::ALL.iter().filter(|&&p| p != param) {
            prop_assert_eq!(other.get(&sc), other.get(&base));
        }
        prop_assert_eq!(&sc.route.stations, &base.route.stations);
        prop_assert_eq!(sc.route.interstation_time, base.route.interstation_time);
        prop_assert_eq!(sc.route.cycle_time, base.route.cycle_time);
    }

    #[test]
    fn polar_round_trip(r in 0.01f64..2.0, phi in -20.0f64..20.0) {
        let p = PolarPoint::new(r, phi);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&p.phi));
        let q = PolarPoint::from_complex(p.to_complex());
        prop_assert!((q.to_complex() - p.to_complex()).norm() < 1e-12);
    }

    #[test]
    fn clamped_distributions_sum_to_one(w in prop::collection::vec(0.0f64..1.0, 2..40), slack in -5e-10f64..5e-10) {
        let total: f64 = w.iter().sum::<f64>();
        prop_assume!(total > 1e-3);
        let total = total * (1.0 + slack);
        let d = DiscreteDist::new(w.iter().map(|x| x / total).collect()).unwrap();
        let s: f64 = d.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-14);
    }
}
