mod common;

use bulkq_core::headway::{truncated_headway, y_moments, HeadwayModel};
use bulkq_core::model::Scenario;
use bulkq_core::roots::{find_all_roots, RootConfig};
use bulkq_core::solver::*;

use common::*;

/// Space distribution seen at every station of `sc`, from the recursion.
fn space_dists(sc: &Scenario) -> Vec<DiscreteDist> {
    let opts = AnalysisOptions::default();
    let mut v = DiscreteDist::point_mass(0, sc.route.capacity);
    let mut out = Vec::new();
    for n in 1..=sc.station_count() {
        let (_, s) = step_alighting(&v, sc.route.stations[n - 1].alpha).unwrap();
        out.push(s);
        v = analyze_station(sc, n, &v, &opts).unwrap().1;
    }
    out
}

struct Station {
    s: DiscreteDist,
    lambda: f64,
    model: HeadwayModel,
}

fn stations(sc: &Scenario) -> Vec<Station> {
    space_dists(sc)
        .into_iter()
        .enumerate()
        .map(|(i, s)| Station {
            s: trim_capacity(&s, TRIM_EPS).unwrap(),
            lambda: sc.lambda(i + 1).unwrap(),
            model: truncated_headway(sc, i + 1).unwrap(),
        })
        .collect()
}

#[test]
fn pipeline_matches_embedded_chain() {
    let sc = Scenario::reference();
    let rep = analyze_route(&sc).unwrap();
    for (st, m) in stations(&sc).iter().zip(&rep.per_station) {
        if st.lambda == 0.0 {
            continue;
        }
        let eq = m.eq.value().unwrap();
        let sd = m.varq.value().unwrap().sqrt();
        let len = (eq + 40.0 * sd).max(200.0) as usize;
        let y = y_pmf(st.lambda, &st.model, 200);
        let pi = embedded_chain(st.s.probs(), &y, len);
        let (ce, cv) = mean_var(&pi);
        assert!((ce - eq).abs() < 1e-7 * eq.max(1.0), "station {}: E[Q] {eq} vs chain {ce}", m.station);
        let vq = m.varq.value().unwrap();
        assert!((cv - vq).abs() < 1e-6 * vq.max(1.0), "station {}: Var[Q] {vq} vs chain {cv}", m.station);
        for (k, (&a, &b)) in m.queue_front.probs().iter().zip(&pi).enumerate() {
            assert!((a - b).abs() < 1e-9, "station {} q_{k}: {a} vs {b}", m.station);
        }
    }
}

#[test]
fn toeplitz_and_spectral_queue_fronts_agree() {
    let sc = Scenario::reference();
    let mut compared = 0;
    for (i, st) in stations(&sc).iter().enumerate().filter(|(_, s)| s.lambda > 0.0) {
        let y = y_moments(st.lambda, &st.model);
        let u = utilization(&st.s, &y);
        let kernel = StationKernel::new(&st.s, st.lambda, st.model);
        let roots = find_all_roots(&kernel, u.rho, &RootConfig::default()).unwrap();
        let c = st.s.capacity();
        let spec = queue_front_spectral(&kernel, &roots, y.mean, c, 4096).unwrap();
        // The coefficient expansion cancels heavily and the triangular solve
        // divides by s_C, so small s_C can push a q_k slightly negative.
        match queue_front(&st.s, &roots, &y) {
            Ok(toe) => {
                let tol = 1e-8 / st.s.probs()[c].min(1.0);
                for (a, b) in toe.probs().iter().zip(spec.probs()) {
                    assert!((a - b).abs() < tol, "{a} vs {b}");
                }
                compared += 1;
            }
            Err(bulkq_core::Error::NegativeProbability { value, .. }) => {
                assert!(value > -1e-6 / st.s.probs()[c], "station {}: {value}", i + 1);
            }
            Err(e) => panic!("station {}: {e}", i + 1),
        }
        let norm = normalization_sum(&st.s, &spec);
        assert!((norm - (st.s.mean() - y.mean)).abs() < 1e-8);
    }
    assert!(compared >= 3, "{compared}");
}

#[test]
fn central_and_raw_moment_forms_agree() {
    let sc = Scenario::reference();
    let mut checked = 0;
    for st in stations(&sc).iter().filter(|s| s.lambda > 0.0) {
        let y = y_moments(st.lambda, &st.model);
        let u = utilization(&st.s, &y);
        let kernel = StationKernel::new(&st.s, st.lambda, st.model);
        let roots = find_all_roots(&kernel, u.rho, &RootConfig::default()).unwrap();
        let a = queue_moments(&st.s.moments(), &y, &roots, st.s.capacity()).unwrap();
        let b = queue_moments_raw(&st.s, &y, &roots).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-9 * a.mean.max(1.0));
        assert!((a.var - b.var).abs() < 1e-8 * a.var.max(1.0));
        checked += 1;
    }
    assert_eq!(checked, 9);
}

#[test]
fn fixed_capacity_single_batch_forms() {
    let c = 34;
    let s = DiscreteDist::point_mass(c, c);
    for (lambda, n) in [(0.6, 1), (2.4, 4), (3.9, 4), (1.0, 10)] {
        let model = truncated_headway(&Scenario::reference(), n).unwrap();
        let y = y_moments(lambda, &model);
        let kernel = StationKernel::new(&s, lambda, model);
        let u = utilization(&s, &y);
        let roots = find_all_roots(&kernel, u.rho, &RootConfig::default()).unwrap();
        let mut prod = bulkq_core::Complex64::new(c as f64 - y.mean, 0.0);
        for z in roots.nontrivial() {
            prod *= z / (z - 1.0);
        }
        let eta = eta_coefficients(roots.roots());
        let spec = queue_front_spectral(&kernel, &roots, y.mean, c, 4096).unwrap();
        let toe = queue_front(&s, &roots, &y).unwrap();
        for k in 0..c {
            let closed = prod.re * eta[k].re;
            assert!((spec.probs()[k] - closed).abs() < 1e-8, "lambda {lambda} k={k}");
            assert!((toe.probs()[k] - closed).abs() < 1e-12);
        }
    }
}

#[test]
fn single_seat_vehicle_idle_probability() {
    let s = DiscreteDist::point_mass(1, 1);
    for (lambda, mu, sigma) in [(0.05, 6.0, 0.0), (0.1, 7.2, 3.0), (0.12, 6.0, 6.0)] {
        let model = HeadwayModel::new(mu, sigma);
        let y = y_moments(lambda, &model);
        let kernel = StationKernel::new(&s, lambda, model);
        let u = utilization(&s, &y);
        let roots = find_all_roots(&kernel, u.rho, &RootConfig::default()).unwrap();
        assert_eq!(roots.len(), 1);
        let toe = queue_front(&s, &roots, &y).unwrap();
        let spec = queue_front_spectral(&kernel, &roots, y.mean, 1, 4096).unwrap();
        assert!((toe.probs()[0] - (1.0 - u.rho)).abs() < 1e-10);
        assert!((spec.probs()[0] - (1.0 - u.rho)).abs() < 1e-10);
    }
}

#[test]
fn first_station_utilization() {
    let sc = Scenario::reference();
    let rep = analyze_route(&sc).unwrap();
    let h = truncated_headway(&sc, 1).unwrap();
    let want = 0.6 * h.moments().mean / 34.0;
    assert!((rep.per_station[0].rho - want).abs() < 1e-14);
    // σ = 2 at the first station, so truncation barely moves the mean.
    assert!((h.moments().mean - 7.2).abs() < 1e-3);
    assert!((rep.per_station[0].rho - 0.127).abs() < 1e-3);
    let h10 = truncated_headway(&sc, 10).unwrap();
    assert!((h10.moments().mean - 7.60).abs() < 0.01);
}

#[test]
fn uncongested_wait_matches_renewal_form() {
    let sc = Scenario::reference();
    let rep = analyze_route(&sc).unwrap();
    let mut used = 0;
    for m in &rep.per_station {
        if m.lambda == 0.0 || m.rho >= 0.3 || m.queue_front.mass() <= 0.999 {
            continue;
        }
        let h = m.headway.moments();
        let renewal = 0.5 * (h.mean + h.var / h.mean);
        let ew = m.ew.value().unwrap();
        assert!((ew / renewal - 1.0).abs() < 0.02, "station {}: {ew} vs {renewal}", m.station);
        used += 1;
    }
    assert!(used >= 3, "only {used} uncongested stations");
}

#[test]
fn reference_profile() {
    let rep = analyze_route(&Scenario::reference()).unwrap();
    let eq: Vec<f64> = rep.per_station.iter().map(|m| m.eq.value().unwrap()).collect();
    assert_eq!(eq[9], 0.0);
    assert!(eq[1] > eq[0] && eq[1] > eq[2], "station 2 is a local peak");
    for m in &rep.per_station {
        assert!(m.stable);
        let total: f64 = m.queue_front.probs().iter().sum();
        assert!(total <= 1.0 + 1e-9);
    }
}

#[test]
fn departure_loads_are_distributions() {
    let sc = Scenario::reference();
    let rep = analyze_route(&sc).unwrap();
    for v in departure_loads(&sc, &rep).unwrap() {
        let total: f64 = v.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(v.probs().iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn unstable_branch() {
    let mut sc = Scenario::reference();
    sc.incidents.theta = 0.5;
    let rep = analyze_route(&sc).unwrap();
    let m4 = &rep.per_station[3];
    assert!(!m4.stable && m4.rho >= 1.0);
    assert_eq!(m4.eq, Metric::Unbounded);
    assert_eq!(m4.ew, Metric::Unbounded);
    assert!(m4.queue_front.probs().iter().all(|&q| q == 0.0));
    for m in &rep.per_station {
        assert_eq!(m.stable, m.rho < 1.0);
    }
}

#[test]
fn no_incident_wait_is_half_headway() {
    let mut sc = Scenario::reference_h4();
    sc.incidents.gamma = 0.0;
    let rep = analyze_route(&sc).unwrap();
    for m in rep.per_station.iter().filter(|m| m.lambda > 0.0) {
        let ew = m.ew.value().unwrap();
        assert!((ew / 2.0 - 1.0).abs() < 1e-4, "station {}: {ew}", m.station);
    }
    // At H̄ = 6 the two busiest stations leave people behind even without
    // incidents, so their waits sit above H̄/2.
    let mut sc = Scenario::reference();
    sc.incidents.gamma = 0.0;
    let rep = analyze_route(&sc).unwrap();
    for m in rep.per_station.iter().filter(|m| m.lambda > 0.0) {
        let ew = m.ew.value().unwrap();
        if m.station == 4 || m.station == 5 {
            assert!(ew > 3.01, "station {}: {ew}", m.station);
        } else {
            assert!((ew / 3.0 - 1.0).abs() < 1e-5, "station {}: {ew}", m.station);
        }
    }
}

#[test]
fn station_errors_name_the_station() {
    let opts = AnalysisOptions {
        roots: RootConfig { max_iter: 0, max_depth: 2, ..RootConfig::default() },
    };
    let err = analyze_route_with(&Scenario::reference(), &opts).unwrap_err();
    assert!(matches!(err, bulkq_core::Error::AtStation { station: 1, .. }), "{err}");
    assert!(matches!(err.root_cause(), bulkq_core::Error::RootSearch { .. }));
    assert!(err.to_string().starts_with("station 1: root search found"));
}
