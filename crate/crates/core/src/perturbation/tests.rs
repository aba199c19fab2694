use super::*;
use crate::dynamics::Term;
use proptest::prelude::*;

fn resonant(p: &CircuitParams) -> (f64, f64) {
    let el = derive_elements(p).unwrap();
    (el.omega_a, el.omega_b)
}

/// Stiff-pump force monomials of `spec` keeping only those `keep` accepts.
fn filtered(p: &CircuitParams, spec: &ModelSpec, keep: impl Fn(usize, [u8; 3]) -> bool) -> [Vec<Term>; 3] {
    let f = crate::dynamics::Force::new(p, spec).unwrap();
    let t = f.poly_terms().unwrap();
    [0, 1, 2].map(|k| t[k].iter().copied().filter(|x| keep(k, x.p)).collect())
}

#[test]
fn response_factor_examples() {
    let p = CircuitParams::baseline(3.5);
    let (wa, wb) = resonant(&p);
    let f = response_factors(&p, wa, wb).unwrap();
    // independent evaluation at the quoted mode frequencies
    let ghz = 2.0 * std::f64::consts::PI * 1e9;
    let (wc, gc) = (6.37 * ghz, 0.1 * ghz);
    let lor = |x: f64| wc * wc / Complex64::new(wc * wc - x * x, -gc * x);
    let (s, d) = (lor(12.5 * ghz), lor(2.5 * ghz));
    assert!((s - Complex64::new(-0.3508, 0.0038)).norm() < 1e-4);
    assert!((d - Complex64::new(1.1821, 0.0086)).norm() < 1e-4);
    // the sized pump mode sits within 4 MHz of 6.37 GHz
    assert!((f.f_sigma - s).norm() < 1e-3 && (f.f_delta - d).norm() < 1e-3);
    assert!(f.f_sigma.im.abs() < 0.05 * f.f_sigma.re.abs());

    assert_eq!(response_factors(&p, wa, wa).unwrap().f_delta, Complex64::new(1.0, 0.0));
    let mut sharp = p;
    sharp.gamma_c = 1e-6;
    let el = derive_elements(&sharp).unwrap();
    assert!(response_factors(&sharp, 0.5 * el.omega_c, 0.5 * el.omega_c).unwrap().f_sigma.norm() > 1e8);
}

#[test]
fn generated_kerr_examples() {
    let k = generated_kerr(&CircuitParams::baseline(1.2)).unwrap();
    assert!((k.k_eff.re - 0.1443).abs() < 5e-4, "{k:?}");
    let g = 1.0 / 1.2;
    assert!((k.k_eff.re / (g * g) - 0.2078).abs() < 5e-4);
    assert!(k.k_eff.re > 0.0);
    let weak = generated_kerr(&CircuitParams::baseline(1e6)).unwrap();
    assert!(weak.k_eff.norm() < 1e-12 && weak.q_eff.abs() < 1e-12);
}

#[test]
fn epsilon_examples() {
    assert!((epsilon(1.0) + 0.1087).abs() < 1e-4);
    assert!((epsilon(0.1) + 0.01145).abs() < 1e-5);
}

#[test]
fn stp5_closed_form_example() {
    let p = CircuitParams::baseline(3.5);
    let t = coupling_table(&p, CouplingMethod::Analytic).unwrap();
    assert!((t.g / t.h_a - 24.0).abs() < 1e-9);
    let (wa, wb) = resonant(&p);
    assert!(((p.gamma_a / wa) / (p.gamma_b / wb) - 2.0 / 3.0).abs() < 1e-12);
    // |epsilon| = 0.1087 at 1 dB
    let f = high_gain_saturation(PerturbativeModel::Stp5O3, &p, 100.0, 1.0).unwrap();
    assert!((f - 0.033).abs() < 5e-4, "{f}");
    assert!(high_gain_saturation(PerturbativeModel::Stp5O5, &p, 100.0, 1.0).is_err());
}

#[test]
fn sop3_drive_vector_matches_engine() {
    for beta in [1.0, 2.0, 6.0, 12.0] {
        let p = CircuitParams::baseline(beta);
        let r = sop3_corrections(1e-4, &p, 100.0).unwrap();
        let e = Engine::with_gain(&p, &ModelSpec::soft(3), 100.0, 3).unwrap().solve().unwrap();
        let phi3 = e.signal[3] * 1e-12;
        assert!((phi3 - r.phi3).norm() < 1e-9 * r.phi3.norm(), "beta {beta}: {phi3} vs {}", r.phi3);
        assert!((e.signal[1] * 1e-4 - r.phi1).norm() < 1e-12 * r.phi1.norm());
    }
}

#[test]
fn stp5_drive_vector_matches_engine() {
    for beta in [3.0, 9.0] {
        let p = CircuitParams::baseline(beta);
        let (wa, wb) = resonant(&p);
        // the h_c monomial only dresses the pump, which the drive vector leaves out
        let terms = filtered(&p, &ModelSpec::stiff(5), |k, e| !(k < 2 && e[2] == 3));
        let c0 = Complex64::new(phi_c_for_gain(100.0, &p).unwrap(), 0.0);
        let e = Engine::from_terms(&p, terms, false, wa, wa + wb, c0, 3).unwrap().solve().unwrap();
        let printed = stp5_third_order(1e-3, &p, 100.0).unwrap();
        assert!((e.signal[3] * 1e-9 - printed).norm() < 1e-9 * printed.norm(), "{} vs {printed}", e.signal[3] * 1e-9);
    }
}

#[test]
fn stp7_drive_vector_matches_engine() {
    let p = CircuitParams::baseline(4.0);
    let (wa, wb) = resonant(&p);
    let terms = filtered(&p, &ModelSpec::stiff(7), |k, e| {
        matches!((k, e), (0, [4, 1, 1]) | (1, [5, 0, 1]) | (0, [0, 1, 1]) | (1, [1, 0, 1]))
    });
    assert_eq!(terms[0].len() + terms[1].len(), 4);
    let c0 = Complex64::new(phi_c_for_gain(100.0, &p).unwrap(), 0.0);
    let e = Engine::from_terms(&p, terms, false, wa, wa + wb, c0, 5).unwrap().solve().unwrap();
    assert_eq!(e.signal[3], Complex64::default());
    let printed = stp7_fifth_order(1e-2, &p, 100.0).unwrap();
    assert!((e.signal[5] * 1e-10 - printed).norm() < 1e-9 * printed.norm(), "{} vs {printed}", e.signal[5] * 1e-10);
    // a small shift next to the fifth-degree term at the same input
    let h = stp5_third_order(1e-2, &p, 100.0).unwrap();
    assert!(printed.norm() < 0.1 * h.norm());
}

#[test]
fn no_nonlinearity_means_no_corrections() {
    let p = CircuitParams::baseline(3.5);
    let (wa, wb) = resonant(&p);
    let three_wave = filtered(&p, &ModelSpec::stiff(5), |_, e| e.iter().sum::<u8>() == 2);
    let c0 = Complex64::new(phi_c_for_gain(10.0, &p).unwrap(), 0.0);
    let e = Engine::from_terms(&p, three_wave, false, wa, wa + wb, c0, 5).unwrap().solve().unwrap();
    assert!(e.signal[2..].iter().all(|v| *v == Complex64::default()));
    assert!(exact_saturation(&e, 5, 0.1).is_err());
}

#[test]
fn high_gain_coefficients() {
    // leading coefficients of phi3 / amp^3 at large gain, for several decay ratios
    for ga_ghz in [0.05, 0.1, 0.3] {
        let mut p = CircuitParams::baseline(3.5);
        p.gamma_a = 2.0 * std::f64::consts::PI * ga_ghz * 1e9;
        let (wa, wb) = resonant(&p);
        let (ga, gb) = (p.gamma_a / wa, p.gamma_b / wb);
        let t = coupling_table(&p, CouplingMethod::Analytic).unwrap();
        let f = response_factors(&p, wa, wb).unwrap();
        let g0 = 1e6;
        let sop = Engine::with_gain(&p, &ModelSpec::soft(3), g0, 3).unwrap().solve().unwrap().signal[3];
        let want = 2.0 * t.g * t.g / gb * g0 * g0 * f.f_sigma.im;
        assert!((sop.norm() / want - 1.0).abs() < 0.01, "{} vs {want}", sop.norm());
        let stp = Engine::with_gain(&p, &ModelSpec::stiff(5), g0, 3).unwrap().solve().unwrap().signal[3];
        let want = 3.0 * (t.h_a / t.g) * (1.0 + ga / gb) * g0 * g0;
        assert!((stp.norm() / want - 1.0).abs() < 0.01, "{} vs {want}", stp.norm());
    }
}

#[test]
fn stp5_saturation_is_beta_independent() {
    let v: Vec<f64> = [6.0, 8.0, 10.0, 12.0]
        .iter()
        .map(|&b| saturation_flux_perturbative(PerturbativeModel::Stp5O5, &CircuitParams::baseline(b), 100.0, 0.1).unwrap())
        .collect();
    let (lo, hi) = v.iter().fold((f64::MAX, 0f64), |(l, h), x| (l.min(*x), h.max(*x)));
    assert!(hi / lo - 1.0 < 0.05, "{v:?}");
}

#[test]
fn closed_forms_track_exact_route_at_high_gain() {
    // the printed limits overestimate the exact crossing by a constant factor
    let p = CircuitParams::baseline(3.5);
    for m in [PerturbativeModel::Sop3O3, PerturbativeModel::Stp5O3] {
        let r: Vec<f64> = [1e4, 1e5]
            .iter()
            .map(|&g0| {
                let ex = saturation_estimate(m, SaturationRoute::Exact, &p, g0, 0.1).unwrap().flux;
                high_gain_saturation(m, &p, g0, 0.1).unwrap() / ex
            })
            .collect();
        assert!((r[0] / r[1] - 1.0).abs() < 0.02, "{m}: {r:?}");
        assert!(r[1] > 1.3 && r[1] < 1.5, "{m}: {r:?}");
    }
}

#[test]
fn model_names_round_trip() {
    for m in PerturbativeModel::ALL {
        assert_eq!(m.name().parse::<PerturbativeModel>().unwrap(), m);
        assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
    }
    assert!("SoP9".parse::<PerturbativeModel>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corrections_scale_with_input(beta in 1.0f64..12.0, db in 5.0f64..25.0, amp in 1e-5f64..1e-3, k in 1.5f64..4.0) {
        let p = CircuitParams::baseline(beta);
        let g0 = 10f64.powf(db / 10.0);
        let r1 = sop3_corrections(amp, &p, g0).unwrap();
        let r2 = sop3_corrections(k * amp, &p, g0).unwrap();
        prop_assert!((r2.phi1 / r1.phi1 - k).norm() < 1e-9 * k);
        prop_assert!((r2.phi3 / r1.phi3 - k.powi(3)).norm() < 1e-9 * k.powi(3));
        prop_assert!((r2.phi5 / r1.phi5 - k.powi(5)).norm() < 1e-9 * k.powi(5));
        let s1 = stp7_fifth_order(amp, &p, g0).unwrap();
        let s2 = stp7_fifth_order(2.0 * amp, &p, g0).unwrap();
        prop_assert!((s2 / s1 - 32.0).norm() < 1e-9 * 32.0);
        let h1 = stp5_third_order(amp, &p, g0).unwrap();
        let h2 = stp5_third_order(2.0 * amp, &p, g0).unwrap();
        prop_assert!((h2 / h1 - 8.0).norm() < 1e-9 * 8.0);
    }

    #[test]
    fn tighter_criterion_saturates_earlier(beta in 1.0f64..12.0, db in 10.0f64..25.0) {
        let p = CircuitParams::baseline(beta);
        let g0 = 10f64.powf(db / 10.0);
        for m in PerturbativeModel::ALL {
            let a = saturation_flux_perturbative(m, &p, g0, 0.1).unwrap();
            let b = saturation_flux_perturbative(m, &p, g0, 1.0).unwrap();
            prop_assert!(a < b, "{m}: {a} {b}");
        }
    }

    #[test]
    fn first_order_gain_is_target(beta in 1.0f64..12.0, db in 1.0f64..30.0, m in 0usize..5) {
        let model = PerturbativeModel::ALL[m];
        let g0 = 10f64.powf(db / 10.0);
        let e = Engine::with_gain(&CircuitParams::baseline(beta), &model.spec(), g0, model.order()).unwrap();
        prop_assert!((e.linear_gain().unwrap() / g0 - 1.0).abs() < 1e-8);
    }
}
