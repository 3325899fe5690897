use fmd_core::oracle::{
    brute_force_rho, cost, extremality_check, in_cone, is_hooke_optimal_for_stress, j_cone_numeric, j_minus,
    j_minus_iso, j_plus, j_pm, optimal_hooke_for_strain, optimal_hooke_for_stress, rho, rho_polar, strain_energy,
    stress_energy,
};
use fmd_core::tensor::{dyadic, hooke_apply, iso_hooke, psd_split, young_poisson, SQRT2};
use fmd_core::{DesignSetting, FmdError, HookeTensor, SymTensor2};
use proptest::prelude::*;

const PM: DesignSetting = DesignSetting::FibMdPm { kappa_plus: 1.0, kappa_minus: 2.0 };

fn settings() -> [DesignSetting; 5] {
    [DesignSetting::Amd, DesignSetting::FibMd, PM, DesignSetting::Imd, DesignSetting::PowerLawImd { p: 3.0 }]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn hooke_close(a: &HookeTensor, b: &HookeTensor, tol: f64) -> bool {
    (0..3).all(|i| (0..3).all(|j| (a.get(i, j) - b.get(i, j)).abs() <= tol))
}

fn e11() -> SymTensor2 {
    SymTensor2::diag2(1.0, 0.0)
}

fn e22() -> SymTensor2 {
    SymTensor2::diag2(0.0, 1.0)
}

/// Eigenvalues of a plane tensor from its characteristic polynomial.
fn eigs(t: &SymTensor2) -> [f64; 2] {
    let (a, b, c) = (t.get(0, 0), t.get(1, 1), t.get(0, 1));
    let m = 0.5 * (a + b);
    let r = (0.5 * (a - b)).hypot(c);
    [m + r, m - r]
}

/// Gauge of the unit strain ball, evaluated independently of the library.
fn gauge_reference(setting: &DesignSetting, xi: &SymTensor2) -> f64 {
    let [l1, l2] = eigs(xi);
    let tr = l1 + l2;
    let dev = (0.5 * (l1 - l2) * (l1 - l2)).sqrt();
    match *setting {
        DesignSetting::Amd => (l1 * l1 + l2 * l2).sqrt(),
        DesignSetting::FibMd => l1.abs().max(l2.abs()),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            [l1, l2].iter().map(|l| (kappa_plus * l).max(-kappa_minus * l)).fold(0.0, f64::max)
        }
        DesignSetting::Imd => (tr.abs() / SQRT2).max(dev / SQRT2),
        DesignSetting::PowerLawImd { p } => {
            let b = 2f64.powf(1.0 / p);
            (tr.abs() / b).max(dev / b)
        }
        _ => unreachable!(),
    }
}

fn polar_reference(setting: &DesignSetting, sigma: &SymTensor2) -> f64 {
    let [l1, l2] = eigs(sigma);
    let tr = l1 + l2;
    let dev = (0.5 * (l1 - l2) * (l1 - l2)).sqrt();
    match *setting {
        DesignSetting::Amd => (l1 * l1 + l2 * l2).sqrt(),
        DesignSetting::FibMd => l1.abs() + l2.abs(),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            [l1, l2].iter().map(|l| if *l >= 0.0 { l / kappa_plus } else { -l / kappa_minus }).sum()
        }
        DesignSetting::Imd => tr.abs() / SQRT2 + SQRT2 * dev,
        DesignSetting::PowerLawImd { p } => {
            let b = 2f64.powf(1.0 / p);
            0.5 * b * tr.abs() + b * dev
        }
        _ => unreachable!(),
    }
}

#[test]
fn strain_energy_examples() {
    let s = DesignSetting::Amd;
    assert!(close(strain_energy(&s, &dyadic(&e11()), &e11()).unwrap(), 0.5, 1e-15));
    let k = 0.37;
    let v = strain_energy(&DesignSetting::Imd, &iso_hooke(k, 0.2, 2).unwrap(), &SymTensor2::identity(2)).unwrap();
    assert!(close(v, 2.0 * k, 1e-14));
    assert_eq!(strain_energy(&s, &HookeTensor::identity(2), &SymTensor2::zeros(2)).unwrap(), 0.0);
}

#[test]
fn stress_energy_examples() {
    let s = DesignSetting::Amd;
    let h = dyadic(&e11());
    assert!(close(stress_energy(&s, &h, &e11()).unwrap(), 0.5, 1e-14));
    assert_eq!(stress_energy(&s, &h, &e22()).unwrap(), f64::INFINITY);
    let sigma = SymTensor2::plane(0.4, -2.0, 1.1);
    let v = stress_energy(&s, &HookeTensor::identity(2), &sigma).unwrap();
    assert!(close(v, 0.5 * sigma.dot(&sigma), 1e-14));
}

#[test]
fn non_isotropic_tensor_is_outside_the_isotropic_cone() {
    let err = strain_energy(&DesignSetting::Imd, &dyadic(&e11()), &e11()).unwrap_err();
    assert!(matches!(err, FmdError::ConeViolation(_)));
    assert!(!in_cone(&DesignSetting::Imd, &dyadic(&e11())));
}

#[test]
fn gauge_examples() {
    assert!(close(rho(&DesignSetting::Amd, &SymTensor2::diag2(3.0, -4.0)), 5.0, 1e-15));
    assert!(close(rho(&DesignSetting::FibMd, &SymTensor2::diag2(3.0, -1.0)), 3.0, 1e-15));
    assert!(close(rho(&DesignSetting::Imd, &SymTensor2::identity(2)), SQRT2, 1e-15));
    assert!(close(rho(&PM, &SymTensor2::diag2(1.0, -1.0)), 2.0, 1e-15));
}

#[test]
fn polar_gauge_examples() {
    assert!(close(rho_polar(&DesignSetting::FibMd, &SymTensor2::diag2(1.0, -1.0)), 2.0, 1e-15));
    assert!(close(rho_polar(&DesignSetting::Imd, &e11()), 1.0 + 1.0 / SQRT2, 1e-14));
    assert_eq!(rho_polar(&DesignSetting::Amd, &SymTensor2::zeros(2)), 0.0);
    let sym = DesignSetting::FibMdPm { kappa_plus: 1.0, kappa_minus: 1.0 };
    let s = SymTensor2::plane(0.3, -1.7, 0.9);
    assert!(close(rho_polar(&sym, &s), rho_polar(&DesignSetting::FibMd, &s), 1e-14));
}

#[test]
fn optimal_hooke_for_stress_examples() {
    let h = optimal_hooke_for_stress(&DesignSetting::Amd, &e11()).unwrap();
    assert!(hooke_close(&h, &dyadic(&e11()), 1e-14));

    let h = optimal_hooke_for_stress(&DesignSetting::Imd, &e11()).unwrap();
    let (k, g) = h.iso_moduli(1e-12).unwrap();
    assert!((k - 1.0 / (2.0 + 2.0 * SQRT2)).abs() < 1e-12);
    assert!((g - 1.0 / (4.0 + 2.0 * SQRT2)).abs() < 1e-12);

    let want = 0.8 * dyadic(&e11()) + 0.2 * dyadic(&e22());
    let h = optimal_hooke_for_stress(&DesignSetting::FibMd, &SymTensor2::diag2(0.8, 0.2)).unwrap();
    assert!(hooke_close(&h, &want, 1e-14));

    let want = 0.5 * dyadic(&e11()) + 0.5 * dyadic(&e22());
    let h = optimal_hooke_for_stress(&DesignSetting::FibMd, &SymTensor2::diag2(1.0, -1.0)).unwrap();
    assert!(hooke_close(&h, &want, 1e-14));

    assert!(matches!(
        optimal_hooke_for_stress(&DesignSetting::Amd, &SymTensor2::zeros(2)),
        Err(FmdError::DegenerateStress)
    ));
}

#[test]
fn optimal_hooke_for_strain_examples() {
    let xi = SymTensor2::diag2(3.0, -4.0);
    let h = optimal_hooke_for_strain(&DesignSetting::Amd, &xi).unwrap();
    assert!(hooke_close(&h, &dyadic(&xi.scale(0.2)), 1e-14));
    let h = optimal_hooke_for_strain(&DesignSetting::FibMd, &SymTensor2::diag2(3.0, -1.0)).unwrap();
    assert!(hooke_close(&h, &dyadic(&e11()), 1e-14));
    let h = optimal_hooke_for_strain(&DesignSetting::Imd, &SymTensor2::identity(2)).unwrap();
    assert!(hooke_close(&h, &iso_hooke(0.5, 0.0, 2).unwrap(), 1e-14));
    assert!(optimal_hooke_for_strain(&DesignSetting::Amd, &SymTensor2::zeros(2)).is_err());
}

#[test]
fn hooke_optimality_membership_examples() {
    let sigma = SymTensor2::diag2(0.8, 0.2);
    let eta1 = SymTensor2::outer(&[2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()]);
    let eta2 = SymTensor2::outer(&[2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt()]);
    let h2 = 0.5 * dyadic(&eta1) + 0.5 * dyadic(&eta2);
    assert!(is_hooke_optimal_for_stress(&DesignSetting::FibMd, &h2, &sigma, 1e-9));
    assert!(!is_hooke_optimal_for_stress(&DesignSetting::Amd, &dyadic(&e22()), &e11(), 1e-9));
    for s in settings() {
        let sigma = SymTensor2::plane(0.7, -0.2, 0.4);
        let h = optimal_hooke_for_stress(&s, &sigma).unwrap();
        assert!(is_hooke_optimal_for_stress(&s, &h, &sigma, 1e-9), "{s:?}");
    }
}

#[test]
fn extremality_examples() {
    assert!(extremality_check(&DesignSetting::Amd, &e11(), &e11(), 1e-12));
    assert!(extremality_check(&DesignSetting::FibMd, &SymTensor2::identity(2), &SymTensor2::diag2(0.8, 0.2), 1e-12));
    assert!(!extremality_check(&DesignSetting::Imd, &SymTensor2::identity(2), &SymTensor2::plane(0.0, 0.0, 1.0), 1e-6));
}

#[test]
fn j_minus_examples() {
    let (k, g) = (0.5, 0.5);
    assert_eq!(j_minus_iso(k, g, &SymTensor2::plane(1.0, 0.5, 0.2)).unwrap(), 0.0);
    let xi = SymTensor2::diag2(-1.0, -0.8);
    let full = 0.5 * hooke_apply(&iso_hooke(k, g, 2).unwrap(), &xi).dot(&xi);
    assert!(close(j_minus_iso(k, g, &xi).unwrap(), full, 1e-14));
    let (young, _) = young_poisson(k, g).unwrap();
    let v = j_minus_iso(k, g, &SymTensor2::diag2(1.0, -1.0)).unwrap();
    assert!(close(v, 0.5 * young, 1e-14));
    let numeric = j_cone_numeric(&iso_hooke(k, g, 2).unwrap(), &SymTensor2::diag2(1.0, -1.0), false).unwrap();
    assert!((numeric - v).abs() < 1e-8);
    assert!(j_minus_iso(k, g, &SymTensor2::identity(3)).is_err());
}

#[test]
fn j_pm_examples() {
    let eta = SymTensor2::outer(&[0.6, 0.8]);
    let h = dyadic(&eta);
    let xi = SymTensor2::plane(1.0, 0.5, 0.3);
    let j = strain_energy(&DesignSetting::Amd, &h, &xi).unwrap();
    assert!(close(j_pm(1.0, 1.0, &h, &xi).unwrap(), j, 1e-12));
    assert_eq!(j_pm(1.0, 2.0, &iso_hooke(0.3, 0.2, 2).unwrap(), &SymTensor2::zeros(2)).unwrap(), 0.0);
    let v = j_pm(1.0, 2.0, &dyadic(&e11()), &-e11()).unwrap();
    assert!(close(v, 2.0, 1e-14));
}

#[test]
fn brute_force_examples() {
    let v = brute_force_rho(&DesignSetting::Amd, &e11(), 10_000).unwrap();
    assert!((0.49..=0.5 + 1e-12).contains(&v), "{v}");
    let v = brute_force_rho(&DesignSetting::Imd, &SymTensor2::identity(2), 1000).unwrap();
    assert!((v - 1.0).abs() <= 0.01, "{v}");
    let v = brute_force_rho(&DesignSetting::FibMd, &SymTensor2::diag2(3.0, -1.0), 10_000).unwrap();
    assert!((v - 4.5).abs() <= 0.045, "{v}");
}

#[test]
fn brute_force_is_monotone_in_sample_count() {
    let xi = SymTensor2::plane(0.4, -1.3, 0.8);
    for s in [DesignSetting::Amd, DesignSetting::FibMd, DesignSetting::Imd] {
        let mut prev = 0.0;
        for n in [1000, 2000, 4000, 8000] {
            let v = brute_force_rho(&s, &xi, n).unwrap();
            assert!(v >= prev);
            assert!(v <= 0.5 * rho(&s, &xi).powi(2) * (1.0 + 1e-12));
            prev = v;
        }
    }
}

#[test]
fn three_dimensional_gauges() {
    let xi = SymTensor2::from_matrix3([[1.0, 0.2, 0.0], [0.2, -0.5, 0.3], [0.0, 0.3, 0.8]]).unwrap();
    for s in [DesignSetting::Amd, DesignSetting::FibMd, DesignSetting::Imd] {
        let h = optimal_hooke_for_strain(&s, &xi).unwrap();
        assert!(close(cost(&h), 1.0, 1e-12));
        let e = strain_energy(&s, &h, &xi).unwrap();
        assert!(close(e, 0.5 * rho(&s, &xi).powi(2), 1e-10), "{s:?}");
        let hs = optimal_hooke_for_stress(&s, &xi).unwrap();
        let e = stress_energy(&s, &hs, &xi).unwrap();
        assert!(close(e, 0.5 * rho_polar(&s, &xi).powi(2), 1e-10), "{s:?}");
    }
}

fn tensor() -> impl Strategy<Value = SymTensor2> {
    prop::array::uniform3(-2.0..2.0f64)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| SymTensor2::plane(v[0], v[1], v[2]))
}

fn setting() -> impl Strategy<Value = DesignSetting> {
    (0..5usize).prop_map(|i| settings()[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn gauges_match_reference(s in setting(), xi in tensor()) {
        prop_assert!(close(rho(&s, &xi), gauge_reference(&s, &xi), 1e-12));
        prop_assert!(close(rho_polar(&s, &xi), polar_reference(&s, &xi), 1e-12));
    }

    #[test]
    fn polarity(s in setting(), xi in tensor(), sigma in tensor()) {
        prop_assert!(xi.dot(&sigma) <= rho(&s, &xi) * rho_polar(&s, &sigma) * (1.0 + 1e-10) + 1e-15);
    }

    #[test]
    fn homogeneity(s in setting(), xi in tensor(), t in 0.1..10.0f64) {
        let p = s.exponent();
        prop_assert!(close(rho(&s, &xi.scale(t)), t * rho(&s, &xi), 1e-10));
        prop_assert!(close(rho_polar(&s, &xi.scale(t)), t * rho_polar(&s, &xi), 1e-10));
        let h = optimal_hooke_for_strain(&s, &xi).unwrap();
        let base = strain_energy(&s, &h, &xi).unwrap();
        prop_assert!(close(strain_energy(&s, &h, &xi.scale(t)).unwrap(), t.powf(p) * base, 1e-10));
        prop_assert!(close(strain_energy(&s, &h.scale(t), &xi).unwrap(), t * base, 1e-10));
    }

    #[test]
    fn energy_split(s in setting(), sigma in tensor(), a in tensor(), w in 0.0..1.0f64) {
        let q = s.conjugate_exponent();
        let target = rho_polar(&s, &sigma).powf(q) / q;
        let h = optimal_hooke_for_stress(&s, &sigma).unwrap();
        prop_assert!(close(cost(&h), 1.0, 1e-12));
        prop_assert!(close(stress_energy(&s, &h, &sigma).unwrap(), target, 1e-9));
        // Any other unit-cost member of the cone stores at least as much.
        let other = match s {
            DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
                let k = w / 2.0;
                iso_hooke(k, (1.0 - 2.0 * k) / 4.0, 2).unwrap()
            }
            DesignSetting::FibMd | DesignSetting::FibMdPm { .. } => {
                let [c, sn] = [w.cos(), w.sin()];
                let m = SymTensor2::outer(&[c, sn]);
                let n = SymTensor2::outer(&[-sn, c]);
                w * dyadic(&m) + (1.0 - w) * dyadic(&n)
            }
            _ => dyadic(&a.scale(1.0 / a.norm())),
        };
        let e = stress_energy(&s, &other, &sigma).unwrap();
        prop_assert!(e >= target - 1e-9 * (1.0 + target));
    }

    #[test]
    fn strain_oracle_attains_gauge(s in setting(), xi in tensor()) {
        let p = s.exponent();
        let h = optimal_hooke_for_strain(&s, &xi).unwrap();
        prop_assert!(close(cost(&h), 1.0, 1e-12));
        prop_assert!(close(strain_energy(&s, &h, &xi).unwrap(), rho(&s, &xi).powf(p) / p, 1e-10));
    }

    #[test]
    fn repartition(s in setting(), sigma in tensor()) {
        // Build ξ with ρ(ξ) = 1 aligned to σ from the optimal tensor's response.
        let p = s.exponent();
        let q = s.conjugate_exponent();
        let sigma = sigma.scale(1.0 / rho_polar(&s, &sigma));
        let h = optimal_hooke_for_stress(&s, &sigma).unwrap();
        let xi = match s {
            DesignSetting::Amd => sigma,
            DesignSetting::FibMd | DesignSetting::FibMdPm { .. } => {
                let e = fmd_core::tensor::eig_sym(&sigma);
                let (kp, km) = match s {
                    DesignSetting::FibMdPm { kappa_plus, kappa_minus } => (kappa_plus, kappa_minus),
                    _ => (1.0, 1.0),
                };
                e.map(|l| if l >= 0.0 { 1.0 / kp } else { -1.0 / km })
            }
            _ => {
                let (tr, dev) = fmd_core::tensor::trace_dev_split(&sigma);
                let id = SymTensor2::identity(2);
                let dn = dev.norm();
                let d = if dn > 0.0 { dev.scale(1.0 / dn) } else { dev };
                let b = 2f64.powf(1.0 / p);
                id.scale(0.5 * b * tr.signum()) + d.scale(b)
            }
        };
        prop_assume!(extremality_check(&s, &xi, &sigma, 1e-12));
        prop_assert!(close(rho(&s, &xi), 1.0, 1e-10));
        let pair = xi.dot(&sigma);
        prop_assert!(close(pair, p * strain_energy(&s, &h, &xi).unwrap(), 1e-8));
        prop_assert!(close(pair, q * stress_energy(&s, &h, &sigma).unwrap(), 1e-8));
    }

    #[test]
    fn j_pm_is_superadditive(k1 in 0.0..1.0f64, g1 in 0.0..1.0f64, k2 in 0.0..1.0f64, g2 in 0.0..1.0f64, xi in tensor()) {
        let h1 = iso_hooke(k1, g1, 2).unwrap();
        let h2 = iso_hooke(k2, g2, 2).unwrap();
        let sum = j_pm(1.0, 2.0, &(h1.clone() + h2.clone()), &xi).unwrap();
        let parts = j_pm(1.0, 2.0, &h1, &xi).unwrap() + j_pm(1.0, 2.0, &h2, &xi).unwrap();
        prop_assert!(sum >= parts - 1e-12 * (1.0 + parts));
    }

    #[test]
    fn one_sided_energies_bound_full_energy(k in 0.01..1.0f64, g in 0.01..1.0f64, xi in tensor(), z in tensor()) {
        let h = iso_hooke(k, g, 2).unwrap();
        let full = 0.5 * hooke_apply(&h, &xi).dot(&xi);
        let jm = j_minus(&h, &xi).unwrap();
        let jp = j_plus(&h, &xi).unwrap();
        prop_assert!(jm <= full + 1e-12 && jp <= full + 1e-12);
        // An infimum over shifts is below the energy at any admissible shift.
        let (pos, neg) = psd_split(&z);
        let at = |s: SymTensor2| 0.5 * hooke_apply(&h, &(xi + s)).dot(&(xi + s));
        prop_assert!(jm <= at(neg) + 1e-12);
        prop_assert!(jp <= at(pos) + 1e-12);
    }
}
