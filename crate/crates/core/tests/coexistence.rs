use std::sync::Arc;

use viscotherm::coexistence::{
    assemble_kappa, compare_zero_sets, crossing_cells, degeneracy_residual, lemma4_expression,
    sample_grid, trace_coexistence_curve, EtaBinding, TraceSettings, Window, SELECTED_ETA_BINDING,
};
use viscotherm::field::{Partial, PowerLaw};
use viscotherm::tensor::{ComplexStructure, Metric, MixedTensor};
use viscotherm::thermo::{CoefficientModel, Medium, ThermoState, Viscosities};

fn vdw(mu: f64, tau: f64, zeta: f64, alpha: f64) -> CoefficientModel<f64> {
    CoefficientModel::van_der_waals(
        8.0 / 3.0,
        3.0,
        1.0 / 3.0,
        1.5,
        Viscosities {
            mu,
            tau,
            zeta,
            alpha,
        },
    )
}

fn spinodal_t(rho: f64) -> f64 {
    2.25 * rho * (1.0 - rho / 3.0).powi(2)
}

fn power(c: f64, a: f64, b: f64) -> Arc<PowerLaw<f64>> {
    Arc::new(PowerLaw {
        coefficient: c,
        rho_exponent: a,
        t_exponent: b,
    })
}

/// `det(T·κ)` for the bulk model on the Euclidean metric from the spectral
/// decomposition of the Δ-block: symmetric traceless (2μ), antisymmetric
/// (-2τ) and trace (nζ) subspaces, followed by the Schur complement on ρ.
fn schur_oracle(coeffs: &CoefficientModel<f64>, n: usize, rho: f64, t: f64, d: &[f64]) -> f64 {
    let nf = n as f64;
    let at = |x: usize, y: usize| d[x * n + y];
    let d1: f64 = (0..n).map(|i| at(i, i)).sum();
    let mut s0 = 0.0;
    let mut a2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = 0.5 * (at(i, j) + at(j, i)) - if i == j { d1 / nf } else { 0.0 };
            let a = 0.5 * (at(i, j) - at(j, i));
            s0 += s * s;
            a2 += a * a;
        }
    }
    let energy = |part: Partial| {
        let c = coeffs.values(rho, t, part);
        c.mu * s0 - c.tau * a2 + 0.5 * c.zeta * d1 * d1 - c.p * d1 + c.h0
    };
    let v = coeffs.values(rho, t, Partial::Value);
    let r = coeffs.values(rho, t, Partial::Rho);

    // c = ∂ρ ∂h/∂Δ split into the three subspaces.
    let mut c_s0 = 0.0;
    let mut c_a = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = 0.5 * (at(i, j) + at(j, i)) - if i == j { d1 / nf } else { 0.0 };
            let a = 0.5 * (at(i, j) - at(j, i));
            c_s0 += (2.0 * r.mu * s).powi(2);
            c_a += (2.0 * r.tau * a).powi(2);
        }
    }
    let c_tr = nf * (r.zeta * d1 - r.p);

    let m_s = (n * (n + 1) / 2 - 1) as i32;
    let m_a = (n * (n - 1) / 2) as i32;
    let det_neg_h = (-2.0 * v.mu).powi(m_s) * (2.0 * v.tau).powi(m_a) * (-nf * v.zeta);
    let c_hinv_c = c_s0 / (2.0 * v.mu) - c_a / (2.0 * v.tau) + c_tr * c_tr / (nf * nf * v.zeta);
    energy(Partial::TT) * det_neg_h * (-energy(Partial::RhoRho) + c_hinv_c)
}

#[test]
fn determinant_matches_schur_oracle() {
    let mut coeffs = vdw(1.0, 0.5, 2.0, 0.0);
    coeffs.mu = power(1.3, 0.7, 0.2);
    coeffs.tau = power(0.4, -0.5, 1.0);
    coeffs.zeta = power(2.1, 1.5, -0.3);
    let deltas: [(usize, Vec<f64>); 3] = [
        (2, vec![0.3, -0.2, 0.5, 0.1]),
        (2, vec![0.0, 0.0, 0.0, 0.0]),
        (3, vec![0.1, 0.2, -0.3, 0.0, 0.4, 0.1, -0.2, 0.3, -0.1]),
    ];
    for (n, d) in deltas {
        let m = Medium::bulk(coeffs.clone(), Metric::euclidean(n).unwrap());
        for (rho, t) in [(0.6, 0.9), (1.2, 1.1), (1.8, 0.7)] {
            let st = ThermoState::new(rho, t, MixedTensor::from_row_major(n, &d).unwrap());
            let got = degeneracy_residual(&m, &st).unwrap();
            let (h_tt, inner) = assemble_kappa(&m, &st).unwrap().block_factors();
            assert!((h_tt * inner - got.value).abs() <= 1e-9 * got.value.abs());
            let want = schur_oracle(&coeffs, n, rho, t, &d);
            assert!(
                (got.value - want).abs() <= 1e-8 * got.scale,
                "n={n} ρ={rho} T={t}: {} vs {want}",
                got.value
            );
        }
    }
}

fn spinodal_window() -> Window<f64> {
    Window::new((0.4, 2.4), (0.6, 1.2)).unwrap()
}

#[test]
fn still_medium_locus_contains_spinodal() {
    let m = Medium::bulk(vdw(1.0, 0.5, 2.0, 0.0), Metric::euclidean(2).unwrap());
    let trace = trace_coexistence_curve(
        &m,
        &MixedTensor::zeros(2).unwrap(),
        &spinodal_window(),
        &TraceSettings::default(),
    )
    .unwrap();
    assert_eq!(trace.dropped, 0);
    let mut matched = 0;
    for k in 0..20 {
        let target = 0.5 + 1.8 * k as f64 / 19.0;
        let best = trace
            .points
            .iter()
            .filter(|p| (p.rho - target).abs() < 0.02)
            .map(|p| (p.t - spinodal_t(p.rho)).abs())
            .fold(f64::INFINITY, f64::min);
        if spinodal_t(target) >= 0.6 {
            assert!(best <= 1e-6, "ρ={target}: {best}");
            matched += 1;
        }
    }
    assert!(matched >= 15);
    assert!(trace.distance_to(1.0, 1.0) <= 1e-3);

    let tol = TraceSettings::<f64>::default().tol;
    for p in trace.points.iter().step_by(5) {
        let k = assemble_kappa(
            &m,
            &ThermoState::new(p.rho, p.t, MixedTensor::zeros(2).unwrap()),
        )
        .unwrap();
        let d = k.degeneracy();
        assert!(p.residual.abs() <= tol * d.scale);
        assert!(
            k.singular_value_ratio() <= 1e-6,
            "{}",
            k.singular_value_ratio()
        );
    }
}

#[test]
fn tracing_is_deterministic() {
    let m = Medium::bulk(vdw(1.0, 0.5, 2.0, 0.0), Metric::euclidean(2).unwrap());
    let run = || {
        trace_coexistence_curve(
            &m,
            &MixedTensor::zeros(2).unwrap(),
            &spinodal_window(),
            &TraceSettings {
                grid: (24, 24),
                ..TraceSettings::default()
            },
        )
        .unwrap()
    };
    let a = run();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(a, b);
}

#[test]
fn locus_moves_continuously_with_deformation() {
    let m = Medium::bulk(vdw(1.0, 0.5, 2.0, 0.0), Metric::euclidean(2).unwrap());
    let settings = TraceSettings {
        grid: (32, 32),
        ..TraceSettings::default()
    };
    let base = trace_coexistence_curve(
        &m,
        &MixedTensor::zeros(2).unwrap(),
        &spinodal_window(),
        &settings,
    )
    .unwrap();
    // ‖Δ‖ = 1e-3 in the Frobenius norm.
    let raw = [[1.0, 0.5], [-1.0, 0.3]];
    let norm = raw.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let d = MixedTensor::from_rows(&raw.map(|r| r.map(|x| 1e-3 * x / norm))).unwrap();
    let moved = trace_coexistence_curve(&m, &d, &spinodal_window(), &settings).unwrap();
    assert!(!moved.points.is_empty());
    let one_way = |a: &viscotherm::coexistence::Trace<f64>,
                   b: &viscotherm::coexistence::Trace<f64>| {
        a.points
            .iter()
            .map(|p| b.distance_to(p.rho, p.t))
            .fold(0.0, f64::max)
    };
    let hausdorff = one_way(&moved, &base).max(one_way(&base, &moved));
    assert!(hausdorff < 1e-2, "{hausdorff}");
}

#[test]
fn surface_condition_shares_zero_set_with_determinant() {
    let coeffs = vdw(1.0, 0.5, 2.0, 0.3).with_rotational_pressure(power(0.2, 1.0, 1.0));
    let m = Medium::surface(
        coeffs,
        Metric::euclidean(2).unwrap(),
        ComplexStructure::standard(),
    )
    .unwrap();
    let w = Window::new((0.3, 2.4), (0.6, 1.4)).unwrap();
    let nodes = (40, 40);
    let d = MixedTensor::from_rows(&[[0.05, -0.02], [0.03, 0.01]]).unwrap();
    let det = sample_grid(
        |r, t| {
            degeneracy_residual(&m, &ThermoState::new(r, t, d))
                .unwrap()
                .value
        },
        &w,
        nodes,
    );
    let lemma = sample_grid(
        |r, t| lemma4_expression(&m, &ThermoState::new(r, t, d), SELECTED_ETA_BINDING).unwrap(),
        &w,
        nodes,
    );
    let cells = (nodes.0 - 1, nodes.1 - 1);
    let cmp = compare_zero_sets(
        &crossing_cells(&det, nodes),
        &crossing_cells(&lemma, nodes),
        cells,
        1,
    );
    assert!(cmp.count_a > 0);
    assert!(cmp.agree(), "{cmp:?}");

    let other = sample_grid(
        |r, t| lemma4_expression(&m, &ThermoState::new(r, t, d), EtaBinding::ZetaMinusMu).unwrap(),
        &w,
        nodes,
    );
    let cmp = compare_zero_sets(
        &crossing_cells(&det, nodes),
        &crossing_cells(&other, nodes),
        cells,
        1,
    );
    assert!(!cmp.agree());
}
