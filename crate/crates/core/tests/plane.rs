use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscotherm::field::{Affine, Field, Negated, VanDerWaalsPressure};
use viscotherm::plane::{
    continuity_rhs, momentum_rhs, run, step, stress_field, temperature_rhs, Grid, SimCoefficients,
    SimConfig, SimState, TimeStep,
};

fn ideal_pressure(r: f64) -> Field<f64> {
    Arc::new(VanDerWaalsPressure { r, a: 0.0, b: 0.0 })
}

fn coeffs(mu: f64, tau: f64, zeta: f64, alpha: f64, q: Field<f64>) -> SimCoefficients<f64> {
    SimCoefficients {
        mu,
        tau,
        zeta,
        alpha,
        c_p: 1.7,
        kappa: 0.05,
        p: ideal_pressure(1.0),
        q,
    }
}

fn square(n: usize) -> Grid<f64> {
    Grid::new(n, n, TAU, TAU).unwrap()
}

fn random_state(grid: Grid<f64>, seed: u64) -> SimState<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SimState::uniform(grid, 0.0, 0.0, 1.0, 1.0);
    for k in 0..grid.len() {
        s.u[k] = rng.gen_range(-1.0..1.0);
        s.v[k] = rng.gen_range(-1.0..1.0);
        s.rho[k] = rng.gen_range(0.5..2.0);
        s.temp[k] = rng.gen_range(0.5..2.0);
    }
    s
}

/// Manufactured fields with hand-written derivatives.
struct Manufactured {
    a1: f64,
    a2: f64,
}

#[derive(Clone, Copy)]
struct Point {
    u: f64,
    v: f64,
    rho: f64,
    t: f64,
    u_x: f64,
    u_y: f64,
    v_x: f64,
    v_y: f64,
    u_xx: f64,
    u_yy: f64,
    u_xy: f64,
    v_xx: f64,
    v_yy: f64,
    v_xy: f64,
    rho_x: f64,
    rho_y: f64,
    t_x: f64,
    t_y: f64,
    t_lap: f64,
}

impl Manufactured {
    fn at(&self, x: f64, y: f64) -> Point {
        let (a1, a2) = (self.a1, self.a2);
        let (su, cu) = (x + 2.0 * y).sin_cos();
        let (sv, cv) = (2.0 * x - y).sin_cos();
        let (st, ct) = (x - y).sin_cos();
        Point {
            u: a1 * su,
            v: a2 * cv,
            rho: 2.0 + 0.3 * x.sin() * y.cos(),
            t: 1.0 + 0.2 * ct,
            u_x: a1 * cu,
            u_y: 2.0 * a1 * cu,
            v_x: -2.0 * a2 * sv,
            v_y: a2 * sv,
            u_xx: -a1 * su,
            u_yy: -4.0 * a1 * su,
            u_xy: -2.0 * a1 * su,
            v_xx: -4.0 * a2 * cv,
            v_yy: -a2 * cv,
            v_xy: 2.0 * a2 * cv,
            rho_x: 0.3 * x.cos() * y.cos(),
            rho_y: -0.3 * x.sin() * y.sin(),
            t_x: -0.2 * st,
            t_y: 0.2 * st,
            t_lap: -0.4 * ct,
        }
    }

    fn state(&self, grid: Grid<f64>) -> SimState<f64> {
        SimState::from_fn(grid, |x, y| {
            let p = self.at(x, y);
            (p.u, p.v, p.rho, p.t)
        })
    }
}

/// Exact right-hand sides for `p = ρT` and `q = q0 + qρ ρ + qT T`.
fn exact_rhs(c: &SimCoefficients<f64>, qc: &Affine<f64>, p: &Point) -> [f64; 4] {
    let (mu, tau, zeta, alpha) = (c.mu, c.tau, c.zeta, c.alpha);
    let p_x = p.rho_x * p.t + p.rho * p.t_x;
    let p_y = p.rho_y * p.t + p.rho * p.t_y;
    let q_x = qc.c_rho * p.rho_x + qc.c_t * p.t_x;
    let q_y = qc.c_rho * p.rho_y + qc.c_t * p.t_y;
    let u_t = -(p.u * p.u_x + p.v * p.u_y)
        + (-p_x + q_y + (mu + zeta) * p.u_xx + (mu - tau) * p.u_yy + (tau + zeta) * p.v_xy
            - alpha * (p.v_xx + p.v_yy))
            / p.rho;
    let v_t = -(p.u * p.v_x + p.v * p.v_y)
        + (-p_y - q_x
            + (mu + zeta) * p.v_yy
            + (mu - tau) * p.v_xx
            + (tau + zeta) * p.u_xy
            + alpha * (p.u_xx + p.u_yy))
            / p.rho;
    let rho_t = -(p.u * p.rho_x + p.v * p.rho_y) - p.rho * (p.u_x + p.v_y);

    let pressure = p.rho * p.t;
    let q = qc.c0 + qc.c_rho * p.rho + qc.c_t * p.t;
    let sxx = -pressure + (mu + zeta) * p.u_x + (zeta - mu) * p.v_y + alpha * (p.u_y - p.v_x);
    let sxy = -q + (mu + tau) * p.u_y + (mu - tau) * p.v_x + alpha * (p.u_x + p.v_y);
    let syx = q + (mu - tau) * p.u_y + (mu + tau) * p.v_x - alpha * (p.u_x + p.v_y);
    let syy = -pressure + (mu + zeta) * p.v_y + (zeta - mu) * p.u_x + alpha * (p.u_y - p.v_x);
    let work = sxx * p.u_x + sxy * p.v_x + syx * p.u_y + syy * p.v_y;
    let t_t = -(p.u * p.t_x + p.v * p.t_y) + (work + c.kappa * p.t_lap) / (c.c_p * p.rho);
    [u_t, v_t, rho_t, t_t]
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let qc = Affine {
        c0: 0.1,
        c_rho: 0.4,
        c_t: -0.3,
    };
    let c = coeffs(0.7, 0.2, 1.1, 0.35, Arc::new(qc));
    let m = Manufactured { a1: 0.8, a2: -0.6 };
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let g = square(n);
        let s = m.state(g);
        let (du, dv) = momentum_rhs(&s, &c).unwrap();
        let drho = continuity_rhs(&s);
        let dt = temperature_rhs(&s, &c).unwrap();
        let mut e = [0.0f64; 4];
        for j in 0..n {
            for i in 0..n {
                let k = g.index(i, j);
                let exact = exact_rhs(&c, &qc, &m.at(g.x(i), g.y(j)));
                for (slot, got) in [du[k], dv[k], drho[k], dt[k]].into_iter().enumerate() {
                    e[slot] = e[slot].max((got - exact[slot]).abs());
                }
            }
        }
        errors.push(e);
    }
    for slot in 0..4 {
        for w in errors.windows(2) {
            let order = (w[0][slot] / w[1][slot]).log2();
            assert!(
                order >= 1.9,
                "operator {slot}: order {order} ({:?})",
                errors
            );
        }
    }
}

#[test]
fn reduces_to_classical_compressible_form() {
    let g = square(32);
    let c = coeffs(
        0.9,
        0.0,
        1.4,
        0.0,
        Arc::new(Affine {
            c0: 0.0,
            c_rho: 0.0,
            c_t: 0.0,
        }),
    );
    let s = random_state(g, 7);
    let (du, dv) = momentum_rhs(&s, &c).unwrap();

    // ρ(u_t + u·∇u) = -∇p + μ∇²u + ζ∇(∇·u), with the same stencils.
    let n = g.nx as isize;
    let h = g.dx();
    let f = |a: &[f64], i: isize, j: isize| a[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize];
    let p: Vec<f64> = s.rho.iter().zip(&s.temp).map(|(r, t)| r * t).collect();
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let d1 = |a: &[f64], di: isize, dj: isize| {
                (f(a, i + di, j + dj) - f(a, i - di, j - dj)) / (2.0 * h)
            };
            let d2 = |a: &[f64], di: isize, dj: isize| {
                (f(a, i + di, j + dj) - 2.0 * f(a, i, j) + f(a, i - di, j - dj)) / (h * h)
            };
            let dxy = |a: &[f64]| {
                (f(a, i + 1, j + 1) - f(a, i + 1, j - 1) - f(a, i - 1, j + 1) + f(a, i - 1, j - 1))
                    / (4.0 * h * h)
            };
            let k = (j * n + i) as usize;
            let (u, v, rho) = (s.u[k], s.v[k], s.rho[k]);
            let lap_u = d2(&s.u, 1, 0) + d2(&s.u, 0, 1);
            let lap_v = d2(&s.v, 1, 0) + d2(&s.v, 0, 1);
            let graddiv_x = d2(&s.u, 1, 0) + dxy(&s.v);
            let graddiv_y = dxy(&s.u) + d2(&s.v, 0, 1);
            let ut = -(u * d1(&s.u, 1, 0) + v * d1(&s.u, 0, 1))
                + (-d1(&p, 1, 0) + c.mu * lap_u + c.zeta * graddiv_x) / rho;
            let vt = -(u * d1(&s.v, 1, 0) + v * d1(&s.v, 0, 1))
                + (-d1(&p, 0, 1) + c.mu * lap_v + c.zeta * graddiv_y) / rho;
            scale = scale.max(ut.abs()).max(vt.abs());
            worst = worst.max((ut - du[k]).abs()).max((vt - dv[k]).abs());
        }
    }
    assert!(worst <= 1e-12 * scale, "{worst} vs scale {scale}");
}

fn swap(s: &SimState<f64>) -> SimState<f64> {
    let n = s.grid.nx;
    let t = |a: &[f64]| -> Vec<f64> { (0..n * n).map(|k| a[(k % n) * n + k / n]).collect() };
    SimState {
        t: s.t,
        grid: s.grid,
        u: t(&s.v),
        v: t(&s.u),
        rho: t(&s.rho),
        temp: t(&s.temp),
    }
}

#[test]
fn swap_equivariance_is_exact() {
    let g = square(16);
    let q: Field<f64> = Arc::new(Affine {
        c0: 0.1,
        c_rho: 0.4,
        c_t: -0.3,
    });
    let c = coeffs(0.7, 0.2, 1.1, 0.35, q.clone());
    let mut c_swapped = coeffs(0.7, 0.2, 1.1, -0.35, Arc::new(Negated(q)));
    c_swapped.kappa = c.kappa;
    let s = random_state(g, 11);
    let ss = swap(&s);
    let tr = |a: &[f64]| {
        swap(&SimState {
            t: 0.0,
            grid: g,
            u: a.to_vec(),
            v: a.to_vec(),
            rho: a.to_vec(),
            temp: a.to_vec(),
        })
        .rho
    };

    let (du, dv) = momentum_rhs(&s, &c).unwrap();
    let (su, sv) = momentum_rhs(&ss, &c_swapped).unwrap();
    assert_eq!(su, tr(&dv));
    assert_eq!(sv, tr(&du));
    assert_eq!(continuity_rhs(&ss), tr(&continuity_rhs(&s)));
    assert_eq!(
        temperature_rhs(&ss, &c_swapped).unwrap(),
        tr(&temperature_rhs(&s, &c).unwrap())
    );

    let f = stress_field(&s, &c).unwrap();
    let fs = stress_field(&ss, &c_swapped).unwrap();
    assert_eq!(fs.xx, tr(&f.yy));
    assert_eq!(fs.xy, tr(&f.yx));
    assert_eq!(fs.yx, tr(&f.xy));
    assert_eq!(fs.yy, tr(&f.xx));
}

#[test]
fn uniform_flow_stress_is_still_medium_stress() {
    let g = square(16);
    let q: Field<f64> = Arc::new(Affine {
        c0: 0.1,
        c_rho: 0.4,
        c_t: -0.3,
    });
    let c = coeffs(0.7, 0.2, 1.1, 0.35, q);
    let s = SimState::from_fn(g, |x, y| {
        (0.4, -1.3, 1.0 + 0.1 * x.sin(), 1.2 + 0.1 * y.cos())
    });
    let f = stress_field(&s, &c).unwrap();
    for k in 0..g.len() {
        let (p, q) = (s.rho[k] * s.temp[k], 0.1 + 0.4 * s.rho[k] - 0.3 * s.temp[k]);
        assert_eq!((f.xx[k], f.xy[k], f.yx[k], f.yy[k]), (-p, -q, q, -p));
    }
}

fn taylor_green_setup(n: usize, r: f64) -> (SimConfig<f64>, SimCoefficients<f64>, SimState<f64>) {
    let g = square(n);
    let nu = 0.01;
    let c = SimCoefficients {
        mu: nu,
        tau: 0.0,
        zeta: nu,
        alpha: 0.0,
        c_p: 2.5 * r,
        kappa: 0.0,
        p: ideal_pressure(r),
        q: Arc::new(Affine {
            c0: 0.0,
            c_rho: 0.0,
            c_t: 0.0,
        }),
    };
    let cfg = SimConfig {
        grid: g,
        time_step: TimeStep::Auto { cfl: 0.4 },
        t_end: 1.0,
        snapshot_every: 1,
    };
    (cfg, c, SimState::taylor_green(g, 1.0, 1.0, 1.0, r))
}

#[test]
fn taylor_green_decays_at_twice_the_viscosity() {
    let (cfg, c, s0) = taylor_green_setup(64, 100.0);
    let out = run(&cfg, &c, s0, |_, _, _| Ok(())).unwrap();
    let d = &out.diagnostics;
    assert!(d
        .windows(2)
        .all(|w| w[1].kinetic_energy < w[0].kinetic_energy));
    // Least-squares slope of ln KE.
    let n = d.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for x in d {
        let y = x.kinetic_energy.ln();
        st += x.time;
        sy += y;
        stt += x.time * x.time;
        sty += x.time * y;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    let rate = -0.5 * slope;
    let nu = 0.01;
    assert!((rate - 2.0 * nu).abs() <= 0.03 * 2.0 * nu, "rate {rate}");
}

#[test]
fn mass_is_conserved_over_a_thousand_steps() {
    let g = square(32);
    let c = coeffs(
        0.05,
        0.02,
        0.05,
        0.01,
        Arc::new(Affine {
            c0: 0.0,
            c_rho: 0.1,
            c_t: 0.0,
        }),
    );
    let s0 = SimState::from_fn(g, |x, y| {
        (
            0.3 * x.sin() * y.cos(),
            0.2 * (x + y).cos(),
            1.0 + 0.1 * x.cos() * (2.0 * y).sin(),
            1.0 + 0.05 * y.sin(),
        )
    });
    let cfg = SimConfig {
        grid: g,
        time_step: TimeStep::Fixed(2e-3),
        t_end: 2.0,
        snapshot_every: 100,
    };
    let out = run(&cfg, &c, s0, |_, _, _| Ok(())).unwrap();
    assert_eq!(out.steps, 1000);
    let m0 = out.diagnostics[0].mass;
    for d in &out.diagnostics {
        assert!(((d.mass - m0) / m0).abs() <= 1e-8, "{}", d.mass - m0);
    }
}

#[test]
fn zero_flow_is_a_fixed_point() {
    let g = square(16);
    let c = coeffs(
        0.05,
        0.02,
        0.05,
        0.01,
        Arc::new(Affine {
            c0: 0.3,
            c_rho: 0.1,
            c_t: 0.2,
        }),
    );
    let s0 = SimState::uniform(g, 0.0, 0.0, 1.3, 0.9);
    let cfg = SimConfig {
        grid: g,
        time_step: TimeStep::Fixed(1e-2),
        t_end: 0.5,
        snapshot_every: 10,
    };
    let out = run(&cfg, &c, s0.clone(), |_, _, _| Ok(())).unwrap();
    assert_eq!(out.final_state.u, s0.u);
    assert_eq!(out.final_state.rho, s0.rho);
    assert_eq!(out.final_state.temp, s0.temp);
    assert!(out
        .diagnostics
        .iter()
        .all(|d| d == &out.diagnostics[0] || d.time != out.diagnostics[0].time));
    assert!(out
        .diagnostics
        .iter()
        .all(|d| d.mass == out.diagnostics[0].mass));
}

#[test]
fn rk4_error_ratio_is_sixteen() {
    let g = square(16);
    let c = coeffs(
        0.05,
        0.02,
        0.05,
        0.01,
        Arc::new(Affine {
            c0: 0.0,
            c_rho: 0.1,
            c_t: 0.0,
        }),
    );
    let s0 = Manufactured { a1: 0.5, a2: 0.4 }.state(g);
    let integrate = |steps: usize| {
        let dt = 0.2 / steps as f64;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = step(&s, &c, dt).unwrap();
        }
        s
    };
    let (a, b, d) = (integrate(10), integrate(20), integrate(40));
    let diff = |x: &SimState<f64>, y: &SimState<f64>| {
        x.u.iter()
            .zip(&y.u)
            .chain(x.rho.iter().zip(&y.rho))
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let ratio = diff(&a, &b) / diff(&b, &d);
    assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn runs_are_bitwise_reproducible_across_thread_counts() {
    let (mut cfg, c, s0) = taylor_green_setup(32, 100.0);
    cfg.t_end = 0.1;
    let a = run(&cfg, &c, s0.clone(), |_, _, _| Ok(())).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| run(&cfg, &c, s0, |_, _, _| Ok(())).unwrap());
    assert_eq!(a, b);
}

#[test]
fn oversized_step_is_refused_before_stepping() {
    let (mut cfg, c, s0) = taylor_green_setup(32, 100.0);
    cfg.time_step = TimeStep::Fixed(0.5);
    let mut calls = 0;
    let err = run(&cfg, &c, s0, |_, _, _| {
        calls += 1;
        Ok(())
    })
    .unwrap_err();
    assert!(matches!(err, viscotherm::Error::CflViolation { .. }));
    assert_eq!(calls, 0);
}
