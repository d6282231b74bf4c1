//! Explicit finite differences for the generalized Navier–Stokes system on a
//! doubly periodic rectangle.
//!
//! Fields are collocated and stored row-major with `x` fastest. Spatial
//! derivatives are second-order central differences; time stepping is the
//! classical fourth-order Runge–Kutta scheme.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::io::{csv_row, fmt_float};
use crate::scalar::{lit, Real};
use crate::thermo::CoefficientModel;

/// Upper bound on the Courant number.
pub const MAX_CFL: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<S> {
    pub nx: usize,
    pub ny: usize,
    pub lx: S,
    pub ly: S,
}

impl<S: Real> Grid<S> {
    pub fn new(nx: usize, ny: usize, lx: S, ly: S) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidConfig(format!(
                "grid must be at least 8x8, got {nx}x{ny}"
            )));
        }
        if !(lx > S::zero() && ly > S::zero() && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidConfig(
                "domain lengths must be positive".into(),
            ));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> S {
        self.lx / lit(self.nx as f64)
    }

    pub fn dy(&self) -> S {
        self.ly / lit(self.ny as f64)
    }

    pub fn x(&self, i: usize) -> S {
        self.dx() * lit(i as f64)
    }

    pub fn y(&self, j: usize) -> S {
        self.dy() * lit(j as f64)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self) -> S {
        self.dx() * self.dy()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep<S> {
    /// Uniform step, shortened so that a whole number of steps reaches
    /// `t_end`.
    Fixed(S),
    /// `dt = cfl · limit / 0.4` with `limit` from [`cfl_limit`], recomputed
    /// before every step; the last step is clipped to land on `t_end`.
    Auto { cfl: S },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig<S> {
    pub grid: Grid<S>,
    pub time_step: TimeStep<S>,
    pub t_end: S,
    /// Steps between snapshots. The initial and final states are always
    /// recorded.
    pub snapshot_every: usize,
}

impl<S: Real> SimConfig<S> {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)?;
        if !(self.t_end > S::zero() && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig("t_end must be positive".into()));
        }
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > S::zero() && dt.is_finite()) => {
                return Err(Error::InvalidConfig("dt must be positive".into()))
            }
            TimeStep::Auto { cfl } if !(cfl > S::zero() && cfl <= lit(MAX_CFL)) => {
                return Err(Error::InvalidConfig(format!(
                    "CFL number must lie in (0, {MAX_CFL}]"
                )))
            }
            _ => {}
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidConfig(
                "snapshot cadence must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Constant transport coefficients together with the pressure fields.
#[derive(Clone, Debug)]
pub struct SimCoefficients<S> {
    pub mu: S,
    pub tau: S,
    pub zeta: S,
    pub alpha: S,
    pub c_p: S,
    pub kappa: S,
    pub p: Field<S>,
    pub q: Field<S>,
}

impl<S: Real> SimCoefficients<S> {
    /// Freezes the viscosities, `c_p` and `ϰ` of `model` at `(ρ_ref, T_ref)`.
    pub fn from_model(model: &CoefficientModel<S>, rho_ref: S, t_ref: S) -> Result<Self> {
        let at = |f: &Field<S>| f.value(rho_ref, t_ref);
        let c = Self {
            mu: at(&model.mu),
            tau: at(&model.tau),
            zeta: at(&model.zeta),
            alpha: at(&model.alpha),
            c_p: at(&model.c_p),
            kappa: at(&model.kappa_th),
            p: model.p.clone(),
            q: model.q.clone(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu, self.tau, self.zeta, self.alpha, self.c_p, self.kappa,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        if !(self.c_p > S::zero()) {
            return Err(Error::InvalidConfig("c_p must be positive".into()));
        }
        if self.kappa < S::zero() {
            return Err(Error::InvalidConfig(
                "thermal conductivity must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState<S> {
    pub t: S,
    pub grid: Grid<S>,
    pub u: Vec<S>,
    pub v: Vec<S>,
    pub rho: Vec<S>,
    pub temp: Vec<S>,
}

impl<S: Real> SimState<S> {
    /// Samples `f(x, y) -> (u, v, ρ, T)` at the grid nodes.
    pub fn from_fn(grid: Grid<S>, f: impl Fn(S, S) -> (S, S, S, S)) -> Self {
        let n = grid.len();
        let mut s = Self {
            t: S::zero(),
            grid,
            u: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            temp: Vec::with_capacity(n),
        };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (u, v, rho, t) = f(grid.x(i), grid.y(j));
                s.u.push(u);
                s.v.push(v);
                s.rho.push(rho);
                s.temp.push(t);
            }
        }
        s
    }

    pub fn uniform(grid: Grid<S>, u: S, v: S, rho: S, t: S) -> Self {
        Self::from_fn(grid, |_, _| (u, v, rho, t))
    }

    /// Taylor–Green vortex of amplitude `u0` on `[0, 2π]²`, with the density
    /// perturbation `δp / c²` of the incompressible pressure so that the
    /// flow starts without an acoustic transient.
    pub fn taylor_green(grid: Grid<S>, u0: S, rho0: S, t0: S, sound_speed_sq: S) -> Self {
        let quarter = lit::<S>(0.25);
        let two = S::two();
        Self::from_fn(grid, |x, y| {
            let dp = rho0 * u0 * u0 * quarter * ((two * x).cos() + (two * y).cos());
            (
                u0 * x.sin() * y.cos(),
                -u0 * x.cos() * y.sin(),
                rho0 + dp / sound_speed_sq,
                t0,
            )
        })
    }

    /// Sinusoidal shear layer `u = u0 sin(2πy/Ly)` over uniform density and
    /// temperature.
    pub fn shear_wave(grid: Grid<S>, u0: S, rho0: S, t0: S) -> Self {
        let k = S::TAU() / grid.ly;
        Self::from_fn(grid, |_, y| (u0 * (k * y).sin(), S::zero(), rho0, t0))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if [&self.u, &self.v, &self.rho, &self.temp]
            .iter()
            .any(|f| f.len() != n)
        {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.u.len(),
            });
        }
        if let Some(reason) = self.defect() {
            return Err(Error::InvalidState(reason));
        }
        Ok(())
    }

    fn defect(&self) -> Option<String> {
        let fields = [
            ("u", &self.u),
            ("v", &self.v),
            ("rho", &self.rho),
            ("T", &self.temp),
        ];
        for (name, f) in fields {
            if let Some(k) = f.iter().position(|x| !x.is_finite()) {
                return Some(format!("non-finite {name} at node {k}"));
            }
        }
        if let Some(k) = self.rho.iter().position(|x| *x <= S::zero()) {
            return Some(format!("non-positive density at node {k}"));
        }
        None
    }
}

/// Periodic central differences on one grid.
#[derive(Clone, Copy)]
struct Stencil {
    nx: usize,
    ny: usize,
}

impl Stencil {
    fn new<S: Real>(g: &Grid<S>) -> Self {
        Self { nx: g.nx, ny: g.ny }
    }

    #[inline]
    fn at<S: Copy>(&self, f: &[S], i: usize, j: usize) -> S {
        f[j * self.nx + i]
    }

    #[inline]
    fn xp(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    fn xm(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    #[inline]
    fn yp(&self, j: usize) -> usize {
        if j + 1 == self.ny {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    fn ym(&self, j: usize) -> usize {
        if j == 0 {
            self.ny - 1
        } else {
            j - 1
        }
    }

    /// Raw differences; scaled by [`Scales`].
    #[inline]
    fn d_x<S: Real>(&self, f: &[S], i: usize, j: usize) -> S {
        self.at(f, self.xp(i), j) - self.at(f, self.xm(i), j)
    }

    #[inline]
    fn d_y<S: Real>(&self, f: &[S], i: usize, j: usize) -> S {
        self.at(f, i, self.yp(j)) - self.at(f, i, self.ym(j))
    }

    #[inline]
    fn d_xx<S: Real>(&self, f: &[S], i: usize, j: usize) -> S {
        (self.at(f, self.xp(i), j) + self.at(f, self.xm(i), j)) - S::two() * self.at(f, i, j)
    }

    #[inline]
    fn d_yy<S: Real>(&self, f: &[S], i: usize, j: usize) -> S {
        (self.at(f, i, self.yp(j)) + self.at(f, i, self.ym(j))) - S::two() * self.at(f, i, j)
    }

    #[inline]
    fn d_xy<S: Real>(&self, f: &[S], i: usize, j: usize) -> S {
        let (ip, im, jp, jm) = (self.xp(i), self.xm(i), self.yp(j), self.ym(j));
        (self.at(f, ip, jp) + self.at(f, im, jm)) - (self.at(f, ip, jm) + self.at(f, im, jp))
    }
}

#[derive(Clone, Copy)]
struct Scales<S> {
    x: S,
    y: S,
    xx: S,
    yy: S,
    xy: S,
}

impl<S: Real> Scales<S> {
    fn new(g: &Grid<S>) -> Self {
        let (dx, dy) = (g.dx(), g.dy());
        let two = S::two();
        Self {
            x: S::one() / (two * dx),
            y: S::one() / (two * dy),
            xx: S::one() / (dx * dx),
            yy: S::one() / (dy * dy),
            xy: S::one() / (two * two * dx * dy),
        }
    }
}

/// Velocity gradient `[[u_x, u_y], [v_x, v_y]]` at one node.
#[derive(Clone, Copy)]
struct Gradient<S> {
    u_x: S,
    u_y: S,
    v_x: S,
    v_y: S,
}

fn gradient<S: Real>(
    st: &Stencil,
    sc: &Scales<S>,
    s: &SimState<S>,
    i: usize,
    j: usize,
) -> Gradient<S> {
    Gradient {
        u_x: st.d_x(&s.u, i, j) * sc.x,
        u_y: st.d_y(&s.u, i, j) * sc.y,
        v_x: st.d_x(&s.v, i, j) * sc.x,
        v_y: st.d_y(&s.v, i, j) * sc.y,
    }
}

/// The four stress components at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressComponents<S> {
    pub xx: S,
    pub xy: S,
    pub yx: S,
    pub yy: S,
}

fn stress_at<S: Real>(c: &SimCoefficients<S>, p: S, q: S, g: &Gradient<S>) -> StressComponents<S> {
    let (mu, tau, zeta, alpha) = (c.mu, c.tau, c.zeta, c.alpha);
    StressComponents {
        xx: -p + ((mu + zeta) * g.u_x + (zeta - mu) * g.v_y) + alpha * (g.u_y - g.v_x),
        xy: -q + ((mu + tau) * g.u_y + (mu - tau) * g.v_x) + alpha * (g.u_x + g.v_y),
        yx: q + ((mu - tau) * g.u_y + (mu + tau) * g.v_x) - alpha * (g.u_x + g.v_y),
        yy: -p + ((mu + zeta) * g.v_y + (zeta - mu) * g.u_x) + alpha * (g.u_y - g.v_x),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressField<S> {
    pub xx: Vec<S>,
    pub xy: Vec<S>,
    pub yx: Vec<S>,
    pub yy: Vec<S>,
}

fn pressures<S: Real>(s: &SimState<S>, c: &SimCoefficients<S>) -> (Vec<S>, Vec<S>) {
    s.rho
        .par_iter()
        .zip(s.temp.par_iter())
        .map(|(&r, &t)| (c.p.value(r, t), c.q.value(r, t)))
        .unzip()
}

fn check_density<S: Real>(s: &SimState<S>) -> Result<()> {
    match s.rho.iter().position(|x| !(*x > S::zero())) {
        Some(k) => Err(Error::InvalidState(format!(
            "non-positive density at node {k}"
        ))),
        None => Ok(()),
    }
}

/// Runs `f(i, j)` over every node, rows in parallel.
fn par_nodes<S: Real, T: Send>(g: &Grid<S>, f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    let nx = g.nx;
    (0..g.ny)
        .into_par_iter()
        .flat_map_iter(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| f(i, j))
        .collect()
}

pub fn stress_field<S: Real>(
    state: &SimState<S>,
    coeffs: &SimCoefficients<S>,
) -> Result<StressField<S>> {
    state.validate()?;
    let (p, q) = pressures(state, coeffs);
    let st = Stencil::new(&state.grid);
    let sc = Scales::new(&state.grid);
    let nodes = par_nodes(&state.grid, |i, j| {
        let k = state.grid.index(i, j);
        stress_at(coeffs, p[k], q[k], &gradient(&st, &sc, state, i, j))
    });
    Ok(StressField {
        xx: nodes.iter().map(|s| s.xx).collect(),
        xy: nodes.iter().map(|s| s.xy).collect(),
        yx: nodes.iter().map(|s| s.yx).collect(),
        yy: nodes.iter().map(|s| s.yy).collect(),
    })
}

/// `(u_t, v_t)` from the momentum equations with constant viscosities.
pub fn momentum_rhs<S: Real>(
    state: &SimState<S>,
    coeffs: &SimCoefficients<S>,
) -> Result<(Vec<S>, Vec<S>)> {
    check_density(state)?;
    let (p, q) = pressures(state, coeffs);
    let st = Stencil::new(&state.grid);
    let sc = Scales::new(&state.grid);
    let (mu, tau, zeta, alpha) = (coeffs.mu, coeffs.tau, coeffs.zeta, coeffs.alpha);
    let (long, trans, cross) = (mu + zeta, mu - tau, tau + zeta);
    let (u, v) = (&state.u, &state.v);
    let nodes = par_nodes(&state.grid, |i, j| {
        let k = state.grid.index(i, j);
        let (uk, vk, rho) = (u[k], v[k], state.rho[k]);
        let u_x = st.d_x(u, i, j) * sc.x;
        let u_y = st.d_y(u, i, j) * sc.y;
        let v_x = st.d_x(v, i, j) * sc.x;
        let v_y = st.d_y(v, i, j) * sc.y;
        let u_xx = st.d_xx(u, i, j) * sc.xx;
        let u_yy = st.d_yy(u, i, j) * sc.yy;
        let v_xx = st.d_xx(v, i, j) * sc.xx;
        let v_yy = st.d_yy(v, i, j) * sc.yy;
        let u_xy = st.d_xy(u, i, j) * sc.xy;
        let v_xy = st.d_xy(v, i, j) * sc.xy;
        let p_x = st.d_x(&p, i, j) * sc.x;
        let p_y = st.d_y(&p, i, j) * sc.y;
        let q_x = st.d_x(&q, i, j) * sc.x;
        let q_y = st.d_y(&q, i, j) * sc.y;

        let fu = (-p_x + q_y) + (long * u_xx + trans * u_yy) + cross * v_xy - alpha * (v_xx + v_yy);
        let fv = (-p_y - q_x) + (long * v_yy + trans * v_xx) + cross * u_xy + alpha * (u_xx + u_yy);
        (
            -(uk * u_x + vk * u_y) + fu / rho,
            -(uk * v_x + vk * v_y) + fv / rho,
        )
    });
    Ok(nodes.into_iter().unzip())
}

/// `ρ_t = -(u ρ_x + v ρ_y) - ρ (u_x + v_y)`.
pub fn continuity_rhs<S: Real>(state: &SimState<S>) -> Vec<S> {
    let st = Stencil::new(&state.grid);
    let sc = Scales::new(&state.grid);
    let (u, v, rho) = (&state.u, &state.v, &state.rho);
    par_nodes(&state.grid, |i, j| {
        let k = state.grid.index(i, j);
        let adv = u[k] * (st.d_x(rho, i, j) * sc.x) + v[k] * (st.d_y(rho, i, j) * sc.y);
        let div = st.d_x(u, i, j) * sc.x + st.d_y(v, i, j) * sc.y;
        -adv - rho[k] * div
    })
}

/// `T_t = -(u T_x + v T_y) + (⟨σ, Δ⟩ + ϰ ∇²T) / (c_p ρ)` with
/// `⟨σ, Δ⟩ = Σ σ_ij Δ_ji`.
pub fn temperature_rhs<S: Real>(
    state: &SimState<S>,
    coeffs: &SimCoefficients<S>,
) -> Result<Vec<S>> {
    check_density(state)?;
    if !(coeffs.c_p > S::zero()) {
        return Err(Error::InvalidConfig("c_p must be positive".into()));
    }
    let (p, q) = pressures(state, coeffs);
    let st = Stencil::new(&state.grid);
    let sc = Scales::new(&state.grid);
    let temp = &state.temp;
    Ok(par_nodes(&state.grid, |i, j| {
        let k = state.grid.index(i, j);
        let g = gradient(&st, &sc, state, i, j);
        let s = stress_at(coeffs, p[k], q[k], &g);
        let work = (s.xx * g.u_x + s.yy * g.v_y) + (s.xy * g.v_x + s.yx * g.u_y);
        let lap = st.d_xx(temp, i, j) * sc.xx + st.d_yy(temp, i, j) * sc.yy;
        let adv =
            state.u[k] * (st.d_x(temp, i, j) * sc.x) + state.v[k] * (st.d_y(temp, i, j) * sc.y);
        -adv + (work + coeffs.kappa * lap) / (coeffs.c_p * state.rho[k])
    }))
}

/// Largest admissible time step:
/// `0.4 · min(h / (|u|max + c), h² ρmin / (4(μ+ζ+τ+|α|)), h² c_p ρmin / (4ϰ))`
/// with `c² = max ∂p/∂ρ` the isothermal sound speed.
pub fn cfl_limit<S: Real>(state: &SimState<S>, coeffs: &SimCoefficients<S>) -> S {
    let h = state.grid.dx().min(state.grid.dy());
    let speed = state
        .u
        .iter()
        .zip(&state.v)
        .fold(S::zero(), |m, (u, v)| m.max(u.abs()).max(v.abs()));
    let c2 = state
        .rho
        .par_iter()
        .zip(state.temp.par_iter())
        .map(|(&r, &t)| coeffs.p.jet(r, t).d_rho)
        .reduce(S::zero, |a, b| a.max(b));
    let rho_min = state.rho.iter().fold(S::infinity(), |m, r| m.min(*r));
    let four = lit::<S>(4.0);
    let advective = h / (speed + c2.max(S::zero()).sqrt());
    let nu = coeffs.mu.abs() + coeffs.zeta.abs() + coeffs.tau.abs() + coeffs.alpha.abs();
    let viscous = h * h * rho_min / (four * nu);
    let thermal = h * h * coeffs.c_p * rho_min / (four * coeffs.kappa);
    let bound = [advective, viscous, thermal]
        .into_iter()
        .filter(|x| !x.is_nan())
        .fold(S::infinity(), S::min);
    lit::<S>(MAX_CFL) * bound
}

/// Time derivatives `(u_t, v_t, ρ_t, T_t)`.
pub fn rhs<S: Real>(state: &SimState<S>, coeffs: &SimCoefficients<S>) -> Result<[Vec<S>; 4]> {
    let (du, dv) = momentum_rhs(state, coeffs)?;
    let drho = continuity_rhs(state);
    let dt = temperature_rhs(state, coeffs)?;
    Ok([du, dv, drho, dt])
}

fn axpy<S: Real>(base: &SimState<S>, k: &[Vec<S>; 4], h: S) -> SimState<S> {
    let add = |x: &[S], y: &[S]| x.par_iter().zip(y).map(|(a, b)| *a + h * *b).collect();
    SimState {
        t: base.t + h,
        grid: base.grid,
        u: add(&base.u, &k[0]),
        v: add(&base.v, &k[1]),
        rho: add(&base.rho, &k[2]),
        temp: add(&base.temp, &k[3]),
    }
}

/// One classical RK4 step of size `dt`.
pub fn step<S: Real>(
    state: &SimState<S>,
    coeffs: &SimCoefficients<S>,
    dt: S,
) -> Result<SimState<S>> {
    let limit = cfl_limit(state, coeffs);
    if !(dt > S::zero()) || dt > limit * lit(1.0 + 1e-12) {
        return Err(Error::CflViolation {
            dt: dt.to_f64().unwrap_or(f64::NAN),
            limit: limit.to_f64().unwrap_or(f64::NAN),
        });
    }
    let abort = |reason: String| Error::NumericalAbort {
        time: state.t.to_f64().unwrap_or(f64::NAN),
        reason,
    };
    let stage = |s: &SimState<S>| rhs(s, coeffs).map_err(|e| abort(format!("RK stage: {e}")));
    let half = dt * lit(0.5);
    let k1 = stage(state)?;
    let k2 = stage(&axpy(state, &k1, half))?;
    let k3 = stage(&axpy(state, &k2, half))?;
    let k4 = stage(&axpy(state, &k3, dt))?;
    let two = S::two();
    let sixth = dt / lit(6.0);
    let combine = |i: usize, x: &[S]| -> Vec<S> {
        x.par_iter()
            .enumerate()
            .map(|(n, a)| *a + sixth * ((k1[i][n] + two * k2[i][n]) + (two * k3[i][n] + k4[i][n])))
            .collect()
    };
    let next = SimState {
        t: state.t + dt,
        grid: state.grid,
        u: combine(0, &state.u),
        v: combine(1, &state.v),
        rho: combine(2, &state.rho),
        temp: combine(3, &state.temp),
    };
    if let Some(reason) = next.defect() {
        return Err(Error::NumericalAbort {
            time: next.t.to_f64().unwrap_or(f64::NAN),
            reason,
        });
    }
    Ok(next)
}

/// Integral diagnostics of one state, summed in a fixed order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics<S> {
    pub time: S,
    pub mass: S,
    pub kinetic_energy: S,
    pub t_min: S,
    pub t_max: S,
}

pub fn diagnostics<S: Real>(state: &SimState<S>) -> Diagnostics<S> {
    let area = state.grid.cell_area();
    let half = lit::<S>(0.5);
    let mut mass = S::zero();
    let mut ke = S::zero();
    for k in 0..state.grid.len() {
        mass = mass + state.rho[k];
        ke = ke + half * state.rho[k] * (state.u[k] * state.u[k] + state.v[k] * state.v[k]);
    }
    Diagnostics {
        time: state.t,
        mass: mass * area,
        kinetic_energy: ke * area,
        t_min: state.temp.iter().fold(S::infinity(), |m, t| m.min(*t)),
        t_max: state.temp.iter().fold(S::neg_infinity(), |m, t| m.max(*t)),
    }
}

/// Number of steps and the uniform step size reaching `t_end` exactly for a
/// fixed step.
pub fn plan_fixed_steps<S: Real>(t_end: S, dt: S) -> Result<(usize, S)> {
    if !(dt > S::zero() && dt.is_finite()) {
        return Err(Error::InvalidConfig("dt must be positive".into()));
    }
    let ratio = (t_end / dt).to_f64().unwrap_or(f64::INFINITY);
    let n = (ratio * (1.0 - 1e-12)).ceil().max(1.0);
    if n > 1e9 {
        return Err(Error::InvalidConfig("too many time steps".into()));
    }
    let n = n as usize;
    Ok((n, t_end / lit(n as f64)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary<S> {
    pub final_state: SimState<S>,
    pub steps: usize,
    pub dt_min: S,
    pub dt_max: S,
    pub diagnostics: Vec<Diagnostics<S>>,
}

/// Integrates to `t_end`. `on_snapshot(index, state, diagnostics)` runs for
/// the initial state, every `snapshot_every` steps and the final state.
pub fn run<S: Real>(
    config: &SimConfig<S>,
    coeffs: &SimCoefficients<S>,
    initial: SimState<S>,
    mut on_snapshot: impl FnMut(usize, &SimState<S>, &Diagnostics<S>) -> Result<()>,
) -> Result<RunSummary<S>> {
    config.validate()?;
    coeffs.validate()?;
    if initial.grid != config.grid {
        return Err(Error::InvalidConfig(
            "initial state grid differs from the configured grid".into(),
        ));
    }
    initial.validate()?;
    let fixed = match config.time_step {
        TimeStep::Fixed(dt) => {
            let (n, dt) = plan_fixed_steps(config.t_end, dt)?;
            let limit = cfl_limit(&initial, coeffs);
            if dt > limit * lit(1.0 + 1e-12) {
                return Err(Error::CflViolation {
                    dt: dt.to_f64().unwrap_or(f64::NAN),
                    limit: limit.to_f64().unwrap_or(f64::NAN),
                });
            }
            Some((n, dt))
        }
        TimeStep::Auto { .. } => None,
    };
    let mut state = initial;
    let mut series = Vec::new();
    let mut record = |state: &SimState<S>, series: &mut Vec<Diagnostics<S>>| -> Result<()> {
        let d = diagnostics(state);
        on_snapshot(series.len(), state, &d)?;
        series.push(d);
        Ok(())
    };
    record(&state, &mut series)?;
    let (mut dt_min, mut dt_max) = (S::infinity(), S::zero());
    let mut n = 0usize;
    loop {
        let (dt, last) = match (fixed, config.time_step) {
            (Some((steps, dt)), _) => (dt, n + 1 == steps),
            (None, TimeStep::Auto { cfl }) => {
                let dt = cfl / lit(MAX_CFL) * cfl_limit(&state, coeffs);
                if !(dt > S::zero() && dt.is_finite()) {
                    return Err(Error::NumericalAbort {
                        time: state.t.to_f64().unwrap_or(f64::NAN),
                        reason: "no admissible time step".into(),
                    });
                }
                let remaining = config.t_end - state.t;
                // Avoid a sliver of a final step.
                if dt * lit(1.0 + 1e-9) >= remaining {
                    (remaining, true)
                } else {
                    (dt, false)
                }
            }
            (None, TimeStep::Fixed(_)) => unreachable!("fixed steps are planned"),
        };
        state = step(&state, coeffs, dt)?;
        n += 1;
        dt_min = dt_min.min(dt);
        dt_max = dt_max.max(dt);
        if last {
            // Land on t_end without accumulated rounding.
            state.t = config.t_end;
        }
        if n.is_multiple_of(config.snapshot_every) || last {
            record(&state, &mut series)?;
        }
        if last {
            break;
        }
        if n >= 1_000_000_000 {
            return Err(Error::InvalidConfig("too many time steps".into()));
        }
    }
    Ok(RunSummary {
        final_state: state,
        steps: n,
        dt_min,
        dt_max,
        diagnostics: series,
    })
}

/// Columns `x,y,u,v,rho,T`, row-major with `x` fastest.
pub fn write_snapshot<S: Real, W: Write>(mut w: W, state: &SimState<S>) -> std::io::Result<()> {
    writeln!(w, "x,y,u,v,rho,T")?;
    let g = &state.grid;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            writeln!(
                w,
                "{}",
                csv_row(&[
                    g.x(i),
                    g.y(j),
                    state.u[k],
                    state.v[k],
                    state.rho[k],
                    state.temp[k]
                ])
            )?;
        }
    }
    Ok(())
}

/// Columns `snapshot,time,mass,kinetic_energy,T_min,T_max`.
pub fn write_manifest<S: Real, W: Write>(
    mut w: W,
    rows: &[(String, Diagnostics<S>)],
) -> std::io::Result<()> {
    writeln!(w, "snapshot,time,mass,kinetic_energy,T_min,T_max")?;
    for (name, d) in rows {
        writeln!(
            w,
            "{name},{},{}",
            fmt_float(d.time),
            csv_row(&[d.mass, d.kinetic_energy, d.t_min, d.t_max])
        )?;
    }
    Ok(())
}
