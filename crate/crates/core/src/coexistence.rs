//! The quadratic form κ, its degeneracy locus and curve tracing in the
//! `(ρ, T)` plane.
//!
//! κ is assembled from second derivatives of the free energy over the
//! coordinates `(T, ρ, Δ_11, Δ_12, …, Δ_nn)`. Its determinant is the ground
//! truth for co-existence; the closed-form bulk and surface conditions are
//! evaluated as written and compared against it.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Jet, Partial};
use crate::io::csv_row;
use crate::linalg::{determinant, symmetric_eigenvalues};
use crate::scalar::{lit, Real};
use crate::tensor::{general_invariants, kahler_invariants, MixedTensor};
use crate::thermo::{Medium, ModelKind, ThermoState};

/// Symmetric matrix of κ, including the overall `1/T` factor.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaForm<S> {
    pub n: usize,
    pub temperature: S,
    /// Row-major, side `2 + n²`.
    pub matrix: Vec<S>,
}

impl<S: Real> KappaForm<S> {
    pub fn size(&self) -> usize {
        2 + self.n * self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        self.matrix[i * self.size() + j]
    }

    /// `T·κ`, the form with the conformal factor removed.
    pub fn scaled(&self) -> Vec<S> {
        self.matrix.iter().map(|x| *x * self.temperature).collect()
    }

    /// `det(T·κ)` together with its scale `max|entry|^(2+n²)`.
    pub fn degeneracy(&self) -> Degeneracy<S> {
        let m = self.scaled();
        let size = self.size();
        let max = m.iter().fold(S::zero(), |acc, x| acc.max(x.abs()));
        Degeneracy {
            value: determinant(&m, size),
            scale: max.powi(size as i32),
        }
    }
}

impl<S: Real> KappaForm<S> {
    /// `h_TT` and the determinant of the `(ρ, Δ)` block of `T·κ`, whose
    /// product is `det(T·κ)` because the `dT` row is decoupled.
    pub fn block_factors(&self) -> (S, S) {
        let m = self.scaled();
        let size = self.size();
        let inner: Vec<S> = (1..size)
            .flat_map(|i| (1..size).map(move |j| (i, j)))
            .map(|(i, j)| m[i * size + j])
            .collect();
        (m[0], determinant(&inner, size - 1))
    }

    /// Smallest over largest singular value of `T·κ`.
    pub fn singular_value_ratio(&self) -> S {
        let eig = symmetric_eigenvalues(&self.scaled(), self.size());
        let abs: Vec<S> = eig.iter().map(|x| x.abs()).collect();
        let max = abs.iter().fold(S::zero(), |a, b| a.max(*b));
        let min = abs.iter().fold(S::infinity(), |a, b| a.min(*b));
        if max > S::zero() {
            min / max
        } else {
            S::zero()
        }
    }
}

/// `det(T·κ)` and its natural magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Degeneracy<S> {
    pub value: S,
    pub scale: S,
}

pub fn assemble_kappa<S: Real>(medium: &Medium<S>, state: &ThermoState<S>) -> Result<KappaForm<S>> {
    let hess = medium.hessian(state)?;
    let n = medium.dim();
    let m = n * n;
    let size = 2 + m;
    let t = state.temperature;
    let mut k = vec![S::zero(); size * size];
    k[0] = hess.h_tt / t;
    k[size + 1] = -hess.h_rho_rho / t;
    let coupling = hess.delta_rho.to_row_major();
    for a in 0..m {
        k[(2 + a) * size + 1] = -coupling[a] / t;
        k[size + 2 + a] = -coupling[a] / t;
        for b in 0..m {
            k[(2 + a) * size + 2 + b] = -hess.delta_delta[a * m + b] / t;
        }
    }
    Ok(KappaForm {
        n,
        temperature: t,
        matrix: k,
    })
}

pub fn degeneracy_residual<S: Real>(
    medium: &Medium<S>,
    state: &ThermoState<S>,
) -> Result<Degeneracy<S>> {
    Ok(assemble_kappa(medium, state)?.degeneracy())
}

fn nonzero<S: Real>(name: &'static str, jet: &Jet<S>, state: &ThermoState<S>) -> Result<()> {
    if jet.value == S::zero() || !jet.value.is_finite() {
        return Err(Error::SingularCoefficient {
            name,
            rho: state.rho.to_f64().unwrap_or(f64::NAN),
            temperature: state.temperature.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `X² ∂ρ((1/X) ∂ρ ln X) = X_ρρ - 2 X_ρ² / X`.
fn log_curvature<S: Real>(x: &Jet<S>) -> S {
    x.d_rho_rho - S::two() * x.d_rho * x.d_rho / x.value
}

/// Closed-form co-existence condition of the bulk model, evaluated as
/// printed:
///
/// ```text
/// h_TT ( (d2 + d3 - 2/n d1²) μ² ∂ρ((1/μ)∂ρ ln μ) + (d2 - d3) τ² ∂ρ((1/τ)∂ρ ln τ)
///      + d1² ζ² ∂ρ((1/ζ)∂ρ ln ζ) - 2 d1 (p_ρρ + p_ρ ∂ρ ln ζ) + p_ρ² + 2 h0_ρρ )
/// ```
pub fn lemma3_expression<S: Real>(medium: &Medium<S>, state: &ThermoState<S>) -> Result<S> {
    if !matches!(medium.kind, ModelKind::Bulk) {
        return Err(Error::RequiresBulk);
    }
    medium.validate(state)?;
    let (rho, t) = (state.rho, state.temperature);
    let c = &medium.coeffs;
    let (mu, tau, zeta) = (c.mu.jet(rho, t), c.tau.jet(rho, t), c.zeta.jet(rho, t));
    nonzero("mu", &mu, state)?;
    nonzero("tau", &tau, state)?;
    nonzero("zeta", &zeta, state)?;
    let p = c.p.jet(rho, t);
    let h0 = c.h0.jet(rho, t);
    let inv = general_invariants(&state.delta, &medium.metric)?;
    let n = lit::<S>(medium.dim() as f64);
    let two = S::two();

    let bracket = (inv.d2 + inv.d3 - two / n * inv.d1 * inv.d1) * log_curvature(&mu)
        + (inv.d2 - inv.d3) * log_curvature(&tau)
        + inv.d1 * inv.d1 * log_curvature(&zeta)
        - two * inv.d1 * (p.d_rho_rho + p.d_rho * zeta.d_rho / zeta.value)
        + p.d_rho * p.d_rho
        + two * h0.d_rho_rho;
    let h_tt = medium.energy_with(&c.values(rho, t, Partial::TT), &state.delta)?;
    Ok(h_tt * bracket)
}

/// Binding of the symbol `η` in the surface co-existence condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EtaBinding {
    /// `η ≡ ζ`
    Zeta,
    /// `η ≡ ζ - μ`
    ZetaMinusMu,
}

impl EtaBinding {
    pub const ALL: [EtaBinding; 2] = [EtaBinding::Zeta, EtaBinding::ZetaMinusMu];

    pub fn key(&self) -> &'static str {
        match self {
            EtaBinding::Zeta => "zeta",
            EtaBinding::ZetaMinusMu => "zeta_minus_mu",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.key() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown eta binding `{key}`")))
    }
}

/// The binding whose surface condition vanishes on the zero set of
/// `det(T·κ)`, selected by the sweep in the verification suite.
pub const SELECTED_ETA_BINDING: EtaBinding = EtaBinding::Zeta;

/// Closed-form co-existence condition of the surface model, evaluated as
/// printed with `η` bound according to `binding`.
pub fn lemma4_expression<S: Real>(
    medium: &Medium<S>,
    state: &ThermoState<S>,
    binding: EtaBinding,
) -> Result<S> {
    let ModelKind::Surface(j) = &medium.kind else {
        return Err(Error::RequiresSurface);
    };
    medium.validate(state)?;
    let (rho, t) = (state.rho, state.temperature);
    let c = &medium.coeffs;
    let mu = c.mu.jet(rho, t);
    let tau = c.tau.jet(rho, t);
    let alpha = c.alpha.jet(rho, t);
    let zeta = c.zeta.jet(rho, t);
    let p = c.p.jet(rho, t);
    let q = c.q.jet(rho, t);
    let h0 = c.h0.jet(rho, t);
    let eta = match binding {
        EtaBinding::Zeta => zeta,
        EtaBinding::ZetaMinusMu => Jet {
            value: zeta.value - mu.value,
            d_rho: zeta.d_rho - mu.d_rho,
            d_t: zeta.d_t - mu.d_t,
            d_rho_rho: zeta.d_rho_rho - mu.d_rho_rho,
            d_rho_t: zeta.d_rho_t - mu.d_rho_t,
            d_t_t: zeta.d_t_t - mu.d_t_t,
        },
    };
    let inv = kahler_invariants(&state.delta, &medium.metric, j)?;
    let (t1, t2, t4) = (inv.t1, inv.t2, inv.t4);
    let two = S::two();
    let four = lit::<S>(4.0);
    let eight = lit::<S>(8.0);
    let half = lit::<S>(0.5);

    let x = tau.d_rho * t2 + alpha.d_rho * t1 * half - q.d_rho;
    let y = eta.d_rho * t1 + alpha.d_rho * t2 * half - p.d_rho;
    let first = (t1 * t1 - t4) * mu.d_rho_rho
        - eta.d_rho_rho * t1 * t1
        - alpha.d_rho_rho * t1 * t2
        - tau.d_rho_rho * t2 * t2
        + two * p.d_rho_rho * t1
        + two * q.d_rho_rho * t2
        - two * h0.d_rho_rho;
    let second = four * (t4 - t1 * t1) * mu.d_rho_rho
        + four * eta.d_rho_rho * t1 * t1
        + four * alpha.d_rho_rho * t1 * t2
        + four * tau.d_rho_rho * t2 * t2
        - eight * p.d_rho_rho * t1
        - eight * q.d_rho_rho * t2
        + eight * h0.d_rho_rho;
    let a = alpha.value;
    let inner =
        first * a * a + eight * x * y * a + (second * tau.value - eight * x * x) * eta.value
            - eight * tau.value * y * y;
    let bracket = inner * mu.value
        + eight * (t1 * t1 - t4) * (tau.value * eta.value - a * a / four) * mu.d_rho * mu.d_rho;
    let h_tt = medium.energy_with(&c.values(rho, t, Partial::TT), &state.delta)?;
    Ok(h_tt * bracket)
}

/// An axis-aligned box in the `(ρ, T)` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window<S> {
    pub rho_min: S,
    pub rho_max: S,
    pub t_min: S,
    pub t_max: S,
}

impl<S: Real> Window<S> {
    pub fn new(rho: (S, S), t: (S, S)) -> Result<Self> {
        let w = Self {
            rho_min: rho.0,
            rho_max: rho.1,
            t_min: t.0,
            t_max: t.1,
        };
        if !(w.rho_min > S::zero()
            && w.t_min > S::zero()
            && w.rho_max > w.rho_min
            && w.t_max > w.t_min)
        {
            return Err(Error::InvalidConfig(
                "window must satisfy 0 < rho_min < rho_max and 0 < T_min < T_max".into(),
            ));
        }
        Ok(w)
    }

    pub fn contains(&self, rho: S, t: S) -> bool {
        rho >= self.rho_min && rho <= self.rho_max && t >= self.t_min && t <= self.t_max
    }

    pub fn diagonal(&self) -> S {
        (self.rho_max - self.rho_min).hypot(self.t_max - self.t_min)
    }

    /// Node `(i, j)` of a `nodes.0 x nodes.1` lattice over the window.
    pub fn node(&self, nodes: (usize, usize), i: usize, j: usize) -> (S, S) {
        let fx = lit::<S>(i as f64) / lit::<S>((nodes.0 - 1) as f64);
        let fy = lit::<S>(j as f64) / lit::<S>((nodes.1 - 1) as f64);
        (
            self.rho_min + (self.rho_max - self.rho_min) * fx,
            self.t_min + (self.t_max - self.t_min) * fy,
        )
    }
}

/// One point of a traced co-existence branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint<S> {
    pub branch_id: usize,
    pub rho: S,
    pub t: S,
    pub residual: S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSettings<S> {
    /// Seeding lattice, in nodes along `ρ` and `T`.
    pub grid: (usize, usize),
    /// Interval width at which seed bisection stops.
    pub bisect_width: S,
    /// Continuation step; `None` selects window diagonal / 512.
    pub step: Option<S>,
    /// Accept a point when `|residual| <= tol * scale`.
    pub tol: S,
    pub max_corrector_iterations: usize,
    pub max_points_per_branch: usize,
}

impl<S: Real> Default for TraceSettings<S> {
    fn default() -> Self {
        Self {
            grid: (64, 64),
            bisect_width: lit(1e-12),
            step: None,
            tol: lit(1e-9),
            max_corrector_iterations: 50,
            max_points_per_branch: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    /// Ordered by `(branch_id, arc position)`. A closed branch ends with
    /// its first point repeated.
    pub points: Vec<CurvePoint<S>>,
    /// Corrector failures whose points were dropped.
    pub dropped: usize,
}

impl<S: Real> Trace<S> {
    pub fn branch_count(&self) -> usize {
        self.points.last().map_or(0, |p| p.branch_id + 1)
    }

    pub fn branch(&self, id: usize) -> impl Iterator<Item = &CurvePoint<S>> {
        self.points.iter().filter(move |p| p.branch_id == id)
    }

    /// Distance from `(ρ, T)` to the polyline of the traced branches.
    pub fn distance_to(&self, rho: S, t: S) -> S {
        let mut best = S::infinity();
        for w in self.points.windows(2) {
            let d = if w[0].branch_id == w[1].branch_id {
                segment_distance((rho, t), (w[0].rho, w[0].t), (w[1].rho, w[1].t))
            } else {
                (rho - w[0].rho).hypot(t - w[0].t)
            };
            best = best.min(d);
        }
        if let Some(p) = self.points.last() {
            best = best.min((rho - p.rho).hypot(t - p.t));
        }
        best
    }
}

/// Columns `branch_id,rho,T,residual`.
pub fn write_curve_csv<S: Real, W: Write>(mut w: W, trace: &Trace<S>) -> std::io::Result<()> {
    writeln!(w, "branch_id,rho,T,residual")?;
    for p in &trace.points {
        writeln!(w, "{},{}", p.branch_id, csv_row(&[p.rho, p.t, p.residual]))?;
    }
    Ok(())
}

fn segment_distance<S: Real>(x: (S, S), a: (S, S), b: (S, S)) -> S {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > S::zero() {
        (((x.0 - a.0) * dx + (x.1 - a.1) * dy) / len2)
            .max(S::zero())
            .min(S::one())
    } else {
        S::zero()
    };
    (x.0 - a.0 - s * dx).hypot(x.1 - a.1 - s * dy)
}

/// Traces the co-existence curve of `medium` at fixed deformation `delta`.
pub fn trace_coexistence_curve<S: Real>(
    medium: &Medium<S>,
    delta: &MixedTensor<S>,
    window: &Window<S>,
    settings: &TraceSettings<S>,
) -> Result<Trace<S>> {
    medium.metric.check_tensor(delta)?;
    medium.validate(&ThermoState::new(window.rho_min, window.t_min, *delta))?;
    let f = |rho: S, t: S| -> Degeneracy<S> {
        degeneracy_residual(medium, &ThermoState::new(rho, t, *delta)).unwrap_or(Degeneracy {
            value: S::nan(),
            scale: S::one(),
        })
    };
    Ok(trace_zero_set(f, window, settings))
}

/// Samples `f` on the node lattice of `window`, `j`-major.
pub fn sample_grid<S: Real, F>(f: F, window: &Window<S>, nodes: (usize, usize)) -> Vec<S>
where
    F: Fn(S, S) -> S + Sync,
{
    (0..nodes.0 * nodes.1)
        .into_par_iter()
        .map(|k| {
            let (rho, t) = window.node(nodes, k % nodes.0, k / nodes.0);
            f(rho, t)
        })
        .collect()
}

/// Cells (`(nodes.0-1) x (nodes.1-1)`, `j`-major) whose corner values do not
/// share one strict sign.
pub fn crossing_cells<S: Real>(values: &[S], nodes: (usize, usize)) -> Vec<bool> {
    let (nx, ny) = nodes;
    let mut out = Vec::with_capacity((nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [
                values[j * nx + i],
                values[j * nx + i + 1],
                values[(j + 1) * nx + i],
                values[(j + 1) * nx + i + 1],
            ];
            let pos = corners.iter().any(|v| *v > S::zero());
            let neg = corners.iter().any(|v| *v < S::zero());
            let zero = corners.iter().any(|v| *v == S::zero());
            out.push((pos && neg) || zero);
        }
    }
    out
}

/// Cells flagged in one set with no flagged cell of the other within
/// Chebyshev distance `displacement`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZeroSetComparison {
    pub cells: (usize, usize),
    pub count_a: usize,
    pub count_b: usize,
    pub unmatched_a: Vec<(usize, usize)>,
    pub unmatched_b: Vec<(usize, usize)>,
}

impl ZeroSetComparison {
    pub fn agree(&self) -> bool {
        self.unmatched_a.is_empty() && self.unmatched_b.is_empty()
    }
}

pub fn compare_zero_sets(
    a: &[bool],
    b: &[bool],
    cells: (usize, usize),
    displacement: usize,
) -> ZeroSetComparison {
    let (cx, cy) = cells;
    let near = |set: &[bool], i: usize, j: usize| {
        let r = displacement as isize;
        (-r..=r).any(|dj| {
            (-r..=r).any(|di| {
                let (ii, jj) = (i as isize + di, j as isize + dj);
                ii >= 0
                    && jj >= 0
                    && (ii as usize) < cx
                    && (jj as usize) < cy
                    && set[jj as usize * cx + ii as usize]
            })
        })
    };
    let mut out = ZeroSetComparison {
        cells,
        ..Default::default()
    };
    for j in 0..cy {
        for i in 0..cx {
            if a[j * cx + i] {
                out.count_a += 1;
                if !near(b, i, j) {
                    out.unmatched_a.push((i, j));
                }
            }
            if b[j * cx + i] {
                out.count_b += 1;
                if !near(a, i, j) {
                    out.unmatched_b.push((i, j));
                }
            }
        }
    }
    out
}

/// Traces the zero set of `f` inside `window`.
///
/// Seeds come from sign changes along the edges of the seeding lattice,
/// refined by bisection. Each unvisited seed starts a branch, continued in
/// both directions by a tangent predictor and a Newton corrector along the
/// local normal, with bisection as fallback.
pub fn trace_zero_set<S: Real, F>(f: F, window: &Window<S>, settings: &TraceSettings<S>) -> Trace<S>
where
    F: Fn(S, S) -> Degeneracy<S> + Sync,
{
    let nodes = settings.grid;
    let values = sample_grid(|r, t| f(r, t).value, window, nodes);
    let seeds = find_seeds(&f, &values, window, settings);
    let step = settings
        .step
        .unwrap_or_else(|| window.diagonal() / lit(512.0));
    let cell = ((window.rho_max - window.rho_min) / lit((nodes.0 - 1) as f64))
        .min((window.t_max - window.t_min) / lit((nodes.1 - 1) as f64));
    let consume = step.min(cell * lit(0.5));

    let tracer = Tracer {
        f: &f,
        window,
        settings,
        step,
    };
    let mut trace = Trace {
        points: Vec::new(),
        dropped: 0,
    };
    let mut branch_id = 0;
    for seed in seeds {
        if !trace.points.is_empty() && trace.distance_to(seed.0, seed.1) < consume {
            continue;
        }
        let (forward, closed, dropped_f) = tracer.march(seed, S::one());
        trace.dropped += dropped_f;
        let mut branch: Vec<(S, S)> = Vec::new();
        if closed {
            branch.push(seed);
            branch.extend(forward);
            branch.push(seed);
        } else {
            let (backward, _, dropped_b) = tracer.march(seed, -S::one());
            trace.dropped += dropped_b;
            branch.extend(backward.into_iter().rev());
            branch.push(seed);
            branch.extend(forward);
        }
        for (rho, t) in branch {
            trace.points.push(CurvePoint {
                branch_id,
                rho,
                t,
                residual: f(rho, t).value,
            });
        }
        branch_id += 1;
    }
    trace
}

fn find_seeds<S: Real, F>(
    f: &F,
    values: &[S],
    window: &Window<S>,
    settings: &TraceSettings<S>,
) -> Vec<(S, S)>
where
    F: Fn(S, S) -> Degeneracy<S>,
{
    let (nx, ny) = settings.grid;
    let mut seeds = Vec::new();
    let mut edge = |a: (usize, usize), b: (usize, usize)| {
        let (va, vb) = (values[a.1 * nx + a.0], values[b.1 * nx + b.0]);
        if !(va.is_finite() && vb.is_finite()) {
            return;
        }
        let pa = window.node(settings.grid, a.0, a.1);
        let pb = window.node(settings.grid, b.0, b.1);
        if va == S::zero() {
            seeds.push(pa);
        } else if (va < S::zero()) != (vb < S::zero()) && vb != S::zero() {
            seeds.push(bisect(f, pa, pb, va, settings.bisect_width));
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                edge((i, j), (i + 1, j));
            }
            if j + 1 < ny {
                edge((i, j), (i, j + 1));
            }
        }
    }
    seeds
}

fn bisect<S: Real, F>(f: &F, mut a: (S, S), mut b: (S, S), mut fa: S, width: S) -> (S, S)
where
    F: Fn(S, S) -> Degeneracy<S>,
{
    let half = lit::<S>(0.5);
    for _ in 0..200 {
        if (b.0 - a.0).hypot(b.1 - a.1) <= width {
            break;
        }
        let m = ((a.0 + b.0) * half, (a.1 + b.1) * half);
        let fm = f(m.0, m.1).value;
        if fm == S::zero() {
            return m;
        }
        if (fm < S::zero()) == (fa < S::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    ((a.0 + b.0) * half, (a.1 + b.1) * half)
}

struct Tracer<'a, S, F> {
    f: &'a F,
    window: &'a Window<S>,
    settings: &'a TraceSettings<S>,
    step: S,
}

impl<S: Real, F> Tracer<'_, S, F>
where
    F: Fn(S, S) -> Degeneracy<S>,
{
    fn gradient(&self, x: (S, S)) -> (S, S) {
        let h = self.step * lit(1e-3);
        let two = S::two();
        let f = |r, t| (self.f)(r, t).value;
        (
            (f(x.0 + h, x.1) - f(x.0 - h, x.1)) / (two * h),
            (f(x.0, x.1 + h) - f(x.0, x.1 - h)) / (two * h),
        )
    }

    /// Walks from `start` in direction `sign`. Returns the points, whether
    /// the branch closed on itself, and the number of dropped points.
    fn march(&self, start: (S, S), sign: S) -> (Vec<(S, S)>, bool, usize) {
        let mut points = Vec::new();
        let mut dropped = 0;
        let mut x = start;
        let mut prev_tangent: Option<(S, S)> = None;
        while points.len() < self.settings.max_points_per_branch {
            let g = self.gradient(x);
            let norm = g.0.hypot(g.1);
            if !(norm > S::zero()) || !norm.is_finite() {
                break;
            }
            let normal = (g.0 / norm, g.1 / norm);
            let mut tangent = (-normal.1 * sign, normal.0 * sign);
            if let Some(pt) = prev_tangent {
                if tangent.0 * pt.0 + tangent.1 * pt.1 < S::zero() {
                    tangent = (-tangent.0, -tangent.1);
                }
            }
            let mut h = self.step;
            let mut next = None;
            for _ in 0..4 {
                let predicted = (x.0 + h * tangent.0, x.1 + h * tangent.1);
                if let Some(c) = self.correct(predicted, normal, h) {
                    next = Some(c);
                    break;
                }
                dropped += 1;
                h = h * lit(0.5);
            }
            let Some(c) = next else { break };
            if !self.window.contains(c.0, c.1) {
                break;
            }
            if points.len() > 3 && (c.0 - start.0).hypot(c.1 - start.1) < self.step {
                return (points, true, dropped);
            }
            let d = (c.0 - x.0, c.1 - x.1);
            let len = d.0.hypot(d.1);
            if len > S::zero() {
                prev_tangent = Some((d.0 / len, d.1 / len));
            }
            points.push(c);
            x = c;
        }
        (points, false, dropped)
    }

    /// Newton iteration for `f(p + s n) = 0`, falling back to bisection on
    /// `s ∈ [-h, h]`.
    fn correct(&self, p: (S, S), n: (S, S), h: S) -> Option<(S, S)> {
        let at = |s: S| (p.0 + s * n.0, p.1 + s * n.1);
        let eval = |s: S| {
            let x = at(s);
            (self.f)(x.0, x.1)
        };
        let accept = |s: S| -> Option<(S, S)> {
            let d = eval(s);
            (d.value.abs() <= self.settings.tol * d.scale).then(|| at(s))
        };
        let delta = h * lit(1e-4);
        let two = S::two();
        let mut s = S::zero();
        for _ in 0..self.settings.max_corrector_iterations {
            let fs = eval(s).value;
            if fs == S::zero() {
                return accept(s);
            }
            let slope = (eval(s + delta).value - eval(s - delta).value) / (two * delta);
            if !(slope.abs() > S::zero()) || !slope.is_finite() {
                break;
            }
            let ds = fs / slope;
            s = s - ds;
            if !s.is_finite() || s.abs() > h {
                break;
            }
            if ds.abs() <= lit::<S>(1e-14) * (S::one() + p.0.abs() + p.1.abs()) {
                return accept(s);
            }
        }
        // Bisection fallback.
        let (mut lo, mut hi) = (-h, h);
        let mut flo = eval(lo).value;
        let fhi = eval(hi).value;
        if !(flo.is_finite() && fhi.is_finite()) || (flo < S::zero()) == (fhi < S::zero()) {
            return None;
        }
        let half = lit::<S>(0.5);
        while hi - lo > self.settings.bisect_width {
            let mid = (lo + hi) * half;
            let fm = eval(mid).value;
            if fm == S::zero() {
                return accept(mid);
            }
            if (fm < S::zero()) == (flo < S::zero()) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        accept((lo + hi) * half)
    }
}
