//! Quadratic Helmholtz free-energy models of a Newtonian medium.
//!
//! The free energy density `h(ρ, T, Δ)` is quadratic in the deformation
//! `Δ`, with coefficients that are functions of density and temperature.
//! Two forms are supported: the isotropic bulk form in dimension 2 or 3 and
//! the Kähler surface form, which carries the extra invariant `Tr JΔ`.
//!
//! Stress is the gradient array `σ_ij = ∂h/∂Δ_ij`. With this layout the
//! contact form reads `de - T ds - Σ σ_ij dΔ_ij - η dρ` and the surface
//! stress at zero deformation is `-p·1 + q·J`.
//!
//! `h` depends linearly on the coefficient values `(μ, τ, ζ, α, p, q, h0)`,
//! so every partial derivative in `ρ` or `T` is obtained by evaluating the
//! same expression on the corresponding partials of the coefficients.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{Constant, Field, Partial, PressureFromH0, VanDerWaalsH0, VanDerWaalsPressure};
use crate::scalar::{lit, Real};
use crate::tensor::{
    adjoint, general_invariants, kahler_invariants, ComplexStructure, Metric, MixedTensor,
};

use std::sync::Arc;

/// Constant viscosity coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viscosities<S> {
    pub mu: S,
    pub tau: S,
    pub zeta: S,
    pub alpha: S,
}

/// The coefficient fields of the free energy and of the heat equation.
#[derive(Clone, Debug)]
pub struct CoefficientModel<S> {
    /// Shear viscosity.
    pub mu: Field<S>,
    /// Rotational viscosity.
    pub tau: Field<S>,
    /// Volume viscosity.
    pub zeta: Field<S>,
    /// Surface-only viscosity-like coefficient of `Tr Δ Tr JΔ`.
    pub alpha: Field<S>,
    pub p: Field<S>,
    /// Rotational pressure, surface model only.
    pub q: Field<S>,
    /// Free energy of the still medium.
    pub h0: Field<S>,
    pub c_p: Field<S>,
    /// Thermal conductivity.
    pub kappa_th: Field<S>,
}

/// Still-medium pressure `p = ρ ∂h0/∂ρ - h0`.
pub fn pressure_from_h0<S: Real>(h0: Field<S>) -> Field<S> {
    Arc::new(PressureFromH0 { h0 })
}

fn constant<S: Real>(x: S) -> Field<S> {
    Arc::new(Constant(x))
}

impl<S: Real> CoefficientModel<S> {
    /// Constant viscosities over the given `h0`, with `p` derived from `h0`,
    /// `q = 0`, `c_p = 1` and no heat conduction.
    pub fn new(h0: Field<S>, visc: Viscosities<S>) -> Self {
        Self {
            mu: constant(visc.mu),
            tau: constant(visc.tau),
            zeta: constant(visc.zeta),
            alpha: constant(visc.alpha),
            p: pressure_from_h0(h0.clone()),
            q: constant(S::zero()),
            h0,
            c_p: constant(S::one()),
            kappa_th: constant(S::zero()),
        }
    }

    /// Every coefficient constant.
    pub fn constants(visc: Viscosities<S>, p: S, q: S, h0: S) -> Self {
        Self {
            p: constant(p),
            q: constant(q),
            ..Self::new(constant(h0), visc)
        }
    }

    pub fn ideal_gas(r: S, c_v: S, visc: Viscosities<S>) -> Self {
        Self::van_der_waals(r, S::zero(), S::zero(), c_v, visc)
    }

    pub fn van_der_waals(r: S, a: S, b: S, c_v: S, visc: Viscosities<S>) -> Self {
        Self {
            p: Arc::new(VanDerWaalsPressure { r, a, b }),
            ..Self::new(Arc::new(VanDerWaalsH0 { r, a, b, c_v }), visc)
        }
    }

    pub fn with_pressure(mut self, p: Field<S>) -> Self {
        self.p = p;
        self
    }

    pub fn with_rotational_pressure(mut self, q: Field<S>) -> Self {
        self.q = q;
        self
    }

    pub fn with_heat(mut self, c_p: Field<S>, kappa_th: Field<S>) -> Self {
        self.c_p = c_p;
        self.kappa_th = kappa_th;
        self
    }

    /// One partial of every free-energy coefficient at `(ρ, T)`.
    pub fn values(&self, rho: S, t: S, part: Partial) -> CoefficientValues<S> {
        CoefficientValues {
            mu: self.mu.jet(rho, t).get(part),
            tau: self.tau.jet(rho, t).get(part),
            zeta: self.zeta.jet(rho, t).get(part),
            alpha: self.alpha.jet(rho, t).get(part),
            p: self.p.jet(rho, t).get(part),
            q: self.q.jet(rho, t).get(part),
            h0: self.h0.jet(rho, t).get(part),
        }
    }

    /// True when every free-energy coefficient has exact derivatives.
    pub fn is_analytic(&self) -> bool {
        [
            &self.mu,
            &self.tau,
            &self.zeta,
            &self.alpha,
            &self.p,
            &self.q,
            &self.h0,
        ]
        .iter()
        .all(|f| f.is_analytic())
    }
}

/// The free-energy coefficients (or one of their partials) at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientValues<S> {
    pub mu: S,
    pub tau: S,
    pub zeta: S,
    pub alpha: S,
    pub p: S,
    pub q: S,
    pub h0: S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind<S> {
    /// Isotropic bulk medium in dimension 2 or 3.
    Bulk,
    /// Medium on a Kähler surface.
    Surface(ComplexStructure<S>),
}

/// A point `(ρ, T, Δ)` of the reduced phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoState<S> {
    pub rho: S,
    pub temperature: S,
    pub delta: MixedTensor<S>,
}

impl<S: Real> ThermoState<S> {
    pub fn new(rho: S, temperature: S, delta: MixedTensor<S>) -> Self {
        Self {
            rho,
            temperature,
            delta,
        }
    }

    /// Coordinates `(T, ρ, Δ_11, Δ_12, …, Δ_nn)`.
    pub fn coordinates(&self) -> Vec<S> {
        let mut out = vec![self.temperature, self.rho];
        out.extend(self.delta.to_row_major());
        out
    }

    pub fn from_coordinates(n: usize, x: &[S]) -> Result<Self> {
        Ok(Self::new(
            x[1],
            x[0],
            MixedTensor::from_row_major(n, &x[2..])?,
        ))
    }
}

/// Quantities generated by the free energy at a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedState<S> {
    /// Free-energy density.
    pub h: S,
    /// Entropy density `-∂h/∂T`.
    pub s: S,
    /// Energy density `h - T ∂h/∂T`.
    pub e: S,
    /// Chemical potential `∂h/∂ρ`.
    pub eta: S,
    /// Stress `∂h/∂Δ`.
    pub sigma: MixedTensor<S>,
}

/// Second derivatives of `h` entering the form κ.
#[derive(Clone, Debug, PartialEq)]
pub struct Hessian<S> {
    pub h_tt: S,
    pub h_rho_rho: S,
    /// `∂²h/∂Δ_ij∂ρ`
    pub delta_rho: MixedTensor<S>,
    /// `∂²h/∂Δ_ij∂Δ_kl`, row-major `n² x n²` with index `i*n + j`.
    pub delta_delta: Vec<S>,
}

/// A medium: coefficient fields, model form and metric.
#[derive(Clone, Debug)]
pub struct Medium<S> {
    pub coeffs: CoefficientModel<S>,
    pub kind: ModelKind<S>,
    pub metric: Metric<S>,
}

impl<S: Real> Medium<S> {
    pub fn bulk(coeffs: CoefficientModel<S>, metric: Metric<S>) -> Self {
        Self {
            coeffs,
            kind: ModelKind::Bulk,
            metric,
        }
    }

    pub fn surface(
        coeffs: CoefficientModel<S>,
        metric: Metric<S>,
        j: ComplexStructure<S>,
    ) -> Result<Self> {
        if metric.dim() != 2 {
            return Err(Error::RequiresSurface);
        }
        ComplexStructure::new(*j.matrix(), &metric)?;
        Ok(Self {
            coeffs,
            kind: ModelKind::Surface(j),
            metric,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn validate(&self, state: &ThermoState<S>) -> Result<()> {
        self.metric.check_tensor(&state.delta)?;
        if !(state.rho > S::zero()) {
            return Err(Error::InvalidState(format!(
                "density must be positive, got {:?}",
                state.rho
            )));
        }
        if !(state.temperature > S::zero()) {
            return Err(Error::InvalidState(format!(
                "temperature must be positive, got {:?}",
                state.temperature
            )));
        }
        if !state.delta.is_finite() {
            return Err(Error::InvalidState("non-finite deformation".into()));
        }
        Ok(())
    }

    /// `h` with the coefficient slots filled by `c`.
    pub fn energy_with(&self, c: &CoefficientValues<S>, delta: &MixedTensor<S>) -> Result<S> {
        let half = lit::<S>(0.5);
        match &self.kind {
            ModelKind::Bulk => {
                let inv = general_invariants(delta, &self.metric)?;
                let n = lit::<S>(self.dim() as f64);
                let quad = (c.mu + c.tau) * inv.d2
                    + (c.mu - c.tau) * inv.d3
                    + (c.zeta - S::two() * c.mu / n) * inv.d1 * inv.d1;
                Ok(half * quad - c.p * inv.d1 + c.h0)
            }
            ModelKind::Surface(j) => {
                let t = kahler_invariants(delta, &self.metric, j)?;
                let quad = c.mu * t.t3
                    + c.tau * t.t2 * t.t2
                    + c.alpha * t.t1 * t.t2
                    + (c.zeta - c.mu) * t.t1 * t.t1;
                Ok(half * quad - (c.p * t.t1 + c.q * t.t2) + c.h0)
            }
        }
    }

    /// `∂h/∂Δ_ij` with the coefficient slots filled by `c`.
    pub fn gradient_with(
        &self,
        c: &CoefficientValues<S>,
        delta: &MixedTensor<S>,
    ) -> Result<MixedTensor<S>> {
        let n = self.dim();
        let id = MixedTensor::identity(n)?;
        let adj_t = adjoint(delta, &self.metric)?.transpose();
        let d_t = delta.transpose();
        let d1 = delta.trace();
        match &self.kind {
            ModelKind::Bulk => {
                let nn = lit::<S>(n as f64);
                Ok(d_t.scale(c.mu + c.tau)
                    + adj_t.scale(c.mu - c.tau)
                    + id.scale((c.zeta - S::two() * c.mu / nn) * d1 - c.p))
            }
            ModelKind::Surface(j) => {
                let jt = j.matrix().transpose();
                let t2 = (*j.matrix() * *delta).trace();
                let half = lit::<S>(0.5);
                Ok((d_t + adj_t).scale(c.mu)
                    + jt.scale(c.tau * t2)
                    + (id.scale(t2) + jt.scale(d1)).scale(half * c.alpha)
                    + id.scale((c.zeta - c.mu) * d1 - c.p)
                    - jt.scale(c.q))
            }
        }
    }

    pub fn free_energy(&self, state: &ThermoState<S>) -> Result<S> {
        self.validate(state)?;
        let c = self
            .coeffs
            .values(state.rho, state.temperature, Partial::Value);
        self.energy_with(&c, &state.delta)
    }

    /// Closed-form stress `∂h/∂Δ`.
    pub fn stress(&self, state: &ThermoState<S>) -> Result<MixedTensor<S>> {
        self.validate(state)?;
        let c = self
            .coeffs
            .values(state.rho, state.temperature, Partial::Value);
        self.gradient_with(&c, &state.delta)
    }

    /// Stress by componentwise central differences of [`Self::free_energy`].
    pub fn stress_fd(&self, state: &ThermoState<S>, step: S) -> Result<MixedTensor<S>> {
        self.validate(state)?;
        let n = self.dim();
        let c = self
            .coeffs
            .values(state.rho, state.temperature, Partial::Value);
        let mut out = MixedTensor::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                let e = MixedTensor::unit(n, i, j)?.scale(step);
                let plus = self.energy_with(&c, &(state.delta + e))?;
                let minus = self.energy_with(&c, &(state.delta - e))?;
                out[(i, j)] = (plus - minus) / (S::two() * step);
            }
        }
        Ok(out)
    }

    pub fn derived(&self, state: &ThermoState<S>) -> Result<DerivedState<S>> {
        self.validate(state)?;
        let (rho, t) = (state.rho, state.temperature);
        let value = self.coeffs.values(rho, t, Partial::Value);
        let h = self.energy_with(&value, &state.delta)?;
        let h_t = self.energy_with(&self.coeffs.values(rho, t, Partial::T), &state.delta)?;
        let h_rho = self.energy_with(&self.coeffs.values(rho, t, Partial::Rho), &state.delta)?;
        Ok(DerivedState {
            h,
            s: -h_t,
            e: h - t * h_t,
            eta: h_rho,
            sigma: self.gradient_with(&value, &state.delta)?,
        })
    }

    pub fn hessian(&self, state: &ThermoState<S>) -> Result<Hessian<S>> {
        self.validate(state)?;
        let (rho, t) = (state.rho, state.temperature);
        let n = self.dim();
        let value = self.coeffs.values(rho, t, Partial::Value);
        let h_tt = self.energy_with(&self.coeffs.values(rho, t, Partial::TT), &state.delta)?;
        let h_rho_rho =
            self.energy_with(&self.coeffs.values(rho, t, Partial::RhoRho), &state.delta)?;
        let delta_rho =
            self.gradient_with(&self.coeffs.values(rho, t, Partial::Rho), &state.delta)?;

        // The gradient is affine in Δ, so unit differences are exact columns.
        let zero = MixedTensor::zeros(n)?;
        let base = self.gradient_with(&value, &zero)?;
        let m = n * n;
        let mut delta_delta = vec![S::zero(); m * m];
        for k in 0..n {
            for l in 0..n {
                let col = self.gradient_with(&value, &MixedTensor::unit(n, k, l)?)? - base;
                for i in 0..n {
                    for j in 0..n {
                        delta_delta[(i * n + j) * m + k * n + l] = col[(i, j)];
                    }
                }
            }
        }
        let half = lit::<S>(0.5);
        for a in 0..m {
            for b in 0..a {
                let sym = half * (delta_delta[a * m + b] + delta_delta[b * m + a]);
                delta_delta[a * m + b] = sym;
                delta_delta[b * m + a] = sym;
            }
        }
        Ok(Hessian {
            h_tt,
            h_rho_rho,
            delta_rho,
            delta_delta,
        })
    }

    /// Largest violation of `de = T ds + Σσ_ij dΔ_ij + η dρ` along random
    /// directions in `(T, ρ, Δ)`, with directional derivatives of `e` and
    /// `s` taken by five-point central differences of size `step`.
    pub fn legendrian_residual<R: Rng + ?Sized>(
        &self,
        state: &ThermoState<S>,
        rng: &mut R,
        directions: usize,
        step: S,
    ) -> Result<LegendrianCheck<S>> {
        let base = self.derived(state)?;
        let n = self.dim();
        let x0 = state.coordinates();
        let mut worst = LegendrianCheck {
            residual: S::zero(),
            scale: S::zero(),
        };
        for _ in 0..directions {
            let mut dir: Vec<S> = (0..x0.len())
                .map(|_| lit::<S>(rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = dir.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt();
            dir.iter_mut().for_each(|x| *x = *x / norm);

            let at = |k: S| -> Result<DerivedState<S>> {
                let x: Vec<S> = x0
                    .iter()
                    .zip(&dir)
                    .map(|(a, d)| *a + k * step * *d)
                    .collect();
                self.derived(&ThermoState::from_coordinates(n, &x)?)
            };
            let (p1, m1) = (at(S::one())?, at(-S::one())?);
            let (p2, m2) = (at(S::two())?, at(-S::two())?);
            let eight = lit::<S>(8.0);
            let denom = lit::<S>(12.0) * step;
            let de = (eight * (p1.e - m1.e) - (p2.e - m2.e)) / denom;
            let ds = (eight * (p1.s - m1.s) - (p2.s - m2.s)) / denom;

            let d_delta = MixedTensor::from_row_major(n, &dir[2..])?;
            let work = base.sigma.frobenius_dot(&d_delta);
            let t = state.temperature;
            let residual = (de - t * ds - work - base.eta * dir[1]).abs();
            let scale =
                S::one() + de.abs() + (t * ds).abs() + work.abs() + (base.eta * dir[1]).abs();
            if residual / scale > worst.relative() {
                worst = LegendrianCheck { residual, scale };
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendrianCheck<S> {
    pub residual: S,
    /// Magnitude of the terms of the contact form along the direction.
    pub scale: S,
}

impl<S: Real> LegendrianCheck<S> {
    pub fn relative(&self) -> S {
        if self.scale > S::zero() {
            self.residual / self.scale
        } else {
            S::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Affine, Analytic, Jet, PowerLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn visc(mu: f64, tau: f64, zeta: f64, alpha: f64) -> Viscosities<f64> {
        Viscosities {
            mu,
            tau,
            zeta,
            alpha,
        }
    }

    fn zero(n: usize) -> MixedTensor<f64> {
        MixedTensor::zeros(n).unwrap()
    }

    #[test]
    fn zero_deformation_gives_still_energy() {
        let coeffs = CoefficientModel::van_der_waals(
            8.0 / 3.0,
            3.0,
            1.0 / 3.0,
            1.5,
            visc(1.0, 0.5, 2.0, 0.0),
        );
        let m = Medium::bulk(coeffs.clone(), Metric::euclidean(3).unwrap());
        let st = ThermoState::new(0.8, 1.1, zero(3));
        assert_eq!(m.free_energy(&st).unwrap(), coeffs.h0.value(0.8, 1.1));
    }

    #[test]
    fn bulk_identity_example() {
        let coeffs = CoefficientModel::constants(visc(1.0, 1.0, 1.0, 0.0), 0.0, 0.0, 0.0);
        let m = Medium::bulk(coeffs, Metric::euclidean(2).unwrap());
        let st = ThermoState::new(1.0, 1.0, MixedTensor::identity(2).unwrap());
        assert_eq!(m.free_energy(&st).unwrap(), 2.0);
        // σ = (-p + 2μ + (ζ - μ)·2)·1 = 2ζ·1 with p = 0.
        let sigma = m.stress(&st).unwrap();
        assert_eq!(sigma, MixedTensor::identity(2).unwrap().scale(2.0));
    }

    #[test]
    fn surface_rotation_example() {
        let coeffs = CoefficientModel::constants(visc(1.0, 1.0, 1.0, 0.0), 0.0, 0.0, 0.0);
        let j = ComplexStructure::standard();
        let m = Medium::surface(coeffs, Metric::euclidean(2).unwrap(), j).unwrap();
        let st = ThermoState::new(1.0, 1.0, *j.matrix());
        assert_eq!(m.free_energy(&st).unwrap(), 2.0);
    }

    #[test]
    fn zero_deformation_stress_is_pressure() {
        let (p, q) = (0.7, -0.3);
        let coeffs = CoefficientModel::constants(visc(1.0, 0.4, 2.0, 0.9), p, q, 1.0);
        let bulk = Medium::bulk(coeffs.clone(), Metric::euclidean(3).unwrap());
        let st3 = ThermoState::new(1.0, 1.0, zero(3));
        assert_eq!(
            bulk.stress(&st3).unwrap(),
            MixedTensor::identity(3).unwrap().scale(-p)
        );

        let surf = Medium::surface(
            coeffs,
            Metric::euclidean(2).unwrap(),
            ComplexStructure::standard(),
        )
        .unwrap();
        let sigma = surf.stress(&ThermoState::new(1.0, 1.0, zero(2))).unwrap();
        assert_eq!(sigma, MixedTensor::from_rows(&[[-p, -q], [q, -p]]).unwrap());
    }

    #[test]
    fn bulk_stress_matches_linear_form() {
        // g = I: ∂h/∂Δ = -p·1 + μ(Δ + Δᵀ) - τ(Δ - Δᵀ) + (ζ - μ) Tr Δ·1.
        let (mu, tau, zeta, p) = (1.3, 0.4, 0.9, 0.25);
        let coeffs = CoefficientModel::constants(visc(mu, tau, zeta, 0.0), p, 0.0, 0.0);
        let m = Medium::bulk(coeffs, Metric::euclidean(2).unwrap());
        let d = MixedTensor::from_rows(&[[0.3, -1.2], [0.7, 0.5]]).unwrap();
        let sigma = m.stress(&ThermoState::new(1.0, 1.0, d)).unwrap();
        let id = MixedTensor::identity(2).unwrap();
        let expected = id.scale(-p) + (d + d.transpose()).scale(mu)
            - (d - d.transpose()).scale(tau)
            + id.scale((zeta - mu) * d.trace());
        for (a, b) in sigma.to_row_major().iter().zip(expected.to_row_major()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn varied_coeffs() -> CoefficientModel<f64> {
        let mut c = CoefficientModel::van_der_waals(
            8.0 / 3.0,
            3.0,
            1.0 / 3.0,
            1.5,
            visc(1.0, 0.5, 2.0, 0.3),
        );
        c.mu = Arc::new(PowerLaw {
            coefficient: 0.8,
            rho_exponent: 1.3,
            t_exponent: 0.5,
        });
        c.tau = Arc::new(Affine {
            c0: 0.2,
            c_rho: 0.3,
            c_t: -0.1,
        });
        c.zeta = Arc::new(PowerLaw {
            coefficient: 1.7,
            rho_exponent: -0.4,
            t_exponent: 1.2,
        });
        c.alpha = Arc::new(Affine {
            c0: 0.1,
            c_rho: -0.2,
            c_t: 0.4,
        });
        c.q = Arc::new(Analytic::new(|rho: f64, t: f64| Jet {
            value: rho * rho * t,
            d_rho: 2.0 * rho * t,
            d_t: rho * rho,
            d_rho_rho: 2.0 * t,
            d_rho_t: 2.0 * rho,
            d_t_t: 0.0,
        }));
        c
    }

    #[test]
    fn autodiff_agrees_on_general_metric() {
        let g = Metric::new(MixedTensor::from_rows(&[[1.5, 0.2], [0.2, 0.8]]).unwrap()).unwrap();
        let j = ComplexStructure::from_metric(&g).unwrap();
        let d = MixedTensor::from_rows(&[[0.3, -1.2], [0.7, 0.5]]).unwrap();
        let st = ThermoState::new(0.9, 1.05, d);
        for m in [
            Medium::bulk(varied_coeffs(), g),
            Medium::surface(varied_coeffs(), g, j).unwrap(),
        ] {
            let a = m.stress(&st).unwrap();
            let b = m.stress_fd(&st, 1e-4).unwrap();
            let scale = a.max_abs().max(1.0);
            assert!((a - b).max_abs() <= 1e-10 * scale, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn derived_quantities_match_differences() {
        let m = Medium::bulk(varied_coeffs(), Metric::euclidean(3).unwrap());
        let d = MixedTensor::from_rows(&[[0.1, 0.2, -0.3], [0.0, 0.4, 0.1], [-0.2, 0.3, -0.1]])
            .unwrap();
        let st = ThermoState::new(1.2, 0.95, d);
        let ds = m.derived(&st).unwrap();
        let h = 1e-5;
        let f = |rho: f64, t: f64| m.free_energy(&ThermoState::new(rho, t, d)).unwrap();
        let h_t = (f(1.2, 0.95 + h) - f(1.2, 0.95 - h)) / (2.0 * h);
        let h_rho = (f(1.2 + h, 0.95) - f(1.2 - h, 0.95)) / (2.0 * h);
        assert!((ds.s + h_t).abs() < 1e-8);
        assert!((ds.eta - h_rho).abs() < 1e-8);
        assert!((ds.e - (ds.h + 0.95 * ds.s)).abs() <= 1e-12 * ds.e.abs().max(1.0));
    }

    #[test]
    fn euler_identity_for_linear_in_t() {
        let c = 0.6;
        let h0 = Arc::new(Analytic::new(move |rho: f64, t: f64| Jet {
            value: c * rho * t,
            d_rho: c * t,
            d_t: c * rho,
            d_rho_rho: 0.0,
            d_rho_t: c,
            d_t_t: 0.0,
        }));
        let coeffs = CoefficientModel::new(h0, visc(1.0, 1.0, 1.0, 0.0));
        let m = Medium::bulk(coeffs, Metric::euclidean(2).unwrap());
        let d = m.derived(&ThermoState::new(1.4, 0.8, zero(2))).unwrap();
        assert!((d.s + c * 1.4).abs() < 1e-15);
        assert!(d.e.abs() < 1e-15);
        assert!((d.eta - c * 0.8).abs() < 1e-15);
    }

    #[test]
    fn legendrian_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Metric::euclidean(2).unwrap();
        let m = Medium::surface(varied_coeffs(), g, ComplexStructure::standard()).unwrap();
        let d = MixedTensor::from_rows(&[[0.3, -0.2], [0.5, 0.1]]).unwrap();
        let check = m
            .legendrian_residual(&ThermoState::new(0.9, 1.1, d), &mut rng, 8, 1e-3)
            .unwrap();
        assert!(check.residual <= 1e-8 * check.scale, "{check:?}");
    }

    #[test]
    fn surface_reduces_to_bulk() {
        // With t2² = d3 - d2, the surface form with τ' = -τ, α = 0, q = 0
        // coincides with the two-dimensional bulk form.
        let g = Metric::new(MixedTensor::from_rows(&[[1.5, 0.2], [0.2, 0.8]]).unwrap()).unwrap();
        let j = ComplexStructure::from_metric(&g).unwrap();
        let (mu, tau, zeta) = (1.1, 0.35, 0.6);
        let bulk = Medium::bulk(
            CoefficientModel::constants(visc(mu, tau, zeta, 0.0), 0.2, 0.0, 0.1),
            g,
        );
        let surf = Medium::surface(
            CoefficientModel::constants(visc(mu, -tau, zeta, 0.0), 0.2, 0.0, 0.1),
            g,
            j,
        )
        .unwrap();
        let st = ThermoState::new(
            1.0,
            1.0,
            MixedTensor::from_rows(&[[0.4, -0.9], [1.3, -0.2]]).unwrap(),
        );
        let (a, b) = (
            bulk.free_energy(&st).unwrap(),
            surf.free_energy(&st).unwrap(),
        );
        assert!((a - b).abs() < 1e-13);
        assert!((bulk.stress(&st).unwrap() - surf.stress(&st).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn invalid_states_rejected() {
        let m = Medium::bulk(
            CoefficientModel::constants(visc(1.0, 1.0, 1.0, 0.0), 0.0, 0.0, 0.0),
            Metric::euclidean(2).unwrap(),
        );
        assert!(matches!(
            m.free_energy(&ThermoState::new(-1.0, 1.0, zero(2))),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            m.free_energy(&ThermoState::new(1.0, 0.0, zero(2))),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            m.free_energy(&ThermoState::new(1.0, 1.0, zero(3))),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Medium::surface(
            CoefficientModel::constants(visc(1.0, 1.0, 1.0, 0.0), 0.0, 0.0, 0.0),
            Metric::euclidean(3).unwrap(),
            ComplexStructure::standard()
        )
        .is_err());
    }
}
