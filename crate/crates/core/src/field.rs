//! Scalar functions of density and temperature together with their partial
//! derivatives up to second order.

use std::fmt;
use std::sync::Arc;

use crate::scalar::{lit, Real};

/// Value and partial derivatives of `f(ρ, T)` up to second order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S> {
    pub value: S,
    pub d_rho: S,
    pub d_t: S,
    pub d_rho_rho: S,
    pub d_rho_t: S,
    pub d_t_t: S,
}

impl<S: Real> Jet<S> {
    pub fn constant(value: S) -> Self {
        Self {
            value,
            d_rho: S::zero(),
            d_t: S::zero(),
            d_rho_rho: S::zero(),
            d_rho_t: S::zero(),
            d_t_t: S::zero(),
        }
    }

    pub fn get(&self, part: Partial) -> S {
        match part {
            Partial::Value => self.value,
            Partial::Rho => self.d_rho,
            Partial::T => self.d_t,
            Partial::RhoRho => self.d_rho_rho,
            Partial::RhoT => self.d_rho_t,
            Partial::TT => self.d_t_t,
        }
    }
}

/// Selects one entry of a [`Jet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partial {
    Value,
    Rho,
    T,
    RhoRho,
    RhoT,
    TT,
}

/// A thread-safe scalar field over the `(ρ, T)` half-plane.
pub trait ScalarField<S>: Send + Sync + fmt::Debug {
    fn jet(&self, rho: S, temperature: S) -> Jet<S>;

    fn value(&self, rho: S, temperature: S) -> S {
        self.jet(rho, temperature).value
    }

    /// Whether `jet` is exact rather than estimated by differences.
    fn is_analytic(&self) -> bool {
        true
    }
}

pub type Field<S> = Arc<dyn ScalarField<S>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant<S>(pub S);

impl<S: Real> ScalarField<S> for Constant<S> {
    fn jet(&self, _rho: S, _t: S) -> Jet<S> {
        Jet::constant(self.0)
    }
}

/// `c0 + c_rho ρ + c_t T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine<S> {
    pub c0: S,
    pub c_rho: S,
    pub c_t: S,
}

impl<S: Real> ScalarField<S> for Affine<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        Jet {
            value: self.c0 + self.c_rho * rho + self.c_t * t,
            d_rho: self.c_rho,
            d_t: self.c_t,
            ..Jet::constant(S::zero())
        }
    }
}

/// `c ρ^a T^b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw<S> {
    pub coefficient: S,
    pub rho_exponent: S,
    pub t_exponent: S,
}

impl<S: Real> ScalarField<S> for PowerLaw<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let (a, b) = (self.rho_exponent, self.t_exponent);
        let f = self.coefficient * rho.powf(a) * t.powf(b);
        Jet {
            value: f,
            d_rho: f * a / rho,
            d_t: f * b / t,
            d_rho_rho: f * a * (a - S::one()) / (rho * rho),
            d_rho_t: f * a * b / (rho * t),
            d_t_t: f * b * (b - S::one()) / (t * t),
        }
    }
}

/// Free energy of an ideal gas,
/// `h0 = R ρ T (ln ρ - 1) - c_v ρ T (ln T - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealGasH0<S> {
    pub r: S,
    pub c_v: S,
}

impl<S: Real> ScalarField<S> for IdealGasH0<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        VanDerWaalsH0 {
            r: self.r,
            a: S::zero(),
            b: S::zero(),
            c_v: self.c_v,
        }
        .jet(rho, t)
    }
}

/// Free energy of a van der Waals medium,
/// `h0 = -ρRT (ln((1 - bρ)/ρ) + 1) - aρ² - c_v ρ T (ln T - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanDerWaalsH0<S> {
    pub r: S,
    pub a: S,
    pub b: S,
    pub c_v: S,
}

impl<S: Real> ScalarField<S> for VanDerWaalsH0<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let Self { r, a, b, c_v } = *self;
        let one = S::one();
        let two = S::two();
        let free = one - b * rho;
        let log_term = (free / rho).ln();
        let ln_t = t.ln();
        Jet {
            value: -rho * r * t * (log_term + one) - a * rho * rho - c_v * rho * t * (ln_t - one),
            d_rho: -r * t * log_term + b * rho * r * t / free
                - two * a * rho
                - c_v * t * (ln_t - one),
            d_t: -rho * r * (log_term + one) - c_v * rho * ln_t,
            d_rho_rho: r * t / (rho * free * free) - two * a,
            d_rho_t: -r * log_term + b * rho * r / free - c_v * ln_t,
            d_t_t: -c_v * rho / t,
        }
    }
}

/// Van der Waals pressure `ρRT/(1 - bρ) - aρ²`, written out analytically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanDerWaalsPressure<S> {
    pub r: S,
    pub a: S,
    pub b: S,
}

impl<S: Real> ScalarField<S> for VanDerWaalsPressure<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let Self { r, a, b } = *self;
        let two = S::two();
        let free = S::one() - b * rho;
        Jet {
            value: rho * r * t / free - a * rho * rho,
            d_rho: r * t / (free * free) - two * a * rho,
            d_t: rho * r / free,
            d_rho_rho: two * b * r * t / (free * free * free) - two * a,
            d_rho_t: r / (free * free),
            d_t_t: S::zero(),
        }
    }
}

/// Still-medium pressure `p = ρ ∂h0/∂ρ - h0` derived from a free energy.
///
/// Value and first derivatives come from the jet of `h0`; second
/// derivatives are central differences of the first.
#[derive(Clone, Debug)]
pub struct PressureFromH0<S> {
    pub h0: Field<S>,
}

impl<S: Real> PressureFromH0<S> {
    fn first(&self, rho: S, t: S) -> (S, S, S) {
        let h = self.h0.jet(rho, t);
        (
            rho * h.d_rho - h.value,
            rho * h.d_rho_rho,
            rho * h.d_rho_t - h.d_t,
        )
    }
}

impl<S: Real> ScalarField<S> for PressureFromH0<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let (value, d_rho, d_t) = self.first(rho, t);
        let hr = fd_step::<S>(rho, 3);
        let ht = fd_step::<S>(t, 3);
        let two = S::two();
        let (_, pr_plus, _) = self.first(rho + hr, t);
        let (_, pr_minus, _) = self.first(rho - hr, t);
        let (_, pr_tplus, pt_plus) = self.first(rho, t + ht);
        let (_, pr_tminus, pt_minus) = self.first(rho, t - ht);
        Jet {
            value,
            d_rho,
            d_t,
            d_rho_rho: (pr_plus - pr_minus) / (two * hr),
            d_rho_t: (pr_tplus - pr_tminus) / (two * ht),
            d_t_t: (pt_plus - pt_minus) / (two * ht),
        }
    }

    fn is_analytic(&self) -> bool {
        false
    }
}

/// Step `ε^(1/order) max(1, |x|)` for central differences.
pub fn fd_step<S: Real>(x: S, order: i32) -> S {
    S::epsilon().powf(S::one() / lit::<S>(order as f64)) * x.abs().max(S::one())
}

/// A user closure `f(ρ, T)` whose derivatives are estimated with central
/// differences. First derivatives use the step `ε^(1/3) max(1,|x|)`,
/// second derivatives `ε^(1/4) max(1,|x|)`.
pub struct FiniteDifference<S> {
    f: Box<dyn Fn(S, S) -> S + Send + Sync>,
}

impl<S> FiniteDifference<S> {
    pub fn new(f: impl Fn(S, S) -> S + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f) }
    }
}

impl<S> fmt::Debug for FiniteDifference<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FiniteDifference(..)")
    }
}

impl<S: Real> ScalarField<S> for FiniteDifference<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let f = &self.f;
        let two = S::two();
        let v = f(rho, t);
        let (h1r, h1t) = (fd_step::<S>(rho, 3), fd_step::<S>(t, 3));
        let (h2r, h2t) = (fd_step::<S>(rho, 4), fd_step::<S>(t, 4));
        Jet {
            value: v,
            d_rho: (f(rho + h1r, t) - f(rho - h1r, t)) / (two * h1r),
            d_t: (f(rho, t + h1t) - f(rho, t - h1t)) / (two * h1t),
            d_rho_rho: (f(rho + h2r, t) - two * v + f(rho - h2r, t)) / (h2r * h2r),
            d_t_t: (f(rho, t + h2t) - two * v + f(rho, t - h2t)) / (h2t * h2t),
            d_rho_t: (f(rho + h2r, t + h2t) - f(rho + h2r, t - h2t) - f(rho - h2r, t + h2t)
                + f(rho - h2r, t - h2t))
                / (lit::<S>(4.0) * h2r * h2t),
        }
    }

    fn is_analytic(&self) -> bool {
        false
    }
}

/// A user closure returning the full jet analytically.
pub struct Analytic<S> {
    f: Box<dyn Fn(S, S) -> Jet<S> + Send + Sync>,
}

impl<S> Analytic<S> {
    pub fn new(f: impl Fn(S, S) -> Jet<S> + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f) }
    }
}

impl<S> fmt::Debug for Analytic<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Analytic(..)")
    }
}

impl<S: Real> ScalarField<S> for Analytic<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        (self.f)(rho, t)
    }
}

/// Pointwise `-f`.
#[derive(Clone, Debug)]
pub struct Negated<S>(pub Field<S>);

impl<S: Real> ScalarField<S> for Negated<S> {
    fn jet(&self, rho: S, t: S) -> Jet<S> {
        let j = self.0.jet(rho, t);
        Jet {
            value: -j.value,
            d_rho: -j.d_rho,
            d_t: -j.d_t,
            d_rho_rho: -j.d_rho_rho,
            d_rho_t: -j.d_rho_t,
            d_t_t: -j.d_t_t,
        }
    }

    fn is_analytic(&self) -> bool {
        self.0.is_analytic()
    }
}
