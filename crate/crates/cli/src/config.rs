//! The TOML run configuration shared by every subcommand.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use viscotherm::coexistence::{TraceSettings, Window};
use viscotherm::field::{Constant, Field, PowerLaw};
use viscotherm::plane::{Grid, SimConfig, SimState, TimeStep, MAX_CFL};
use viscotherm::tensor::{ComplexStructure, Metric, MixedTensor};
use viscotherm::thermo::{CoefficientModel, Medium, Viscosities};
use viscotherm::verify::{Fault, VerifySettings};
use viscotherm::{Error, Result};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress: Option<StressConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coexist: Option<CoexistConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        require(&self.model, "model")
    }
}

pub fn require<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::InvalidConfig(format!("missing [{name}] section")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindConfig {
    Bulk,
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    #[serde(default = "two")]
    pub dimension: usize,
    /// Defaults to the Euclidean metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Matrix>,
    /// Surface only; defaults to the +90° rotation in the metric's
    /// orthonormal frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_structure: Option<Matrix>,
    pub h0: H0Config,
    pub coefficients: CoefficientsConfig,
}

fn two() -> usize {
    2
}

/// The still-medium free energy, which also fixes `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum H0Config {
    Constants { p: f64, h0: f64 },
    IdealGas { r: f64, c_v: f64 },
    VanDerWaals { r: f64, a: f64, b: f64, c_v: f64 },
}

/// A constant or `c · ρ^a · T^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    PowerLaw(PowerLawConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawConfig {
    pub coefficient: f64,
    pub rho_exponent: f64,
    pub t_exponent: f64,
}

impl Coefficient {
    fn field(&self) -> Field<f64> {
        match self {
            Coefficient::Constant(c) => Arc::new(Constant(*c)),
            Coefficient::PowerLaw(p) => Arc::new(PowerLaw {
                coefficient: p.coefficient,
                rho_exponent: p.rho_exponent,
                t_exponent: p.t_exponent,
            }),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Coefficient::Constant(c) => c.is_finite(),
            Coefficient::PowerLaw(p) => [p.coefficient, p.rho_exponent, p.t_exponent]
                .iter()
                .all(|x| x.is_finite()),
        }
    }
}

fn zero() -> Coefficient {
    Coefficient::Constant(0.0)
}

fn one() -> Coefficient {
    Coefficient::Constant(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub mu: Coefficient,
    #[serde(default = "zero")]
    pub tau: Coefficient,
    pub zeta: Coefficient,
    /// Surface only.
    #[serde(default = "zero")]
    pub alpha: Coefficient,
    /// Rotational pressure, surface only.
    #[serde(default = "zero")]
    pub q: Coefficient,
    #[serde(default = "one")]
    pub c_p: Coefficient,
    /// Thermal conductivity.
    #[serde(default = "zero")]
    pub conductivity: Coefficient,
}

fn matrix(rows: &Matrix, what: &str) -> Result<MixedTensor<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidConfig(format!(
            "{what} must be a square matrix"
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "{what} has non-finite entries"
        )));
    }
    MixedTensor::from_rows(rows)
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} must be positive, got {x}"
        )))
    }
}

/// Metric and complex structure from optional inline matrices.
pub fn geometry(
    n: usize,
    metric: Option<&Matrix>,
    j: Option<&Matrix>,
) -> Result<(Metric<f64>, Option<ComplexStructure<f64>>)> {
    let g = match metric {
        Some(m) => Metric::new(matrix(m, "metric")?)?,
        None => Metric::euclidean(n)?,
    };
    if g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.dim(),
        });
    }
    let j = match (j, n) {
        (Some(m), _) => Some(ComplexStructure::new(matrix(m, "complex_structure")?, &g)?),
        (None, 2) => Some(ComplexStructure::from_metric(&g)?),
        (None, _) => None,
    };
    Ok((g, j))
}

impl ModelConfig {
    pub fn coefficients(&self) -> Result<CoefficientModel<f64>> {
        let c = &self.coefficients;
        let all = [
            &c.mu,
            &c.tau,
            &c.zeta,
            &c.alpha,
            &c.q,
            &c.c_p,
            &c.conductivity,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        let visc = Viscosities {
            mu: 0.0,
            tau: 0.0,
            zeta: 0.0,
            alpha: 0.0,
        };
        let base = match self.h0 {
            H0Config::Constants { p, h0 } => CoefficientModel::constants(visc, p, 0.0, h0),
            H0Config::IdealGas { r, c_v } => {
                positive(r, "r")?;
                positive(c_v, "c_v")?;
                CoefficientModel::ideal_gas(r, c_v, visc)
            }
            H0Config::VanDerWaals { r, a, b, c_v } => {
                positive(r, "r")?;
                positive(c_v, "c_v")?;
                if !(a >= 0.0 && b >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "van der Waals a and b must be non-negative".into(),
                    ));
                }
                CoefficientModel::van_der_waals(r, a, b, c_v, visc)
            }
        };
        let surface = self.kind == ModelKindConfig::Surface;
        let surface_only = |x: &Coefficient| if surface { x.field() } else { zero().field() };
        Ok(CoefficientModel {
            mu: c.mu.field(),
            tau: c.tau.field(),
            zeta: c.zeta.field(),
            alpha: surface_only(&c.alpha),
            q: surface_only(&c.q),
            c_p: c.c_p.field(),
            kappa_th: c.conductivity.field(),
            ..base
        })
    }

    pub fn medium(&self) -> Result<Medium<f64>> {
        let (g, j) = geometry(
            self.dimension,
            self.metric.as_ref(),
            self.complex_structure.as_ref(),
        )?;
        let coeffs = self.coefficients()?;
        match self.kind {
            ModelKindConfig::Bulk => Ok(Medium::bulk(coeffs, g)),
            ModelKindConfig::Surface => {
                let j = j.ok_or(Error::RequiresSurface)?;
                Medium::surface(coeffs, g, j)
            }
        }
    }
}

/// Deformation, metric and optional complex structure.
pub type Resolved = (MixedTensor<f64>, Metric<f64>, Option<ComplexStructure<f64>>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsConfig {
    pub delta: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_structure: Option<Matrix>,
}

impl InvariantsConfig {
    pub fn resolve(&self) -> Result<Resolved> {
        let d = matrix(&self.delta, "delta")?;
        let (g, j) = geometry(
            d.dim(),
            self.metric.as_ref(),
            self.complex_structure.as_ref(),
        )?;
        Ok((d, g, j))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressConfig {
    pub rho: f64,
    pub temperature: f64,
    pub delta: Matrix,
}

impl StressConfig {
    pub fn delta(&self) -> Result<MixedTensor<f64>> {
        positive(self.rho, "rho")?;
        positive(self.temperature, "temperature")?;
        matrix(&self.delta, "delta")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistConfig {
    pub rho: [f64; 2],
    pub temperature: [f64; 2],
    /// Defaults to the still medium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Matrix>,
    #[serde(default = "default_lattice")]
    pub grid: [usize; 2],
    #[serde(default = "default_trace_tol")]
    pub tol: f64,
    /// Continuation step; defaults to the window diagonal / 512.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Also evaluate the closed-form co-existence condition of the model
    /// and compare its zero set with the determinant's.
    #[serde(default)]
    pub check_lemma: bool,
    #[serde(default = "default_curve_file")]
    pub output: String,
}

fn default_lattice() -> [usize; 2] {
    [64, 64]
}

fn default_trace_tol() -> f64 {
    1e-9
}

fn default_curve_file() -> String {
    "coexistence.csv".into()
}

impl CoexistConfig {
    pub fn window(&self) -> Result<Window<f64>> {
        Window::new(
            (self.rho[0], self.rho[1]),
            (self.temperature[0], self.temperature[1]),
        )
    }

    pub fn delta(&self, n: usize) -> Result<MixedTensor<f64>> {
        match &self.delta {
            Some(m) => matrix(m, "delta"),
            None => MixedTensor::zeros(n),
        }
    }

    pub fn settings(&self) -> Result<TraceSettings<f64>> {
        if self.grid.iter().any(|&k| k < 2) {
            return Err(Error::InvalidConfig(
                "coexist grid needs at least 2 nodes per axis".into(),
            ));
        }
        positive(self.tol, "tol")?;
        if let Some(s) = self.step {
            positive(s, "step")?;
        }
        Ok(TraceSettings {
            grid: (self.grid[0], self.grid[1]),
            tol: self.tol,
            step: self.step,
            ..TraceSettings::default()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform {
        #[serde(default)]
        u: f64,
        #[serde(default)]
        v: f64,
        rho: f64,
        temperature: f64,
    },
    /// `u = U sin x cos y`, `v = -U cos x sin y` with the matching pressure.
    TaylorGreen {
        amplitude: f64,
        rho: f64,
        temperature: f64,
    },
    /// `u = U sin y`, `v = 0`.
    ShearWave {
        amplitude: f64,
        rho: f64,
        temperature: f64,
    },
}

impl InitialCondition {
    pub fn reference(&self) -> (f64, f64) {
        match *self {
            InitialCondition::Uniform {
                rho, temperature, ..
            }
            | InitialCondition::TaylorGreen {
                rho, temperature, ..
            }
            | InitialCondition::ShearWave {
                rho, temperature, ..
            } => (rho, temperature),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_end: f64,
    /// Fixed step; when absent the step adapts to `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "one_usize")]
    pub snapshot_every: usize,
    /// State at which the viscosities, `c_p` and `ϰ` are frozen; defaults to
    /// the initial density and temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ref: Option<f64>,
    pub initial: InitialCondition,
}

fn default_cfl() -> f64 {
    MAX_CFL
}

fn one_usize() -> usize {
    1
}

impl SimulateConfig {
    pub fn sim_config(&self) -> Result<SimConfig<f64>> {
        let c = SimConfig {
            grid: Grid::new(self.nx, self.ny, self.lx, self.ly)?,
            time_step: match self.dt {
                Some(dt) => TimeStep::Fixed(dt),
                None => TimeStep::Auto { cfl: self.cfl },
            },
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn reference(&self) -> (f64, f64) {
        let (rho, t) = self.initial.reference();
        (self.rho_ref.unwrap_or(rho), self.t_ref.unwrap_or(t))
    }

    pub fn initial_state(
        &self,
        grid: Grid<f64>,
        model: &CoefficientModel<f64>,
    ) -> Result<SimState<f64>> {
        let s = match self.initial {
            InitialCondition::Uniform {
                u,
                v,
                rho,
                temperature,
            } => SimState::uniform(grid, u, v, rho, temperature),
            InitialCondition::TaylorGreen {
                amplitude,
                rho,
                temperature,
            } => {
                positive(rho, "rho")?;
                positive(temperature, "temperature")?;
                let c2 = model.p.jet(rho, temperature).d_rho;
                positive(c2, "squared sound speed")?;
                SimState::taylor_green(grid, amplitude, rho, temperature, c2)
            }
            InitialCondition::ShearWave {
                amplitude,
                rho,
                temperature,
            } => SimState::shear_wave(grid, amplitude, rho, temperature),
        };
        s.validate()?;
        Ok(s)
    }
}

/// Every field is optional; absent fields keep [`VerifySettings::default`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legendrian_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_lemma3: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<String>,
}

impl VerifyConfig {
    pub fn settings(&self) -> Result<VerifySettings> {
        let mut s = VerifySettings::default();
        if let Some(x) = self.seed {
            s.seed = x;
        }
        let counts = [
            (self.invariant_samples, &mut s.invariant_samples),
            (self.stress_samples, &mut s.stress_samples),
            (self.legendrian_samples, &mut s.legendrian_samples),
            (self.kappa_samples, &mut s.kappa_samples),
        ];
        for (src, dst) in counts {
            if let Some(x) = src {
                *dst = x;
            }
        }
        if let Some([a, b]) = self.grid {
            if a < 2 || b < 2 {
                return Err(Error::InvalidConfig(
                    "verify grid needs at least 2 nodes per axis".into(),
                ));
            }
            s.grid = (a, b);
        }
        if let Some(x) = self.check_lemma3 {
            s.check_lemma3 = x;
        }
        s.faults = self
            .faults
            .iter()
            .map(|k| Fault::from_key(k))
            .collect::<Result<_>>()?;
        Ok(s)
    }
}
