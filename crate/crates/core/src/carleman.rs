//! Numerical checks of the weighted Hardy inequality, the boundary lemma, the
//! conjugated-operator split and the integration-by-parts identities behind the
//! Carleman estimate for `Q = −∂_s² − ∂_x(x^α ∂_x)` on `Z = (−S₀,S₀)×(0,1)`.
//!
//! With `φ = τx^{2−α}/(2−α) − (τ^{γ/3}/ν)s²` and `a = τ^{γ/3}/ν`, the conjugated
//! operator `Q_φ = e^φ Q e^{−φ}` splits as
//! `S_x = P − τ²x^{2−α}`, `S_s = −∂_s² − 4a²s²`, `A_x = 2τx∂_x + τ`, `A_s = −4as∂_s − 2a`.

use crate::error::{LabError, Result};
use crate::io::sig17;
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::spectral::SpectralModel;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanConfig {
    #[serde(with = "sig17")]
    pub alpha: f64,
    /// Half-width `S₀` of the strip in `s`.
    #[serde(with = "sig17")]
    pub s_outer: f64,
    /// Half-width `s₀ < S₀` of the inner strip.
    #[serde(with = "sig17")]
    pub s_inner: f64,
    #[serde(with = "sig17")]
    pub tau: f64,
    #[serde(with = "sig17")]
    pub nu: f64,
    #[serde(with = "sig17")]
    pub gamma: f64,
}

impl CarlemanConfig {
    /// `γ = 2` away from `α = 1`; at `α = 1` use [`CarlemanConfig::with_gamma`].
    pub fn new(alpha: f64, s_outer: f64, s_inner: f64, tau: f64, nu: f64) -> Result<Self> {
        let gamma = if alpha == 1.0 { 1.5 } else { 2.0 };
        Self {
            alpha,
            s_outer,
            s_inner,
            tau,
            nu,
            gamma,
        }
        .validated()
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validated()
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(LabError::AlphaOutOfRange(self.alpha));
        }
        if !(self.s_inner > 0.0 && self.s_inner < self.s_outer && self.tau > 0.0 && self.nu > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "need 0 < s0 < S0 and τ, ν > 0; got s0={}, S0={}, τ={}, ν={}",
                self.s_inner, self.s_outer, self.tau, self.nu
            )));
        }
        let ok = if self.alpha == 1.0 {
            self.gamma > 0.0 && self.gamma < 2.0
        } else {
            self.gamma == 2.0
        };
        if !ok {
            return Err(LabError::InvalidArgument(format!(
                "γ must be 2 for α ≠ 1 and in (0,2) for α = 1; got γ={} at α={}",
                self.gamma, self.alpha
            )));
        }
        Ok(self)
    }

    /// `τ^{γ/3}/ν`.
    pub fn s_rate(&self) -> f64 {
        self.tau.powf(self.gamma / 3.0) / self.nu
    }

    pub fn weight(&self, s: f64, x: f64) -> f64 {
        self.tau * x.powf(2.0 - self.alpha) / (2.0 - self.alpha) - self.s_rate() * s * s
    }
}

/// Values and derivatives of a function on `Z` at one point; `flux = ∂_x(x^α ∂_x v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub vs: f64,
    pub vx: f64,
    pub vss: f64,
    pub flux: f64,
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            vs: self.vs + o.vs,
            vx: self.vx + o.vx,
            vss: self.vss + o.vss,
            flux: self.flux + o.flux,
        }
    }
}

pub trait TestFunction2D: Sync {
    fn jet(&self, s: f64, x: f64) -> Jet;
}

/// `X(x)`, `X′(x)` and `(x^α X′)′(x)`.
pub trait XProfile: Send + Sync {
    fn eval(&self, x: f64) -> (f64, f64, f64);
}

/// `S(s)`, `S′(s)`, `S″(s)`.
pub trait SProfile: Send + Sync {
    fn eval(&self, s: f64) -> (f64, f64, f64);
}

/// `x^p Σ c_k x^k` for the exponent `α` of the flux.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoly {
    pub alpha: f64,
    pub p: f64,
    pub coeffs: Vec<f64>,
}

impl XProfile for PowerPoly {
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (mut v, mut d, mut f) = (0.0, 0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            let e = self.p + k as f64;
            v += c * x.powf(e);
            if e != 0.0 {
                d += c * e * x.powf(e - 1.0);
                let fe = e - 1.0 + self.alpha;
                if fe != 0.0 {
                    f += c * e * fe * x.powf(fe - 1.0);
                }
            }
        }
        (v, d, f)
    }
}

/// Eigenfunction `Φ_j` of a spectral model.
pub struct ModeProfile<'a> {
    pub model: &'a SpectralModel,
    pub j: usize,
}

impl XProfile for ModeProfile<'_> {
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let v = self.model.eval(self.j, x);
        let f = self
            .model
            .flux_derivative(self.j, x)
            .unwrap_or(-self.model.lambda(self.j) * v);
        (v, self.model.deriv(self.j, x), f)
    }
}

/// `Σ (a_k cos(ω_k s) + b_k sin(ω_k s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigProfile {
    pub terms: Vec<(f64, f64, f64)>,
}

impl SProfile for TrigProfile {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        self.terms
            .iter()
            .fold((0.0, 0.0, 0.0), |(v, d, dd), &(a, b, w)| {
                let (sn, cs) = (w * s).sin_cos();
                (
                    v + a * cs + b * sn,
                    d + w * (b * cs - a * sn),
                    dd - w * w * (a * cs + b * sn),
                )
            })
    }
}

/// `sinh(r(s + S₀))/r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinhProfile {
    pub rate: f64,
    pub shift: f64,
}

impl SProfile for SinhProfile {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let z = self.rate * (s + self.shift);
        (z.sinh() / self.rate, z.cosh(), self.rate * z.sinh())
    }
}

pub struct Separable<'a> {
    pub s: Box<dyn SProfile + 'a>,
    pub x: Box<dyn XProfile + 'a>,
}

impl TestFunction2D for Separable<'_> {
    fn jet(&self, s: f64, x: f64) -> Jet {
        let (a, a1, a2) = self.s.eval(s);
        let (b, b1, bf) = self.x.eval(x);
        Jet {
            v: a * b,
            vs: a1 * b,
            vx: a * b1,
            vss: a2 * b,
            flux: a * bf,
        }
    }
}

pub struct SumOf<'a>(pub Vec<Separable<'a>>);

impl TestFunction2D for SumOf<'_> {
    fn jet(&self, s: f64, x: f64) -> Jet {
        self.0
            .iter()
            .fold(Jet::default(), |acc, t| acc + t.jet(s, x))
    }
}

/// `v ≡ 0`.
pub struct Zero;

impl TestFunction2D for Zero {
    fn jet(&self, _s: f64, _x: f64) -> Jet {
        Jet::default()
    }
}

/// `e^{φ − shift} u`, with derivatives from those of `u`; `shift` keeps values representable.
pub struct Conjugated<'a, T: TestFunction2D> {
    pub inner: &'a T,
    pub config: CarlemanConfig,
    pub shift: f64,
}

impl<T: TestFunction2D> TestFunction2D for Conjugated<'_, T> {
    fn jet(&self, s: f64, x: f64) -> Jet {
        let c = &self.config;
        let u = self.inner.jet(s, x);
        let a = c.s_rate();
        let e = (c.weight(s, x) - self.shift).exp();
        let ps = -2.0 * a * s;
        let px = c.tau * x.powf(1.0 - c.alpha);
        let x2a = x.powf(2.0 - c.alpha);
        Jet {
            v: e * u.v,
            vs: e * (u.vs + ps * u.v),
            vx: e * (u.vx + px * u.v),
            vss: e * (u.vss + 2.0 * ps * u.vs + (ps * ps - 2.0 * a) * u.v),
            flux: e * (u.flux + 2.0 * c.tau * x * u.vx + c.tau * u.v + c.tau * c.tau * x2a * u.v),
        }
    }
}

/// The four split parts applied to a jet: `(S_x v, S_s v, A_x v, A_s v)`.
pub fn split_parts(c: &CarlemanConfig, s: f64, x: f64, j: &Jet) -> [f64; 4] {
    let a = c.s_rate();
    let x2a = x.powf(2.0 - c.alpha);
    [
        -j.flux - c.tau * c.tau * x2a * j.v,
        -j.vss - 4.0 * a * a * s * s * j.v,
        2.0 * c.tau * x * j.vx + c.tau * j.v,
        -4.0 * a * s * j.vs - 2.0 * a * j.v,
    ]
}

/// Tensor rule on `Z`: Gauss–Legendre panels in `s` times a graded rule in `x`.
#[derive(Debug, Clone)]
pub struct StripRule {
    pub s_nodes: Vec<f64>,
    pub s_weights: Vec<f64>,
    pub x_rule: QuadratureRule,
    pub resolution: usize,
}

impl StripRule {
    /// `resolution` panels in each direction, 10 points per panel.
    pub fn new(c: &CarlemanConfig, resolution: usize) -> Result<Self> {
        let breaks: Vec<f64> = (0..=resolution)
            .map(|k| -c.s_outer + 2.0 * c.s_outer * k as f64 / resolution as f64)
            .collect();
        let s = QuadratureRule::composite(&breaks, 10);
        let grading = (2.0 / (2.0 - c.alpha)).max(1.0);
        let x_rule = QuadratureRule::graded(0.0, 1.0, grading, resolution, 10, 30)?;
        Ok(Self {
            s_nodes: s.nodes,
            s_weights: s.weights,
            x_rule,
            resolution,
        })
    }
}

/// Volume integrals and boundary brackets of a test function on one rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StripIntegrals {
    #[serde(with = "sig17")]
    pub v_sq: f64,
    #[serde(with = "sig17")]
    pub flux_energy: f64,
    #[serde(with = "sig17")]
    pub weighted_v_sq: f64,
    #[serde(with = "sig17")]
    pub vs_sq: f64,
    #[serde(with = "sig17")]
    pub s2_v_sq: f64,
    /// `(S_x v, A_x v)`, `(S_s v, A_s v)`, `(S_s v, A_x v)`, `(S_x v, A_s v)` by direct quadrature.
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub products: [f64; 4],
    #[serde(with = "sig17")]
    pub q_phi_sq: f64,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub b: [f64; 4],
    /// Volume parts of the right sides, in the order of `products`.
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub volume: [f64; 4],
    /// `∫|S_• v||A_• v|` plus the absolute values of every term of each identity.
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub scale: [f64; 4],
}

pub fn strip_integrals<T: TestFunction2D + ?Sized>(
    c: &CarlemanConfig,
    v: &T,
    rule: &StripRule,
) -> StripIntegrals {
    let (al, tau, a) = (c.alpha, c.tau, c.s_rate());
    let mut r = StripIntegrals::default();
    for (&s, &ws) in rule.s_nodes.iter().zip(&rule.s_weights) {
        for (&x, &wx) in rule.x_rule.nodes.iter().zip(&rule.x_rule.weights) {
            let w = ws * wx;
            let j = v.jet(s, x);
            let p = split_parts(c, s, x, &j);
            r.v_sq += w * j.v * j.v;
            r.flux_energy += w * x.powf(al) * j.vx * j.vx;
            r.weighted_v_sq += w * x.powf(2.0 - al) * j.v * j.v;
            r.vs_sq += w * j.vs * j.vs;
            r.s2_v_sq += w * s * s * j.v * j.v;
            r.products[0] += w * p[0] * p[2];
            r.products[1] += w * p[1] * p[3];
            r.products[2] += w * p[1] * p[2];
            r.products[3] += w * p[0] * p[3];
            for (k, (i, j)) in [(0, 2), (1, 3), (1, 2), (0, 3)].into_iter().enumerate() {
                r.scale[k] += w * (p[i] * p[j]).abs();
            }
            let q: f64 = p.iter().sum();
            r.q_phi_sq += w * q * q;
        }
    }
    // Brackets [·]_{x=0}^{x=1} integrated in s; terms carry positive powers of x at 0.
    let xb = |f: &dyn Fn(f64, f64, &Jet) -> f64| -> f64 {
        rule.s_nodes
            .iter()
            .zip(&rule.s_weights)
            .map(|(&s, &w)| w * (f(s, 1.0, &v.jet(s, 1.0)) - f(s, 0.0, &v.jet(s, 0.0))))
            .sum()
    };
    // Brackets [·]_{s=−S₀}^{s=S₀} integrated in x.
    let sb = |f: &dyn Fn(f64, f64, &Jet) -> f64| -> f64 {
        let s0 = c.s_outer;
        rule.x_rule
            .nodes
            .iter()
            .zip(&rule.x_rule.weights)
            .map(|(&x, &w)| w * (f(s0, x, &v.jet(s0, x)) - f(-s0, x, &v.jet(-s0, x))))
            .sum()
    };
    let terms0 = [
        -tau * xb(&|_, x, j| x.powf(al + 1.0) * j.vx * j.vx),
        -tau * xb(&|_, x, j| x.powf(al) * j.v * j.vx),
        -tau.powi(3) * xb(&|_, x, j| x.powf(3.0 - al) * j.v * j.v),
    ];
    let terms1 = [
        2.0 * a * sb(&|s, _, j| s * j.vs * j.vs),
        2.0 * a * sb(&|_, _, j| j.v * j.vs),
        8.0 * a.powi(3) * sb(&|s, _, j| s.powi(3) * j.v * j.v),
    ];
    let terms2 = [
        tau * xb(&|_, x, j| x * j.vs * j.vs),
        -2.0 * tau * sb(&|_, x, j| x * j.vs * j.vx),
        -tau * sb(&|_, _, j| j.v * j.vs),
        -4.0 * tau * a * a * xb(&|s, x, j| s * s * x * j.v * j.v),
    ];
    let terms3 = [
        4.0 * a * xb(&|s, x, j| x.powf(al) * s * j.vx * j.vs),
        -2.0 * a * sb(&|s, x, j| x.powf(al) * s * j.vx * j.vx),
        2.0 * a * xb(&|_, x, j| x.powf(al) * j.v * j.vx),
        2.0 * a * tau * tau * sb(&|s, x, j| x.powf(2.0 - al) * s * j.v * j.v),
    ];
    let vol0 = [
        tau * (2.0 - al) * r.flux_energy,
        tau.powi(3) * (2.0 - al) * r.weighted_v_sq,
    ];
    let vol1 = [-4.0 * a * r.vs_sq, -16.0 * a.powi(3) * r.s2_v_sq];
    r.b = [
        terms0.iter().sum(),
        terms1.iter().sum(),
        terms2.iter().sum(),
        terms3.iter().sum(),
    ];
    r.volume = [vol0.iter().sum(), vol1.iter().sum(), 0.0, 0.0];
    let abs = |xs: &[f64]| xs.iter().map(|t| t.abs()).sum::<f64>();
    r.scale[0] += abs(&terms0) + abs(&vol0);
    r.scale[1] += abs(&terms1) + abs(&vol1);
    r.scale[2] += abs(&terms2);
    r.scale[3] += abs(&terms3);
    r
}

impl StripIntegrals {
    /// Relative residuals of the four identities.
    pub fn residuals(&self) -> [f64; 4] {
        std::array::from_fn(|k| {
            let d = (self.products[k] - self.volume[k] - self.b[k]).abs();
            if self.scale[k] == 0.0 {
                0.0
            } else {
                d / self.scale[k]
            }
        })
    }

    /// `τ^γ‖v‖² + τ∫x^α|∂_x v|² + τ³∫x^{2−α}|v|² + 2(B₀+B₁+B₂+B₃)`.
    pub fn carleman_lhs(&self, c: &CarlemanConfig) -> f64 {
        c.tau.powf(c.gamma) * self.v_sq
            + c.tau * self.flux_energy
            + c.tau.powi(3) * self.weighted_v_sq
            + 2.0 * self.b.iter().sum::<f64>()
    }
}

pub const IBP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpReport {
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub residuals: [f64; 4],
    pub resolution: usize,
    pub doublings: usize,
    /// Largest relative change of the direct products under the last doubling.
    #[serde(with = "sig17")]
    pub refinement_change: f64,
    pub under_resolved: bool,
    pub holds: bool,
}

/// Evaluates the four identities, doubling the rule up to three times until all
/// residuals fall below [`IBP_TOLERANCE`].
pub fn check_ibp_identities<T: TestFunction2D + ?Sized>(
    c: &CarlemanConfig,
    v: &T,
    base_resolution: usize,
) -> Result<IbpReport> {
    let mut res = base_resolution.max(1);
    let mut prev: Option<StripIntegrals> = None;
    let mut doublings = 0;
    loop {
        let cur = strip_integrals(c, v, &StripRule::new(c, res)?);
        let residuals = cur.residuals();
        let change = prev.map_or(f64::NAN, |p| {
            (0..4)
                .map(|k| {
                    (cur.products[k] - p.products[k]).abs() / cur.scale[k].max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max)
        });
        let ok = residuals.iter().all(|&r| r < IBP_TOLERANCE);
        if ok || doublings == 3 {
            let under = !ok || change > IBP_TOLERANCE;
            return Ok(IbpReport {
                residuals,
                resolution: res,
                doublings,
                refinement_change: change,
                under_resolved: under,
                holds: ok,
            });
        }
        prev = Some(cur);
        res *= 2;
        doublings += 1;
    }
}

/// Fits `(S_x v, A_x v)` as `c₁τ + c₃τ³` from `τ` and `2τ`, with the coefficients
/// predicted by the identity (`(c₁, c₃, predicted c₁, predicted c₃)`).
pub fn tau_scaling_fit<T: TestFunction2D + ?Sized>(
    c: &CarlemanConfig,
    v: &T,
    resolution: usize,
) -> Result<[f64; 4]> {
    let rule = StripRule::new(c, resolution)?;
    let c2 = c.with_tau(2.0 * c.tau)?;
    let (p1, p2) = (
        strip_integrals(c, v, &rule).products[0],
        strip_integrals(&c2, v, &rule).products[0],
    );
    let t = c.tau;
    // p1 = c1 t + c3 t³, p2 = 2 c1 t + 8 c3 t³.
    let c3 = (p2 - 2.0 * p1) / (6.0 * t.powi(3));
    let c1 = (p1 - c3 * t.powi(3)) / t;
    let r = strip_integrals(c, v, &rule);
    let al = c.alpha;
    let xb = |f: &dyn Fn(f64, &Jet) -> f64| -> f64 {
        rule.s_nodes
            .iter()
            .zip(&rule.s_weights)
            .map(|(&s, &w)| w * (f(1.0, &v.jet(s, 1.0)) - f(0.0, &v.jet(s, 0.0))))
            .sum()
    };
    let pred1 = (2.0 - al) * r.flux_energy
        - xb(&|x, j| x.powf(al + 1.0) * j.vx * j.vx)
        - xb(&|x, j| x.powf(al) * j.v * j.vx);
    let pred3 = (2.0 - al) * r.weighted_v_sq - xb(&|x, j| x.powf(3.0 - al) * j.v * j.v);
    Ok([c1, c3, pred1, pred3])
}

/// Boundary-compliant separable test functions: trigonometric in `s`, polynomial
/// in `x` with `X(1) = 0`, and `X(0) = 0` (plus a vanishing slope, so that
/// `Pv ∈ L²`) when `α < 1`.
pub fn random_test_function<R: Rng>(rng: &mut R, alpha: f64, s_outer: f64) -> Separable<'static> {
    let n_terms = rng.gen_range(1..=3);
    let terms = (0..n_terms)
        .map(|k| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                (k as f64 + rng.gen_range(0.2..1.0)) * std::f64::consts::PI / (2.0 * s_outer),
            )
        })
        .collect();
    let p = if alpha < 1.0 { 2.0 } else { 0.0 };
    let deg = rng.gen_range(0..=3);
    let mut q: Vec<f64> = std::iter::once(1.0)
        .chain((0..deg).map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    // Multiply by (1 − x).
    q.push(0.0);
    for k in (1..q.len()).rev() {
        q[k] -= q[k - 1];
    }
    Separable {
        s: Box::new(TrigProfile { terms }),
        x: Box::new(PowerPoly {
            alpha,
            p,
            coeffs: q,
        }),
    }
}

/// `cos(πs/(2S₀)) · x(1−x)`.
pub fn reference_test_function(alpha: f64, s_outer: f64) -> Separable<'static> {
    Separable {
        s: Box::new(TrigProfile {
            terms: vec![(1.0, 0.0, std::f64::consts::PI / (2.0 * s_outer))],
        }),
        x: Box::new(PowerPoly {
            alpha,
            p: 1.0,
            coeffs: vec![1.0, -1.0],
        }),
    }
}

/// `Σ_j c_j sinh(√λ_j(s+S₀))/√λ_j Φ_j(x)`, which satisfies `Qu = 0`.
pub fn kernel_function<'a>(model: &'a SpectralModel, coeffs: &[f64], s_outer: f64) -> SumOf<'a> {
    SumOf(
        coeffs
            .iter()
            .enumerate()
            .map(|(j, &cj)| {
                let r = model.lambda(j).sqrt();
                Separable {
                    s: Box::new(ScaledSinh(
                        cj,
                        SinhProfile {
                            rate: r,
                            shift: s_outer,
                        },
                    )),
                    x: Box::new(ModeProfile { model, j }),
                }
            })
            .collect(),
    )
}

struct ScaledSinh(f64, SinhProfile);

impl SProfile for ScaledSinh {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let (a, b, c) = self.1.eval(s);
        (self.0 * a, self.0 * b, self.0 * c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugationReport {
    /// `‖Q_φ(e^φu) − e^φ Qu‖ / (‖e^φ ∂_s²u‖ + ‖e^φ Pu‖)`.
    #[serde(with = "sig17")]
    pub split_relative: f64,
    /// `‖Q_φ(e^φu)‖` relative to the same scale.
    #[serde(with = "sig17")]
    pub q_phi_relative: f64,
}

/// Applies the split operator to `e^{φ}u` and compares with `e^φ Qu`.
pub fn check_conjugation<T: TestFunction2D + ?Sized>(
    c: &CarlemanConfig,
    u: &T,
    resolution: usize,
) -> Result<ConjugationReport> {
    let rule = StripRule::new(c, resolution)?;
    let shift = c.tau / (2.0 - c.alpha);
    let (mut diff, mut qphi, mut scale_a, mut scale_b) = (0.0, 0.0, 0.0, 0.0);
    for (&s, &ws) in rule.s_nodes.iter().zip(&rule.s_weights) {
        for (&x, &wx) in rule.x_rule.nodes.iter().zip(&rule.x_rule.weights) {
            let w = ws * wx;
            let ju = u.jet(s, x);
            let e = (c.weight(s, x) - shift).exp();
            let ev = conjugated_jet(c, &ju, s, x, e);
            let q: f64 = split_parts(c, s, x, &ev).iter().sum();
            let direct = e * (-ju.vss - ju.flux);
            diff += w * (q - direct).powi(2);
            qphi += w * q * q;
            scale_a += w * (e * ju.vss).powi(2);
            scale_b += w * (e * ju.flux).powi(2);
        }
    }
    let scale = scale_a.sqrt() + scale_b.sqrt();
    if scale == 0.0 {
        return Ok(ConjugationReport {
            split_relative: 0.0,
            q_phi_relative: 0.0,
        });
    }
    Ok(ConjugationReport {
        split_relative: diff.sqrt() / scale,
        q_phi_relative: qphi.sqrt() / scale,
    })
}

fn conjugated_jet(c: &CarlemanConfig, u: &Jet, s: f64, x: f64, e: f64) -> Jet {
    struct One(Jet);
    impl TestFunction2D for One {
        fn jet(&self, _: f64, _: f64) -> Jet {
            self.0
        }
    }
    let inner = One(*u);
    let shift = c.weight(s, x) - e.ln();
    Conjugated {
        inner: &inner,
        config: *c,
        shift,
    }
    .jet(s, x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanProbe {
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub taus: Vec<f64>,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub lhs: Vec<f64>,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub rhs: Vec<f64>,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub ratio: Vec<f64>,
    pub knee_index: usize,
    /// Largest `c(τ_j) / median{c(τ_i) : knee ≤ i ≤ j}`.
    #[serde(with = "sig17")]
    pub worst_growth: f64,
    #[serde(with = "sig17")]
    pub max_beyond_knee: f64,
    pub bounded: bool,
}

/// Ratio `c(τ) = LHS/‖Q_φ v‖²` along an increasing `τ` grid.
///
/// Below the knee the boundary terms dominate and the left side is negative; the
/// knee is the first grid point from which the left side stays positive. Past it,
/// `c(τ_j)` must not exceed twice the median of `c` over `[τ_knee, τ_j]`, so steady
/// growth of any power of `τ` is caught while decay is allowed.
pub fn carleman_probe<T: TestFunction2D + ?Sized>(
    base: &CarlemanConfig,
    v: &T,
    taus: &[f64],
    resolution: usize,
) -> Result<CarlemanProbe> {
    if taus.is_empty() || taus.windows(2).any(|p| p[1] <= p[0]) {
        return Err(LabError::InvalidArgument(
            "τ grid must be nonempty and increasing".into(),
        ));
    }
    let mut out = CarlemanProbe {
        taus: taus.to_vec(),
        lhs: vec![],
        rhs: vec![],
        ratio: vec![],
        knee_index: 0,
        worst_growth: 0.0,
        max_beyond_knee: 0.0,
        bounded: true,
    };
    for &t in taus {
        let c = base.with_tau(t)?;
        let r = strip_integrals(&c, v, &StripRule::new(&c, resolution)?);
        let (l, q) = (r.carleman_lhs(&c), r.q_phi_sq);
        out.lhs.push(l);
        out.rhs.push(q);
        out.ratio
            .push(if q == 0.0 && l == 0.0 { 0.0 } else { l / q });
    }
    let n = taus.len();
    out.knee_index = (0..n)
        .rev()
        .take_while(|&i| out.lhs[i] >= 0.0)
        .last()
        .unwrap_or(n - 1);
    let tail = &out.ratio[out.knee_index..];
    for j in 0..tail.len() {
        let mut seen = tail[..=j].to_vec();
        seen.sort_by(f64::total_cmp);
        let median = seen[seen.len() / 2];
        if median > 0.0 {
            out.worst_growth = out.worst_growth.max(tail[j] / median);
        }
    }
    out.max_beyond_knee = tail.iter().copied().fold(0.0, f64::max);
    out.bounded = out.ratio.iter().all(|r| r.is_finite()) && out.worst_growth <= 2.0;
    Ok(out)
}

/// `φ` increasing in `x` and decreasing in `|s|` on an `n × n` grid.
pub fn weight_sign_structure(c: &CarlemanConfig, n: usize) -> bool {
    let xs: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let ss: Vec<f64> = (0..=n).map(|k| c.s_outer * k as f64 / n as f64).collect();
    let inc_x = ss
        .iter()
        .all(|&s| xs.windows(2).all(|p| c.weight(s, p[1]) > c.weight(s, p[0])));
    let dec_s = xs.iter().all(|&x| {
        ss.windows(2).all(|p| {
            c.weight(p[1], x) < c.weight(p[0], x) && c.weight(-p[1], x) < c.weight(-p[0], x)
        })
    });
    inc_x && dec_s
}

// ---------------------------------------------------------------------------
// Weighted Hardy inequality and the boundary lemma.

/// `ϑ(x) = x^p Σ c_k x^k`; both Hardy integrals have closed forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardySample {
    #[serde(with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub coeffs: Vec<f64>,
}

fn poly_square(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; (2 * c.len()).saturating_sub(1)];
    for (i, a) in c.iter().enumerate() {
        for (j, b) in c.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

impl HardySample {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * x.powf(self.p + k as f64))
            .sum()
    }

    /// `(∫x^{α−2}ϑ², ∫x^α ϑ′²)`; infinite when an integral diverges.
    pub fn integrals(&self, alpha: f64) -> (f64, f64) {
        let slope: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (self.p + k as f64))
            .collect();
        let integrate = |sq: Vec<f64>| -> f64 {
            sq.iter()
                .enumerate()
                .filter(|(_, d)| **d != 0.0)
                .map(|(m, d)| {
                    let e = alpha + 2.0 * self.p + m as f64 - 1.0;
                    if e > 0.0 {
                        d / e
                    } else {
                        f64::INFINITY
                    }
                })
                .sum()
        };
        (
            integrate(poly_square(&self.coeffs)),
            integrate(poly_square(&slope)),
        )
    }

    /// Hypotheses of the inequality: `ϑ(0) = 0` for `α < 1`, `ϑ(1) = 0` for `α > 1`,
    /// and a finite weighted energy.
    pub fn admissibility(&self, alpha: f64) -> std::result::Result<(), String> {
        let (_, rhs) = self.integrals(alpha);
        if !rhs.is_finite() {
            return Err("weighted energy ∫x^α|ϑ′|² diverges".into());
        }
        if alpha < 1.0 && !(self.p > 0.0 || self.coeffs.first() == Some(&0.0)) {
            return Err("ϑ(0) ≠ 0 with α < 1".into());
        }
        if alpha > 1.0 && self.coeffs.iter().sum::<f64>().abs() > 1e-14 {
            return Err("ϑ(1) ≠ 0 with α > 1".into());
        }
        if alpha == 1.0 {
            return Err("no boundary hypothesis makes the inequality hold at α = 1".into());
        }
        Ok(())
    }
}

/// Constant of the displayed inequality, `4/(2−α)²`.
pub fn hardy_displayed_constant(alpha: f64) -> f64 {
    4.0 / (2.0 - alpha).powi(2)
}

/// Sharp constant `4/(1−α)²`, attained in the limit by `x^{(1−α)/2}`.
pub fn hardy_sharp_constant(alpha: f64) -> f64 {
    4.0 / (1.0 - alpha).powi(2)
}

/// Half power-law profiles `x^p q(x)` with `p` above the integrability threshold
/// `(1−α)/2`, half smooth bumps (`p` = 1 for `α < 1`, `p` = 0 for `α > 1`); `q(1) = 0`
/// when `α > 1`.
pub fn random_hardy_sample<R: Rng>(rng: &mut R, alpha: f64, power_law: bool) -> HardySample {
    let threshold = (1.0 - alpha) / 2.0;
    let p = if power_law {
        threshold + rng.gen_range(0.02..2.0)
    } else if alpha < 1.0 {
        1.0
    } else {
        0.0
    };
    let deg = rng.gen_range(0..=3);
    let mut q: Vec<f64> = std::iter::once(1.0)
        .chain((0..deg).map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    if alpha > 1.0 {
        q.push(0.0);
        for k in (1..q.len()).rev() {
            q[k] -= q[k - 1];
        }
    }
    HardySample { p, coeffs: q }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyReport {
    #[serde(with = "sig17")]
    pub alpha: f64,
    pub checked: usize,
    pub skipped: Vec<String>,
    #[serde(with = "sig17")]
    pub displayed_constant: f64,
    #[serde(with = "sig17")]
    pub sharp_constant: f64,
    pub violations_displayed: usize,
    pub violations_sharp: usize,
    /// Largest `∫x^{α−2}ϑ² / ∫x^αϑ′²` over the checked samples.
    #[serde(with = "sig17")]
    pub max_ratio: f64,
    /// The sample attaining `max_ratio`.
    pub worst: Option<HardySample>,
}

pub fn check_hardy(alpha: f64, samples: &[HardySample]) -> Result<HardyReport> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(LabError::AlphaOutOfRange(alpha));
    }
    let mut r = HardyReport {
        alpha,
        checked: 0,
        skipped: vec![],
        displayed_constant: hardy_displayed_constant(alpha),
        sharp_constant: hardy_sharp_constant(alpha),
        violations_displayed: 0,
        violations_sharp: 0,
        max_ratio: 0.0,
        worst: None,
    };
    for (i, s) in samples.iter().enumerate() {
        if let Err(why) = s.admissibility(alpha) {
            r.skipped.push(format!("sample {i}: {why}"));
            continue;
        }
        let (lhs, rhs) = s.integrals(alpha);
        r.checked += 1;
        let tol = 1.0 + 1e-12;
        if lhs > r.displayed_constant * rhs * tol {
            r.violations_displayed += 1;
        }
        if lhs > r.sharp_constant * rhs * tol {
            r.violations_sharp += 1;
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        if ratio > r.max_ratio {
            r.max_ratio = ratio;
            r.worst = Some(s.clone());
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyFailure {
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub exponents: Vec<f64>,
    #[serde(serialize_with = "sig17::vec::serialize")]
    pub ratios: Vec<f64>,
    #[serde(with = "sig17")]
    pub reference_alpha: f64,
    #[serde(with = "sig17")]
    pub reference_constant: f64,
    pub exceeds_tenfold: bool,
    pub increasing: bool,
}

/// At `α = 1` the profiles `x^p`, `p = 2^{−k}`, have ratio `1/p²`, unbounded as `p → 0`.
pub fn hardy_failure_at_one(levels: usize, reference_alpha: f64) -> HardyFailure {
    let exponents: Vec<f64> = (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect();
    let ratios: Vec<f64> = exponents
        .iter()
        .map(|&p| {
            let (l, r) = HardySample {
                p,
                coeffs: vec![1.0],
            }
            .integrals(1.0);
            l / r
        })
        .collect();
    let reference_constant = hardy_displayed_constant(reference_alpha);
    HardyFailure {
        exceeds_tenfold: ratios.iter().any(|&r| r > 10.0 * reference_constant),
        increasing: ratios.windows(2).all(|p| p[1] > p[0]),
        exponents,
        ratios,
        reference_alpha,
        reference_constant,
    }
}

/// `x ϑ(x)²` at the finest nodes `(i/n)^g`, `i = 1..=k`, of a graded mesh; the
/// boundary lemma asks for this to vanish as `x → 0`.
pub fn boundary_tail(
    values: impl Fn(f64) -> f64,
    grading: f64,
    n: usize,
    k: usize,
) -> (Vec<f64>, bool) {
    let tail: Vec<f64> = (1..=k)
        .map(|i| {
            let x = (i as f64 / n as f64).powf(grading);
            x * values(x).powi(2)
        })
        .collect();
    let monotone = tail.windows(2).all(|p| p[0] <= p[1]);
    let small = tail[0] < tail[k - 1];
    (tail, monotone && small)
}

/// Gauss–Legendre cross-check of the closed-form Hardy integrals on `[δ, 1]`.
pub fn hardy_quadrature(sample: &HardySample, alpha: f64, delta: f64) -> (f64, f64) {
    let (gx, gw) = gauss_legendre(20);
    let mut breaks = vec![1.0];
    while *breaks.last().unwrap() > delta {
        let b = breaks.last().unwrap() * 0.5;
        breaks.push(b.max(delta));
    }
    let (mut l, mut r) = (0.0, 0.0);
    for p in breaks.windows(2) {
        let (hi, lo) = (p[0], p[1]);
        for (x, w) in gx.iter().zip(&gw) {
            let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
            let wt = 0.5 * (hi - lo) * w;
            let v = sample.eval(t);
            let d: f64 = sample
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (sample.p + k as f64) * t.powf(sample.p + k as f64 - 1.0))
                .sum();
            l += wt * t.powf(alpha - 2.0) * v * v;
            r += wt * t.powf(alpha) * d * d;
        }
    }
    (l, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg(alpha: f64, tau: f64) -> CarlemanConfig {
        CarlemanConfig::new(alpha, 1.0, 0.5, tau, 50.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(CarlemanConfig::new(0.5, 1.0, 1.5, 1.0, 1.0).is_err());
        assert!(CarlemanConfig::new(2.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert_eq!(
            CarlemanConfig::new(1.0, 1.0, 0.5, 1.0, 1.0).unwrap().gamma,
            1.5
        );
        assert!(cfg(0.5, 1.0).with_gamma(1.5).is_err());
    }

    #[test]
    fn hardy_closed_form_example() {
        let s = HardySample {
            p: 1.0,
            coeffs: vec![1.0, -1.0],
        };
        let (l, r) = s.integrals(0.5);
        // ∫x^{1/2}(1−x)² and ∫x^{1/2}(1−2x)².
        assert!((l - (2.0 / 3.0 - 4.0 / 5.0 + 2.0 / 7.0)).abs() < 1e-14);
        assert!((r - (2.0 / 3.0 - 8.0 / 5.0 + 8.0 / 7.0)).abs() < 1e-14);
        assert!(l < hardy_displayed_constant(0.5) * r);
        let (ql, qr) = hardy_quadrature(&s, 0.5, 1e-30);
        assert!((ql - l).abs() < 1e-9 && (qr - r).abs() < 1e-9);
    }

    #[test]
    fn hardy_zero_and_power_law() {
        let z = check_hardy(
            0.5,
            &[HardySample {
                p: 1.0,
                coeffs: vec![0.0],
            }],
        )
        .unwrap();
        assert_eq!(
            (z.checked, z.violations_displayed, z.max_ratio),
            (1, 0, 0.0)
        );
        // x^0.4 at α = 1/2: ratio 1/p² = 6.25 lies between the two constants.
        let r = check_hardy(
            0.5,
            &[HardySample {
                p: 0.4,
                coeffs: vec![1.0],
            }],
        )
        .unwrap();
        assert!((r.max_ratio - 6.25).abs() < 1e-12);
        assert_eq!((r.violations_displayed, r.violations_sharp), (1, 0));
    }

    #[test]
    fn hardy_sharp_constant_holds_on_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for alpha in [0.5, 1.5] {
            let samples: Vec<_> = (0..100)
                .map(|i| random_hardy_sample(&mut rng, alpha, i % 2 == 0))
                .collect();
            let r = check_hardy(alpha, &samples).unwrap();
            assert_eq!(r.checked, 100);
            assert_eq!(r.violations_sharp, 0);
        }
    }

    #[test]
    fn hardy_inadmissible_samples_are_skipped() {
        let r = check_hardy(
            0.5,
            &[HardySample {
                p: 0.0,
                coeffs: vec![1.0],
            }],
        )
        .unwrap();
        assert_eq!((r.checked, r.skipped.len()), (0, 1));
        let f = hardy_failure_at_one(8, 0.999);
        assert!(f.exceeds_tenfold && f.increasing);
    }

    #[test]
    fn boundary_tail_vanishes() {
        let s = HardySample {
            p: 0.05,
            coeffs: vec![1.0, -1.0],
        };
        let (tail, ok) = boundary_tail(|x| s.eval(x), 2.0, 1024, 8);
        assert!(ok && tail[0] < 1e-5);
    }

    #[test]
    fn ibp_identities_reference_function() {
        for alpha in [0.5, 1.5] {
            let c = cfg(alpha, 10.0);
            let r = check_ibp_identities(&c, &reference_test_function(alpha, 1.0), 4).unwrap();
            assert!(r.holds, "{alpha}: {r:?}");
        }
        let r = check_ibp_identities(&cfg(0.5, 10.0), &Zero, 2).unwrap();
        assert_eq!(r.residuals, [0.0; 4]);
    }

    #[test]
    fn tau_scaling_matches_identity() {
        let c = cfg(0.5, 10.0);
        let [c1, c3, p1, p3] = tau_scaling_fit(&c, &reference_test_function(0.5, 1.0), 8).unwrap();
        assert!((c1 - p1).abs() < 1e-6 * p1.abs() && (c3 - p3).abs() < 1e-8 * p3.abs());
    }

    #[test]
    fn conjugation_of_random_function() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = cfg(1.5, 3.0);
        let u = random_test_function(&mut rng, 1.5, 1.0);
        let r = check_conjugation(&c, &u, 4).unwrap();
        assert!(r.split_relative < 1e-12, "{r:?}");
    }

    #[test]
    fn weight_signs() {
        assert!(weight_sign_structure(&cfg(0.5, 10.0), 20));
        assert!(weight_sign_structure(&cfg(1.5, 10.0), 20));
    }

    #[test]
    fn probe_of_zero_and_smooth_function() {
        let c = cfg(1.5, 10.0);
        let z = carleman_probe(&c, &Zero, &[10.0, 100.0], 2).unwrap();
        assert!(z.ratio.iter().all(|&r| r == 0.0) && z.bounded);
        let taus: Vec<f64> = (0..=8).map(|k| 10f64.powf(1.0 + k as f64 / 4.0)).collect();
        let p = carleman_probe(&c, &reference_test_function(1.5, 1.0), &taus, 4).unwrap();
        assert!(p.bounded, "{p:?}");
        assert!(carleman_probe(&c, &Zero, &[10.0, 5.0], 2).is_err());
    }

    #[test]
    fn kernel_functions_are_annihilated() {
        use crate::spectral::{build_analytic_model, DegenerateOperator};
        let m = build_analytic_model(DegenerateOperator::new(0.5).unwrap(), 6).unwrap();
        let u = kernel_function(&m, &[1.0, -0.5, 0.25, 0.3, -0.2], 1.0);
        let r = check_conjugation(&cfg(0.5, 5.0), &u, 4).unwrap();
        assert!(r.q_phi_relative < 1e-8, "{r:?}");
    }
}
