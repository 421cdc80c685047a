//! Periodic habitats: coefficient fields, dispersal kernel, and the
//! hypothesis checks that only need coefficient values.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{self, Config};
use crate::expr::{self, EvalContext, Expr, ExprError};

#[derive(Debug, Error)]
pub enum HabitatError {
    #[error("config error: {0}")]
    Config(String),
    #[error("(HB0) violated: {what} at t={t}, x={x} (value {value})")]
    HypothesisHB0Violated {
        what: String,
        t: f64,
        x: f64,
        value: f64,
    },
    #[error("coefficient {coef}: {source}")]
    Eval {
        coef: Coef,
        #[source]
        source: ExprError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coef {
    A1,
    B1,
    C1,
    A2,
    B2,
    C2,
}

impl Coef {
    pub const ALL: [Coef; 6] = [Coef::A1, Coef::B1, Coef::C1, Coef::A2, Coef::B2, Coef::C2];

    pub fn name(self) -> &'static str {
        match self {
            Coef::A1 => "a1",
            Coef::B1 => "b1",
            Coef::C1 => "c1",
            Coef::A2 => "a2",
            Coef::B2 => "b2",
            Coef::C2 => "c2",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Coef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelShape {
    Uniform,
    Triangle,
    CosineBump,
}

impl KernelShape {
    pub fn parse(name: &str) -> Option<KernelShape> {
        match name {
            "uniform" => Some(KernelShape::Uniform),
            "triangle" => Some(KernelShape::Triangle),
            "cosine-bump" => Some(KernelShape::CosineBump),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelShape::Uniform => "uniform",
            KernelShape::Triangle => "triangle",
            KernelShape::CosineBump => "cosine-bump",
        }
    }
}

/// Even, compactly supported probability density on `(-radius, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub radius: f64,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite(), "kernel radius must be positive");
        Self { shape, radius }
    }

    pub fn uniform(radius: f64) -> Self {
        Self::new(KernelShape::Uniform, radius)
    }

    pub fn density(&self, z: f64) -> f64 {
        let r = self.radius;
        let a = z.abs();
        if a >= r {
            return 0.0;
        }
        match self.shape {
            KernelShape::Uniform => 0.5 / r,
            KernelShape::Triangle => (1.0 - a / r) / r,
            KernelShape::CosineBump => (1.0 + (std::f64::consts::PI * a / r).cos()) / (2.0 * r),
        }
    }

    /// Points where the density fails to be smooth, inside the support.
    pub(crate) fn kinks(&self) -> &'static [f64] {
        match self.shape {
            KernelShape::Triangle => &[0.0],
            _ => &[],
        }
    }
}

/// A periodic habitat for the two-species system.
#[derive(Debug, Clone)]
pub struct HabitatSpec {
    coefs: [Expr; 6],
    sources: [String; 6],
    pub period_t: f64,
    pub period_x: f64,
    pub kernel: KernelSpec,
    pub params: BTreeMap<String, f64>,
}

/// Interval `[lo, hi]` of sampled values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    fn empty() -> Self {
        Range {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

/// Sampled infima (`lo`) and suprema (`hi`) of the six coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub a1: Range,
    pub b1: Range,
    pub c1: Range,
    pub a2: Range,
    pub b2: Range,
    pub c2: Range,
}

impl CoefficientBounds {
    pub fn get(&self, c: Coef) -> Range {
        match c {
            Coef::A1 => self.a1,
            Coef::B1 => self.b1,
            Coef::C1 => self.c1,
            Coef::A2 => self.a2,
            Coef::B2 => self.b2,
            Coef::C2 => self.c2,
        }
    }

    fn get_mut(&mut self, c: Coef) -> &mut Range {
        match c {
            Coef::A1 => &mut self.a1,
            Coef::B1 => &mut self.b1,
            Coef::C1 => &mut self.c1,
            Coef::A2 => &mut self.a2,
            Coef::B2 => &mut self.b2,
            Coef::C2 => &mut self.c2,
        }
    }
}

/// Outcome of one sampled inequality. `slack` is the minimum of
/// left-hand minus right-hand side; `at` is where it was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub slack: f64,
    pub at: Option<(f64, f64)>,
}

impl Check {
    pub(crate) fn new() -> Self {
        Check {
            pass: true,
            slack: f64::INFINITY,
            at: None,
        }
    }

    /// Record a sample that must satisfy `value >= -tol`.
    pub(crate) fn record(&mut self, value: f64, tol: f64, at: Option<(f64, f64)>) {
        if value < self.slack {
            self.slack = value;
            self.at = at;
        }
        if !(value >= -tol) {
            self.pass = false;
        }
    }

    /// Record a sample that must satisfy `value > 0`.
    pub(crate) fn record_strict(&mut self, value: f64, at: Option<(f64, f64)>) {
        if value < self.slack {
            self.slack = value;
            self.at = at;
        }
        if !(value > 0.0) {
            self.pass = false;
        }
    }

    pub(crate) fn and(mut self, other: Check) -> Check {
        if other.slack < self.slack {
            self.slack = other.slack;
            self.at = other.at;
        }
        self.pass &= other.pass;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimedReport {
    pub hb2_prime: Check,
    pub hl0_prime: Check,
    pub hl1_prime: Check,
    pub hl2_prime: Check,
}

/// Tolerance for pointwise sampled inequalities with exact-zero slack.
pub const POINTWISE_TOL: f64 = 1e-9;

impl HabitatSpec {
    /// Build a habitat from expression sources. Runs the (HB0) checks on a
    /// `check_nt x check_nx` sampling grid.
    pub fn new(
        sources: [&str; 6],
        period_t: f64,
        period_x: f64,
        kernel: KernelSpec,
        params: BTreeMap<String, f64>,
        check_grid: (usize, usize),
    ) -> Result<Self, HabitatError> {
        if !(period_t > 0.0 && period_t.is_finite()) {
            return Err(HabitatError::Config("time period T must be positive".into()));
        }
        if !(period_x > 0.0 && period_x.is_finite()) {
            return Err(HabitatError::Config("spatial period p must be positive".into()));
        }
        for name in params.keys() {
            if matches!(name.as_str(), "t" | "x" | "T" | "p" | "pi") {
                return Err(HabitatError::Config(format!("parameter name `{name}` is reserved")));
            }
        }
        let mut parsed = Vec::with_capacity(6);
        for (coef, src) in Coef::ALL.iter().zip(sources.iter()) {
            let e = expr::parse(src).map_err(|err| {
                HabitatError::Config(format!("coefficient {coef} = \"{src}\": {err}"))
            })?;
            for v in expr::free_vars(&e) {
                let known = matches!(v.as_str(), "t" | "x" | "T" | "p") || params.contains_key(&v);
                if !known {
                    return Err(HabitatError::Config(format!(
                        "coefficient {coef} uses unknown name `{v}`"
                    )));
                }
            }
            parsed.push(e);
        }
        let coefs: [Expr; 6] = parsed.try_into().expect("six coefficients");
        let h = HabitatSpec {
            coefs,
            sources: sources.map(|s| s.to_string()),
            period_t,
            period_x,
            kernel,
            params,
        };
        h.verify_hb0(check_grid.0, check_grid.1)?;
        Ok(h)
    }

    /// Constant-coefficient habitat on unit periods.
    pub fn constants(values: [f64; 6], kernel: KernelSpec) -> Result<Self, HabitatError> {
        let srcs = values.map(|v| format!("{v}"));
        let refs: [&str; 6] = std::array::from_fn(|i| srcs[i].as_str());
        HabitatSpec::new(refs, 1.0, 1.0, kernel, BTreeMap::new(), (8, 8))
    }

    /// The constant family a1=b1=r1, c1=ã1 r1, a2=c2=r2, b2=ã2 r2.
    pub fn competition_family(
        r1: f64,
        r2: f64,
        a1_tilde: f64,
        a2_tilde: f64,
        kernel: KernelSpec,
    ) -> Result<Self, HabitatError> {
        Self::constants([r1, r1, a1_tilde * r1, r2, a2_tilde * r2, r2], kernel)
    }

    pub fn expr(&self, c: Coef) -> &Expr {
        &self.coefs[c.index()]
    }

    pub fn source(&self, c: Coef) -> &str {
        &self.sources[c.index()]
    }

    pub fn context(&self) -> EvalContext {
        let mut ctx = EvalContext::new()
            .with("T", self.period_t)
            .with("p", self.period_x)
            .with("t", 0.0)
            .with("x", 0.0);
        for (k, v) in &self.params {
            ctx.set(k, *v);
        }
        ctx
    }

    pub fn eval(&self, c: Coef, t: f64, x: f64) -> Result<f64, HabitatError> {
        let mut ctx = self.context();
        self.eval_in(&mut ctx, c, t, x)
    }

    pub(crate) fn eval_in(
        &self,
        ctx: &mut EvalContext,
        c: Coef,
        t: f64,
        x: f64,
    ) -> Result<f64, HabitatError> {
        ctx.set("t", t);
        ctx.set("x", x);
        self.coefs[c.index()]
            .eval(ctx)
            .map_err(|source| HabitatError::Eval { coef: c, source })
    }

    /// True when no coefficient depends on x.
    pub fn is_space_free(&self) -> bool {
        self.coefs.iter().all(|e| !expr::free_vars(e).contains("x"))
    }

    fn verify_hb0(&self, nt: usize, nx: usize) -> Result<(), HabitatError> {
        let nt = nt.max(1);
        let nx = nx.max(1);
        let mut ctx = self.context();
        for i in 0..nt {
            let t = i as f64 * self.period_t / nt as f64;
            for j in 0..nx {
                let x = j as f64 * self.period_x / nx as f64;
                for c in Coef::ALL {
                    let v = self.eval_in(&mut ctx, c, t, x).map_err(|e| {
                        HabitatError::Config(format!("{e} at t={t}, x={x}"))
                    })?;
                    if !matches!(c, Coef::A1 | Coef::A2) && v <= 0.0 {
                        return Err(HabitatError::HypothesisHB0Violated {
                            what: format!("{c} must be positive"),
                            t,
                            x,
                            value: v,
                        });
                    }
                    let vt = self.eval_in(&mut ctx, c, t + self.period_t, x)?;
                    let vx = self.eval_in(&mut ctx, c, t, x + self.period_x)?;
                    let scale = 1e-9 * v.abs().max(1.0);
                    if (vt - v).abs() > scale || (vx - v).abs() > scale {
                        return Err(HabitatError::HypothesisHB0Violated {
                            what: format!("{c} is not (T, p)-periodic"),
                            t,
                            x,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Min/max of each coefficient over `{iT/nt} x {jp/nx}`.
    pub fn bounds(&self, nt: usize, nx: usize) -> Result<CoefficientBounds, HabitatError> {
        let mut bd = CoefficientBounds {
            a1: Range::empty(),
            b1: Range::empty(),
            c1: Range::empty(),
            a2: Range::empty(),
            b2: Range::empty(),
            c2: Range::empty(),
        };
        let mut ctx = self.context();
        for i in 0..nt {
            let t = i as f64 * self.period_t / nt as f64;
            for j in 0..nx {
                let x = j as f64 * self.period_x / nx as f64;
                for c in Coef::ALL {
                    let v = self.eval_in(&mut ctx, c, t, x)?;
                    bd.get_mut(c).include(v);
                }
            }
        }
        Ok(bd)
    }

    /// Coefficient-only sufficient conditions: (HB2)' from the bounds and the
    /// pointwise (HL0)'-(HL2)' forms sampled on the same grid.
    pub fn check_primed_hypotheses(
        &self,
        bd: &CoefficientBounds,
        nt: usize,
        nx: usize,
    ) -> Result<PrimedReport, HabitatError> {
        let mut hb2 = Check::new();
        hb2.record_strict(bd.a1.lo - bd.c1.hi * bd.a2.hi / bd.c2.lo, None);
        hb2.record(bd.a1.lo * bd.b2.lo / bd.b1.hi - bd.a2.hi, 0.0, None);

        let v_hi = bd.a2.hi / bd.c2.lo;
        let v_lo = bd.a2.lo / bd.c2.hi;
        let u_lo = bd.a1.lo / bd.b1.hi;
        let (mut hl0, mut hl1, mut hl2) = (Check::new(), Check::new(), Check::new());
        let mut ctx = self.context();
        for i in 0..nt {
            let t = i as f64 * self.period_t / nt as f64;
            for j in 0..nx {
                let x = j as f64 * self.period_x / nx as f64;
                let mut c = [0.0; 6];
                for k in Coef::ALL {
                    c[k.index()] = self.eval_in(&mut ctx, k, t, x)?;
                }
                let [a1, b1, c1, a2, b2, c2] = c;
                let at = Some((t, x));
                hl0.record(b2 * u_lo - c2 * v_hi, POINTWISE_TOL, at);
                let base = a1 - c1 * v_hi - a2 + 2.0 * c2 * v_lo;
                hl1.record(base - b2 * v_hi, POINTWISE_TOL, at);
                hl1.record(b1 - c1, POINTWISE_TOL, at);
                hl1.record(b2 - c2, POINTWISE_TOL, at);
                hl2.record(base - b2 * v_hi * bd.c1.hi / bd.b1.lo, POINTWISE_TOL, at);
                hl2.record(base - b2 * v_hi * bd.c2.hi / bd.b2.lo, POINTWISE_TOL, at);
            }
        }
        Ok(PrimedReport {
            hb2_prime: hb2,
            hl0_prime: hl0,
            hl1_prime: hl1,
            hl2_prime: hl2,
        })
    }

    /// A copy with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, HabitatError> {
        let srcs: Vec<String> = self
            .sources
            .iter()
            .map(|s| format!("({factor})*({s})"))
            .collect();
        let refs: [&str; 6] = std::array::from_fn(|i| srcs[i].as_str());
        HabitatSpec::new(
            refs,
            self.period_t,
            self.period_x,
            self.kernel,
            self.params.clone(),
            (8, 8),
        )
    }
}

/// Parse a habitat config file and return only the habitat part.
pub fn load_habitat(config_text: &str) -> Result<HabitatSpec, HabitatError> {
    config::parse_config(config_text).map(|c: Config| c.habitat)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANTS: [f64; 6] = [2.0, 1.0, 0.5, 1.0, 1.0, 1.0];

    fn periodic(a1: &str) -> HabitatSpec {
        HabitatSpec::new(
            [a1, "1", "0.5", "1", "1", "1"],
            1.0,
            1.0,
            KernelSpec::uniform(1.0),
            BTreeMap::new(),
            (64, 64),
        )
        .unwrap()
    }

    #[test]
    fn constants_are_valid() {
        let h = HabitatSpec::constants(CONSTANTS, KernelSpec::uniform(1.0)).unwrap();
        let bd = h.bounds(8, 8).unwrap();
        assert_eq!(bd.a1, Range { lo: 2.0, hi: 2.0 });
        assert_eq!(bd.c2, Range { lo: 1.0, hi: 1.0 });
        assert!(h.is_space_free());
    }

    #[test]
    fn negative_self_regulation_is_hb0_violation() {
        let err = HabitatSpec::constants([2.0, -1.0, 0.5, 1.0, 1.0, 1.0], KernelSpec::uniform(1.0))
            .unwrap_err();
        assert!(matches!(err, HabitatError::HypothesisHB0Violated { ref what, .. } if what.contains("b1")));
    }

    #[test]
    fn non_periodic_coefficient_is_rejected() {
        let err = HabitatSpec::new(
            ["2+t", "1", "1", "1", "1", "1"],
            1.0,
            1.0,
            KernelSpec::uniform(1.0),
            BTreeMap::new(),
            (8, 8),
        )
        .unwrap_err();
        assert!(matches!(err, HabitatError::HypothesisHB0Violated { .. }));
    }

    #[test]
    fn periodic_product_is_valid() {
        let h = periodic("2+0.5*sin(2*pi*t/T)*cos(2*pi*x/p)");
        assert!(!h.is_space_free());
    }

    #[test]
    fn sampled_bounds_match_dense_scan() {
        let h = periodic("2+sin(2*pi*t/T)");
        let bd = h.bounds(64, 8).unwrap();
        // dense scan oracle over 10^6 points
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..1_000_000 {
            let t = k as f64 / 1e6;
            let v = 2.0 + (2.0 * std::f64::consts::PI * t).sin();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!((bd.a1.lo - lo).abs() < 0.005);
        assert!((bd.a1.hi - hi).abs() < 0.005);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let err = HabitatSpec::new(
            ["2+q", "1", "1", "1", "1", "1"],
            1.0,
            1.0,
            KernelSpec::uniform(1.0),
            BTreeMap::new(),
            (8, 8),
        )
        .unwrap_err();
        assert!(matches!(err, HabitatError::Config(_)));
    }

    #[test]
    fn primed_checks_on_constants() {
        let h = HabitatSpec::constants(CONSTANTS, KernelSpec::uniform(1.0)).unwrap();
        let bd = h.bounds(8, 8).unwrap();
        let r = h.check_primed_hypotheses(&bd, 8, 8).unwrap();
        assert!(r.hb2_prime.pass);
        assert!(r.hl0_prime.pass);

        let h = HabitatSpec::constants([1.0, 1.0, 1.0, 10.0, 1.0, 1.0], KernelSpec::uniform(1.0))
            .unwrap();
        let bd = h.bounds(8, 8).unwrap();
        assert!(!h.check_primed_hypotheses(&bd, 8, 8).unwrap().hb2_prime.pass);
    }

    #[test]
    fn competition_family_hl2_reduction() {
        let (r1, r2, at1, at2) = (1.0, 1.0, 0.5, 1.0);
        let h = HabitatSpec::competition_family(r1, r2, at1, at2, KernelSpec::uniform(1.0)).unwrap();
        assert_eq!(h.eval(Coef::C1, 0.0, 0.0).unwrap(), 0.5);
        let bd = h.bounds(8, 8).unwrap();
        let r = h.check_primed_hypotheses(&bd, 8, 8).unwrap();
        let reduced = (at1 * at2 - 1.0) / (1.0 - at1);
        assert_eq!(reduced, -1.0);
        assert_eq!(reduced <= r1 / r2, r.hl2_prime.pass);
        assert!(r.hb2_prime.pass);
    }

    #[test]
    fn primed_checks_are_scale_invariant() {
        let srcs = [
            ["2+0.3*cos(2*pi*x/p)", "1", "0.5", "1", "1", "1"],
            ["1", "1", "0.5", "1", "1.2", "1"],
            ["3", "1", "2", "1", "0.5", "1+0.2*sin(2*pi*t/T)"],
        ];
        for s in srcs {
            let h = HabitatSpec::new(s, 1.0, 1.0, KernelSpec::uniform(1.0), BTreeMap::new(), (16, 16))
                .unwrap();
            let base = h.check_primed_hypotheses(&h.bounds(16, 16).unwrap(), 16, 16).unwrap();
            for factor in [0.5, 3.0] {
                let hs = h.scaled(factor).unwrap();
                let r = hs.check_primed_hypotheses(&hs.bounds(16, 16).unwrap(), 16, 16).unwrap();
                assert_eq!(base.hb2_prime.pass, r.hb2_prime.pass);
                assert_eq!(base.hl0_prime.pass, r.hl0_prime.pass);
                assert_eq!(base.hl1_prime.pass, r.hl1_prime.pass);
                assert_eq!(base.hl2_prime.pass, r.hl2_prime.pass);
            }
        }
    }
}
