//! Principal spectrum points of linear time-periodic equations on the period
//! cell, periodic attractors of the single-species equations, and the
//! nonhomogeneous periodic solver.
//!
//! The linear period map is advanced by Strang splitting: the dispersal part
//! `K_mu - I` is a circulant matrix whose exponential is computed exactly
//! (positive Poisson series plus squaring), and the reaction part is the
//! exact scalar exponential of the time-integrated coefficient.

use thiserror::Error;

use crate::discretize::{self, CellGrid, DiscretizeError, SampledKernel, WrappedKernel};
use crate::evolve::{CellField, EvolveError, PeriodicOrbit, Space, Species, State, Stepper, SystemForm, TimeGrid};
use crate::habitat::{Coef, HabitatError};
use crate::lab::Lab;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("no convergence within {periods} periods ({what})")]
    NoConvergence { periods: usize, what: String },
    #[error("non-finite state in the period map")]
    NonFiniteState,
    #[error("(HB1) fails for species {species}: principal spectrum point is {lambda}")]
    HB1Violated { species: u8, lambda: f64 },
    #[error("species {species} went extinct while computing its periodic attractor")]
    ExtinctionDetected { species: u8 },
    #[error("linear part must be stable, but its principal spectrum point is {lambda}")]
    PreconditionLambdaNonnegative { lambda: f64 },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Habitat(#[from] HabitatError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSettings {
    pub max_periods: usize,
    pub tol_growth: f64,
    pub tol_residual: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings {
            max_periods: 10_000,
            tol_growth: 1e-10,
            tol_residual: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambda: f64,
    pub xi: i8,
    pub mu: f64,
    /// Positive, max-normalized eigenfunction at `t = 0`.
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    /// `sup |Phi_T phi - e^{lambda T} phi|` relative to `e^{lambda T}`.
    pub residual: f64,
}

/// `u_t = K_{xi,mu} u - u + a(t, x) u` on the period cell, for any `(xi, mu)`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub cell: CellGrid,
    pub time: TimeGrid,
    pub kernel: SampledKernel,
    /// `exp(int_{t_n}^{t_{n+1}} a dt)` per step and node.
    growth: Vec<f64>,
}

const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 18.0),
    (0.0, 8.0 / 18.0),
    (0.774_596_669_241_483_4, 5.0 / 18.0),
];

impl LinearProblem {
    pub fn new(kernel: &SampledKernel, cell: CellGrid, time: TimeGrid, a: &dyn CellField) -> Self {
        let mut growth = Vec::with_capacity(time.nt * cell.nx);
        for n in 0..time.nt {
            let mid = time.t(n) + 0.5 * time.dt;
            for j in 0..cell.nx {
                let integral: f64 = GL3
                    .iter()
                    .map(|&(z, w)| w * a.value(mid + 0.5 * time.dt * z, j))
                    .sum::<f64>()
                    * time.dt;
                growth.push(integral.exp());
            }
        }
        LinearProblem {
            cell,
            time,
            kernel: kernel.clone(),
            growth,
        }
    }

    fn growth_row(&self, n: usize) -> &[f64] {
        let nx = self.cell.nx;
        &self.growth[n * nx..(n + 1) * nx]
    }

    fn propagator(&self, xi: i8, mu: f64) -> Result<Propagator, SpectralError> {
        let k = discretize::twist(&self.kernel, xi, mu)?;
        let w = discretize::wrap_to_cell(&k, &self.cell);
        Ok(Propagator::new(&w, self.time.dt))
    }
}

/// First row `c` of a circulant: `(C f)_i = sum_j c_j f_{(i+j) mod n}`.
fn circulant_apply(c: &[f64], f: &[f64], out: &mut [f64]) {
    let n = c.len();
    out.fill(0.0);
    for (j, &w) in c.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (o1, o2) = out.split_at_mut(n - j);
        for (o, &v) in o1.iter_mut().zip(&f[j..]) {
            *o += w * v;
        }
        for (o, &v) in o2.iter_mut().zip(&f[..j]) {
            *o += w * v;
        }
    }
}

/// Row of the product of two circulants.
fn circulant_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (j, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (k, &y) in b.iter().enumerate() {
            out[(j + k) % n] += x * y;
        }
    }
    out
}

/// `exp(h (Q - I))` for a stochastic circulant `Q`.
fn stochastic_exp(q: &[f64], h: f64) -> Vec<f64> {
    let n = q.len();
    let mut squarings = 0u32;
    let mut hs = h;
    while hs > 0.5 {
        hs *= 0.5;
        squarings += 1;
    }
    let mut term = vec![0.0; n];
    term[0] = 1.0;
    let mut coef = (-hs).exp();
    let mut sum: Vec<f64> = term.iter().map(|t| coef * t).collect();
    let mut k = 1.0;
    while coef > 1e-20 {
        term = circulant_mul(&term, q);
        coef *= hs / k;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += coef * t;
        }
        k += 1.0;
    }
    // Q is stochastic, so the exact exponential has unit mass; restoring it
    // stops truncation and rounding defects from compounding under squaring.
    normalize_mass(&mut sum);
    for _ in 0..squarings {
        sum = circulant_mul(&sum, &sum);
        normalize_mass(&mut sum);
    }
    sum
}

fn normalize_mass(v: &mut [f64]) {
    let m: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= m;
    }
}

/// Dispersal propagators over `dt/2` and `dt`, with the scalar factor
/// `exp(tau (s - 1))` kept separate as a growth-rate shift.
struct Propagator {
    half: Vec<f64>,
    full: Vec<f64>,
    /// `s - 1` with `s` the discrete moment.
    shift: f64,
    dt: f64,
}

impl Propagator {
    fn new(w: &WrappedKernel, dt: f64) -> Self {
        let s = w.total;
        let q: Vec<f64> = w.weights.iter().map(|x| x / s).collect();
        let half = stochastic_exp(&q, 0.5 * dt * s);
        let full = circulant_mul(&half, &half);
        Propagator {
            half,
            full,
            shift: s - 1.0,
            dt,
        }
    }

    /// One period of the shifted map (true map divided by `e^{T shift}`).
    fn period(&self, p: &LinearProblem, v: &mut Vec<f64>, tmp: &mut Vec<f64>) {
        let nt = p.time.nt;
        circulant_apply(&self.half, v, tmp);
        std::mem::swap(v, tmp);
        for n in 0..nt {
            for (x, g) in v.iter_mut().zip(p.growth_row(n)) {
                *x *= g;
            }
            let e = if n + 1 < nt { &self.full } else { &self.half };
            circulant_apply(e, v, tmp);
            std::mem::swap(v, tmp);
        }
    }

    /// Unshifted step from `t_n` to `t_{n+1}`, used for time courses.
    fn step(&self, p: &LinearProblem, n: usize, v: &mut [f64], tmp: &mut [f64]) {
        circulant_apply(&self.half, v, tmp);
        for (x, g) in tmp.iter_mut().zip(p.growth_row(n)) {
            *x *= g;
        }
        circulant_apply(&self.half, tmp, v);
        let f = (self.shift * self.dt).exp();
        for x in v.iter_mut() {
            *x *= f;
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn principal_spectrum_point(
    p: &LinearProblem,
    xi: i8,
    mu: f64,
    settings: &SpectralSettings,
) -> Result<SpectralResult, SpectralError> {
    let prop = p.propagator(xi, mu)?;
    let period = p.time.period;
    let nx = p.cell.nx;
    let mut v = vec![1.0; nx];
    let mut tmp = vec![0.0; nx];
    let mut prev = f64::NAN;
    for k in 1..=settings.max_periods {
        let old = v.clone();
        prop.period(p, &mut v, &mut tmp);
        let norm = sup(&v);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(SpectralError::NonFiniteState);
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        let lambda = prop.shift + norm.ln() / period;
        let residual = v.iter().zip(&old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if k >= 2 && (lambda - prev).abs() < settings.tol_growth && residual < settings.tol_residual {
            return Ok(SpectralResult {
                lambda,
                xi,
                mu,
                eigenfunction: v,
                iterations: k,
                residual,
            });
        }
        prev = lambda;
    }
    Err(SpectralError::NoConvergence {
        periods: settings.max_periods,
        what: format!("principal spectrum point at mu = {mu}"),
    })
}

/// Eigenfunction time course `e^{-lambda t} Phi(t, 0) phi` at the step
/// times, scaled so its space-time maximum is one.
pub fn eigen_time_course(p: &LinearProblem, r: &SpectralResult) -> Result<PeriodicOrbit, SpectralError> {
    let prop = p.propagator(r.xi, r.mu)?;
    let mut v = r.eigenfunction.clone();
    let mut tmp = vec![0.0; v.len()];
    let mut rows = Vec::with_capacity(p.time.nt);
    for n in 0..p.time.nt {
        rows.push(v.clone());
        prop.step(p, n, &mut v, &mut tmp);
        let f = (-r.lambda * p.time.dt).exp();
        for x in v.iter_mut() {
            *x *= f;
        }
    }
    let drift = v.iter().zip(&rows[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let top = rows.iter().map(|r| sup(r)).fold(0.0, f64::max);
    for row in &mut rows {
        for x in row.iter_mut() {
            *x /= top;
        }
    }
    Ok(PeriodicOrbit::from_rows(p.time.period, rows, drift / top))
}

/// Periodic solution of `w_t = K_{xi,mu} w - w + a w + h`, which is globally
/// attracting when the linear part has negative principal spectrum point.
pub fn nonhomogeneous_periodic(
    p: &LinearProblem,
    xi: i8,
    mu: f64,
    a: &dyn CellField,
    h: &dyn CellField,
    tol_orbit: f64,
    max_periods: usize,
) -> Result<PeriodicOrbit, SpectralError> {
    let lin = principal_spectrum_point(p, xi, mu, &SpectralSettings::default())?;
    if lin.lambda >= 0.0 {
        return Err(SpectralError::PreconditionLambdaNonnegative { lambda: lin.lambda });
    }
    let prop = p.propagator(xi, mu)?;
    let (nt, nx, dt) = (p.time.nt, p.cell.nx, p.time.dt);
    let scale = (prop.shift * 0.5 * dt).exp();
    // a and h at the RK4 stage times of each step
    let stage = |f: &dyn CellField| -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(nt * nx);
        for n in 0..nt {
            let t = p.time.t(n);
            for j in 0..nx {
                out.push([f.value(t, j), f.value(t + 0.5 * dt, j), f.value(t + dt, j)]);
            }
        }
        out
    };
    let (sa, sh) = (stage(a), stage(h));
    let mut w = vec![0.0; nx];
    let mut tmp = vec![0.0; nx];
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nt);
    for _ in 0..max_periods {
        rows.clear();
        let start = w.clone();
        for n in 0..nt {
            rows.push(w.clone());
            circulant_apply(&prop.half, &w, &mut tmp);
            for (j, x) in tmp.iter_mut().enumerate() {
                let [a0, am, a1] = sa[n * nx + j];
                let [h0, hm, h1] = sh[n * nx + j];
                let y = *x * scale;
                let k1 = a0 * y + h0;
                let k2 = am * (y + 0.5 * dt * k1) + hm;
                let k3 = am * (y + 0.5 * dt * k2) + hm;
                let k4 = a1 * (y + dt * k3) + h1;
                *x = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            circulant_apply(&prop.half, &tmp, &mut w);
            for x in w.iter_mut() {
                *x *= scale;
            }
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::NonFiniteState);
        }
        let drift = w.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if drift < tol_orbit {
            return Ok(PeriodicOrbit::from_rows(p.time.period, rows, drift));
        }
    }
    Err(SpectralError::NoConvergence {
        periods: max_periods,
        what: "nonhomogeneous periodic solution".into(),
    })
}

/// Periodic attractor of a single-species equation, marched with the same
/// Euler stepper as the nonlinear simulations.
pub fn periodic_attractor(lab: &Lab, species: Species) -> Result<PeriodicOrbit, SpectralError> {
    let (ca, cb, id) = match species {
        Species::One => (Coef::A1, Coef::B1, 1u8),
        Species::Two => (Coef::A2, Coef::C2, 2u8),
    };
    let lin = principal_spectrum_point(&lab.growth_problem(&lab.coef_field(ca)), 1, 0.0, &lab.spectral)?;
    if lin.lambda <= 0.0 {
        return Err(SpectralError::HB1Violated {
            species: id,
            lambda: lin.lambda,
        });
    }
    let bd = &lab.bounds;
    let u0 = bd.get(ca).hi / bd.get(cb).lo;
    let stepper = Stepper::new(
        SystemForm::Single {
            species,
            coefs: &lab.coefs,
        },
        Space::Cell(&lab.wrapped),
        lab.evolve_time,
    );
    let nt = lab.evolve_time.nt;
    let mut st = State::scalar(vec![u0; lab.cell.nx]);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nt);
    let mut last_drift = f64::INFINITY;
    for _ in 0..lab.run.max_periods {
        rows.clear();
        let start = st.u.clone();
        stepper.run(&mut st, 0, nt, |n, s| {
            if n < nt {
                rows.push(s.u.clone());
            }
            Ok::<(), EvolveError>(())
        })?;
        rows.insert(0, start.clone());
        if sup(&st.u) < 1e-12 {
            return Err(SpectralError::ExtinctionDetected { species: id });
        }
        let drift = st.u.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Once within tolerance, keep marching while the drift still shrinks
        // so that the orbit closes up to rounding.
        if drift < lab.run.tol_orbit {
            let floor = 1e-14 * sup(&st.u);
            if drift <= floor || drift >= last_drift {
                return Ok(PeriodicOrbit::from_rows(lab.evolve_time.period, rows, drift));
            }
        }
        last_drift = drift;
    }
    Err(SpectralError::NoConvergence {
        periods: lab.run.max_periods,
        what: format!("periodic attractor of species {id}"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbReport {
    pub lambda_a1: f64,
    pub lambda_a2: f64,
    pub lambda_invasion: Option<f64>,
    pub lambda_resident: Option<f64>,
    pub hb1: bool,
    /// `lambda(a1 - c1 v*) > 0` and `lambda(a2 - b2 u*) < 0`.
    pub hb2_linear: bool,
    pub invasion_positive: bool,
    pub resident_negative: bool,
}

/// The four spectrum points at `mu = 0` behind (HB1) and the linear part of (HB2).
pub fn check_hb1_hb2(lab: &Lab) -> Result<HbReport, SpectralError> {
    let s = &lab.spectral;
    let l1 = principal_spectrum_point(&lab.growth_problem(&lab.coef_field(Coef::A1)), 1, 0.0, s)?.lambda;
    let l2 = principal_spectrum_point(&lab.growth_problem(&lab.coef_field(Coef::A2)), 1, 0.0, s)?.lambda;
    let hb1 = l1 > 0.0 && l2 > 0.0;
    let mut rep = HbReport {
        lambda_a1: l1,
        lambda_a2: l2,
        lambda_invasion: None,
        lambda_resident: None,
        hb1,
        hb2_linear: false,
        invasion_positive: false,
        resident_negative: false,
    };
    if !hb1 {
        return Ok(rep);
    }
    let orbits = lab.orbits()?;
    let li = principal_spectrum_point(&lab.growth_problem(&lab.invasion_field(orbits)), 1, 0.0, s)?.lambda;
    let lr = principal_spectrum_point(&lab.growth_problem(&lab.resident_field(orbits)), 1, 0.0, s)?.lambda;
    rep.lambda_invasion = Some(li);
    rep.lambda_resident = Some(lr);
    rep.invasion_positive = li > 0.0;
    rep.resident_negative = lr < 0.0;
    rep.hb2_linear = rep.invasion_positive && rep.resident_negative;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::sample_kernel;
    use crate::habitat::KernelSpec;

    fn problem(nx: usize, nt: usize, a: &dyn CellField) -> LinearProblem {
        let cell = CellGrid::new(1.0, nx).unwrap();
        let k = sample_kernel(KernelSpec::uniform(1.0), cell.dx).unwrap();
        LinearProblem::new(&k, cell, TimeGrid::new(1.0, nt), a)
    }

    #[test]
    fn constants_give_coefficient() {
        let p = problem(32, 16, &|_t: f64, _j: usize| 0.7);
        let r = principal_spectrum_point(&p, 1, 0.0, &SpectralSettings::default()).unwrap();
        assert!((r.lambda - 0.7).abs() < 1e-9);
        assert!(r.eigenfunction.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn twisted_constant_matches_sinh() {
        let p = problem(64, 64, &|_t: f64, _j: usize| 1.0);
        let r = principal_spectrum_point(&p, 1, 1.0, &SpectralSettings::default()).unwrap();
        assert!((r.lambda - 1f64.sinh()).abs() < 2e-3);
    }

    #[test]
    fn time_average_for_space_free_coefficient() {
        let a = |t: f64, _j: usize| 0.4 + 0.8 * (2.0 * std::f64::consts::PI * t).sin();
        let p = problem(32, 64, &a);
        let r = principal_spectrum_point(&p, 1, 0.8, &SpectralSettings::default()).unwrap();
        let moment = discretize::twist(&p.kernel, 1, 0.8).unwrap().total();
        assert!((r.lambda - (0.4 + moment - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn huge_twist_stays_finite() {
        let p = problem(32, 16, &|_t: f64, _j: usize| 1.0);
        let r = principal_spectrum_point(&p, 1, 256.0, &SpectralSettings::default()).unwrap();
        let moment = discretize::twist(&p.kernel, 1, 256.0).unwrap().total();
        assert!(((r.lambda - moment) / moment).abs() < 1e-10);
    }

    #[test]
    fn stochastic_exp_of_identity_shift() {
        // Q = I gives exp(0) = I for any h
        let mut q = vec![0.0; 8];
        q[0] = 1.0;
        let e = stochastic_exp(&q, 37.0);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!(e[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn nonhomogeneous_constants() {
        let p = problem(16, 32, &|_t: f64, _j: usize| -1.0);
        let o = nonhomogeneous_periodic(&p, 1, 0.0, &|_t: f64, _j: usize| -1.0, &|_t: f64, _j: usize| 1.0, 1e-12, 10_000).unwrap();
        assert!(o.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let p = problem(16, 32, &|_t: f64, _j: usize| -2.0);
        let o = nonhomogeneous_periodic(&p, 1, 0.0, &|_t: f64, _j: usize| -2.0, &|_t: f64, _j: usize| 3.0, 1e-12, 10_000).unwrap();
        assert!(o.values().iter().all(|v| (v - 1.5).abs() < 1e-10));
    }

    #[test]
    fn nonhomogeneous_periodic_forcing() {
        use std::f64::consts::PI;
        let a = -1.5;
        let h = |t: f64, _j: usize| 1.0 + 0.5 * (2.0 * PI * t).cos();
        let p = problem(16, 64, &|_t: f64, _j: usize| a);
        let o = nonhomogeneous_periodic(&p, 1, 0.0, &|_t: f64, _j: usize| a, &h, 1e-12, 10_000).unwrap();
        // closed form of int_{-inf}^t e^{a(t-s)} h(s) ds
        for n in 0..64 {
            let t = n as f64 / 64.0;
            let w = 2.0 * PI;
            let exact = -1.0 / a + 0.5 * (-a * (w * t).cos() + w * (w * t).sin()) / (a * a + w * w);
            assert!((o.at(n, 3) - exact).abs() < 1e-6, "{n}: {} vs {exact}", o.at(n, 3));
        }
    }

    #[test]
    fn unstable_linear_part_is_rejected() {
        let p = problem(16, 16, &|_t: f64, _j: usize| 0.5);
        let err = nonhomogeneous_periodic(&p, 1, 0.0, &|_t: f64, _j: usize| 0.5, &|_t: f64, _j: usize| 1.0, 1e-10, 100).unwrap_err();
        assert!(matches!(err, SpectralError::PreconditionLambdaNonnegative { .. }));
    }

    #[test]
    fn eigen_course_of_constants_is_one() {
        let p = problem(16, 16, &|_t: f64, _j: usize| 1.5);
        let r = principal_spectrum_point(&p, 1, 1.9, &SpectralSettings::default()).unwrap();
        let c = eigen_time_course(&p, &r).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn settings() -> SpectralSettings {
            SpectralSettings::default()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn even_kernel_symmetry(a0 in 0.1f64..2.0, amp in 0.0f64..1.0, mu in 0.05f64..3.0) {
                let a = move |t: f64, _j: usize| a0 + amp * (2.0 * std::f64::consts::PI * t).cos();
                let p = problem(16, 16, &a);
                let l = |xi: i8, m: f64| principal_spectrum_point(&p, xi, m, &settings()).unwrap();
                let base = l(1, mu);
                prop_assert!(base.residual < 1e-8);
                prop_assert!((base.lambda - l(-1, mu).lambda).abs() < 1e-10);
                prop_assert!((base.lambda - l(1, -mu).lambda).abs() < 1e-10);
            }

            #[test]
            fn monotone_in_growth(a0 in -1.0f64..1.0, bump in 0.0f64..0.5, mu in 0.0f64..2.0, xi in prop_oneof![Just(1i8), Just(-1i8)]) {
                let lo = move |t: f64, j: usize| a0 + 0.3 * (2.0 * std::f64::consts::PI * (t + j as f64 / 16.0)).sin();
                let hi = move |t: f64, j: usize| lo(t, j) + bump * (1.0 + (j as f64).cos()) * 0.5;
                let pl = problem(16, 16, &lo);
                let ph = problem(16, 16, &hi);
                let l_lo = principal_spectrum_point(&pl, xi, mu, &settings()).unwrap();
                let l_hi = principal_spectrum_point(&ph, xi, mu, &settings()).unwrap();
                prop_assert!(l_lo.residual < 1e-8 && l_hi.residual < 1e-8);
                prop_assert!(l_hi.lambda >= l_lo.lambda - 1e-10);
            }

            #[test]
            fn convex_in_decay_rate(a0 in -1.0f64..2.0, mu0 in 0.0f64..2.0, h in 0.05f64..0.5) {
                let a = move |_t: f64, _j: usize| a0;
                let p = problem(16, 8, &a);
                let l = |m: f64| principal_spectrum_point(&p, 1, m, &settings()).unwrap().lambda;
                let second = l(mu0 + 2.0 * h) - 2.0 * l(mu0 + h) + l(mu0);
                prop_assert!(second >= -1e-8);
            }
        }
    }
}
