//! Linear-determinacy diagnostics: the pointwise (HL) checks on the computed
//! orbits, the eigen-witness pair at the minimizing decay rate, and the
//! assembled verdict.
//!
//! The witness uses the unperturbed linearization `a1 - c1 v*` directly: the
//! discrete period map always has a Perron eigenpair, so no perturbed
//! coefficients are needed to make the principal eigenvalue exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evolve::{CellField, EvolveError, PeriodicOrbit, Space, State, Stepper, SystemForm};
use crate::fronts::{self, FrontRun, SpeedIntervalEstimate};
use crate::habitat::{Check, Coef, HabitatError, POINTWISE_TOL};
use crate::lab::{Lab, Orbits};
use crate::spectral::{self, HbReport, SpectralError};
use crate::speeds::{self, SpeedError, SpeedResult, SuperSolution};

#[derive(Debug, Error)]
pub enum DeterminacyError {
    #[error("the v-equation shifted by lambda(mu*) has principal spectrum point {lambda2} >= 0")]
    Lemma41Fails { lambda2: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
    #[error(transparent)]
    Habitat(#[from] HabitatError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hl {
    Zero,
    One,
    Two,
}

/// Pointwise (HL0), (HL1) or (HL2) at every node of the orbit grid.
pub fn check_hl(lab: &Lab, orbits: &Orbits, which: Hl) -> Check {
    let bd = &lab.bounds;
    let time = lab.evolve_time;
    let mut chk = Check::new();
    for n in 0..time.nt {
        for j in 0..lab.cell.nx {
            let co = |c: Coef| lab.coefs.get(c, n, j);
            let (us, vs) = (orbits.ustar.at(n, j), orbits.vstar.at(n, j));
            let at = Some((time.t(n), lab.cell.x(j)));
            let base = co(Coef::A1) - co(Coef::C1) * vs - co(Coef::A2) + 2.0 * co(Coef::C2) * vs;
            match which {
                Hl::Zero => chk.record(co(Coef::B2) * us - co(Coef::C2) * vs, POINTWISE_TOL, at),
                Hl::One => {
                    chk.record(base - co(Coef::B2) * vs, POINTWISE_TOL, at);
                    chk.record(co(Coef::B1) - co(Coef::C1), POINTWISE_TOL, at);
                    chk.record(co(Coef::B2) - co(Coef::C2), POINTWISE_TOL, at);
                }
                Hl::Two => {
                    let b2v = co(Coef::B2) * vs;
                    chk.record(base - b2v * bd.c1.hi / bd.b1.lo, POINTWISE_TOL, at);
                    chk.record(base - b2v * bd.c2.hi / bd.b2.lo, POINTWISE_TOL, at);
                }
            }
        }
    }
    chk
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub mu_star: f64,
    pub lambda_star: f64,
    pub lambda2: f64,
    /// Principal eigenfunction time course, space-time max one.
    pub u: PeriodicOrbit,
    pub v: PeriodicOrbit,
}

/// `lambda2` and the witness pair at `mu*`. Fails with `Lemma41Fails` when
/// the shifted v-equation is not stable.
pub fn witness_fields(lab: &Lab, orbits: &Orbits, speed: &SpeedResult) -> Result<Witness, DeterminacyError> {
    let (xi, mu) = (speed.xi, speed.mu_star);
    let invasion = lab.invasion_field(orbits);
    let p = lab.growth_problem(&invasion);
    let eig = spectral::principal_spectrum_point(&p, xi, mu, &lab.spectral)?;
    let lambda = eig.lambda;
    let (a2, c2, b2) = (lab.coef_field(Coef::A2), lab.coef_field(Coef::C2), lab.coef_field(Coef::B2));
    let shifted = |t: f64, j: usize| a2.value(t, j) - 2.0 * c2.value(t, j) * orbits.vstar.interpolate(t, j) - lambda;
    let q = lab.growth_problem(&shifted);
    let lambda2 = spectral::principal_spectrum_point(&q, xi, mu, &lab.spectral)?.lambda;
    if lambda2 >= 0.0 {
        return Err(DeterminacyError::Lemma41Fails { lambda2 });
    }
    let u = spectral::eigen_time_course(&p, &eig)?;
    let forcing = |t: f64, j: usize| b2.value(t, j) * orbits.vstar.interpolate(t, j) * u.interpolate(t, j);
    let v = spectral::nonhomogeneous_periodic(
        &q,
        xi,
        mu,
        &shifted,
        &forcing,
        lab.run.tol_orbit,
        lab.run.max_periods,
    )?;
    Ok(Witness {
        mu_star: mu,
        lambda_star: lambda,
        lambda2,
        u,
        v,
    })
}

/// `b1 u - c1 v >= 0` and `b2 u - c2 v >= 0` on the witness grid.
pub fn check_lemma42(lab: &Lab, u: &PeriodicOrbit, v: &PeriodicOrbit) -> (Check, Check) {
    let f = |c: Coef| lab.coef_field(c);
    let (b1, c1, b2, c2) = (f(Coef::B1), f(Coef::C1), f(Coef::B2), f(Coef::C2));
    let (mut first, mut second) = (Check::new(), Check::new());
    let dt = u.period / u.nt as f64;
    for n in 0..u.nt {
        let t = n as f64 * dt;
        for j in 0..u.nx {
            let (uw, vw) = (u.at(n, j), v.at(n, j));
            let at = Some((t, lab.cell.x(j)));
            first.record(b1.value(t, j) * uw - c1.value(t, j) * vw, POINTWISE_TOL, at);
            second.record(b2.value(t, j) * uw - c2.value(t, j) * vw, POINTWISE_TOL, at);
        }
    }
    (first, second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySample {
    pub seeds: usize,
    pub periods: usize,
    /// Worst final sup distance to `(u*, 0)`.
    pub distance: f64,
    /// Every seed ended closer to `(u*, 0)` than it was halfway, or at rounding level.
    pub contracting: bool,
    pub pass: bool,
}

pub const STABILITY_SEEDS: usize = 3;
pub const STABILITY_PERIODS: usize = 1000;
pub const STABILITY_TOL: f64 = 1e-2;

/// Random positive competitive states on the period cell, marched for
/// `periods` periods. Sampled, not proven.
pub fn sampled_global_stability(lab: &Lab, orbits: &Orbits, periods: usize) -> Result<StabilitySample, DeterminacyError> {
    let stepper = Stepper::new(
        SystemForm::Competitive { coefs: &lab.coefs },
        Space::Cell(&lab.wrapped),
        lab.evolve_time,
    );
    let nx = lab.cell.nx;
    let nt = lab.evolve_time.nt;
    let target = |s: &State| -> f64 {
        let du = s
            .u
            .iter()
            .enumerate()
            .map(|(j, &u)| (u - orbits.ustar.at(0, j)).abs())
            .fold(0.0, f64::max);
        let dv = s.v.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        du.max(dv)
    };
    let (umax, vmax) = (orbits.ustar.max(), orbits.vstar.max());
    let mut out = StabilitySample {
        seeds: STABILITY_SEEDS,
        periods,
        distance: 0.0,
        contracting: true,
        pass: true,
    };
    for seed in 0..STABILITY_SEEDS as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(lab.run.seed.wrapping_add(seed));
        let u: Vec<f64> = (0..nx).map(|_| umax * rng.gen_range(0.05..1.0)).collect();
        let v: Vec<f64> = (0..nx).map(|_| vmax * rng.gen_range(0.05..1.0)).collect();
        let mut st = State::pair(u, v);
        stepper.run(&mut st, 0, (periods / 2) * nt, |_, _| Ok::<(), EvolveError>(()))?;
        let half = target(&st);
        stepper.run(&mut st, 0, (periods - periods / 2) * nt, |_, _| Ok::<(), EvolveError>(()))?;
        let end = target(&st);
        out.distance = out.distance.max(end);
        out.contracting &= end < half || end < 1e-12;
    }
    out.pass = out.contracting && out.distance < STABILITY_TOL;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Determinate,
    NotEstablished(Vec<String>),
}

impl Verdict {
    pub fn is_determinate(&self) -> bool {
        matches!(self, Verdict::Determinate)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Determinate => "determinate",
            Verdict::NotEstablished(_) => "not established",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontSummary {
    pub estimate: SpeedIntervalEstimate,
    pub behind_gap: f64,
    pub rel_gap_low: f64,
    pub rel_gap_high: f64,
    pub max_clamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminacyReport {
    pub xi: i8,
    pub hb: HbReport,
    pub hb2_prime: Check,
    pub stability: Option<StabilitySample>,
    pub hb_gate: bool,
    pub hl0: Check,
    pub hl1: Check,
    pub hl2: Check,
    pub speed: SpeedResult,
    /// `Err` carries the failure message, typically `lambda2 >= 0`.
    pub witness: Result<Witness, String>,
    pub lemma42: Option<(Check, Check)>,
    pub supersolution: Result<SuperSolution, String>,
    pub front: Option<Result<FrontSummary, String>>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminacyOptions {
    pub run_front: bool,
    pub stability_periods: usize,
}

impl Default for DeterminacyOptions {
    fn default() -> Self {
        DeterminacyOptions {
            run_front: true,
            stability_periods: STABILITY_PERIODS,
        }
    }
}

fn summarize_front(lab: &Lab, orbits: &Orbits, run: &FrontRun, c_bar: f64) -> Result<FrontSummary, String> {
    let estimate = fronts::estimate_interval(run, orbits).map_err(|e| e.to_string())?;
    let rel = |c: f64| (c - c_bar).abs() / c_bar.abs().max(f64::MIN_POSITIVE);
    let l = lab.run.half_length;
    Ok(FrontSummary {
        behind_gap: fronts::behind_front_gap(run, orbits, -0.25 * l, 0.75 * run.t_end()),
        rel_gap_low: rel(estimate.c_low_hat),
        rel_gap_high: rel(estimate.c_high_hat),
        max_clamp: run.max_clamp,
        estimate,
    })
}

/// All checks plus, optionally, the front pipeline.
pub fn determinacy_verdict(lab: &Lab, xi: i8, opts: DeterminacyOptions) -> Result<DeterminacyReport, DeterminacyError> {
    let hb = spectral::check_hb1_hb2(lab)?;
    let primed = lab
        .habitat
        .check_primed_hypotheses(&lab.bounds, lab.grid.check_nt, lab.grid.check_nx)?;
    let mut reasons = Vec::new();
    if !hb.hb1 {
        return Err(SpectralError::HB1Violated {
            species: if hb.lambda_a1 <= 0.0 { 1 } else { 2 },
            lambda: hb.lambda_a1.min(hb.lambda_a2),
        }
        .into());
    }
    let orbits = lab.orbits()?;
    let stability = if hb.invasion_positive {
        Some(sampled_global_stability(lab, orbits, opts.stability_periods)?)
    } else {
        None
    };
    let stable = stability.as_ref().is_some_and(|s| s.pass);
    let hb_gate = hb.invasion_positive && (hb.resident_negative || primed.hb2_prime.pass) && stable;
    if !hb.invasion_positive {
        reasons.push("(HB2) fails: species 1 cannot invade v*".to_string());
    } else if !(hb.resident_negative || primed.hb2_prime.pass) {
        reasons.push("(HB2) not confirmed: lambda(a2 - b2 u*) >= 0 and (HB2)' fails".to_string());
    } else if !stable {
        reasons.push("(HB2) not confirmed: sampled competitive runs did not approach (u*, 0)".to_string());
    }

    let hl0 = check_hl(lab, orbits, Hl::Zero);
    let hl1 = check_hl(lab, orbits, Hl::One);
    let hl2 = check_hl(lab, orbits, Hl::Two);
    if !hl0.pass {
        reasons.push("(HL0) fails".into());
    }
    if !(hl1.pass || hl2.pass) {
        reasons.push("neither (HL1) nor (HL2) holds".into());
    }

    let speed = speeds::linear_speed(lab, xi)?;
    let witness = witness_fields(lab, orbits, &speed).map_err(|e| e.to_string());
    let lemma42 = witness.as_ref().ok().map(|w| check_lemma42(lab, &w.u, &w.v));
    match (&witness, &lemma42) {
        (Err(e), _) => reasons.push(format!("witness unavailable: {e}")),
        (Ok(_), Some((a, b))) if !a.and(*b).pass => reasons.push("witness inequalities fail".into()),
        _ => {}
    }
    let supersolution = speeds::supersolution_c0(lab, xi, 1e-6).map_err(|e| e.to_string());

    let front = if opts.run_front {
        let run = fronts::run_configured_front(lab, orbits, xi, speed.c_star);
        Some(match run {
            Ok(run) => summarize_front(lab, orbits, &run, speed.c_star),
            Err(e) => Err(e.to_string()),
        })
    } else {
        None
    };

    let verdict = if hb_gate && reasons.is_empty() {
        Verdict::Determinate
    } else {
        Verdict::NotEstablished(reasons)
    };
    Ok(DeterminacyReport {
        xi,
        hb,
        hb2_prime: primed.hb2_prime,
        stability,
        hb_gate,
        hl0,
        hl1,
        hl2,
        speed,
        witness,
        lemma42,
        supersolution,
        front,
        verdict,
    })
}

fn check_kv(out: &mut Vec<(String, String)>, key: &str, c: &Check) {
    out.push((format!("{key}.pass"), c.pass.to_string()));
    out.push((format!("{key}.slack"), c.slack.to_string()));
    if let Some((t, x)) = c.at {
        out.push((format!("{key}.at_t"), t.to_string()));
        out.push((format!("{key}.at_x"), x.to_string()));
    }
}

impl DeterminacyReport {
    /// Flat key-value view shared by the text and CSV renderings.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("xi", self.xi.to_string());
        push("verdict", self.verdict.label().into());
        push("hb1", self.hb.hb1.to_string());
        push("lambda_a1", self.hb.lambda_a1.to_string());
        push("lambda_a2", self.hb.lambda_a2.to_string());
        push("lambda_invasion", opt(self.hb.lambda_invasion));
        push("lambda_resident", opt(self.hb.lambda_resident));
        push("hb2_prime", self.hb2_prime.pass.to_string());
        if let Some(s) = &self.stability {
            push("stability.sampled_not_proven", s.pass.to_string());
            push("stability.seeds", s.seeds.to_string());
            push("stability.periods", s.periods.to_string());
            push("stability.distance", s.distance.to_string());
        }
        push("hb_gate", self.hb_gate.to_string());
        check_kv(&mut out, "hl0", &self.hl0);
        check_kv(&mut out, "hl1", &self.hl1);
        check_kv(&mut out, "hl2", &self.hl2);
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("c_bar_inf", self.speed.c_star.to_string());
        push("mu_star", self.speed.mu_star.to_string());
        push("lambda_mu_star", self.speed.lambda_star.to_string());
        match &self.witness {
            Ok(w) => {
                push("lambda2", w.lambda2.to_string());
                push("witness.u_min", w.u.min().to_string());
                push("witness.v_min", w.v.min().to_string());
                push("witness.v_max", w.v.max().to_string());
            }
            Err(e) => push("witness.error", e.clone()),
        }
        if let Some((a, b)) = &self.lemma42 {
            check_kv(&mut out, "witness.c1v_le_b1u", a);
            check_kv(&mut out, "witness.c2v_le_b2u", b);
        }
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        match &self.supersolution {
            Ok(s) => {
                push("c0", s.c0.to_string());
                push("c0.residual", s.residual.to_string());
            }
            Err(e) => push("c0.error", e.clone()),
        }
        match &self.front {
            Some(Ok(f)) => {
                push("front.family", "empirical over tested family".into());
                push("front.c_low_hat", f.estimate.c_low_hat.to_string());
                push("front.c_low_r2", f.estimate.high_level.r2.to_string());
                push("front.c_high_hat", f.estimate.c_high_hat.to_string());
                push("front.c_high_r2", f.estimate.low_level.r2.to_string());
                push("front.ordered", f.estimate.ordered.to_string());
                push("front.rel_gap_low", f.rel_gap_low.to_string());
                push("front.rel_gap_high", f.rel_gap_high.to_string());
                push("front.behind_gap", f.behind_gap.to_string());
                push("front.max_clamp", f.max_clamp.to_string());
            }
            Some(Err(e)) => push("front.error", e.clone()),
            None => push("front", "skipped".into()),
        }
        if let Verdict::NotEstablished(r) = &self.verdict {
            for (k, reason) in r.iter().enumerate() {
                push(&format!("reason.{k}"), reason.clone());
            }
        }
        out
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| v.to_string())
}
