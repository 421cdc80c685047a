//! Linear spreading speeds `inf_{mu>0} lambda(mu)/mu`, and the constant of
//! the moving super-solution profile.

use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::evolve::{CellField, Species};
use crate::expr::eta;
use crate::habitat::Coef;
use crate::lab::{Lab, Orbits};
use crate::par;
use crate::spectral::{principal_spectrum_point, LinearProblem, SpectralError, SpectralSettings};

#[derive(Debug, Error)]
pub enum SpeedError {
    #[error("no interior minimum of lambda(mu)/mu on [{lo}, {hi}]")]
    NoInteriorMinimum { lo: f64, hi: f64 },
    #[error("growth rate at mu = 0 is {lambda}, so there is no positive spreading speed")]
    NonPositiveGrowth { lambda: f64 },
    #[error("no super-solution constant found below {cap}")]
    NotFoundBelowCap { cap: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSample {
    pub mu: f64,
    pub lambda: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedResult {
    pub xi: i8,
    pub c_star: f64,
    pub mu_star: f64,
    pub lambda_star: f64,
    /// Every evaluation, sorted by `mu`.
    pub samples: Vec<SpeedSample>,
    pub bracket: (f64, f64),
}

const GRID_HALF: i32 = 8;
const EXPANSIONS: usize = 2;
const REL_TOL: f64 = 1e-5;

fn evaluate(p: &LinearProblem, xi: i8, mu: f64, s: &SpectralSettings) -> Result<SpeedSample, SpectralError> {
    match principal_spectrum_point(p, xi, mu, s) {
        Ok(r) => Ok(SpeedSample {
            mu,
            lambda: r.lambda,
            ratio: r.lambda / mu,
        }),
        Err(SpectralError::Discretize(DiscretizeError::NonFiniteWeight { .. })) => Ok(SpeedSample {
            mu,
            lambda: f64::INFINITY,
            ratio: f64::INFINITY,
        }),
        Err(e) => Err(e),
    }
}

/// Minimize `lambda(mu)/mu` over `mu > 0` for the linear problem `p`.
pub fn minimize_speed(
    p: &LinearProblem,
    xi: i8,
    mu0: f64,
    settings: &SpectralSettings,
) -> Result<SpeedResult, SpeedError> {
    let base = principal_spectrum_point(p, xi, 0.0, settings)?.lambda;
    if base <= 0.0 {
        return Err(SpeedError::NonPositiveGrowth { lambda: base });
    }
    let grid = |ks: std::ops::RangeInclusive<i32>| -> Vec<f64> { ks.map(|k| mu0 * 2f64.powi(k)).collect() };
    let eval_all = |mus: &[f64]| -> Result<Vec<SpeedSample>, SpectralError> {
        par::map_collect(mus, |&mu| evaluate(p, xi, mu, settings)).into_iter().collect()
    };
    let (mut klo, mut khi) = (-GRID_HALF, GRID_HALF);
    let mut samples = eval_all(&grid(klo..=khi))?;
    let mut expansions = 0;
    let best = loop {
        let (i, _) = samples
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, s)| if s.ratio < bv { (i, s.ratio) } else { (bi, bv) });
        if i > 0 && i + 1 < samples.len() {
            break i;
        }
        if expansions == EXPANSIONS {
            return Err(SpeedError::NoInteriorMinimum {
                lo: samples[0].mu,
                hi: samples[samples.len() - 1].mu,
            });
        }
        expansions += 1;
        if i == 0 {
            let extra = eval_all(&grid(klo - GRID_HALF..=klo - 1))?;
            klo -= GRID_HALF;
            samples.splice(0..0, extra);
        } else {
            let extra = eval_all(&grid(khi + 1..=khi + GRID_HALF))?;
            khi += GRID_HALF;
            samples.extend(extra);
        }
    };
    let bracket = (samples[best - 1].mu, samples[best + 1].mu);
    let mut refined = golden_section(bracket, samples[best], |mu| evaluate(p, xi, mu, settings))?;
    samples.append(&mut refined.1);
    samples.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let opt = refined.0;
    Ok(SpeedResult {
        xi,
        c_star: opt.ratio,
        mu_star: opt.mu,
        lambda_star: opt.lambda,
        samples,
        bracket,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section(
    (mut a, mut b): (f64, f64),
    mid: SpeedSample,
    f: impl Fn(f64) -> Result<SpeedSample, SpectralError>,
) -> Result<(SpeedSample, Vec<SpeedSample>), SpectralError> {
    let mut seen = Vec::new();
    let mut best = mid;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    seen.push(fc);
    seen.push(fd);
    while b - a > REL_TOL * best.mu {
        if fc.ratio < fd.ratio {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            seen.push(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            seen.push(fd);
        }
        for s in [fc, fd] {
            if s.ratio < best.ratio {
                best = s;
            }
        }
    }
    Ok((best, seen))
}

/// `inf lambda_xi(mu)/mu` for the linearization `a1 - c1 v*` at the invaded state.
pub fn linear_speed(lab: &Lab, xi: i8) -> Result<SpeedResult, SpeedError> {
    let orbits = lab.orbits()?;
    let field = lab.invasion_field(orbits);
    speed_for_field(lab, xi, &field)
}

/// Spreading speed of species `k` alone; depends only on `a_k` and the kernel.
pub fn single_species_speed(lab: &Lab, xi: i8, species: Species) -> Result<SpeedResult, SpeedError> {
    let coef = match species {
        Species::One => Coef::A1,
        Species::Two => Coef::A2,
    };
    speed_for_field(lab, xi, &lab.coef_field(coef))
}

pub fn speed_for_field(lab: &Lab, xi: i8, a: &dyn CellField) -> Result<SpeedResult, SpeedError> {
    let p = lab.growth_problem(a);
    minimize_speed(&p, xi, 1.0 / lab.habitat.kernel.radius, &lab.spectral)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperSolution {
    pub c0: f64,
    /// Minimum residual at `c0`.
    pub residual: f64,
    pub tol: f64,
}

/// Cap for the super-solution search.
pub const C0_CAP: f64 = 50.0;

/// Minimum over one period of the discrete Euler residuals of the moving
/// profile `(u*(1 - eta(s - C t)), v*(1 - eta(s - C t)))` in transformed
/// variables. Nonnegative residual makes the profile a discrete super-solution.
pub fn supersolution_residual(lab: &Lab, orbits: &Orbits, xi: i8, c: f64) -> f64 {
    let time = lab.evolve_time;
    let (dt, nt) = (time.dt, time.nt);
    let dx = lab.cell.dx;
    let nx = lab.cell.nx as isize;
    let w = &lab.kernel.weights;
    let m = lab.kernel.half_width as isize;
    let margin = 4.0 * lab.habitat.kernel.radius + 20.0;
    let i_lo = (-margin / dx).floor() as isize;
    let i_hi = ((c * time.period + margin) / dx).ceil() as isize;
    let cell = |i: isize| -> usize { (if xi > 0 { i } else { -i }).rem_euclid(nx) as usize };
    let profile = |n: usize, i: isize| -> (f64, f64) {
        let j = cell(i);
        let damp = 1.0 - eta(i as f64 * dx - c * time.t(n));
        (orbits.ustar.at(n, j) * damp, orbits.vstar.at(n, j) * damp)
    };
    let nodes: Vec<isize> = (i_lo..=i_hi).collect();
    let per_node = |&i: &isize| -> f64 {
        let j = cell(i);
        let mut worst = f64::INFINITY;
        for n in 0..nt {
            let (u, wv) = profile(n, i);
            let (mut ku, mut kw) = (0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                let (pu, pw) = profile(n, i + k as isize - m);
                ku += wk * pu;
                kw += wk * pw;
            }
            let co = |cf: Coef| lab.coefs.get(cf, n, j);
            let vs = orbits.vstar.at(n, j);
            let v = vs - wv;
            let f = u * (co(Coef::A1) - co(Coef::B1) * u - co(Coef::C1) * v);
            let g = co(Coef::B2) * v * u
                + wv * (co(Coef::A2) - 2.0 * co(Coef::C2) * vs + co(Coef::C2) * wv);
            let (nu, nw) = profile(n + 1, i);
            let ru = (nu - (u + dt * (ku - u + f))) / dt;
            let rw = (nw - (wv + dt * (kw - wv + g))) / dt;
            worst = worst.min(ru).min(rw);
        }
        worst
    };
    par::map_collect(&nodes, per_node).into_iter().fold(f64::INFINITY, f64::min)
}

/// Smallest `C` on a 0.01 grid whose profile residual is at least `-tol`.
pub fn supersolution_c0(lab: &Lab, xi: i8, tol: f64) -> Result<SuperSolution, SpeedError> {
    let orbits = lab.orbits()?;
    let ok = |c: f64| supersolution_residual(lab, orbits, xi, c) >= -tol;
    let mut hi = 1.0;
    while !ok(hi) {
        if hi >= C0_CAP {
            return Err(SpeedError::NotFoundBelowCap { cap: C0_CAP });
        }
        hi = (hi * 2.0).min(C0_CAP);
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SuperSolution {
        c0: hi,
        residual: supersolution_residual(lab, orbits, xi, hi),
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{sample_kernel, CellGrid};
    use crate::evolve::TimeGrid;
    use crate::habitat::KernelSpec;

    fn problem(a: f64) -> LinearProblem {
        let cell = CellGrid::new(1.0, 64).unwrap();
        let k = sample_kernel(KernelSpec::uniform(1.0), cell.dx).unwrap();
        LinearProblem::new(&k, cell, TimeGrid::new(1.0, 64), &move |_t: f64, _j: usize| a)
    }

    /// Dense scan of (sinh(mu)/mu - 1 + a)/mu.
    fn dense_scan(a: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..2_000_000 {
            let mu = k as f64 * 5e-6;
            let g = (mu.sinh() / mu - 1.0 + a) / mu;
            if g < best.0 {
                best = (g, mu);
            }
        }
        best
    }

    #[test]
    fn single_species_uniform_kernel() {
        let r = minimize_speed(&problem(1.0), 1, 1.0, &SpectralSettings::default()).unwrap();
        let (c, mu) = dense_scan(1.0);
        assert!((r.c_star - c).abs() < 5e-3, "{} vs {c}", r.c_star);
        assert!((r.mu_star - mu).abs() < 1e-2);
        assert!(r.samples.windows(2).all(|w| w[0].mu <= w[1].mu));
    }

    #[test]
    fn effective_coefficient_speed() {
        let r = minimize_speed(&problem(1.5), 1, 1.0, &SpectralSettings::default()).unwrap();
        let (c, _) = dense_scan(1.5);
        assert!((r.c_star - c).abs() < 5e-3);
        let m = minimize_speed(&problem(1.5), -1, 1.0, &SpectralSettings::default()).unwrap();
        assert!((m.c_star - r.c_star).abs() < 1e-8);
    }

    #[test]
    fn endpoints_dominate_minimum() {
        let r = minimize_speed(&problem(1.0), 1, 1.0, &SpectralSettings::default()).unwrap();
        let first = r.samples.first().unwrap().ratio;
        let last = r.samples.last().unwrap().ratio;
        assert!(first > 1.1 * r.c_star && last > 1.1 * r.c_star);
    }

    #[test]
    fn negative_growth_has_no_speed() {
        assert!(matches!(
            minimize_speed(&problem(-0.5), 1, 1.0, &SpectralSettings::default()),
            Err(SpeedError::NonPositiveGrowth { .. })
        ));
    }
}
