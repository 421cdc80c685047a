//! Front-like initial data, long cooperative runs on the truncated line,
//! level tracking and empirical speed estimates.

use thiserror::Error;

use crate::discretize::{DiscretizeError, LineGrid};
use crate::evolve::{EvolveError, LineSpace, Pad, Space, State, Stepper, SystemForm};
use crate::expr::eta;
use crate::lab::{Lab, Orbits};
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum FrontError {
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("front reached the right boundary at t = {t} (0.01-level at s = {position}); increase run.half_length")]
    FrontHitBoundary { t: f64, position: f64 },
    #[error("level {theta} is not bracketed at t = {t}")]
    LevelNotBracketed { theta: f64, t: f64 },
    #[error("need at least 10 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("poor linear fit for level {theta}: r^2 = {r2}")]
    PoorFit { theta: f64, r2: f64, slope: f64 },
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// Past this distance beyond the interface the initial data is exactly zero.
pub const CUTOFF: f64 = 20.0;
pub const LEVEL_HIGH: f64 = 0.99;
pub const LEVEL_LOW: f64 = 0.01;
pub const MIN_R2: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontInit {
    /// `(u, w)` in transformed variables on the line nodes.
    pub state: State,
    pub s0: f64,
    pub delta: f64,
    pub sharpness: f64,
}

/// `(1 - delta) u*(0, x) (1 - eta((s - s0)/sharpness))`, zero past `s0 + CUTOFF`,
/// and the same shape against `v*` for the transformed second component.
pub fn make_front(
    grid: &LineGrid,
    orbits: &Orbits,
    s0: f64,
    delta: f64,
    sharpness: f64,
) -> Result<FrontInit, FrontError> {
    let l = grid.half_length();
    if s0.abs() + CUTOFF >= l {
        return Err(FrontError::DomainTooSmall(format!(
            "|s0| + {CUTOFF} = {} must be below the half-length {l}",
            s0.abs() + CUTOFF
        )));
    }
    assert!(delta > 0.0 && delta < 1.0 && sharpness > 0.0);
    let shape = |i: usize| -> f64 {
        let s = grid.s(i as isize);
        if s >= s0 + CUTOFF {
            0.0
        } else {
            (1.0 - delta) * (1.0 - eta((s - s0) / sharpness))
        }
    };
    let mut u = Vec::with_capacity(grid.n);
    let mut w = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let j = grid.cell_of(i as isize);
        let f = shape(i);
        u.push(orbits.ustar.at(0, j) * f);
        w.push(orbits.vstar.at(0, j) * f);
    }
    Ok(FrontInit {
        state: State::pair(u, w),
        s0,
        delta,
        sharpness,
    })
}

/// Discrete membership in the front-like classes: bounded by the resident
/// states, zero ahead of the interface, positive infimum behind it.
pub fn check_membership(init: &FrontInit, grid: &LineGrid, orbits: &Orbits) -> bool {
    let mut ok = true;
    let mut inf_behind = f64::INFINITY;
    for i in 0..grid.n {
        let s = grid.s(i as isize);
        let j = grid.cell_of(i as isize);
        let (u, w) = (init.state.u[i], init.state.v[i]);
        let (us, vs) = (orbits.ustar.at(0, j), orbits.vstar.at(0, j));
        ok &= u >= 0.0 && w >= 0.0;
        ok &= u <= (1.0 - init.delta) * us && w <= (1.0 - init.delta) * vs;
        ok &= u < us && w < vs;
        if s >= init.s0 + CUTOFF {
            ok &= u == 0.0 && w == 0.0;
        }
        if s <= init.s0 - CUTOFF {
            inf_behind = inf_behind.min(u.min(w));
        }
    }
    ok && inf_behind > 0.0
}

#[derive(Debug, Clone)]
pub struct FrontRun {
    pub grid: LineGrid,
    pub times: Vec<f64>,
    /// `(u, w)` snapshots in transformed variables.
    pub states: Vec<State>,
    pub max_clamp: f64,
}

impl FrontRun {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }
}

/// Position of the rightmost crossing of `ratio >= theta`, interpolated.
/// `None` when nothing reaches the level or the last node still does.
pub fn level_position(grid: &LineGrid, ratio: impl Fn(usize) -> f64, theta: f64) -> Option<f64> {
    let n = grid.n;
    let i = (0..n).rev().find(|&i| ratio(i) >= theta)?;
    if i + 1 >= n {
        return None;
    }
    let (ri, rn) = (ratio(i), ratio(i + 1));
    Some(grid.s(i as isize) + grid.dx() * (ri - theta) / (ri - rn))
}

/// Cooperative run with `(u*, v*)` to the left and `(0, 0)` to the right.
pub fn run_front(
    lab: &Lab,
    orbits: &Orbits,
    grid: &LineGrid,
    init: &FrontInit,
    periods: usize,
    c_estimate: f64,
) -> Result<FrontRun, FrontError> {
    let t_end = periods as f64 * lab.evolve_time.period;
    let need = (c_estimate.max(0.0) + 1.0) * t_end + CUTOFF;
    let room = grid.half_length() - init.s0;
    if room < need {
        return Err(FrontError::DomainTooSmall(format!(
            "room ahead of the interface is {room}, need (c + 1) t_end + {CUTOFF} = {need}"
        )));
    }
    let space = LineSpace::new(
        &lab.kernel,
        grid,
        [Pad::Orbit(&orbits.ustar), Pad::Orbit(&orbits.vstar)],
        [Pad::Zero, Pad::Zero],
    );
    let stepper = Stepper::new(
        SystemForm::Cooperative {
            coefs: &lab.coefs,
            ustar: &orbits.ustar,
            vstar: &orbits.vstar,
        },
        Space::Line(space),
        lab.evolve_time,
    );
    let nt = lab.evolve_time.nt;
    let stride = lab.run.stride.max(1) * nt;
    let total = periods * nt;
    let cells = grid.cell_indices();
    let limit = grid.half_length() - lab.habitat.kernel.radius - 5.0 * grid.dx();
    let mut run = FrontRun {
        grid: grid.clone(),
        times: vec![0.0],
        states: vec![init.state.clone()],
        max_clamp: 0.0,
    };
    let mut st = init.state.clone();
    let clamp = stepper.run(&mut st, 0, total, |n, s| {
        if n % stride != 0 && n != total {
            return Ok(());
        }
        let t = lab.evolve_time.t(n);
        let urow = orbits.ustar.row(n);
        if let Some(pos) = level_position(grid, |i| s.u[i] / urow[cells[i]], LEVEL_LOW) {
            if pos >= limit {
                return Err(FrontError::FrontHitBoundary { t, position: pos });
            }
        }
        run.times.push(t);
        run.states.push(s.clone());
        Ok(())
    })?;
    run.max_clamp = clamp;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrack {
    pub theta: f64,
    pub times: Vec<f64>,
    /// `NaN` where the level was not bracketed.
    pub positions: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line; `r2 = 1` when the residual vanishes.
pub fn fit_line(t: &[f64], x: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let stx: f64 = t.iter().zip(x).map(|(a, b)| (a - tm) * (b - xm)).sum();
    let slope = if stt > 0.0 { stx / stt } else { 0.0 };
    let intercept = xm - slope * tm;
    let ss_res: f64 = t
        .iter()
        .zip(x)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = x.iter().map(|b| (b - xm) * (b - xm)).sum();
    let r2 = if ss_res <= 1e-24 * (1.0 + ss_tot) {
        1.0
    } else if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// Track relative levels `u / reference >= theta` and fit slopes over the
/// second half of the run.
pub fn track_levels(
    grid: &LineGrid,
    times: &[f64],
    fields: &[&[f64]],
    reference: impl Fn(usize, usize) -> f64,
    levels: &[f64],
) -> Result<Vec<LevelTrack>, FrontError> {
    if times.len() < 10 {
        return Err(FrontError::TooFewSnapshots(times.len()));
    }
    let t_end = *times.last().expect("nonempty");
    levels
        .iter()
        .map(|&theta| {
            let positions: Vec<f64> = fields
                .iter()
                .enumerate()
                .map(|(k, u)| level_position(grid, |i| u[i] / reference(k, i), theta).unwrap_or(f64::NAN))
                .collect();
            let (mut ft, mut fx) = (Vec::new(), Vec::new());
            for (&t, &x) in times.iter().zip(&positions) {
                if t >= 0.5 * t_end {
                    if x.is_nan() {
                        return Err(FrontError::LevelNotBracketed { theta, t });
                    }
                    ft.push(t);
                    fx.push(x);
                }
            }
            let (slope, intercept, r2) = fit_line(&ft, &fx);
            Ok(LevelTrack {
                theta,
                times: times.to_vec(),
                positions,
                slope,
                intercept,
                r2,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedIntervalEstimate {
    pub high_level: LevelTrack,
    pub low_level: LevelTrack,
    /// Slope of the 0.99 level.
    pub c_low_hat: f64,
    /// Slope of the 0.01 level.
    pub c_high_hat: f64,
    /// `c_low_hat <= c_high_hat + 0.05 |c_high_hat| + 0.02`.
    pub ordered: bool,
}

pub fn level_tracks(run: &FrontRun, orbits: &Orbits, levels: &[f64]) -> Result<Vec<LevelTrack>, FrontError> {
    let cells = run.grid.cell_indices();
    let fields: Vec<&[f64]> = run.states.iter().map(|s| s.u.as_slice()).collect();
    let times = &run.times;
    track_levels(
        &run.grid,
        times,
        &fields,
        |k, i| orbits.ustar.interpolate(times[k], cells[i]),
        levels,
    )
}

pub fn estimate_interval(run: &FrontRun, orbits: &Orbits) -> Result<SpeedIntervalEstimate, FrontError> {
    let mut tracks = level_tracks(run, orbits, &[LEVEL_HIGH, LEVEL_LOW])?;
    let low_level = tracks.pop().expect("two tracks");
    let high_level = tracks.pop().expect("two tracks");
    for tr in [&high_level, &low_level] {
        if tr.r2 < MIN_R2 {
            return Err(FrontError::PoorFit {
                theta: tr.theta,
                r2: tr.r2,
                slope: tr.slope,
            });
        }
    }
    let (c_low_hat, c_high_hat) = (high_level.slope, low_level.slope);
    Ok(SpeedIntervalEstimate {
        ordered: c_low_hat <= c_high_hat + 0.05 * c_high_hat.abs() + 0.02,
        high_level,
        low_level,
        c_low_hat,
        c_high_hat,
    })
}

/// Sup distance of `(u, w)` from `(u*, v*)` at the node nearest `s`, over
/// snapshots with `t >= t_from`.
pub fn behind_front_gap(run: &FrontRun, orbits: &Orbits, s: f64, t_from: f64) -> f64 {
    let g = &run.grid;
    let i = ((s + g.half_length()) / g.dx()).round().clamp(0.0, (g.n - 1) as f64) as usize;
    let j = g.cell_of(i as isize);
    run.times
        .iter()
        .zip(&run.states)
        .filter(|(t, _)| **t >= t_from)
        .map(|(&t, st)| {
            let du = (st.u[i] - orbits.ustar.interpolate(t, j)).abs();
            let dw = (st.v[i] - orbits.vstar.interpolate(t, j)).abs();
            du.max(dw)
        })
        .fold(0.0, f64::max)
}

/// Default linearization check plus run, for a lab's configured settings.
pub fn run_configured_front(
    lab: &Lab,
    orbits: &Orbits,
    xi: i8,
    c_estimate: f64,
) -> Result<FrontRun, FrontError> {
    let grid = LineGrid::new(lab.cell, lab.run.half_length, xi)?;
    let init = make_front(&grid, orbits, lab.run.s0, lab.run.delta, 1.0)?;
    run_front(lab, orbits, &grid, &init, lab.run.periods, c_estimate)
}
