//! Explicit, order-preserving time stepping on the period cell and on the
//! truncated line.

use thiserror::Error;

use crate::discretize::{self, CellGrid, LineGrid, SampledKernel, WrappedKernel};
use crate::habitat::{Coef, CoefficientBounds, HabitatError, HabitatSpec};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("state left the invariant region by {excursion:e} at t = {t}")]
    InvariantRegionExit { excursion: f64, t: f64 },
    #[error(transparent)]
    Habitat(#[from] HabitatError),
}

/// Pre-clamp excursions above this abort the run.
pub const CLAMP_LIMIT: f64 = 1e-6;

/// Nonlinear states below this are set to zero. The flush is monotone, so
/// order is kept, and it keeps far-field tails out of subnormal range.
pub const FLUSH_BELOW: f64 = 1e-200;

fn flush(x: f64) -> f64 {
    if x < FLUSH_BELOW {
        0.0
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub nt: usize,
    pub dt: f64,
    pub period: f64,
}

impl TimeGrid {
    pub fn new(period: f64, nt: usize) -> Self {
        assert!(nt > 0 && period > 0.0);
        TimeGrid {
            nt,
            dt: period / nt as f64,
            period,
        }
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Bound on the reaction Jacobian entries over the invariant region.
pub fn reaction_lipschitz(bd: &CoefficientBounds) -> f64 {
    let um = bd.a1.hi.max(0.0) / bd.b1.lo;
    let vm = bd.a2.hi.max(0.0) / bd.c2.lo;
    let a1 = bd.a1.lo.abs().max(bd.a1.hi.abs());
    let a2 = bd.a2.lo.abs().max(bd.a2.hi.abs());
    [
        a1 + 2.0 * bd.b1.hi * um + bd.c1.hi * vm,
        a2 + 2.0 * bd.c2.hi * vm + bd.b2.hi * um,
        bd.b2.hi * vm,
        bd.c1.hi * um,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn dt_max(bd: &CoefficientBounds) -> f64 {
    0.5 / (1.0 + reaction_lipschitz(bd))
}

/// Smallest multiple of `base_nt` whose step respects [`dt_max`].
pub fn stable_nt(period: f64, bd: &CoefficientBounds, base_nt: usize) -> usize {
    let need = (period / dt_max(bd)).ceil() as usize;
    base_nt * need.div_ceil(base_nt).max(1)
}

/// Anything that can be sampled at time `t` and cell node `j`.
pub trait CellField: Sync {
    fn value(&self, t: f64, j: usize) -> f64;
}

impl<F: Fn(f64, usize) -> f64 + Sync> CellField for F {
    fn value(&self, t: f64, j: usize) -> f64 {
        self(t, j)
    }
}

/// Coefficients sampled at the step times `t_n` of one period.
#[derive(Debug, Clone)]
pub struct CoefTable {
    pub nt: usize,
    pub nx: usize,
    data: [Vec<f64>; 6],
}

impl CoefTable {
    pub fn build(h: &HabitatSpec, time: &TimeGrid, cell: &CellGrid) -> Result<Self, HabitatError> {
        let mut ctx = h.context();
        let mut data: [Vec<f64>; 6] = Default::default();
        for c in Coef::ALL {
            let mut v = Vec::with_capacity(time.nt * cell.nx);
            for n in 0..time.nt {
                for j in 0..cell.nx {
                    v.push(h.eval_in(&mut ctx, c, time.t(n), cell.x(j))?);
                }
            }
            data[c.index()] = v;
        }
        Ok(CoefTable {
            nt: time.nt,
            nx: cell.nx,
            data,
        })
    }

    pub fn get(&self, c: Coef, n: usize, j: usize) -> f64 {
        self.data[c.index()][(n % self.nt) * self.nx + j]
    }

    pub fn row(&self, c: Coef, n: usize) -> &[f64] {
        let n = n % self.nt;
        &self.data[c.index()][n * self.nx..(n + 1) * self.nx]
    }
}

/// A time-periodic cell field on `nt` step times per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub nt: usize,
    pub nx: usize,
    pub period: f64,
    values: Vec<f64>,
    /// Sup-norm mismatch between the end and start of the returned period.
    pub drift: f64,
}

impl PeriodicOrbit {
    pub fn from_rows(period: f64, rows: Vec<Vec<f64>>, drift: f64) -> Self {
        let nt = rows.len();
        let nx = rows[0].len();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        assert_eq!(values.len(), nt * nx);
        PeriodicOrbit {
            nt,
            nx,
            period,
            values,
            drift,
        }
    }

    pub fn constant(period: f64, nt: usize, nx: usize, value: f64) -> Self {
        PeriodicOrbit {
            nt,
            nx,
            period,
            values: vec![value; nt * nx],
            drift: 0.0,
        }
    }

    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[(n % self.nt) * self.nx + j]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let n = n % self.nt;
        &self.values[n * self.nx..(n + 1) * self.nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PeriodicOrbit {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Periodic linear interpolation in time.
    pub fn interpolate(&self, t: f64, j: usize) -> f64 {
        let s = (t / self.period).rem_euclid(1.0) * self.nt as f64;
        let n0 = (s.floor() as usize).min(self.nt - 1);
        let w = s - n0 as f64;
        let a = self.at(n0, j);
        if w == 0.0 {
            return a;
        }
        a + w * (self.at(n0 + 1, j) - a)
    }
}

impl CellField for PeriodicOrbit {
    fn value(&self, t: f64, j: usize) -> f64 {
        self.interpolate(t, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    One,
    Two,
}

/// The system being stepped, in the variables it is stored in.
#[derive(Debug, Clone, Copy)]
pub enum SystemForm<'a> {
    /// `u_t = Ku - u + u(a1 - b1 u)` or `v_t = Kv - v + v(a2 - c2 v)`.
    Single { species: Species, coefs: &'a CoefTable },
    /// Original competition variables `(u, v)`.
    Competitive { coefs: &'a CoefTable },
    /// Transformed variables `(u, w)` with `w = v* - v`; order-preserving.
    Cooperative {
        coefs: &'a CoefTable,
        ustar: &'a PeriodicOrbit,
        vstar: &'a PeriodicOrbit,
    },
    /// `u_t = K u - u + a u`, `a` sampled at the step times.
    Linear { a: &'a PeriodicOrbit },
}

impl SystemForm<'_> {
    pub fn is_pair(&self) -> bool {
        matches!(self, SystemForm::Competitive { .. } | SystemForm::Cooperative { .. })
    }
}

/// Boundary values used beyond either end of the line.
#[derive(Debug, Clone, Copy)]
pub enum Pad<'a> {
    Zero,
    Orbit(&'a PeriodicOrbit),
}

impl Pad<'_> {
    fn value(&self, n: usize, j: usize) -> f64 {
        match self {
            Pad::Zero => 0.0,
            Pad::Orbit(o) => o.at(n, j),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSpace<'a> {
    pub kernel: &'a SampledKernel,
    pub grid: &'a LineGrid,
    cells: Vec<usize>,
    left_cells: Vec<usize>,
    right_cells: Vec<usize>,
    /// Pads for the first and second component.
    pub left: [Pad<'a>; 2],
    pub right: [Pad<'a>; 2],
}

impl<'a> LineSpace<'a> {
    pub fn new(
        kernel: &'a SampledKernel,
        grid: &'a LineGrid,
        left: [Pad<'a>; 2],
        right: [Pad<'a>; 2],
    ) -> Self {
        let m = kernel.half_width as isize;
        let n = grid.n as isize;
        LineSpace {
            kernel,
            grid,
            cells: grid.cell_indices(),
            left_cells: (-m..0).map(|i| grid.cell_of(i)).collect(),
            right_cells: (n..n + m).map(|i| grid.cell_of(i)).collect(),
            left,
            right,
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    fn convolve(&self, comp: usize, f: &[f64], n: usize, ext: &mut Vec<f64>, out: &mut [f64]) {
        ext.clear();
        ext.extend(self.left_cells.iter().map(|&j| self.left[comp].value(n, j)));
        ext.extend_from_slice(f);
        ext.extend(self.right_cells.iter().map(|&j| self.right[comp].value(n, j)));
        discretize::convolve_extended(&self.kernel.weights, ext, out);
    }
}

#[derive(Debug, Clone)]
pub enum Space<'a> {
    Cell(&'a WrappedKernel),
    Line(LineSpace<'a>),
}

impl Space<'_> {
    pub fn len(&self) -> usize {
        match self {
            Space::Cell(k) => k.nx,
            Space::Line(l) => l.grid.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell_of(&self, i: usize) -> usize {
        match self {
            Space::Cell(_) => i,
            Space::Line(l) => l.cells[i],
        }
    }
}

/// One field, or a pair `(u, v)`; `v` is empty for scalar forms.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn scalar(u: Vec<f64>) -> Self {
        State { u, v: Vec::new() }
    }

    pub fn pair(u: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(u.len(), v.len());
        State { u, v }
    }

    /// Largest amount by which `self` exceeds `other` in any component.
    pub fn max_excess_over(&self, other: &State) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &State) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Largest clamp applied over the run.
    pub max_clamp: f64,
}

pub struct Stepper<'a> {
    pub form: SystemForm<'a>,
    pub space: Space<'a>,
    pub time: TimeGrid,
}

#[derive(Default)]
struct Scratch {
    ku: Vec<f64>,
    kv: Vec<f64>,
    ext: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(form: SystemForm<'a>, space: Space<'a>, time: TimeGrid) -> Self {
        Stepper { form, space, time }
    }

    fn convolve(&self, comp: usize, f: &[f64], n: usize, s: &mut Scratch, out_v: bool) {
        let out = if out_v { &mut s.kv } else { &mut s.ku };
        out.resize(f.len(), 0.0);
        match &self.space {
            Space::Cell(k) => discretize::convolve_cell_into(k, f, out),
            Space::Line(l) => l.convolve(comp, f, n, &mut s.ext, out),
        }
    }

    /// Advance from step time `t_n` to `t_{n+1}`. Returns the clamp size.
    pub fn step(&self, st: &mut State, n: usize) -> Result<f64, EvolveError> {
        let mut s = Scratch::default();
        self.step_with(st, n, &mut s)
    }

    fn step_with(&self, st: &mut State, n: usize, s: &mut Scratch) -> Result<f64, EvolveError> {
        let dt = self.time.dt;
        let len = self.space.len();
        assert_eq!(st.u.len(), len);
        self.convolve(0, &st.u, n, s, false);
        if self.form.is_pair() {
            assert_eq!(st.v.len(), len);
            self.convolve(1, &st.v, n, s, true);
        }
        let mut clamp: f64 = 0.0;
        match self.form {
            SystemForm::Linear { a } => {
                let row = a.row(n);
                for i in 0..len {
                    let u = st.u[i];
                    st.u[i] = u + dt * (s.ku[i] - u + row[self.space.cell_of(i)] * u);
                }
            }
            SystemForm::Single { species, coefs } => {
                let (ca, cb) = match species {
                    Species::One => (Coef::A1, Coef::B1),
                    Species::Two => (Coef::A2, Coef::C2),
                };
                let (ra, rb) = (coefs.row(ca, n), coefs.row(cb, n));
                for i in 0..len {
                    let j = self.space.cell_of(i);
                    let u = st.u[i];
                    let next = u + dt * (s.ku[i] - u + u * (ra[j] - rb[j] * u));
                    clamp = clamp.max(-next);
                    st.u[i] = flush(next);
                }
            }
            SystemForm::Competitive { coefs } => {
                let r: [&[f64]; 6] = Coef::ALL.map(|c| coefs.row(c, n));
                for i in 0..len {
                    let j = self.space.cell_of(i);
                    let (u, v) = (st.u[i], st.v[i]);
                    let fu = u * (r[0][j] - r[1][j] * u - r[2][j] * v);
                    let fv = v * (r[3][j] - r[4][j] * u - r[5][j] * v);
                    let nu = u + dt * (s.ku[i] - u + fu);
                    let nv = v + dt * (s.kv[i] - v + fv);
                    clamp = clamp.max(-nu).max(-nv);
                    st.u[i] = flush(nu);
                    st.v[i] = flush(nv);
                }
            }
            SystemForm::Cooperative { coefs, ustar, vstar } => {
                let r: [&[f64]; 6] = Coef::ALL.map(|c| coefs.row(c, n));
                let vs = vstar.row(n);
                let (uhi, whi) = (ustar.row(n + 1), vstar.row(n + 1));
                for i in 0..len {
                    let j = self.space.cell_of(i);
                    let (u, w) = (st.u[i], st.v[i]);
                    let v = vs[j] - w;
                    let f = u * (r[0][j] - r[1][j] * u - r[2][j] * v);
                    let g = r[4][j] * v * u + w * (r[3][j] - 2.0 * r[5][j] * vs[j] + r[5][j] * w);
                    let nu = u + dt * (s.ku[i] - u + f);
                    let nw = w + dt * (s.kv[i] - w + g);
                    clamp = clamp
                        .max(-nu)
                        .max(-nw)
                        .max(nu - uhi[j])
                        .max(nw - whi[j]);
                    st.u[i] = flush(nu.min(uhi[j]));
                    st.v[i] = flush(nw.min(whi[j]));
                }
            }
        }
        let t = self.time.t(n + 1);
        if st.u.iter().chain(&st.v).any(|x| !x.is_finite()) {
            return Err(EvolveError::NonFiniteState { t });
        }
        if clamp > CLAMP_LIMIT {
            return Err(EvolveError::InvariantRegionExit { excursion: clamp, t });
        }
        Ok(clamp.max(0.0))
    }

    /// Run `steps` steps from step index `n0`, calling `observe` after each.
    pub fn run<E>(
        &self,
        st: &mut State,
        n0: usize,
        steps: usize,
        mut observe: impl FnMut(usize, &State) -> Result<(), E>,
    ) -> Result<f64, E>
    where
        E: From<EvolveError>,
    {
        let mut s = Scratch::default();
        let mut clamp: f64 = 0.0;
        for k in 0..steps {
            clamp = clamp.max(self.step_with(st, n0 + k, &mut s)?);
            observe(n0 + k + 1, st)?;
        }
        Ok(clamp)
    }

    /// Simulate `steps` steps, recording every `stride` steps and at the end.
    pub fn simulate(&self, init: State, steps: usize, stride: usize) -> Result<Trajectory, EvolveError> {
        let stride = stride.max(1);
        let mut traj = Trajectory {
            times: vec![0.0],
            states: vec![init.clone()],
            max_clamp: 0.0,
        };
        let mut st = init;
        let clamp = self.run(&mut st, 0, steps, |n, s| {
            if n % stride == 0 || n == steps {
                traj.times.push(self.time.t(n));
                traj.states.push(s.clone());
            }
            Ok::<(), EvolveError>(())
        })?;
        traj.max_clamp = clamp;
        Ok(traj)
    }
}

/// Max over all steps of the positive part of `lo - hi`.
pub fn check_order_preservation(
    stepper: &Stepper,
    init_lo: State,
    init_hi: State,
    steps: usize,
) -> Result<f64, EvolveError> {
    let mut lo = init_lo;
    let mut hi = init_hi;
    let mut worst = lo.max_excess_over(&hi);
    let (mut s1, mut s2) = (Scratch::default(), Scratch::default());
    for n in 0..steps {
        stepper.step_with(&mut lo, n, &mut s1)?;
        stepper.step_with(&mut hi, n, &mut s2)?;
        worst = worst.max(lo.max_excess_over(&hi));
    }
    Ok(worst)
}

/// `(u, v) -> (u, v* - v)` with `v*` taken at the given cell indices.
pub fn to_cooperative(st: &State, vstar_row: &[f64], cells: &[usize]) -> State {
    let w = st.v.iter().zip(cells).map(|(v, &j)| vstar_row[j] - v).collect();
    State::pair(st.u.clone(), w)
}

/// Inverse of [`to_cooperative`].
pub fn to_competitive(st: &State, vstar_row: &[f64], cells: &[usize]) -> State {
    to_cooperative(st, vstar_row, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{sample_kernel, twist, wrap_to_cell};
    use crate::habitat::KernelSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        cell: CellGrid,
        time: TimeGrid,
        kernel: SampledKernel,
        wrapped: WrappedKernel,
        coefs: CoefTable,
    }

    fn setup(values: [f64; 6], nx: usize, nt: usize) -> Setup {
        let h = HabitatSpec::constants(values, KernelSpec::uniform(1.0)).unwrap();
        let cell = CellGrid::new(1.0, nx).unwrap();
        let time = TimeGrid::new(1.0, nt);
        let kernel = sample_kernel(h.kernel, cell.dx).unwrap();
        let wrapped = wrap_to_cell(&kernel, &cell);
        let coefs = CoefTable::build(&h, &time, &cell).unwrap();
        Setup {
            cell,
            time,
            kernel,
            wrapped,
            coefs,
        }
    }

    const CONSTANTS: [f64; 6] = [2.0, 1.0, 0.5, 1.0, 1.0, 1.0];

    #[test]
    fn stable_nt_respects_cap() {
        let h = HabitatSpec::constants(CONSTANTS, KernelSpec::uniform(1.0)).unwrap();
        let bd = h.bounds(8, 8).unwrap();
        // max(2 + 4 + 0.5, 1 + 2 + 2, 1, 1) = 6.5
        assert_eq!(reaction_lipschitz(&bd), 6.5);
        let nt = stable_nt(1.0, &bd, 4);
        assert_eq!(nt, 16);
        assert!(1.0 / nt as f64 <= dt_max(&bd));
    }

    #[test]
    fn linear_constant_state() {
        let s = setup(CONSTANTS, 64, 64);
        let k = twist(&s.kernel, 1, 1.0).unwrap();
        let w = wrap_to_cell(&k, &s.cell);
        let a = PeriodicOrbit::constant(1.0, 64, 64, 1.0);
        let st = Stepper::new(SystemForm::Linear { a: &a }, Space::Cell(&w), s.time);
        let mut state = State::scalar(vec![0.7; 64]);
        st.step(&mut state, 0).unwrap();
        let expect = 0.7 * (1.0 + s.time.dt * (w.total - 1.0 + 1.0));
        assert!(state.u.iter().all(|u| (u - expect).abs() < 1e-14));
    }

    #[test]
    fn semitrivial_equilibrium_is_fixed() {
        let s = setup(CONSTANTS, 16, 64);
        let st = Stepper::new(SystemForm::Competitive { coefs: &s.coefs }, Space::Cell(&s.wrapped), s.time);
        let traj = st.simulate(State::pair(vec![2.0; 16], vec![0.0; 16]), 640, 64).unwrap();
        for state in &traj.states {
            assert!(state.u.iter().all(|&u| (u - 2.0).abs() < 1e-14));
            assert!(state.v.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn cooperative_fixed_points() {
        let s = setup(CONSTANTS, 16, 64);
        let us = PeriodicOrbit::constant(1.0, 64, 16, 2.0);
        let vs = PeriodicOrbit::constant(1.0, 64, 16, 1.0);
        let form = SystemForm::Cooperative {
            coefs: &s.coefs,
            ustar: &us,
            vstar: &vs,
        };
        let st = Stepper::new(form, Space::Cell(&s.wrapped), s.time);
        let t = st.simulate(State::pair(vec![0.0; 16], vec![0.0; 16]), 128, 1).unwrap();
        assert!(t.states.iter().all(|x| x.u.iter().chain(&x.v).all(|&v| v == 0.0)));

        let line = LineGrid::new(s.cell, 5.0, 1).unwrap();
        let space = LineSpace::new(&s.kernel, &line, [Pad::Orbit(&us), Pad::Orbit(&vs)], [Pad::Orbit(&us), Pad::Orbit(&vs)]);
        let st = Stepper::new(form, Space::Line(space), s.time);
        let t = st
            .simulate(State::pair(vec![2.0; line.n], vec![1.0; line.n]), 128, 1)
            .unwrap();
        let last = t.states.last().unwrap();
        assert!(last.u.iter().all(|&u| (u - 2.0).abs() < 1e-12));
        assert!(last.v.iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let space = LineSpace::new(&s.kernel, &line, [Pad::Zero; 2], [Pad::Zero; 2]);
        let st = Stepper::new(form, Space::Line(space), s.time);
        let t = st.simulate(State::pair(vec![0.0; line.n], vec![0.0; line.n]), 64, 8).unwrap();
        assert!(t.states.iter().all(|x| x.u.iter().chain(&x.v).all(|&v| v == 0.0)));
        assert_eq!(t.times.len(), 9);
    }

    #[test]
    fn logistic_reaches_carrying_capacity() {
        let s = setup([1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 16, 64);
        let st = Stepper::new(
            SystemForm::Single {
                species: Species::One,
                coefs: &s.coefs,
            },
            Space::Cell(&s.wrapped),
            s.time,
        );
        let t = st.simulate(State::scalar(vec![0.01; 16]), 40 * 64, 64).unwrap();
        let closed = 1.0 / (1.0 + 99.0 * (-40f64).exp());
        assert!(t.states.last().unwrap().u.iter().all(|u| (u - closed).abs() < 1e-6));
        assert!((t.times.last().unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn order_preservation_on_ordered_pairs() {
        let s = setup(CONSTANTS, 16, 64);
        let us = PeriodicOrbit::constant(1.0, 64, 16, 2.0);
        let vs = PeriodicOrbit::constant(1.0, 64, 16, 1.0);
        let st = Stepper::new(
            SystemForm::Cooperative {
                coefs: &s.coefs,
                ustar: &us,
                vstar: &vs,
            },
            Space::Cell(&s.wrapped),
            s.time,
        );
        let same = State::pair(vec![1.0; 16], vec![0.5; 16]);
        assert_eq!(check_order_preservation(&st, same.clone(), same, 64).unwrap(), 0.0);

        let single = Stepper::new(
            SystemForm::Single {
                species: Species::One,
                coefs: &s.coefs,
            },
            Space::Cell(&s.wrapped),
            s.time,
        );
        let v = check_order_preservation(
            &single,
            State::scalar(vec![0.0; 16]),
            State::scalar(vec![2.0; 16]),
            256,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn monotone_step_randomized() {
        let s = setup(CONSTANTS, 16, 64);
        let us = PeriodicOrbit::constant(1.0, 64, 16, 2.0);
        let vs = PeriodicOrbit::constant(1.0, 64, 16, 1.0);
        let st = Stepper::new(
            SystemForm::Cooperative {
                coefs: &s.coefs,
                ustar: &us,
                vstar: &vs,
            },
            Space::Cell(&s.wrapped),
            s.time,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let lo_u: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..2.0)).collect();
            let lo_v: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
            let hi_u: Vec<f64> = lo_u.iter().map(|&x| rng.gen_range(x..=2.0)).collect();
            let hi_v: Vec<f64> = lo_v.iter().map(|&x| rng.gen_range(x..=1.0)).collect();
            let mut lo = State::pair(lo_u, lo_v);
            let mut hi = State::pair(hi_u, hi_v);
            st.step(&mut lo, 0).unwrap();
            st.step(&mut hi, 0).unwrap();
            assert!(lo.max_excess_over(&hi) <= 0.0);
        }
    }

    #[test]
    fn euler_is_first_order() {
        let h = HabitatSpec::new(
            ["1+0.5*sin(2*pi*t/T)*cos(2*pi*x/p)", "1", "0.5", "1", "1", "1"],
            1.0,
            1.0,
            KernelSpec::uniform(0.3),
            Default::default(),
            (16, 16),
        )
        .unwrap();
        let cell = CellGrid::new(1.0, 16).unwrap();
        let kernel = sample_kernel(h.kernel, cell.dx).unwrap();
        let wrapped = wrap_to_cell(&kernel, &cell);
        let init: Vec<f64> = (0..16).map(|j| 0.5 + 0.3 * (j as f64 * 0.4).sin()).collect();
        let run = |nt: usize| {
            let time = TimeGrid::new(1.0, nt);
            let coefs = CoefTable::build(&h, &time, &cell).unwrap();
            let st = Stepper::new(
                SystemForm::Single {
                    species: Species::One,
                    coefs: &coefs,
                },
                Space::Cell(&wrapped),
                time,
            );
            let mut s = State::scalar(init.clone());
            st.run(&mut s, 0, nt, |_, _| Ok::<(), EvolveError>(())).unwrap();
            s
        };
        let (a, b, c) = (run(32), run(64), run(128));
        let order = (a.sup_distance(&b) / b.sup_distance(&c)).log2();
        assert!(order >= 0.9, "order {order}");
    }

    #[test]
    fn transform_consistency_on_constants() {
        let s = setup(CONSTANTS, 16, 64);
        let us = PeriodicOrbit::constant(1.0, 64, 16, 2.0);
        let vs = PeriodicOrbit::constant(1.0, 64, 16, 1.0);
        let cells: Vec<usize> = (0..16).collect();
        let u0: Vec<f64> = (0..16).map(|j| 1.0 + 0.5 * (j as f64).cos()).collect();
        let v0: Vec<f64> = (0..16).map(|j| 0.5 + 0.4 * (0.7 * j as f64).sin()).collect();
        let comp = Stepper::new(SystemForm::Competitive { coefs: &s.coefs }, Space::Cell(&s.wrapped), s.time);
        let coop = Stepper::new(
            SystemForm::Cooperative {
                coefs: &s.coefs,
                ustar: &us,
                vstar: &vs,
            },
            Space::Cell(&s.wrapped),
            s.time,
        );
        let mut a = State::pair(u0, v0);
        let mut b = to_cooperative(&a, vs.row(0), &cells);
        comp.run(&mut a, 0, 64, |_, _| Ok::<(), EvolveError>(())).unwrap();
        coop.run(&mut b, 0, 64, |_, _| Ok::<(), EvolveError>(())).unwrap();
        let back = to_competitive(&b, vs.row(64), &cells);
        assert!(a.sup_distance(&back) < 1e-8);
    }

    #[test]
    fn orbit_interpolation() {
        let rows: Vec<Vec<f64>> = (0..4).map(|n| vec![n as f64; 2]).collect();
        let o = PeriodicOrbit::from_rows(2.0, rows, 0.0);
        assert_eq!(o.interpolate(0.5, 1), 1.0);
        assert_eq!(o.interpolate(0.75, 0), 1.5);
        // wraps from the last row back to the first
        assert_eq!(o.interpolate(1.75, 0), 1.5);
        assert_eq!(o.interpolate(-0.5, 0), 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nonnegative_inits_stay_nonnegative(
            u in prop::collection::vec(0.0f64..3.0, 16),
            v in prop::collection::vec(0.0f64..3.0, 16),
        ) {
            let s = setup(CONSTANTS, 16, 64);
            let st = Stepper::new(SystemForm::Competitive { coefs: &s.coefs }, Space::Cell(&s.wrapped), s.time);
            let traj = st.simulate(State::pair(u, v), 128, 16).unwrap();
            for x in &traj.states {
                prop_assert!(x.u.iter().chain(&x.v).all(|&y| y >= 0.0));
            }
        }
    }
}
