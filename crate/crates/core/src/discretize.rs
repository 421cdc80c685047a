//! Grids, kernel weights and discrete convolutions on the period cell and on
//! a truncated line.

use thiserror::Error;

use crate::habitat::KernelSpec;
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("grid too coarse: dx = {dx} but kernel radius is {radius}")]
    GridTooCoarse { dx: f64, radius: f64 },
    #[error("twisted kernel weight is not finite (mu = {mu}, xi = {xi})")]
    NonFiniteWeight { mu: f64, xi: i8 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// `nx` equally spaced nodes `x_j = j dx` on one spatial period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub nx: usize,
    pub dx: f64,
    pub period: f64,
}

impl CellGrid {
    pub fn new(period: f64, nx: usize) -> Result<Self, DiscretizeError> {
        if nx < 16 {
            return Err(DiscretizeError::InvalidGrid(format!(
                "need at least 16 nodes per period, got {nx}"
            )));
        }
        Ok(Self::new_unchecked(period, nx))
    }

    /// Skips the resolution floor; used by scalar oracles and small tests.
    pub fn new_unchecked(period: f64, nx: usize) -> Self {
        assert!(nx > 0 && period > 0.0);
        CellGrid {
            nx,
            dx: period / nx as f64,
            period,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }
}

/// Nodes `s_i = -L + i dx`, `i = 0..n`, in the coordinate `s = x * xi`.
///
/// The habitat is sampled at cell index `cell_of(i)`, which mirrors the
/// period cell when `xi = -1`. Kernels are even, so the line dynamics in `s`
/// only see the direction through this index map and the twist sign.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    pub cell: CellGrid,
    pub half_periods: usize,
    pub xi: i8,
    pub n: usize,
}

impl LineGrid {
    pub fn new(cell: CellGrid, half_length: f64, xi: i8) -> Result<Self, DiscretizeError> {
        check_xi(xi)?;
        let k = (half_length / cell.period).round();
        if k < 1.0 || (k * cell.period - half_length).abs() > 1e-9 * half_length.max(1.0) {
            return Err(DiscretizeError::InvalidGrid(format!(
                "half-length {half_length} is not a positive multiple of the period {}",
                cell.period
            )));
        }
        let half_periods = k as usize;
        Ok(LineGrid {
            cell,
            half_periods,
            xi,
            n: 2 * half_periods * cell.nx + 1,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_periods as f64 * self.cell.period
    }

    pub fn dx(&self) -> f64 {
        self.cell.dx
    }

    /// `s` coordinate of node `i` (may lie outside `0..n` for pad nodes).
    pub fn s(&self, i: isize) -> f64 {
        let offset = i - (self.half_periods * self.cell.nx) as isize;
        offset as f64 * self.cell.dx
    }

    pub fn cell_of(&self, i: isize) -> usize {
        let nx = self.cell.nx as isize;
        let j = if self.xi > 0 { i } else { -i };
        j.rem_euclid(nx) as usize
    }

    pub fn cell_indices(&self) -> Vec<usize> {
        (0..self.n as isize).map(|i| self.cell_of(i)).collect()
    }
}

pub(crate) fn check_xi(xi: i8) -> Result<(), DiscretizeError> {
    if xi == 1 || xi == -1 {
        Ok(())
    } else {
        Err(DiscretizeError::InvalidGrid(format!("direction must be +1 or -1, got {xi}")))
    }
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Gauss-Legendre on `[lo, hi]`, summing mirrored node pairs so that the
/// result is bitwise invariant under `z -> -z` of both integrand and interval.
fn gauss(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for &(t, w) in &GL8 {
        acc += w * (f(c + h * t) + f(c - h * t));
    }
    acc * h
}

/// Kernel weights on offsets `m dx`, `m = -half_width..=half_width`.
///
/// Each weight is the exact cell integral of `e^{-mu xi z} k(z)` over
/// `[m dx - dx/2, m dx + dx/2]`, divided by the untwisted total so that the
/// untwisted weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    pub spec: KernelSpec,
    pub dx: f64,
    pub half_width: usize,
    pub weights: Vec<f64>,
    pub xi: i8,
    pub mu: f64,
    norm: f64,
}

impl SampledKernel {
    pub fn is_twisted(&self) -> bool {
        self.mu != 0.0
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let m0 = self.half_width as isize;
        self.weights.iter().enumerate().map(move |(k, &w)| (k as isize - m0, w))
    }

    /// Discrete moment: the sum of all weights, paired symmetrically.
    pub fn total(&self) -> f64 {
        let m = self.half_width;
        let mut s = self.weights[m];
        for k in 1..=m {
            s += self.weights[m + k] + self.weights[m - k];
        }
        s
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

fn cell_integrals(spec: &KernelSpec, dx: f64, half_width: usize, factor: f64) -> Vec<f64> {
    let r = spec.radius;
    let m0 = half_width as isize;
    (-m0..=m0)
        .map(|m| {
            let lo = (m as f64 * dx - 0.5 * dx).max(-r);
            let hi = (m as f64 * dx + 0.5 * dx).min(r);
            if hi <= lo {
                return 0.0;
            }
            let f = |z: f64| (-factor * z).exp() * spec.density(z);
            let mut cuts = vec![lo];
            cuts.extend(spec.kinks().iter().copied().filter(|&k| k > lo && k < hi));
            cuts.push(hi);
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                acc += gauss(w[0], w[1], f);
            }
            acc
        })
        .collect()
}

pub fn sample_kernel(spec: KernelSpec, dx: f64) -> Result<SampledKernel, DiscretizeError> {
    if !(dx > 0.0 && dx < spec.radius) {
        return Err(DiscretizeError::GridTooCoarse {
            dx,
            radius: spec.radius,
        });
    }
    // cells meeting (-r, r): |m| dx - dx/2 < r
    let half_width = (spec.radius / dx + 0.5).ceil() as usize - 1;
    let mut k = SampledKernel {
        spec,
        dx,
        half_width,
        weights: cell_integrals(&spec, dx, half_width, 0.0),
        xi: 1,
        mu: 0.0,
        norm: 1.0,
    };
    let norm = k.total();
    for w in &mut k.weights {
        *w /= norm;
    }
    k.norm = norm;
    Ok(k)
}

/// Twisted copy of an untwisted kernel. Not renormalized.
pub fn twist(k: &SampledKernel, xi: i8, mu: f64) -> Result<SampledKernel, DiscretizeError> {
    check_xi(xi)?;
    assert!(!k.is_twisted(), "twist expects an untwisted kernel");
    let factor = mu * xi as f64;
    let mut weights = cell_integrals(&k.spec, k.dx, k.half_width, factor);
    for w in &mut weights {
        *w /= k.norm;
        if !w.is_finite() {
            return Err(DiscretizeError::NonFiniteWeight { mu, xi });
        }
    }
    let out = SampledKernel {
        weights,
        xi,
        mu,
        ..k.clone()
    };
    if !out.total().is_finite() {
        return Err(DiscretizeError::NonFiniteWeight { mu, xi });
    }
    Ok(out)
}

/// Kernel folded onto the period cell: `(Kf)_i = sum_j w_j f_{(i+j) mod nx}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WrappedKernel {
    pub nx: usize,
    pub weights: Vec<f64>,
    pub total: f64,
    pub xi: i8,
    pub mu: f64,
}

pub fn wrap_to_cell(k: &SampledKernel, g: &CellGrid) -> WrappedKernel {
    let nx = g.nx as isize;
    let mut weights = vec![0.0; g.nx];
    for (m, w) in k.offsets() {
        weights[m.rem_euclid(nx) as usize] += w;
    }
    WrappedKernel {
        nx: g.nx,
        weights,
        total: k.total(),
        xi: k.xi,
        mu: k.mu,
    }
}

pub fn convolve_cell(k: &WrappedKernel, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    convolve_cell_into(k, f, &mut out);
    out
}

pub fn convolve_cell_into(k: &WrappedKernel, f: &[f64], out: &mut [f64]) {
    let nx = k.nx;
    assert_eq!(f.len(), nx);
    assert_eq!(out.len(), nx);
    out.fill(0.0);
    for (j, &w) in k.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (head, tail) = f.split_at(j);
        // out_i += w f_{i+j}: first nx-j from tail, rest wrap to head
        let (o1, o2) = out.split_at_mut(nx - j);
        for (o, &v) in o1.iter_mut().zip(tail) {
            *o += w * v;
        }
        for (o, &v) in o2.iter_mut().zip(head) {
            *o += w * v;
        }
    }
}

/// Line convolution. `left` holds values at nodes `-M..-1`, `right` at
/// `n..n+M-1`, with `M = k.half_width`.
pub fn convolve_line(k: &SampledKernel, f: &[f64], left: &[f64], right: &[f64]) -> Vec<f64> {
    let m = k.half_width;
    assert_eq!(left.len(), m);
    assert_eq!(right.len(), m);
    let mut ext = Vec::with_capacity(f.len() + 2 * m);
    ext.extend_from_slice(left);
    ext.extend_from_slice(f);
    ext.extend_from_slice(right);
    let mut out = vec![0.0; f.len()];
    convolve_extended(&k.weights, &ext, &mut out);
    out
}

const CHUNK: usize = 2048;

/// `out_i = sum_m w_m ext_{i+m}` for an extended buffer of length
/// `out.len() + w.len() - 1`. Summation order is fixed per output element.
pub(crate) fn convolve_extended(w: &[f64], ext: &[f64], out: &mut [f64]) {
    assert_eq!(ext.len(), out.len() + w.len() - 1);
    par::for_each_chunk_mut(out, CHUNK, |start, chunk| {
        chunk.fill(0.0);
        let len = chunk.len();
        for (m, &wm) in w.iter().enumerate() {
            if wm == 0.0 {
                continue;
            }
            let src = &ext[start + m..start + m + len];
            for (o, &v) in chunk.iter_mut().zip(src) {
                *o += wm * v;
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::habitat::{KernelShape, KernelSpec};
    use proptest::prelude::*;

    fn uniform() -> KernelSpec {
        KernelSpec::uniform(1.0)
    }

    /// Adaptive Simpson quadrature used as an independent moment oracle.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn uniform_quarter_grid_normalizes() {
        let k = sample_kernel(uniform(), 0.25).unwrap();
        // cells centred at 0, +-0.25, +-0.5, +-0.75 and the clipped +-1 cells
        assert_eq!(k.nonzero_count(), 9);
        assert!((k.total() - 1.0).abs() < 1e-12);
        assert!((k.weights[0] - 0.0625).abs() < 1e-15);
        assert!((k.weights[4] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn triangle_is_symmetric() {
        let k = sample_kernel(KernelSpec::new(KernelShape::Triangle, 1.0), 0.5).unwrap();
        let n = k.weights.len();
        for i in 0..n {
            assert_eq!(k.weights[i], k.weights[n - 1 - i]);
        }
        assert!((k.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(
            sample_kernel(uniform(), 2.0),
            Err(DiscretizeError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn zero_twist_is_identity() {
        let k = sample_kernel(uniform(), 1.0 / 64.0).unwrap();
        let t = twist(&k, 1, 0.0).unwrap();
        assert_eq!(t.weights, k.weights);
        assert!((t.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twisted_moment_matches_quadrature() {
        for shape in [KernelShape::Uniform, KernelShape::Triangle, KernelShape::CosineBump] {
            let spec = KernelSpec::new(shape, 1.0);
            let k = sample_kernel(spec, 1.0 / 64.0).unwrap();
            for mu in [0.5, 1.0, 2.0, 4.0] {
                let exact = simpson(&|z| (-mu * z).exp() * spec.density(z), -1.0, 1.0, 1e-13);
                let got = twist(&k, 1, mu).unwrap().total();
                assert!((got - exact).abs() < 1e-9 * exact, "{shape:?} mu={mu}: {got} vs {exact}");
            }
        }
        let k = sample_kernel(uniform(), 1.0 / 64.0).unwrap();
        let s = twist(&k, 1, 1.0).unwrap().total();
        assert!((s - 1f64.sinh()).abs() < 0.01);
    }

    #[test]
    fn twist_symmetry_is_exact() {
        for shape in [KernelShape::Uniform, KernelShape::Triangle, KernelShape::CosineBump] {
            let k = sample_kernel(KernelSpec::new(shape, 1.3), 0.07).unwrap();
            for mu in [0.3, 1.7, 5.0] {
                let a = twist(&k, 1, mu).unwrap().total();
                let b = twist(&k, -1, mu).unwrap().total();
                let c = twist(&k, 1, -mu).unwrap().total();
                assert_eq!(a, b);
                assert_eq!(a, c);
            }
        }
    }

    #[test]
    fn overflowing_twist_is_an_error() {
        let k = sample_kernel(uniform(), 0.1).unwrap();
        assert!(matches!(twist(&k, 1, 1000.0), Err(DiscretizeError::NonFiniteWeight { .. })));
    }

    #[test]
    fn wrap_short_kernel_is_relabel() {
        let g = CellGrid::new(4.0, 16).unwrap();
        let k = sample_kernel(uniform(), g.dx).unwrap();
        let w = wrap_to_cell(&k, &g);
        for (m, wm) in k.offsets() {
            assert_eq!(w.weights[m.rem_euclid(16) as usize], wm);
        }
        let ones = convolve_cell(&w, &[1.0; 16]);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn wrapped_kernel_matches_line_convolution() {
        let g = CellGrid::new(1.0, 16).unwrap();
        let k = twist(&sample_kernel(KernelSpec::uniform(1.5), g.dx).unwrap(), 1, 0.7).unwrap();
        let w = wrap_to_cell(&k, &g);
        let f: Vec<f64> = (0..16).map(|j| (1.3 * j as f64).sin() + 2.0).collect();
        let got = convolve_cell(&w, &f);
        for i in 0..16isize {
            let direct: f64 = k
                .offsets()
                .map(|(m, wm)| wm * f[(i + m).rem_euclid(16) as usize])
                .sum();
            assert!((got[i as usize] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_are_eigenvectors() {
        let g = CellGrid::new(1.0, 32).unwrap();
        let k = twist(&sample_kernel(uniform(), g.dx).unwrap(), -1, 1.2).unwrap();
        let w = wrap_to_cell(&k, &g);
        let out = convolve_cell(&w, &[3.0; 32]);
        for v in out {
            assert!((v - 3.0 * w.total).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_convolution_matches_dense_matrix() {
        let g = CellGrid::new(1.0, 24).unwrap();
        let k = twist(&sample_kernel(KernelSpec::uniform(0.4), g.dx).unwrap(), 1, 2.0).unwrap();
        let w = wrap_to_cell(&k, &g);
        let n = g.nx;
        let mut mat = vec![0.0; n * n];
        for i in 0..n {
            for (m, wm) in k.offsets() {
                mat[i * n + (i as isize + m).rem_euclid(n as isize) as usize] += wm;
            }
        }
        let f: Vec<f64> = (0..n).map(|j| ((j * 7919) % 13) as f64 / 13.0 - 0.3).collect();
        let got = convolve_cell(&w, &f);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| mat[i * n + j] * f[j]).sum();
            assert!((got[i] - r).abs() < 1e-13);
        }
    }

    #[test]
    fn line_step_and_leakage() {
        let dx = 1.0 / 32.0;
        let k = sample_kernel(uniform(), dx).unwrap();
        let m = k.half_width;
        let n = 321; // s from -5 to 5
        let f: Vec<f64> = (0..n).map(|i| if i <= 160 { 1.0 } else { 0.0 }).collect();
        let out = convolve_line(&k, &f, &vec![1.0; m], &vec![0.0; m]);
        assert!((out[160] - 0.5).abs() <= dx);

        let ones = vec![1.0; n];
        let out = convolve_line(&k, &ones, &vec![1.0; m], &vec![1.0; m]);
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let out = convolve_line(&k, &ones, &vec![0.0; m], &vec![0.0; m]);
        assert!((out[n / 2] - 1.0).abs() < 1e-12);
        assert!(out[0] < 1.0 && out[n - 1] < 1.0);
    }

    #[test]
    fn line_grid_indexing() {
        let cell = CellGrid::new(1.0, 16).unwrap();
        let g = LineGrid::new(cell, 3.0, 1).unwrap();
        assert_eq!(g.n, 97);
        assert_eq!(g.s(0), -3.0);
        assert_eq!(g.s(96), 3.0);
        assert_eq!(g.cell_of(0), 0);
        assert_eq!(g.cell_of(5), 5);
        let m = LineGrid::new(cell, 3.0, -1).unwrap();
        assert_eq!(m.cell_of(5), 11);
        assert!(LineGrid::new(cell, 2.5, 1).is_err());
        assert!(LineGrid::new(cell, 3.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn convolution_is_linear_positive_monotone(
            f in prop::collection::vec(0.0f64..2.0, 40),
            g in prop::collection::vec(0.0f64..2.0, 40),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            mu in 0.0f64..3.0,
        ) {
            let dx = 0.05;
            let k = twist(&sample_kernel(KernelSpec::uniform(0.3), dx).unwrap(), 1, mu).unwrap();
            let m = k.half_width;
            let lp = vec![0.5; m];
            let rp = vec![0.0; m];
            let cf = convolve_line(&k, &f, &lp, &rp);
            let cg = convolve_line(&k, &g, &lp, &rp);
            let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lin = convolve_line(&k, &comb, &vec![0.5 * (a + b); m], &rp);
            for i in 0..40 {
                prop_assert!((lin[i] - (a * cf[i] + b * cg[i])).abs() < 1e-12 * (1.0 + lin[i].abs()));
                prop_assert!(cf[i] >= 0.0);
            }
            let hi: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
            let ch = convolve_line(&k, &hi, &lp, &rp);
            for i in 0..40 {
                prop_assert!(ch[i] >= cf[i]);
            }

            let cell = CellGrid::new_unchecked(2.0, 40);
            let w = wrap_to_cell(&k, &cell);
            let wf = convolve_cell(&w, &f);
            let whi = convolve_cell(&w, &hi);
            for i in 0..40 {
                prop_assert!(wf[i] >= 0.0 && whi[i] >= wf[i]);
            }
        }
    }
}
