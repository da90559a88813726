//! Value iteration for the dynamic programming equations of the random
//! walk and the tug-of-war game on a bounded space-time slab: the value at
//! `(x,t)` is the average of the value at `(x+w, t+τ)` under the jump law
//! conditioned on leaving `C_ε^+`, or the sup-inf of one-sided directional
//! averages. Values outside the slab come from the exterior data.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;

use crate::ctrw::{ExteriorSampler, RngStream};
use crate::error::{check_positive, Error, Result};
use crate::fields::{ScalarField, SpaceTimePoint};
use crate::infinity::SphereGrid;
use crate::kernel::FracParams;
use crate::quad::{chi_cutoff, GaussRule};

/// Uniform space-time grid over `Ω × [t₀, T]` with `Ω` a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Cells per spatial direction.
    pub cells: usize,
    pub t0: f64,
    pub t1: f64,
    /// Time steps.
    pub steps: usize,
}

impl SlabGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: usize, t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() > 2 {
            return Err(Error::InvalidParameter("the slab box must have dimension 1 or 2".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) || !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(Error::InvalidParameter("slab bounds must be finite and increasing".into()));
        }
        if cells == 0 || steps == 0 {
            return Err(Error::InvalidParameter("the grid needs at least one cell and one step".into()));
        }
        Ok(Self { lo, hi, cells, t0, t1, steps })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn h(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) / self.cells as f64).fold(0.0, f64::max)
    }

    pub fn k(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    fn per_level(&self) -> usize {
        (self.cells + 1).pow(self.dim() as u32)
    }

    pub fn len(&self) -> usize {
        self.per_level() * (self.steps + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial coordinates and time of node `idx`.
    pub fn node(&self, idx: usize) -> (Vec<f64>, f64) {
        let per = self.per_level();
        let (level, mut rest) = (idx / per, idx % per);
        let m = self.cells + 1;
        let x = (0..self.dim())
            .map(|d| {
                let i = rest % m;
                rest /= m;
                self.lo[d] + (self.hi[d] - self.lo[d]) * i as f64 / self.cells as f64
            })
            .collect();
        (x, self.t0 + self.k() * level as f64)
    }

    pub fn is_terminal(&self, idx: usize) -> bool {
        idx / self.per_level() == self.steps
    }

    pub fn inside(&self, x: &[f64], t: f64) -> bool {
        t < self.t1 && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| v >= a && v <= b)
    }

    /// Multilinear interpolation stencil of an inside point.
    fn stencil(&self, x: &[f64], t: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let m = self.cells + 1;
        let locate = |v: f64, lo: f64, len: f64, cells: usize| {
            let u = ((v - lo) / len * cells as f64).clamp(0.0, cells as f64);
            let i = (u.floor() as usize).min(cells - 1);
            (i, u - i as f64)
        };
        let (tj, tf) = locate(t, self.t0, self.t1 - self.t0, self.steps);
        let cells: Vec<(usize, f64)> = (0..self.dim()).map(|d| locate(x[d], self.lo[d], self.hi[d] - self.lo[d], self.cells)).collect();
        let corners = 1usize << (self.dim() + 1);
        for c in 0..corners {
            let mut idx = 0;
            let mut stride = 1;
            let mut w = 1.0;
            for (d, &(i, f)) in cells.iter().enumerate() {
                let up = (c >> d) & 1;
                idx += (i + up) * stride;
                w *= if up == 1 { f } else { 1.0 - f };
                stride *= m;
            }
            let up = (c >> self.dim()) & 1;
            idx += (tj + up) * self.per_level();
            w *= if up == 1 { tf } else { 1.0 - tf };
            if w != 0.0 {
                out.push((idx, w));
            }
        }
    }
}

/// Grid values of the game together with its exterior data.
#[derive(Clone, Debug)]
pub struct ValueSlab {
    pub grid: SlabGrid,
    pub values: Vec<f64>,
    pub exterior: ScalarField,
    pub eps: f64,
}

impl ValueSlab {
    /// Values initialized with the exterior data at the nodes. Nodes at
    /// `t = T` hold the left limit `v(x, T-)`, which differs from the data
    /// there, so reads just before `T` interpolate towards the right value.
    pub fn new(grid: SlabGrid, exterior: ScalarField, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        if exterior.dim() != grid.dim() {
            return Err(Error::InvalidParameter("exterior data and slab differ in dimension".into()));
        }
        let values = (0..grid.len())
            .map(|i| {
                let (x, t) = grid.node(i);
                exterior.value(&x, t)
            })
            .collect();
        Ok(Self { grid, values, exterior, eps })
    }

    /// Value at an arbitrary point: interpolated inside, exterior data
    /// elsewhere.
    pub fn read(&self, x: &[f64], t: f64) -> f64 {
        if !self.grid.inside(x, t) {
            return self.exterior.value(x, t);
        }
        let mut st = Vec::with_capacity(8);
        self.grid.stencil(x, t, &mut st);
        st.iter().map(|(i, w)| w * self.values[*i]).sum()
    }

    /// `(h² + k)·sup|v|`, the interpolation error scale.
    pub fn interpolation_bound(&self) -> f64 {
        let sup = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (self.grid.h().powi(2) + self.grid.k()) * sup
    }
}

/// Game played on the slab.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GameMode {
    /// Average over the `n`-dimensional exterior jump law.
    LinearWalk,
    /// `sup_y inf_z ½(M^{s,y} v + M^{s,-z} v)` over a sphere grid.
    TugOfWar,
}

impl GameMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "walk" | "linear" | "linear-walk" => Ok(Self::LinearWalk),
            "tug" | "tug-of-war" => Ok(Self::TugOfWar),
            other => Err(Error::InvalidParameter(format!("unknown game mode `{other}`"))),
        }
    }
}

/// How the jump-law averages are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Backend {
    /// Tensor Gauss rules; `level` doubles every panel count per step.
    Quadrature { level: usize },
    /// A fixed set of exact exterior draws with equal weights.
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameConfig {
    pub mode: GameMode,
    /// Sphere-grid resolution of the tug-of-war directions.
    pub resolution: usize,
    pub backend: Backend,
}

impl GameConfig {
    pub fn linear() -> Self {
        Self { mode: GameMode::LinearWalk, resolution: 0, backend: Backend::Quadrature { level: 1 } }
    }

    pub fn tug(resolution: usize) -> Self {
        Self { mode: GameMode::TugOfWar, resolution, backend: Backend::Quadrature { level: 1 } }
    }

    fn validate(&self) -> Result<()> {
        match self.backend {
            Backend::Quadrature { level } if level == 0 => Err(Error::InvalidParameter("quadrature level must be at least 1".into())),
            Backend::MonteCarlo { draws, .. } if draws < 1000 => {
                Err(Error::InvalidParameter(format!("Monte Carlo backend needs at least 1000 draws (got {draws})")))
            }
            _ if self.mode == GameMode::TugOfWar && self.resolution == 0 => {
                Err(Error::InvalidParameter("tug-of-war needs a sphere-grid resolution".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Discrete jump law: displacement, lag and weight (weights sum to one).
#[derive(Clone, Debug, Default)]
pub struct JumpRule {
    pub w: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub weight: Vec<f64>,
}

impl JumpRule {
    fn push(&mut self, w: Vec<f64>, tau: f64, weight: f64) {
        if weight > 0.0 {
            self.w.push(w);
            self.tau.push(tau);
            self.weight.push(weight);
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }
}

fn normalize(weights: &mut [f64]) {
    let mass: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= mass);
}

/// Composite Gauss rule over the panels `edges`, each cut into `sub`
/// pieces, with extra edges at the `cuts` that fall inside.
fn split_rule(edges: &[f64], cuts: &[f64], sub: usize) -> GaussRule {
    let mut e = edges.to_vec();
    let (lo, hi) = (e[0], e[e.len() - 1]);
    e.extend(cuts.iter().copied().filter(|c| *c > lo && *c < hi));
    e.sort_by(f64::total_cmp);
    e.dedup();
    let mut rule = GaussRule { nodes: Vec::new(), weights: Vec::new() };
    for w in e.windows(2) {
        let piece = GaussRule::composite(w[0], w[1], sub, 8);
        rule.nodes.extend(piece.nodes);
        rule.weights.extend(piece.weights);
    }
    rule
}

/// Panels for `E[f(x)]` under `x^{s-1} Q(n/2, x)` on `(1/4, ∞)`.
const NEAR_X_EDGES: [f64; 9] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 40.25];
/// Panels for `e^{-z}` weights on `(0, ∞)`.
const NEAR_Z_EDGES: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0];

/// Number of kink offsets, in units of `ε` or `ε²`, split off inside the slab.
const KINK_DEPTH: usize = 1;
/// Cap on the `ε`-wide radial panels of one far-region segment, per level.
const MAX_RADIAL_PANELS: usize = 256;

/// Radii along `d` at which the ray meets a face of the box or a plane
/// `kε` inside it, `k <= KINK_DEPTH`, ascending.
fn boundary_crossings(grid: &SlabGrid, x: &[f64], d: &[f64], eps: f64, out: &mut Vec<f64>) {
    let mut exit = f64::INFINITY;
    for c in 0..x.len() {
        if d[c] != 0.0 {
            let face = if d[c] > 0.0 { grid.hi[c] } else { grid.lo[c] };
            exit = exit.min((face - x[c]) / d[c]);
        }
    }
    let exit = exit.max(0.0);
    for c in 0..x.len() {
        if d[c] == 0.0 {
            continue;
        }
        let (face, inward) = if d[c] > 0.0 { (grid.hi[c], -1.0) } else { (grid.lo[c], 1.0) };
        for k in 0..=KINK_DEPTH {
            let r = (face + inward * k as f64 * eps - x[c]) / d[c];
            if r > 0.0 && r <= exit {
                out.push(r);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
}

/// Node-adapted quadrature of the normalized exterior law of `C_ε^+` in
/// polar form `w = r d`. For `τ >= ε²` the lag is `ε² y^{-1/s}` with `y`
/// uniform and `r/√(2τ)` follows the chi law; for `τ < ε²`, `x = ε²/(4τ)`
/// has density `∝ x^{s-1} Q(n/2, x)` on `(1/4, ∞)` and `r² = ε² + 4τz` with
/// weight `(ε² + 4τz)^{(n-2)/2} e^{-z}`. Lag rules are split where the walk
/// leaves the slab in time and radial rules where the ray leaves the box,
/// so each piece integrates a continuous function. The value has kinks one
/// step of `ε` (space) or `ε²` (time) inside those exits, which are split
/// off as well, and far-region radial panels are at most `ε` wide so
/// oscillating data is resolved at large lags. The value has kinks one
/// step of `ε` (space) or `ε²` (time) inside those exits, which are split
/// off as well, and far-region radial panels are at most `ε` wide so
/// oscillating data is resolved at large lags.
#[derive(Clone, Debug)]
pub struct QuadPlan {
    law_dim: usize,
    s: f64,
    eps: f64,
    far_p: f64,
    near_norm: f64,
    scale: usize,
    dirs: Vec<(Vec<f64>, f64)>,
}

impl QuadPlan {
    /// `law_dim`-dimensional law along the weighted directions `dirs`.
    pub fn new(law_dim: usize, s: f64, eps: f64, level: usize, dirs: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let fp = FracParams::new(law_dim, s)?;
        let half = 0.5 * law_dim as f64;
        let reference = split_rule(&NEAR_X_EDGES, &[], 16);
        let near_norm = reference.nodes.iter().zip(&reference.weights).map(|(x, w)| w * x.powf(s - 1.0) * gamma_ur(half, *x)).sum();
        Ok(Self { law_dim, s, eps, far_p: fp.far_time_fraction(), near_norm, scale: 1 << (level - 1), dirs })
    }

    /// Full `n`-dimensional law: `±1` for `n = 1`, uniform angles for `n = 2`.
    pub fn isotropic(n: usize, s: f64, eps: f64, level: usize) -> Result<Self> {
        let dirs = match n {
            1 => vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)],
            2 => {
                let m = 12 << (level - 1);
                (0..m)
                    .map(|i| {
                        let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                        (vec![a.cos(), a.sin()], 1.0 / m as f64)
                    })
                    .collect()
            }
            _ => return Err(Error::InvalidParameter("game grids support n = 1 or 2".into())),
        };
        Self::new(n, s, eps, level, dirs)
    }

    /// Calls `f(point, time, weight)` for every quadrature node at `(x, t)`.
    pub fn visit(&self, grid: &SlabGrid, x: &[f64], t: f64, f: &mut dyn FnMut(&[f64], f64, f64)) {
        let (s, e2, sc) = (self.s, self.eps * self.eps, self.scale);
        let remaining = grid.t1 - t;
        // Time to the terminal jump and to the kinks it induces one step back.
        let time_edges: Vec<f64> = (0..=KINK_DEPTH).map(|k| remaining - k as f64 * e2).filter(|r| *r > 0.0).collect();
        let mut lags: Vec<(f64, f64, bool)> = Vec::new();
        let y_cuts: Vec<f64> = time_edges.iter().filter(|r| **r > e2).map(|r| (e2 / r).powf(s)).collect();
        let ys = split_rule(&[0.0, 1.0], &y_cuts, 4 * sc);
        for (y, w) in ys.nodes.iter().zip(&ys.weights) {
            lags.push((e2 * y.powf(-1.0 / s), self.far_p * w, false));
        }
        let half = 0.5 * self.law_dim as f64;
        let x_cuts: Vec<f64> = time_edges.iter().map(|r| e2 / (4.0 * r)).collect();
        let xs = split_rule(&NEAR_X_EDGES, &x_cuts, sc);
        for (xn, w) in xs.nodes.iter().zip(&xs.weights) {
            let weight = (1.0 - self.far_p) * w * xn.powf(s - 1.0) * gamma_ur(half, *xn) / self.near_norm;
            lags.push((e2 / (4.0 * xn), weight, true));
        }
        let mut y = vec![0.0; x.len()];
        let mut radial_edges = Vec::new();
        for &(tau, wl, near) in &lags {
            let leaves_in_time = t + tau >= grid.t1;
            for (d, wd) in &self.dirs {
                radial_edges.clear();
                if !leaves_in_time {
                    boundary_crossings(grid, x, d, self.eps, &mut radial_edges);
                }
                let (radii, mut weights) = if near {
                    let z_cuts: Vec<f64> = radial_edges.iter().map(|r| (r * r - e2) / (4.0 * tau)).collect();
                    let zr = split_rule(&NEAR_Z_EDGES, &z_cuts, sc);
                    let radii: Vec<f64> = zr.nodes.iter().map(|z| (e2 + 4.0 * tau * z).sqrt()).collect();
                    let weights = zr.nodes.iter().zip(&zr.weights).map(|(z, w)| w * (e2 + 4.0 * tau * z).powf(half - 1.0) * (-z).exp()).collect::<Vec<_>>();
                    (radii, weights)
                } else {
                    let sd = (2.0 * tau).sqrt();
                    let top = chi_cutoff(self.law_dim);
                    let mut edges: Vec<f64> = radial_edges.iter().map(|r| r / sd).filter(|c| *c > 0.0 && *c < top).collect();
                    edges.push(0.0);
                    edges.push(top);
                    edges.sort_by(f64::total_cmp);
                    edges.dedup();
                    let mut rule = GaussRule { nodes: Vec::new(), weights: Vec::new() };
                    for w in edges.windows(2) {
                        let span = ((w[1] - w[0]) * sd / self.eps).ceil() as usize;
                        let panels = (4 * sc).max(span.min(MAX_RADIAL_PANELS * sc));
                        let piece = GaussRule::chi_segment(self.law_dim, w[0], w[1], panels);
                        rule.nodes.extend(piece.nodes.iter().map(|r| r * sd));
                        rule.weights.extend(piece.weights);
                    }
                    (rule.nodes, rule.weights)
                };
                normalize(&mut weights);
                for (r, wr) in radii.iter().zip(&weights) {
                    for c in 0..x.len() {
                        y[c] = x[c] + r * d[c];
                    }
                    f(&y, t + tau, wl * wd * wr);
                }
            }
        }
    }
}

/// `draws` exact exterior jumps with equal weights.
pub fn sampled_rule(fp: &FracParams, eps: f64, draws: usize, stream: RngStream) -> Result<JumpRule> {
    let sampler = ExteriorSampler::new(fp, eps)?;
    let mut rng = stream.rng();
    let mut rule = JumpRule::default();
    for _ in 0..draws {
        let j = sampler.sample(&mut rng);
        rule.push(j.w, j.tau, 1.0 / draws as f64);
    }
    Ok(rule)
}

/// Jump law of one averaging operator.
#[derive(Clone, Debug)]
enum Law {
    Quadrature(QuadPlan),
    /// Sampled jumps, optionally folded onto a direction.
    Sampled(JumpRule, Option<Vec<f64>>),
}

impl Law {
    fn visit(&self, grid: &SlabGrid, x: &[f64], t: f64, f: &mut dyn FnMut(&[f64], f64, f64)) {
        match self {
            Law::Quadrature(plan) => plan.visit(grid, x, t, f),
            Law::Sampled(rule, along) => {
                let mut y = vec![0.0; x.len()];
                for ((w, tau), weight) in rule.w.iter().zip(&rule.tau).zip(&rule.weight) {
                    match along {
                        Some(d) => (0..x.len()).for_each(|c| y[c] = x[c] + w[0].abs() * d[c]),
                        None => (0..x.len()).for_each(|c| y[c] = x[c] + w[c]),
                    }
                    f(&y, t + tau, *weight);
                }
            }
        }
    }

    fn count(&self, grid: &SlabGrid) -> usize {
        let (x, t) = grid.node(0);
        let mut n = 0;
        self.visit(grid, &x, t, &mut |_, _, _| n += 1);
        n
    }
}

/// Affine map `v ↦ A v + b` on all nodes, `A` in row form.
#[derive(Clone, Debug)]
struct AffineMap {
    rows: Vec<Vec<(u32, f64)>>,
    offset: Vec<f64>,
}

impl AffineMap {
    fn build(slab: &ValueSlab, law: &Law) -> Self {
        let grid = &slab.grid;
        let built: Vec<(Vec<(u32, f64)>, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (x, t) = grid.node(idx);
                let mut dense: Vec<f64> = Vec::new();
                let mut touched: Vec<usize> = Vec::new();
                let mut offset = 0.0;
                let mut st = Vec::with_capacity(8);
                law.visit(grid, &x, t, &mut |y, tt, weight| {
                    if !grid.inside(y, tt) {
                        offset += weight * slab.exterior.value(y, tt);
                        return;
                    }
                    grid.stencil(y, tt, &mut st);
                    if dense.is_empty() {
                        dense = vec![0.0; grid.len()];
                    }
                    for &(i, c) in &st {
                        if dense[i] == 0.0 {
                            touched.push(i);
                        }
                        dense[i] += weight * c;
                    }
                });
                touched.sort_unstable();
                touched.dedup();
                let row = touched.iter().map(|&i| (i as u32, dense[i])).collect();
                (row, offset)
            })
            .collect();
        let (rows, offset) = built.into_iter().unzip();
        Self { rows, offset }
    }

    fn apply(&self, values: &[f64], i: usize) -> f64 {
        self.offset[i] + self.rows[i].iter().map(|(j, c)| c * values[*j as usize]).sum::<f64>()
    }
}

/// The DPP operator of a slab geometry, prepared once for many sweeps.
#[derive(Clone, Debug)]
pub struct DppOperator {
    mode: GameMode,
    maps: Vec<AffineMap>,
    active: usize,
    pub jump_nodes: usize,
}

impl DppOperator {
    pub fn new(slab: &ValueSlab, cfg: &GameConfig, fp: &FracParams) -> Result<Self> {
        cfg.validate()?;
        if fp.n != slab.grid.dim() {
            return Err(Error::InvalidParameter("kernel and slab differ in dimension".into()));
        }
        let active = slab.grid.len();
        let laws: Vec<Law> = match (cfg.mode, cfg.backend) {
            (GameMode::LinearWalk, Backend::Quadrature { level }) => {
                vec![Law::Quadrature(QuadPlan::isotropic(fp.n, fp.s, slab.eps, level)?)]
            }
            (GameMode::LinearWalk, Backend::MonteCarlo { draws, seed }) => {
                vec![Law::Sampled(sampled_rule(fp, slab.eps, draws, RngStream::new(seed, 0))?, None)]
            }
            // One-sided moves along each direction with the folded
            // one-dimensional law.
            (GameMode::TugOfWar, backend) => {
                let sphere = SphereGrid::new(fp.n, cfg.resolution)?;
                let sampled = match backend {
                    Backend::MonteCarlo { draws, seed } => {
                        Some(sampled_rule(&FracParams::new(1, fp.s)?, slab.eps, draws, RngStream::new(seed, 0))?)
                    }
                    Backend::Quadrature { .. } => None,
                };
                sphere
                    .points
                    .iter()
                    .map(|y| match (&sampled, backend) {
                        (Some(rule), _) => Ok(Law::Sampled(rule.clone(), Some(y.clone()))),
                        (None, Backend::Quadrature { level }) => Ok(Law::Quadrature(QuadPlan::new(1, fp.s, slab.eps, level, vec![(y.clone(), 1.0)])?)),
                        (None, Backend::MonteCarlo { .. }) => unreachable!("sampled rule built above"),
                    })
                    .collect::<Result<_>>()?
            }
        };
        let jump_nodes = laws[0].count(&slab.grid);
        let maps = laws.iter().map(|law| AffineMap::build(slab, law)).collect();
        Ok(Self { mode: cfg.mode, maps, active, jump_nodes })
    }

    /// Directional averages `M^{s,y}` at node `i`.
    pub fn directional(&self, values: &[f64], i: usize) -> Vec<f64> {
        self.maps.iter().map(|m| m.apply(values, i)).collect()
    }

    fn node_value(&self, values: &[f64], i: usize) -> f64 {
        match self.mode {
            GameMode::LinearWalk => self.maps[0].apply(values, i),
            GameMode::TugOfWar => {
                // The grid is closed under antipodes, so the sup over y of
                // the inf over z is ½(max + min).
                let m = self.directional(values, i);
                let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
                0.5 * (hi + lo)
            }
        }
    }

    /// One synchronous sweep; returns the new values and `‖new - old‖_∞`.
    pub fn apply(&self, values: &[f64]) -> (Vec<f64>, f64) {
        let mut next = values.to_vec();
        next[..self.active].par_iter_mut().enumerate().for_each(|(i, v)| *v = self.node_value(values, i));
        let residual = next.iter().zip(values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (next, residual)
    }
}

/// One synchronous sweep of the DPP operator.
pub fn dpp_apply(slab: &ValueSlab, cfg: &GameConfig, fp: &FracParams) -> Result<(Vec<f64>, f64)> {
    Ok(DppOperator::new(slab, cfg, fp)?.apply(&slab.values))
}

/// Converged slab and iteration log.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub slab: ValueSlab,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub jump_nodes: usize,
    pub interpolation_bound: f64,
    /// Direction-grid refinement study of the tug-of-war value.
    pub refinement: Vec<RefinementStep>,
}

/// Sup-norm change of the converged tug-of-war value when the sphere grid
/// resolution is doubled.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementStep {
    pub resolution: usize,
    pub refined_resolution: usize,
    pub sup_change: f64,
    pub converged: bool,
}

/// Sweeps until the residual is at most `tol`; an unconverged run returns
/// the last iterate with `converged = false`.
pub fn dpp_solve(slab: &ValueSlab, cfg: &GameConfig, fp: &FracParams, tol: f64, max_sweeps: usize) -> Result<SolveReport> {
    check_positive("tol", tol)?;
    let op = DppOperator::new(slab, cfg, fp)?;
    let mut values = slab.values.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_sweeps {
        let (next, r) = op.apply(&values);
        values = next;
        residuals.push(r);
        if r <= tol {
            converged = true;
            break;
        }
    }
    let slab = ValueSlab { values, ..slab.clone() };
    Ok(SolveReport {
        interpolation_bound: slab.interpolation_bound(),
        slab,
        residuals,
        converged,
        jump_nodes: op.jump_nodes,
        refinement: Vec::new(),
    })
}

/// Re-solves a converged tug-of-war report with the sphere grid resolution
/// doubled, warm-started from its values, and appends the change to the
/// report's refinement log.
pub fn refine_directions(report: &mut SolveReport, cfg: &GameConfig, fp: &FracParams, tol: f64, max_sweeps: usize) -> Result<RefinementStep> {
    if cfg.mode != GameMode::TugOfWar {
        return Err(Error::InvalidParameter("direction refinement applies to the tug-of-war only".into()));
    }
    let resolution = report.refinement.last().map_or(cfg.resolution, |r| r.refined_resolution);
    let finer = GameConfig { resolution: 2 * resolution, ..cfg.clone() };
    let solved = dpp_solve(&report.slab, &finer, fp, tol, max_sweeps)?;
    let sup_change = solved.slab.values.iter().zip(&report.slab.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let step = RefinementStep { resolution, refined_resolution: finer.resolution, sup_change, converged: solved.converged };
    report.refinement.push(step.clone());
    Ok(step)
}

/// Walk estimate of the linear-walk value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mean_steps: f64,
    pub draws: usize,
}

/// Simulates the walk from `p` with exact exterior jumps until it leaves
/// the slab and averages the exterior data at the exit points. Walk `i`
/// uses the child stream `i`.
pub fn walk_estimate(
    p: &SpaceTimePoint,
    grid: &SlabGrid,
    exterior: &ScalarField,
    eps: f64,
    fp: &FracParams,
    draws: usize,
    stream: RngStream,
) -> Result<WalkEstimate> {
    if draws < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 walks (got {draws})")));
    }
    if p.dim() != grid.dim() || fp.n != grid.dim() {
        return Err(Error::InvalidParameter("point, kernel and slab differ in dimension".into()));
    }
    let sampler = ExteriorSampler::new(fp, eps)?;
    let runs: Vec<(f64, usize)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let (mut x, mut t) = (p.x.clone(), p.t);
            let mut steps = 0;
            while grid.inside(&x, t) {
                let j = sampler.sample(&mut rng);
                x.iter_mut().zip(&j.w).for_each(|(a, b)| *a += b);
                t += j.tau;
                steps += 1;
            }
            (exterior.value(&x, t), steps)
        })
        .collect();
    // Welford keeps constant data exact.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, (v, _)) in runs.iter().enumerate() {
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = if draws > 1 { m2 / (draws - 1) as f64 } else { 0.0 };
    let mean_steps = runs.iter().map(|r| r.1 as f64).sum::<f64>() / draws as f64;
    Ok(WalkEstimate { value: mean, std_error: (var / draws as f64).sqrt(), mean_steps, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;

    #[test]
    fn plans_are_normalized() {
        let grid = SlabGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], 4, 0.0, 1.0, 4).unwrap();
        for n in [1, 2] {
            let grid = if n == 1 { SlabGrid::new(vec![-1.0], vec![1.0], 4, 0.0, 1.0, 4).unwrap() } else { grid.clone() };
            let plan = QuadPlan::isotropic(n, 0.4, 0.3, 1).unwrap();
            let x = vec![0.9; n];
            let (mut total, mut far, mut inside_cylinder) = (0.0, 0.0, 0.0);
            plan.visit(&grid, &x, 0.2, &mut |y, t, w| {
                total += w;
                let tau = t - 0.2;
                if tau >= 0.09 {
                    far += w;
                } else if y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 0.09 - 1e-12 {
                    inside_cylinder += w;
                }
            });
            let fp = FracParams::new(n, 0.4).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "n = {n}: {total}");
            assert!((far - fp.far_time_fraction()).abs() < 1e-10);
            assert_eq!(inside_cylinder, 0.0);
        }
    }

    #[test]
    fn stencil_reproduces_affine_functions() {
        let grid = SlabGrid::new(vec![-1.0, 0.0], vec![1.0, 2.0], 4, 0.0, 1.0, 3).unwrap();
        let slab = ValueSlab::new(grid, parse_field("quadratic:0,0,0.5,-0.25,2", 2).unwrap(), 0.2).unwrap();
        let v = slab.read(&[0.13, 1.71], 0.42);
        let exact = slab.exterior.value(&[0.13, 1.71], 0.42);
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 8, 0.0, 1.0, 8).unwrap();
        let slab = ValueSlab::new(grid, parse_field("constant:0.7", 1).unwrap(), 0.25).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let (_, r) = dpp_apply(&slab, &GameConfig::linear(), &fp).unwrap();
        assert!(r < 1e-12);
        let w = walk_estimate(&SpaceTimePoint::new(vec![0.1], 0.2).unwrap(), &slab.grid, &slab.exterior, 0.25, &fp, 200, RngStream::new(1, 0)).unwrap();
        assert_eq!((w.value, w.std_error), (0.7, 0.0));
    }

    #[test]
    fn residuals_contract_at_the_exit_rate() {
        let (s, eps) = (0.5, 0.2);
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 16, 0.0, 1.0, 16).unwrap();
        let slab = ValueSlab::new(grid, parse_field("planewave:1,0", 1).unwrap(), eps).unwrap();
        let fp = FracParams::new(1, s).unwrap();
        let r = dpp_solve(&slab, &GameConfig::linear(), &fp, 1e-12, 200).unwrap();
        assert!(r.converged);
        // Kernel mass of {τ ≥ T - t₀} under the normalized exterior law.
        let p_exit = fp.far_time_fraction() * (eps * eps / 1.0f64).powf(s);
        for w in r.residuals.windows(2).filter(|w| w[0] > 1e-13) {
            assert!(w[1] / w[0] <= 1.0 - p_exit / 2.0, "{:?}", r.residuals);
        }
        let (lo, hi) = (-1.0, 1.0);
        assert!(r.slab.values.iter().all(|v| (lo..=hi).contains(v)));
    }

    #[test]
    fn fixed_point_survives_a_finer_quadrature() {
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 32, 0.0, 1.0, 32).unwrap();
        let slab = ValueSlab::new(grid, parse_field("planewave:1,0", 1).unwrap(), 0.2).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let r = dpp_solve(&slab, &GameConfig::linear(), &fp, 1e-10, 200).unwrap();
        let fine = GameConfig { backend: Backend::Quadrature { level: 3 }, ..GameConfig::linear() };
        let (_, residual) = dpp_apply(&r.slab, &fine, &fp).unwrap();
        assert!(residual <= r.interpolation_bound, "{residual} vs {}", r.interpolation_bound);
    }

    #[test]
    fn tug_of_war_respects_the_symmetries_of_the_data() {
        let grid = SlabGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], 8, 0.0, 1.0, 8).unwrap();
        let slab = ValueSlab::new(grid.clone(), parse_field("gaussian:1,0.7,0.8", 2).unwrap(), 0.3).unwrap();
        let fp = FracParams::new(2, 0.5).unwrap();
        let cfg = GameConfig::tug(4);
        let r = dpp_solve(&slab, &cfg, &fp, 1e-10, 200).unwrap();
        assert!(r.converged);
        let m = grid.cells + 1;
        let per = m * m;
        for level in 0..grid.steps {
            for i in 0..m {
                for j in 0..m {
                    let v = r.slab.values[level * per + j * m + i];
                    for (a, b) in [(j, i), (m - 1 - i, j), (i, m - 1 - j)] {
                        let w = r.slab.values[level * per + b * m + a];
                        assert!((v - w).abs() < 1e-9, "{v} vs {w}");
                    }
                }
            }
        }
        let op = DppOperator::new(&r.slab, &cfg, &fp).unwrap();
        for i in (0..per * grid.steps).step_by(37) {
            let m = op.directional(&r.slab.values, i);
            let v = op.node_value(&r.slab.values, i);
            let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(lo <= v && v <= hi);
        }
    }

    #[test]
    fn walks_get_shorter_as_eps_grows() {
        let grid = SlabGrid::new(vec![-1.0], vec![1.0], 4, 0.0, 1.0, 4).unwrap();
        let data = parse_field("planewave:1,0", 1).unwrap();
        let fp = FracParams::new(1, 0.5).unwrap();
        let p = SpaceTimePoint::new(vec![0.0], 0.0).unwrap();
        let steps: Vec<f64> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&eps| walk_estimate(&p, &grid, &data, eps, &fp, 2000, RngStream::new(3, 0)).unwrap().mean_steps)
            .collect();
        assert!(steps[0] > steps[1] && steps[1] > steps[2], "{steps:?}");
    }
}
