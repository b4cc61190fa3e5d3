//! Sweeps over the precision factor, violation windows and a derivative-free
//! maximizer over pointer strengths and measurement angles.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlations::{canonical_directions, canonical_plan, mabk, marginal_triple, joint_table, ObserverTriple, CANONICAL_AZIMUTHS};
use crate::measurement::{MeasurementPlan, PointerQuality};
use crate::qcore::{DensityOperator, Direction, Site};
use crate::{Error, Result};

/// `B₁..B₈` at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub g: f64,
    pub b: [f64; 8],
}

/// How the swept value is applied to the three sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepMode {
    /// `G₁ = G₂ = G₃ = G`.
    EqualSides,
    /// Only `site` varies; the other sides keep their entry in `base`.
    SingleSide { site: Site, base: [f64; 3] },
}

impl SweepMode {
    fn precisions(&self, g: f64) -> [f64; 3] {
        match *self {
            SweepMode::EqualSides => [g; 3],
            SweepMode::SingleSide { site, mut base } => {
                base[site.index()] = g;
                base
            }
        }
    }
}

/// Evenly spaced grid of `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Evaluates all eight quantities on the GHZ state with canonical settings at
/// each grid point.
pub fn sweep(grid: &[f64], mode: SweepMode) -> Result<Vec<SweepRecord>> {
    sweep_with(&crate::qcore::ghz(), &canonical_directions(), grid, mode)
}

/// Like [`sweep`] for an arbitrary initial state and settings, with optimal
/// pointers at each grid point.
pub fn sweep_with(
    rho0: &DensityOperator,
    directions: &[[Direction; 2]; 6],
    grid: &[f64],
    mode: SweepMode,
) -> Result<Vec<SweepRecord>> {
    grid.par_iter()
        .map(|&g| {
            let plan = MeasurementPlan::with_optimal_pointers(*directions, mode.precisions(g))?;
            let b = crate::correlations::mabk_values(rho0, &plan)?;
            Ok(SweepRecord { g, b })
        })
        .collect()
}

/// Set of `ω` whose quantities must exceed 2 together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmegaSet(Vec<u8>);

impl OmegaSet {
    pub fn new(omegas: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut v: Vec<u8> = omegas.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::InvalidArgument("omega set is empty".into()));
        }
        if let Some(bad) = v.iter().find(|w| !(1..=8).contains(*w)) {
            return Err(Error::InvalidArgument(format!("omega {bad} not in 1..=8")));
        }
        Ok(Self(v))
    }

    pub fn all() -> Self {
        Self((1..=8).collect())
    }

    pub fn members(&self) -> &[u8] {
        &self.0
    }

    /// `min_{ω ∈ set} B_ω` from a full set of eight values.
    pub fn min_of(&self, b: &[f64; 8]) -> f64 {
        self.0
            .iter()
            .map(|&w| b[usize::from(w - 1)])
            .fold(f64::INFINITY, f64::min)
    }

    fn triples(&self) -> Vec<ObserverTriple> {
        self.0
            .iter()
            .map(|&w| ObserverTriple::for_omega(w).expect("validated"))
            .collect()
    }
}

/// Range of `G` (equal on all sides) where every quantity in the set
/// exceeds 2.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolationInterval {
    pub omega_set: OmegaSet,
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
}

/// Coarse-scan spacing used to bracket the window before bisecting.
pub const INTERVAL_SCAN_STEP: f64 = 1e-3;

/// `min_{ω ∈ set} B_ω(G)` through the exact pipeline, canonical settings.
pub fn min_quantity_at(set: &OmegaSet, g: f64) -> Result<f64> {
    min_quantity_with(&crate::qcore::ghz(), &canonical_directions(), set, g)
}

/// `min_{ω ∈ set} B_ω(G)` for an arbitrary state and settings.
pub fn min_quantity_with(
    rho0: &DensityOperator,
    directions: &[[Direction; 2]; 6],
    set: &OmegaSet,
    g: f64,
) -> Result<f64> {
    let plan = MeasurementPlan::with_optimal_pointers(*directions, [g; 3])?;
    let table = joint_table(rho0, &plan)?;
    Ok(set
        .triples()
        .iter()
        .map(|t| mabk(&marginal_triple(&table, *t)).value)
        .fold(f64::INFINITY, f64::min))
}

/// Locates the window where `min_{ω ∈ set} B_ω(G) > 2` by scanning `[0, 1]`
/// and bisecting both edges to width `tol`.
///
/// When the scan finds several disjoint windows, the one containing the
/// largest scanned value is returned.
pub fn violation_interval(set: &OmegaSet, tol: f64) -> Result<ViolationInterval> {
    violation_interval_with(&crate::qcore::ghz(), &canonical_directions(), set, tol)
}

/// Like [`violation_interval`] for an arbitrary state and settings.
pub fn violation_interval_with(
    rho0: &DensityOperator,
    directions: &[[Direction; 2]; 6],
    set: &OmegaSet,
    tol: f64,
) -> Result<ViolationInterval> {
    let (lower, upper) = find_window(|g| min_quantity_with(rho0, directions, set, g), tol)?;
    Ok(ViolationInterval {
        omega_set: set.clone(),
        lower,
        upper,
        tol,
    })
}

/// Window of `[0, 1]` where `f > 2`, bracketed on the coarse grid and bisected.
fn find_window<F>(f: F, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let n = (1.0 / INTERVAL_SCAN_STEP).round() as usize;
    let grid = linspace(0.0, 1.0, n + 1);
    let excess: Vec<f64> = grid
        .par_iter()
        .map(|&g| f(g).map(|v| v - 2.0))
        .collect::<Result<_>>()?;
    let (peak, &best) = excess
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if best <= 0.0 {
        return Err(Error::NoViolationWindow { best: best + 2.0 });
    }
    let mut lo = peak;
    while lo > 0 && excess[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = peak;
    while hi < n && excess[hi + 1] > 0.0 {
        hi += 1;
    }
    let shifted = |g: f64| f(g).map(|v| v - 2.0);
    let lower = if lo == 0 { 0.0 } else { bisect(&shifted, grid[lo - 1], grid[lo], tol)? };
    let upper = if hi == n { 1.0 } else { bisect(&shifted, grid[hi + 1], grid[hi], tol)? };
    Ok((lower, upper))
}

/// Root of `f` between `outside` (`f ≤ 0`) and `inside` (`f > 0`), to width `tol`.
pub fn bisect<F>(f: &F, mut outside: f64, mut inside: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if f(outside)? > 0.0 || f(inside)? <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "[{outside}, {inside}] does not bracket a sign change"
        )));
    }
    while (inside - outside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid)? > 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Quantity being maximized.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Single(u8),
    /// Smallest of several `B_ω`, the simultaneous-violation figure of merit.
    MinOver(OmegaSet),
}

impl Objective {
    fn set(&self) -> Result<OmegaSet> {
        match self {
            Objective::Single(w) => OmegaSet::new([*w]),
            Objective::MinOver(s) => Ok(s.clone()),
        }
    }
}

/// Free parameters of the search. Angles are azimuths (and, with
/// `full_sphere`, polar angles) of all twelve observer settings.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchSpace {
    /// One precision factor shared by all sides; canonical settings.
    EqualG,
    /// `G₁, G₂, G₃`; canonical settings.
    PerSideG,
    /// Angles only, with fixed precision factors.
    Angles { g: [f64; 3], full_sphere: bool },
    /// `G₁, G₂, G₃` followed by the angles.
    Both { full_sphere: bool },
}

impl SearchSpace {
    fn angle_offset(&self) -> Option<usize> {
        match self {
            SearchSpace::EqualG | SearchSpace::PerSideG => None,
            SearchSpace::Angles { .. } => Some(0),
            SearchSpace::Both { .. } => Some(3),
        }
    }

    fn full_sphere(&self) -> bool {
        matches!(
            self,
            SearchSpace::Angles { full_sphere: true, .. } | SearchSpace::Both { full_sphere: true }
        )
    }

    pub fn dimension(&self) -> usize {
        let angles = if self.full_sphere() { 24 } else { 12 };
        match self {
            SearchSpace::EqualG => 1,
            SearchSpace::PerSideG => 3,
            SearchSpace::Angles { .. } => angles,
            SearchSpace::Both { .. } => 3 + angles,
        }
    }

    /// Parameter names in vector order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            SearchSpace::EqualG => out.push("G".to_string()),
            SearchSpace::PerSideG | SearchSpace::Both { .. } => {
                out.extend(["G1", "G2", "G3"].map(String::from))
            }
            SearchSpace::Angles { .. } => {}
        }
        if self.angle_offset().is_some() {
            let names = angle_names();
            out.extend(names.iter().map(|n| format!("phi_{n}")));
            if self.full_sphere() {
                out.extend(names.iter().map(|n| format!("theta_{n}")));
            }
        }
        out
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(0.0, 1.0); self.dimension()];
        if let Some(off) = self.angle_offset() {
            for (k, slot) in b.iter_mut().enumerate().skip(off) {
                *slot = if k < off + 12 { (0.0, TAU) } else { (0.0, PI) };
            }
        }
        b
    }

    /// Canonical settings at `G = 0.8` projected onto this space.
    pub fn canonical_start(&self) -> Vec<f64> {
        let mut x = match self {
            SearchSpace::EqualG => vec![0.8],
            SearchSpace::PerSideG | SearchSpace::Both { .. } => vec![0.8; 3],
            SearchSpace::Angles { .. } => Vec::new(),
        };
        if self.angle_offset().is_some() {
            x.extend(
                CANONICAL_AZIMUTHS
                    .iter()
                    .flatten()
                    .map(|&phi| crate::qcore::normalize_azimuth(phi)),
            );
            if self.full_sphere() {
                x.extend([PI / 2.0; 12]);
            }
        }
        x
    }

    /// Builds the plan described by a parameter vector.
    pub fn plan(&self, x: &[f64]) -> Result<MeasurementPlan> {
        if x.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        let g = match self {
            SearchSpace::EqualG => [x[0]; 3],
            SearchSpace::PerSideG | SearchSpace::Both { .. } => [x[0], x[1], x[2]],
            SearchSpace::Angles { g, .. } => *g,
        };
        let Some(off) = self.angle_offset() else {
            return canonical_plan(g[0], g[1], g[2]);
        };
        let full = self.full_sphere();
        let mut dirs = crate::correlations::canonical_directions();
        for (k, pair) in dirs.iter_mut().enumerate() {
            for (l, dir) in pair.iter_mut().enumerate() {
                let idx = 2 * k + l;
                let theta = if full { x[off + 12 + idx] } else { PI / 2.0 };
                *dir = Direction::new(theta, x[off + idx])?;
            }
        }
        let q = [
            PointerQuality::optimal(g[0])?,
            PointerQuality::optimal(g[1])?,
            PointerQuality::optimal(g[2])?,
        ];
        Ok(MeasurementPlan::new(dirs, q))
    }
}

fn angle_names() -> [String; 12] {
    std::array::from_fn(|k| {
        let slot = crate::measurement::ObserverSlot::ALL[k / 2];
        format!("{}_{}", slot.name(), k % 2 + 1)
    })
}

/// Coordinate search with a shrinking step, then per-coordinate parabolic
/// polishing. Restart 0 starts from [`SearchSpace::canonical_start`] (or the
/// supplied start); further restarts start at uniform random points drawn from
/// `ChaCha8Rng` seeded with `seed` on stream `restart`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub step_floor: f64,
    pub max_evaluations: usize,
    pub start: Option<Vec<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 1,
            seed: 0,
            initial_step: 0.1,
            step_floor: 1e-9,
            max_evaluations: 200_000,
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimumReport {
    pub argmax: Vec<f64>,
    pub labels: Vec<String>,
    pub value: f64,
    pub evaluations: usize,
    /// Index of the restart that produced the optimum.
    pub restart: usize,
}

/// Stationarity probe applied after the step floor is reached.
const PROBE_STEP: f64 = 1e-6;
const PROBE_GAIN: f64 = 1e-9;
const POLISH_STEP: f64 = 1e-4;

/// Maximizes the objective over the search space through the exact pipeline.
pub fn maximize_quantity(
    rho0: &DensityOperator,
    objective: &Objective,
    space: &SearchSpace,
    config: &OptimizerConfig,
) -> Result<OptimumReport> {
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    if !(config.step_floor > 0.0 && config.initial_step > config.step_floor) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < step_floor < initial_step, got {} and {}",
            config.step_floor, config.initial_step
        )));
    }
    let set = objective.set()?;
    let triples = set.triples();
    let bounds = space.bounds();
    let eval = |x: &[f64]| -> Result<f64> {
        let table = joint_table(rho0, &space.plan(x)?)?;
        Ok(triples
            .iter()
            .map(|t| mabk(&marginal_triple(&table, *t)).value)
            .fold(f64::INFINITY, f64::min))
    };

    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|r| {
            if r == 0 {
                let s = config.start.clone().unwrap_or_else(|| space.canonical_start());
                if s.len() != bounds.len() {
                    return Err(Error::Dimension {
                        expected: bounds.len(),
                        found: s.len(),
                    });
                }
                Ok(s.iter().zip(&bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                Ok(bounds.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect())
            }
        })
        .collect::<Result<_>>()?;

    let runs: Vec<Result<(Vec<f64>, f64, usize)>> = starts
        .into_par_iter()
        .map(|x0| coordinate_search(&eval, x0, &bounds, config))
        .collect();

    let mut evaluations = 0;
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut first_err = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok((x, v, n)) => {
                evaluations += n;
                let better = match &best {
                    None => true,
                    Some((bx, bv, _)) => match v.total_cmp(bv) {
                        Ordering::Greater => true,
                        Ordering::Equal => lexicographic(&x, bx) == Ordering::Less,
                        Ordering::Less => false,
                    },
                };
                if better {
                    best = Some((x, v, r));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((argmax, value, restart)) => Ok(OptimumReport {
            argmax,
            labels: space.labels(),
            value,
            evaluations,
            restart,
        }),
        None => Err(first_err.expect("at least one restart ran")),
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// One restart. Returns the best point seen, its value and the number of
/// evaluations.
fn coordinate_search<F>(
    eval: &F,
    mut x: Vec<f64>,
    bounds: &[(f64, f64)],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut evals = 1;
    let mut fx = eval(&x)?;
    let mut step = config.initial_step;
    let mut trial = x.clone();

    let try_point = |trial: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        if *evals > config.max_evaluations {
            return Err(Error::NonConvergence(format!(
                "evaluation budget {} exhausted",
                config.max_evaluations
            )));
        }
        eval(trial)
    };

    while step >= config.step_floor {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let (lo, hi) = bounds[k];
                let cand = (x[k] + dir * step * (hi - lo).max(1.0)).clamp(lo, hi);
                if cand == x[k] {
                    continue;
                }
                trial.copy_from_slice(&x);
                trial[k] = cand;
                let v = try_point(&trial, &mut evals)?;
                if v > fx {
                    fx = v;
                    x[k] = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    // parabolic vertex through x − h, x, x + h on each interior coordinate
    for _ in 0..2 {
        for k in 0..x.len() {
            let (lo, hi) = bounds[k];
            let h = POLISH_STEP * (hi - lo).max(1.0);
            if x[k] - h < lo || x[k] + h > hi {
                continue;
            }
            trial.copy_from_slice(&x);
            trial[k] = x[k] - h;
            let fm = try_point(&trial, &mut evals)?;
            trial[k] = x[k] + h;
            let fp = try_point(&trial, &mut evals)?;
            let curv = fp - 2.0 * fx + fm;
            if curv >= 0.0 {
                continue;
            }
            let cand = (x[k] - 0.5 * h * (fp - fm) / curv).clamp(x[k] - h, x[k] + h);
            trial[k] = cand;
            let v = try_point(&trial, &mut evals)?;
            if v >= fx {
                fx = v;
                x[k] = cand;
            }
        }
    }

    for k in 0..x.len() {
        let (lo, hi) = bounds[k];
        let h = PROBE_STEP * (hi - lo).max(1.0);
        for dir in [1.0, -1.0] {
            let cand = (x[k] + dir * h).clamp(lo, hi);
            trial.copy_from_slice(&x);
            trial[k] = cand;
            let v = try_point(&trial, &mut evals)?;
            if v > fx + PROBE_GAIN {
                return Err(Error::NonConvergence(format!(
                    "step floor reached but coordinate {k} still gains {:.3e}",
                    v - fx
                )));
            }
        }
    }
    Ok((x, fx, evals))
}
