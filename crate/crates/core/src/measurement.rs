//! Weak and strong measurement updates and the six-step sequential pipeline.
//!
//! A weak measurement of `ξ·σ` with quality factor `F` and precision factor
//! `G` maps a state to
//!
//! ```text
//! ρ ↦ (F/2) ρ + ((1 + aG − F)/2) Π⁺ ρ Π⁺ + ((1 − aG − F)/2) Π⁻ ρ Π⁻
//! ```
//!
//! where `Π^± = (I ± ξ·σ)/2` is embedded on the measured qubit. At `G = 1`
//! this is the projective update for outcome `a`; at `G = 0` it leaves the
//! state untouched and reports a fair coin.

use num_complex::Complex64;

use crate::qcore::{
    conjugate_on_site, projector, site_expectation, to_array2, CMatrix, DensityOperator,
    Direction, Outcome, Site, MATRIX_TOL,
};
use crate::{Error, Result};

/// Quality factor `F` and precision factor `G` of a one-bit pointer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerQuality {
    f: f64,
    g: f64,
}

impl PointerQuality {
    /// Any admissible pointer: `F, G ∈ [0, 1]` and `F² + G² ≤ 1`.
    pub fn new(f: f64, g: f64) -> Result<Self> {
        let in_unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !in_unit(f) || !in_unit(g) || f * f + g * g > 1.0 + MATRIX_TOL {
            return Err(Error::InadmissiblePointer { f, g });
        }
        Ok(Self { f, g })
    }

    /// Optimal pointer with `F = √(1 − G²)`.
    pub fn optimal(g: f64) -> Result<Self> {
        if !g.is_finite() || !(0.0..=1.0).contains(&g) {
            return Err(Error::InadmissiblePointer { f: f64::NAN, g });
        }
        Ok(Self {
            f: (1.0 - g * g).sqrt(),
            g,
        })
    }

    /// Projective limit, `F = 0`, `G = 1`.
    pub fn strong() -> Self {
        Self { f: 0.0, g: 1.0 }
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    First = 0,
    Second = 1,
}

/// One of the six observers, e.g. `Bob₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObserverSlot {
    pub site: Site,
    pub stage: Stage,
}

impl ObserverSlot {
    /// Canonical order `Alice₁, Alice₂, Bob₁, Bob₂, Charlie₁, Charlie₂`.
    pub const ALL: [ObserverSlot; 6] = [
        ObserverSlot::new(Site::Alice, Stage::First),
        ObserverSlot::new(Site::Alice, Stage::Second),
        ObserverSlot::new(Site::Bob, Stage::First),
        ObserverSlot::new(Site::Bob, Stage::Second),
        ObserverSlot::new(Site::Charlie, Stage::First),
        ObserverSlot::new(Site::Charlie, Stage::Second),
    ];

    pub const fn new(site: Site, stage: Stage) -> Self {
        Self { site, stage }
    }

    /// Position in [`ObserverSlot::ALL`].
    pub fn index(self) -> usize {
        2 * self.site.index() + self.stage as usize
    }

    pub fn name(self) -> String {
        let party = match self.site {
            Site::Alice => "Alice",
            Site::Bob => "Bob",
            Site::Charlie => "Charlie",
        };
        format!("{party}{}", self.stage as usize + 1)
    }
}

/// Directions for every observer (two settings each) and the pointer of each
/// side's first observer. Second observers always measure projectively.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    directions: [[Direction; 2]; 6],
    qualities: [PointerQuality; 3],
}

impl MeasurementPlan {
    /// `directions` is indexed by [`ObserverSlot::index`], then by setting `1, 2`.
    pub fn new(directions: [[Direction; 2]; 6], qualities: [PointerQuality; 3]) -> Self {
        Self {
            directions,
            qualities,
        }
    }

    /// Plan with optimal pointers for the given precision factors.
    pub fn with_optimal_pointers(directions: [[Direction; 2]; 6], g: [f64; 3]) -> Result<Self> {
        let q = [
            PointerQuality::optimal(g[0])?,
            PointerQuality::optimal(g[1])?,
            PointerQuality::optimal(g[2])?,
        ];
        Ok(Self::new(directions, q))
    }

    /// Direction used by `slot` for setting `setting ∈ {1, 2}`.
    pub fn direction(&self, slot: ObserverSlot, setting: u8) -> &Direction {
        &self.directions[slot.index()][usize::from(setting - 1)]
    }

    pub fn directions(&self) -> &[[Direction; 2]; 6] {
        &self.directions
    }

    pub fn quality(&self, site: Site) -> PointerQuality {
        self.qualities[site.index()]
    }

    pub fn qualities(&self) -> [PointerQuality; 3] {
        self.qualities
    }

    pub fn with_qualities(&self, qualities: [PointerQuality; 3]) -> Self {
        Self {
            directions: self.directions,
            qualities,
        }
    }
}

/// Setting index `∈ {1, 2}` for each of the six observers, in slot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SettingChoice([u8; 6]);

impl SettingChoice {
    pub const COUNT: usize = 64;

    pub fn new(settings: [u8; 6]) -> Result<Self> {
        if let Some(bad) = settings.iter().find(|&&s| s != 1 && s != 2) {
            return Err(Error::InvalidArgument(format!(
                "setting index {bad} not in {{1, 2}}"
            )));
        }
        Ok(Self(settings))
    }

    /// Little-endian unpacking: bit `k` is `setting(slot k) − 1`.
    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < Self::COUNT);
        Self(std::array::from_fn(|k| ((index >> k) & 1) as u8 + 1))
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &s)| usize::from(s - 1) << k)
            .sum()
    }

    pub fn setting(&self, slot: ObserverSlot) -> u8 {
        self.0[slot.index()]
    }

    pub fn settings(&self) -> [u8; 6] {
        self.0
    }

    pub fn all() -> impl Iterator<Item = SettingChoice> {
        (0..Self::COUNT).map(Self::from_index)
    }
}

/// Outcomes `(a₁, a₂, b₁, b₂, c₁, c₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OutcomeRecord([Outcome; 6]);

impl OutcomeRecord {
    pub const COUNT: usize = 64;

    pub fn new(outcomes: [Outcome; 6]) -> Self {
        Self(outcomes)
    }

    pub fn from_signs(signs: [i32; 6]) -> Result<Self> {
        let mut out = [Outcome::Plus; 6];
        for (o, s) in out.iter_mut().zip(signs) {
            *o = Outcome::try_from(s)?;
        }
        Ok(Self(out))
    }

    /// Little-endian unpacking: bit `k` is 0 for `+1` and 1 for `−1` at slot `k`.
    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < Self::COUNT);
        Self(std::array::from_fn(|k| Outcome::from_bit(index >> k)))
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .map(|(k, o)| o.bit() << k)
            .sum()
    }

    pub fn outcome(&self, slot: ObserverSlot) -> Outcome {
        self.0[slot.index()]
    }

    pub fn outcomes(&self) -> [Outcome; 6] {
        self.0
    }

    pub fn all() -> impl Iterator<Item = OutcomeRecord> {
        (0..Self::COUNT).map(Self::from_index)
    }
}

/// Precomputed data for measuring one direction on one site.
#[derive(Clone, Copy)]
pub(crate) struct LocalMeasurement {
    site: Site,
    plus: [[Complex64; 2]; 2],
    minus: [[Complex64; 2]; 2],
}

impl LocalMeasurement {
    pub(crate) fn new(site: Site, dir: &Direction) -> Self {
        Self {
            site,
            plus: to_array2(&projector(dir, Outcome::Plus)),
            minus: to_array2(&projector(dir, Outcome::Minus)),
        }
    }

    fn proj(&self, a: Outcome) -> &[[Complex64; 2]; 2] {
        match a {
            Outcome::Plus => &self.plus,
            Outcome::Minus => &self.minus,
        }
    }

    /// Born weight `Tr[Πᵃ ρ]`.
    pub(crate) fn born(&self, rho: &CMatrix, a: Outcome) -> f64 {
        site_expectation(rho, self.proj(a), self.site)
    }

    /// Trace of the weak update for outcome `a`, without forming the state.
    pub(crate) fn weak_weight(&self, rho: &CMatrix, a: Outcome, q: PointerQuality) -> f64 {
        let tr = rho.trace().re;
        let p_a = self.born(rho, a);
        0.5 * (q.f * tr + (1.0 + q.g - q.f) * p_a + (1.0 - q.g - q.f) * (tr - p_a))
    }

    pub(crate) fn strong(&self, rho: &CMatrix, a: Outcome) -> CMatrix {
        conjugate_on_site(rho, self.proj(a), self.site)
    }

    pub(crate) fn weak(&self, rho: &CMatrix, a: Outcome, q: PointerQuality) -> CMatrix {
        // (1 + aG − F)/2 on Π⁺ and (1 − aG − F)/2 on Π⁻, regrouped by outcome
        let w_same = 0.5 * (1.0 + q.g - q.f);
        let w_other = 0.5 * (1.0 - q.g - q.f);
        let same = conjugate_on_site(rho, self.proj(a), self.site);
        let other = conjugate_on_site(rho, self.proj(a.flip()), self.site);
        let keep = 0.5 * q.f;
        let data = rho
            .as_slice()
            .iter()
            .zip(same.as_slice())
            .zip(other.as_slice())
            .map(|((r, p), m)| r * keep + p * w_same + m * w_other)
            .collect();
        CMatrix::from_vec(rho.dim(), data).expect("same dimension")
    }
}

/// Post-measurement (unnormalized) state after a weak measurement of `dir`
/// on `site` yielding `outcome`.
pub fn weak_update(
    rho: &DensityOperator,
    site: Site,
    dir: &Direction,
    outcome: Outcome,
    q: PointerQuality,
) -> Result<DensityOperator> {
    // re-validate: the fields are private but a caller may have built `q`
    // by hand through `with_qualities` from a stale value
    let q = PointerQuality::new(q.f, q.g)?;
    let m = LocalMeasurement::new(site, dir);
    Ok(DensityOperator::unnormalized(m.weak(rho.matrix(), outcome, q)))
}

/// Post-measurement (unnormalized) state `Πᵃ ρ Πᵃ` after a projective
/// measurement. Its trace is the Born probability of `outcome`.
pub fn strong_update(
    rho: &DensityOperator,
    site: Site,
    dir: &Direction,
    outcome: Outcome,
) -> DensityOperator {
    let m = LocalMeasurement::new(site, dir);
    DensityOperator::unnormalized(m.strong(rho.matrix(), outcome))
}

/// Probability of the full outcome record under the chosen settings, following
/// the order `Alice₁ → Alice₂ → Bob₁ → Bob₂ → Charlie₁ → Charlie₂`.
pub fn run_sequence(
    rho0: &DensityOperator,
    plan: &MeasurementPlan,
    choice: &SettingChoice,
    record: &OutcomeRecord,
) -> Result<f64> {
    if !rho0.is_normalized() {
        return Err(Error::InvalidState(
            "initial state must have unit trace".into(),
        ));
    }
    let mut state = rho0.clone();
    for site in Site::ALL {
        let first = ObserverSlot::new(site, Stage::First);
        let second = ObserverSlot::new(site, Stage::Second);
        state = weak_update(
            &state,
            site,
            plan.direction(first, choice.setting(first)),
            record.outcome(first),
            plan.quality(site),
        )?;
        state = strong_update(
            &state,
            site,
            plan.direction(second, choice.setting(second)),
            record.outcome(second),
        );
    }
    Ok(state.trace())
}
