//! Joint probability table, triple marginals, correlators and the eight MABK
//! quantities.
//!
//! Table layout: the row index packs the six setting indices
//! `(l₁, l₂, m₁, m₂, n₁, n₂)` little-endian (`bit k = setting − 1` of slot `k`),
//! the column index packs the outcomes `(a₁, a₂, b₁, b₂, c₁, c₂)` the same way
//! with `+1 ↦ 0`, `−1 ↦ 1`. See [`SettingChoice`] and [`OutcomeRecord`].

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::measurement::{
    LocalMeasurement, MeasurementPlan, ObserverSlot, OutcomeRecord, PointerQuality,
    SettingChoice, Stage,
};
use crate::output::format_sig;
use crate::qcore::{CMatrix, DensityOperator, Direction, Outcome, Site};
use crate::{Error, Result};

const ROWS: usize = SettingChoice::COUNT;
const COLS: usize = OutcomeRecord::COUNT;

/// `P(a₁,a₂,b₁,b₂,c₁,c₂ | settings)` for all 64 × 64 combinations.
#[derive(Clone, Debug, PartialEq)]
pub struct JointProbabilityTable {
    entries: Vec<f64>,
}

impl JointProbabilityTable {
    pub fn from_entries(entries: Vec<f64>) -> Result<Self> {
        if entries.len() != ROWS * COLS {
            return Err(Error::Dimension {
                expected: ROWS * COLS,
                found: entries.len(),
            });
        }
        Ok(Self { entries })
    }

    pub fn get(&self, choice: &SettingChoice, record: &OutcomeRecord) -> f64 {
        self.entries[choice.index() * COLS + record.index()]
    }

    pub fn row(&self, setting_index: usize) -> &[f64] {
        &self.entries[setting_index * COLS..(setting_index + 1) * COLS]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_defect(&self) -> f64 {
        (0..ROWS)
            .map(|r| (self.row(r).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Writes `setting_index,outcome_index,probability` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "setting_index,outcome_index,probability")?;
        for s in 0..ROWS {
            for o in 0..COLS {
                writeln!(w, "{s},{o},{}", format_sig(self.entries[s * COLS + o], 12))?;
            }
        }
        Ok(())
    }
}

/// Builds the full table by walking the measurement tree. Branches share
/// their prefix, so each intermediate state is computed once.
pub fn joint_table(rho0: &DensityOperator, plan: &MeasurementPlan) -> Result<JointProbabilityTable> {
    if !rho0.is_normalized() {
        return Err(Error::InvalidState(
            "initial state must have unit trace".into(),
        ));
    }
    let walker = TreeWalker::new(plan);
    // the first two slots (Alice's settings) split the work four ways
    let parts: Vec<Vec<(usize, f64)>> = (0..4usize)
        .into_par_iter()
        .map(|alice| {
            let mut out = Vec::with_capacity(ROWS * COLS / 4);
            let (l1, l2) = (alice & 1, alice >> 1);
            for a1 in Outcome::BOTH {
                let s1 = walker.weak(0, l1, rho0.matrix(), a1);
                for a2 in Outcome::BOTH {
                    let s2 = walker.meas[1][l2].strong(&s1, a2);
                    let set = l1 | (l2 << 1);
                    let rec = a1.bit() | (a2.bit() << 1);
                    walker.descend(&s2, 2, set, rec, &mut out);
                }
            }
            out
        })
        .collect();
    let mut entries = vec![0.0; ROWS * COLS];
    for (idx, p) in parts.into_iter().flatten() {
        entries[idx] = p;
    }
    JointProbabilityTable::from_entries(entries)
}

struct TreeWalker {
    meas: [[LocalMeasurement; 2]; 6],
    qualities: [PointerQuality; 3],
}

impl TreeWalker {
    fn new(plan: &MeasurementPlan) -> Self {
        let meas = std::array::from_fn(|k| {
            let slot = ObserverSlot::ALL[k];
            std::array::from_fn(|l| LocalMeasurement::new(slot.site, plan.direction(slot, l as u8 + 1)))
        });
        Self {
            meas,
            qualities: plan.qualities(),
        }
    }

    fn weak(&self, slot: usize, setting: usize, rho: &CMatrix, a: Outcome) -> CMatrix {
        self.meas[slot][setting].weak(rho, a, self.qualities[slot / 2])
    }

    /// Expands slot `slot` onward; `set`/`rec` hold the bits fixed so far.
    fn descend(&self, rho: &CMatrix, slot: usize, set: usize, rec: usize, out: &mut Vec<(usize, f64)>) {
        if slot == 5 {
            for l in 0..2 {
                for a in Outcome::BOTH {
                    let p = self.meas[5][l].born(rho, a);
                    let s = set | (l << 5);
                    let r = rec | (a.bit() << 5);
                    out.push((s * COLS + r, p));
                }
            }
            return;
        }
        for l in 0..2 {
            for a in Outcome::BOTH {
                let next = if slot % 2 == 0 {
                    self.weak(slot, l, rho, a)
                } else {
                    self.meas[slot][l].strong(rho, a)
                };
                self.descend(
                    &next,
                    slot + 1,
                    set | (l << slot),
                    rec | (a.bit() << slot),
                    out,
                );
            }
        }
    }
}

/// Stage indices `(i, j, k)` selecting `Alice_i`, `Bob_j`, `Charlie_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ObserverTriple {
    stages: [Stage; 3],
}

impl ObserverTriple {
    /// `B₁..B₈` in order.
    pub const MABK_ORDER: [ObserverTriple; 8] = [
        Self::of(Stage::First, Stage::First, Stage::First),
        Self::of(Stage::First, Stage::Second, Stage::First),
        Self::of(Stage::First, Stage::First, Stage::Second),
        Self::of(Stage::Second, Stage::First, Stage::First),
        Self::of(Stage::First, Stage::Second, Stage::Second),
        Self::of(Stage::Second, Stage::First, Stage::Second),
        Self::of(Stage::Second, Stage::Second, Stage::First),
        Self::of(Stage::Second, Stage::Second, Stage::Second),
    ];

    const fn of(i: Stage, j: Stage, k: Stage) -> Self {
        Self { stages: [i, j, k] }
    }

    /// From 1-based stage indices.
    pub fn new(i: u8, j: u8, k: u8) -> Result<Self> {
        let stage = |s: u8| match s {
            1 => Ok(Stage::First),
            2 => Ok(Stage::Second),
            _ => Err(Error::InvalidArgument(format!("stage index {s} not in {{1, 2}}"))),
        };
        Ok(Self::of(stage(i)?, stage(j)?, stage(k)?))
    }

    /// Triple whose MABK quantity is `B_omega`.
    pub fn for_omega(omega: u8) -> Result<Self> {
        match omega {
            1..=8 => Ok(Self::MABK_ORDER[usize::from(omega - 1)]),
            _ => Err(Error::InvalidArgument(format!("omega {omega} not in 1..=8"))),
        }
    }

    pub fn omega(&self) -> u8 {
        let pos = Self::MABK_ORDER.iter().position(|t| t == self).expect("all 8 triples listed");
        pos as u8 + 1
    }

    pub fn slots(&self) -> [ObserverSlot; 3] {
        std::array::from_fn(|s| ObserverSlot::new(Site::ALL[s], self.stages[s]))
    }

    /// 1-based `(i, j, k)`.
    pub fn indices(&self) -> (u8, u8, u8) {
        let [i, j, k] = self.stages.map(|s| s as u8 + 1);
        (i, j, k)
    }
}

/// `P(a_i, b_j, c_k | l, m, n)` for one observer triple.
///
/// Rows pack the settings `(l, m, n)` little-endian (Alice in bit 0), columns
/// pack the outcomes the same way with `−1 ↦ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleMarginal {
    triple: ObserverTriple,
    probs: [[f64; 8]; 8],
}

impl TripleMarginal {
    pub fn triple(&self) -> ObserverTriple {
        self.triple
    }

    /// Conditional distribution over outcome triples for settings `(l, m, n) ∈ {1,2}³`.
    pub fn distribution(&self, l: u8, m: u8, n: u8) -> &[f64; 8] {
        &self.probs[pack_settings(l, m, n)]
    }

    pub fn probability(&self, settings: (u8, u8, u8), outcomes: [Outcome; 3]) -> f64 {
        let col = outcomes[0].bit() | (outcomes[1].bit() << 1) | (outcomes[2].bit() << 2);
        self.probs[pack_settings(settings.0, settings.1, settings.2)][col]
    }
}

fn pack_settings(l: u8, m: u8, n: u8) -> usize {
    debug_assert!([l, m, n].iter().all(|s| *s == 1 || *s == 2));
    usize::from(l - 1) | (usize::from(m - 1) << 1) | (usize::from(n - 1) << 2)
}

/// Marginal over the three observers not in `triple`, averaging uniformly
/// over their setting choices.
pub fn marginal_triple(table: &JointProbabilityTable, triple: ObserverTriple) -> TripleMarginal {
    let bits = triple.slots().map(|s| s.index());
    let mut probs = [[0.0; 8]; 8];
    for s in 0..ROWS {
        let row_t = bits.iter().enumerate().map(|(p, &b)| ((s >> b) & 1) << p).sum::<usize>();
        for o in 0..COLS {
            let col_t = bits.iter().enumerate().map(|(p, &b)| ((o >> b) & 1) << p).sum::<usize>();
            probs[row_t][col_t] += table.entries[s * COLS + o];
        }
    }
    for row in probs.iter_mut() {
        for p in row.iter_mut() {
            *p /= 8.0;
        }
    }
    TripleMarginal { triple, probs }
}

/// `E = Σ a·b·c · P(a, b, c | l, m, n)`.
pub fn correlator(marg: &TripleMarginal, l: u8, m: u8, n: u8) -> f64 {
    marg.distribution(l, m, n)
        .iter()
        .enumerate()
        .map(|(col, p)| if col.count_ones() % 2 == 0 { *p } else { -*p })
        .sum()
}

/// Settings `(l, m, n)` and sign of each term in the MABK expression
/// `−E(1,1,1) + E(2,1,2) + E(2,2,1) + E(1,2,2)`.
pub const MABK_TERMS: [((u8, u8, u8), f64); 4] = [
    ((1, 1, 1), -1.0),
    ((2, 1, 2), 1.0),
    ((2, 2, 1), 1.0),
    ((1, 2, 2), 1.0),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MabkResult {
    pub omega: u8,
    pub triple: ObserverTriple,
    pub value: f64,
}

pub fn mabk(marg: &TripleMarginal) -> MabkResult {
    let value = MABK_TERMS
        .iter()
        .map(|&((l, m, n), sign)| sign * correlator(marg, l, m, n))
        .sum::<f64>()
        .abs();
    MabkResult {
        omega: marg.triple.omega(),
        triple: marg.triple,
        value,
    }
}

/// All eight `B_ω` from one table, in order `B₁..B₈`.
pub fn mabk_all(table: &JointProbabilityTable) -> [MabkResult; 8] {
    ObserverTriple::MABK_ORDER.map(|t| mabk(&marginal_triple(table, t)))
}

/// Exact pipeline: table, marginals, correlators, `B₁..B₈`.
pub fn mabk_values(rho0: &DensityOperator, plan: &MeasurementPlan) -> Result<[f64; 8]> {
    let table = joint_table(rho0, plan)?;
    Ok(mabk_all(&table).map(|r| r.value))
}

/// Closed forms of `B_ω` on the GHZ state.
///
/// Only meaningful for [`canonical_plan`]; for any other plan use
/// [`mabk_values`].
pub fn closed_form(omega: u8, q: &[PointerQuality; 3]) -> Result<f64> {
    let [f1, f2, f3] = q.map(|p| p.f());
    let [g1, g2, g3] = q.map(|p| p.g());
    let v = match omega {
        1 => 4.0 * g1 * g2 * g3,
        2 => 2.0 * (1.0 + f2) * g1 * g3,
        3 => 2.0 * (1.0 + f3) * g1 * g2,
        4 => 2.0 * (1.0 + f1) * g2 * g3,
        5 => (1.0 + f2) * (1.0 + f3) * g1,
        6 => (1.0 + f1) * (1.0 + f3) * g2,
        7 => (1.0 + f1) * (1.0 + f2) * g3,
        8 => 0.5 * (1.0 + f1) * (1.0 + f2) * (1.0 + f3),
        _ => return Err(Error::InvalidArgument(format!("omega {omega} not in 1..=8"))),
    };
    Ok(v)
}

/// Azimuths of the canonical X-Y plane settings, indexed like
/// [`MeasurementPlan::directions`]. Negative values are as conventionally
/// written; [`Direction`] wraps them into `[0, 2π)`.
pub const CANONICAL_AZIMUTHS: [[f64; 2]; 6] = [
    [0.0, PI / 2.0],
    [PI, -PI / 2.0],
    [0.0, PI / 2.0],
    [-PI, -PI / 2.0],
    [0.0, PI / 2.0],
    [-PI, 3.0 * PI / 2.0],
];

pub fn canonical_directions() -> [[Direction; 2]; 6] {
    CANONICAL_AZIMUTHS.map(|pair| pair.map(|phi| Direction::equatorial(phi).expect("finite azimuth")))
}

/// Canonical settings with optimal pointers `F = √(1 − G²)`.
pub fn canonical_plan(g1: f64, g2: f64, g3: f64) -> Result<MeasurementPlan> {
    MeasurementPlan::with_optimal_pointers(canonical_directions(), [g1, g2, g3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::run_sequence;
    use crate::qcore::{embed, ghz, pauli_observable, projector};
    use proptest::prelude::*;

    fn ghz_values(g: [f64; 3]) -> [f64; 8] {
        mabk_values(&ghz(), &canonical_plan(g[0], g[1], g[2]).unwrap()).unwrap()
    }

    /// Kraus-sum evaluation of one table entry, coded independently of the
    /// site kernels: every step forms full 8×8 operators.
    fn kraus_entry(rho: &DensityOperator, plan: &MeasurementPlan, choice: &SettingChoice, rec: &OutcomeRecord) -> f64 {
        kraus_entry_labeled(rho, plan, choice, rec, false)
    }

    /// `swap_weak_labels` attaches outcome `a` of a first-stage observer to
    /// `Π⁻ᵃ` instead of `Πᵃ`.
    fn kraus_entry_labeled(
        rho: &DensityOperator,
        plan: &MeasurementPlan,
        choice: &SettingChoice,
        rec: &OutcomeRecord,
        swap_weak_labels: bool,
    ) -> f64 {
        let mut m = rho.matrix().clone();
        for slot in ObserverSlot::ALL {
            let dir = plan.direction(slot, choice.setting(slot));
            let mut a = rec.outcome(slot);
            if swap_weak_labels && slot.stage == Stage::First {
                a = a.flip();
            }
            let (f, g) = match slot.stage {
                Stage::First => {
                    let q = plan.quality(slot.site);
                    (q.f(), q.g())
                }
                Stage::Second => (0.0, 1.0),
            };
            // K = cos(t) Πᵃ + sin(t) Π⁻ᵃ with cos²t − sin²t = G, 2 sin t cos t = F
            let t = 0.5 * f.atan2(g);
            let k = &projector(dir, a).scale_re(t.cos()) + &projector(dir, a.flip()).scale_re(t.sin());
            let big = embed(&k, slot.site).unwrap();
            m = &(&big * &m) * &big.adjoint();
        }
        m.trace().re
    }

    #[test]
    fn table_matches_kraus_oracle() {
        let plan = canonical_plan(0.8, 0.8, 0.8).unwrap();
        let table = joint_table(&ghz(), &plan).unwrap();
        for (s, o) in [(0, 0), (5, 9), (17, 63), (42, 21), (63, 31)] {
            let choice = SettingChoice::from_index(s);
            let rec = OutcomeRecord::from_index(o);
            let want = kraus_entry(&ghz(), &plan, &choice, &rec);
            assert!((table.get(&choice, &rec) - want).abs() < 1e-14, "({s},{o})");
            let seq = run_sequence(&ghz(), &plan, &choice, &rec).unwrap();
            assert!((seq - want).abs() < 1e-14);
        }
        assert!(table.max_row_defect() < 1e-12);
        assert!(table.min_entry() >= -1e-12);
    }

    #[test]
    fn swapped_weak_labels_leave_quantities_unchanged() {
        // Relabeling first-stage outcomes flips the sign of every correlator
        // involving them, uniformly within each triple, so |B| cannot tell
        // the two conventions apart.
        let plan = canonical_plan(0.7, 0.85, 0.6).unwrap();
        let rho = ghz();
        let mut entries = vec![0.0; ROWS * COLS];
        for s in 0..ROWS {
            for o in 0..COLS {
                entries[s * COLS + o] = kraus_entry_labeled(
                    &rho,
                    &plan,
                    &SettingChoice::from_index(s),
                    &OutcomeRecord::from_index(o),
                    true,
                );
            }
        }
        let swapped = mabk_all(&JointProbabilityTable::from_entries(entries).unwrap());
        let ours = mabk_all(&joint_table(&rho, &plan).unwrap());
        for (a, b) in swapped.iter().zip(&ours) {
            assert!((a.value - b.value).abs() < 1e-12);
        }
        // the correlators themselves differ in sign for B₁
        let t = ObserverTriple::for_omega(1).unwrap();
        let e_ours = correlator(&marginal_triple(&joint_table(&rho, &plan).unwrap(), t), 1, 1, 1);
        assert!(e_ours.abs() > 0.1);
    }

    #[test]
    fn g0_first_stage_is_uninformative() {
        let table = joint_table(&ghz(), &canonical_plan(0.0, 0.0, 0.0).unwrap()).unwrap();
        let marg = marginal_triple(&table, ObserverTriple::for_omega(1).unwrap());
        for row in &marg.probs {
            for p in row {
                assert!((p - 0.125).abs() < 1e-14);
            }
        }
        assert!(correlator(&marg, 1, 1, 1).abs() < 1e-14);
        // each first-stage outcome is a fair coin independent of everything else
        for s in 0..ROWS {
            for o in 0..COLS {
                let partner = o ^ 1;
                assert!((table.entries[s * COLS + o] - table.entries[s * COLS + partner]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn all_strong_last_triple_is_born_rule() {
        let plan = canonical_plan(1.0, 1.0, 1.0).unwrap();
        let table = joint_table(&ghz(), &plan).unwrap();
        let triple = ObserverTriple::for_omega(8).unwrap();
        let marg = marginal_triple(&table, triple);
        let rho = ghz();
        for (l, m, n) in [(1u8, 1u8, 1u8), (2, 1, 2), (1, 2, 2), (2, 2, 2)] {
            for col in 0..8usize {
                let outs = [0, 1, 2].map(|b| Outcome::from_bit(col >> b));
                // stage-1 projective measurements scramble the state, so the
                // direct route applies all six projectors and sums the rest out
                let slots = triple.slots();
                let mut want = 0.0;
                for s in 0..ROWS {
                    let choice = SettingChoice::from_index(s);
                    if [l, m, n] != slots.map(|sl| choice.setting(sl)) {
                        continue;
                    }
                    for o in 0..COLS {
                        let rec = OutcomeRecord::from_index(o);
                        if slots.iter().zip(outs).all(|(sl, a)| rec.outcome(*sl) == a) {
                            want += kraus_entry(&rho, &plan, &choice, &rec) / 8.0;
                        }
                    }
                }
                let got = marg.distribution(l, m, n)[col];
                assert!((got - want).abs() < 1e-13);
            }
        }
        for l in 1..=2 {
            for m in 1..=2 {
                for n in 1..=2 {
                    let s: f64 = marg.distribution(l, m, n).iter().sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ghz_strong_correlators() {
        // all strong, first stage measures σx and σy as settings 1 and 2
        let table = joint_table(&ghz(), &canonical_plan(1.0, 1.0, 1.0).unwrap()).unwrap();
        let marg = marginal_triple(&table, ObserverTriple::for_omega(1).unwrap());
        let direct = |dirs: [f64; 3]| {
            let ops: Vec<_> = dirs
                .iter()
                .zip(Site::ALL)
                .map(|(phi, s)| embed(&pauli_observable(&Direction::equatorial(*phi).unwrap()), s).unwrap())
                .collect();
            let prod = &(&ops[0] * &ops[1]) * &ops[2];
            (&prod * ghz().matrix()).trace().re
        };
        assert!((direct([0.0; 3]) - 1.0).abs() < 1e-12);
        assert!((correlator(&marg, 1, 1, 1) - 1.0).abs() < 1e-12);
        assert!((direct([0.0, PI / 2.0, PI / 2.0]) + 1.0).abs() < 1e-12);
        assert!((correlator(&marg, 1, 2, 2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn headline_values() {
        for v in ghz_values([0.8; 3]) {
            assert!((v - 2.048).abs() < 1e-9, "{v}");
        }
        let strong = ghz_values([1.0; 3]);
        assert!((strong[0] - 4.0).abs() < 1e-12);
        assert!((strong[7] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let q08 = [PointerQuality::optimal(0.8).unwrap(); 3];
        assert!((closed_form(1, &q08).unwrap() - 2.048).abs() < 1e-12);
        assert!((closed_form(8, &q08).unwrap() - 2.048).abs() < 1e-12);
        let g = 2.0 * 2f64.sqrt() / 3.0;
        let q = [PointerQuality::optimal(g).unwrap(); 3];
        assert!((closed_form(2, &q).unwrap() - 64.0 / 27.0).abs() < 1e-12);
        assert!(closed_form(0, &q).is_err());
        assert!(closed_form(9, &q).is_err());
    }

    #[test]
    fn canonical_plan_azimuths_are_wrapped() {
        let plan = canonical_plan(0.5, 0.5, 0.5).unwrap();
        let a2 = ObserverSlot::new(Site::Alice, Stage::Second);
        assert!((plan.direction(a2, 2).phi() - 1.5 * PI).abs() < 1e-15);
        let c2 = ObserverSlot::new(Site::Charlie, Stage::Second);
        assert!((plan.direction(c2, 1).phi() - PI).abs() < 1e-15);
        assert!(canonical_plan(1.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn triple_lookup() {
        assert_eq!(ObserverTriple::for_omega(2).unwrap().indices(), (1, 2, 1));
        assert_eq!(ObserverTriple::for_omega(6).unwrap().indices(), (2, 1, 2));
        for w in 1..=8 {
            assert_eq!(ObserverTriple::for_omega(w).unwrap().omega(), w);
        }
        assert_eq!(ObserverTriple::new(2, 2, 1).unwrap().omega(), 7);
        assert!(ObserverTriple::new(3, 1, 1).is_err());
        assert!(ObserverTriple::for_omega(0).is_err());
    }

    #[test]
    fn first_alice_marginal_ignores_other_settings() {
        let plan = MeasurementPlan::with_optimal_pointers(
            std::array::from_fn(|k| {
                [
                    Direction::new(0.3 + 0.2 * k as f64, 1.0 + k as f64).unwrap(),
                    Direction::new(2.5 - 0.3 * k as f64, 0.2 * k as f64).unwrap(),
                ]
            }),
            [0.7, 0.4, 0.9],
        )
        .unwrap();
        let table = joint_table(&ghz(), &plan).unwrap();
        for l1 in 0..2 {
            let mut reference = None;
            for s in (0..ROWS).filter(|s| s & 1 == l1) {
                let p_plus: f64 = (0..COLS).filter(|o| o & 1 == 0).map(|o| table.row(s)[o]).sum();
                let r = *reference.get_or_insert(p_plus);
                assert!((p_plus - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_export_has_header_and_all_rows() {
        let table = joint_table(&ghz(), &canonical_plan(0.8, 0.8, 0.8).unwrap()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("setting_index,outcome_index,probability"));
        assert_eq!(lines.count(), 4096);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn symmetric_sides_give_equal_quantities(g in 0.0..=1.0f64) {
            let v = ghz_values([g; 3]);
            prop_assert!((v[1] - v[2]).abs() < 1e-12 && (v[2] - v[3]).abs() < 1e-12);
            prop_assert!((v[4] - v[5]).abs() < 1e-12 && (v[5] - v[6]).abs() < 1e-12);
        }

        #[test]
        fn pipeline_matches_closed_forms(g1 in 0.0..=1.0f64, g2 in 0.0..=1.0f64, g3 in 0.0..=1.0f64) {
            let v = ghz_values([g1, g2, g3]);
            let q = canonical_plan(g1, g2, g3).unwrap().qualities();
            for w in 1..=8u8 {
                let cf = closed_form(w, &q).unwrap();
                prop_assert!((v[usize::from(w - 1)] - cf).abs() < 1e-10);
                prop_assert!(v[usize::from(w - 1)] <= 4.0 + 1e-10);
            }
        }
    }
}
