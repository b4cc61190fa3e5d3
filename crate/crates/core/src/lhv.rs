//! Local deterministic bound of the MABK expression.
//!
//! The expression only involves one observer triple, so it suffices to
//! enumerate the 4³ = 64 deterministic strategies of three parties with two
//! settings each.

/// Classical bound of `|−E₁₁₁ + E₂₁₂ + E₂₂₁ + E₁₂₂|`.
pub const LHV_BOUND: f64 = 2.0;

/// Margin above [`LHV_BOUND`] required to call a value a violation.
pub const VIOLATION_MARGIN: f64 = 1e-12;

/// Pre-assigned `±1` outputs for settings 1 and 2 of each party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    pub alice: [i8; 2],
    pub bob: [i8; 2],
    pub charlie: [i8; 2],
}

impl DeterministicStrategy {
    /// Decodes bits `0..6` as `(A₁, A₂, B₁, B₂, C₁, C₂)`, bit set meaning `−1`.
    pub fn from_index(index: usize) -> Self {
        let s = |k: usize| if (index >> k) & 1 == 0 { 1 } else { -1 };
        Self {
            alice: [s(0), s(1)],
            bob: [s(2), s(3)],
            charlie: [s(4), s(5)],
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..64).map(Self::from_index)
    }

    /// `−a₁b₁c₁ + a₂b₁c₂ + a₂b₂c₁ + a₁b₂c₂`, signed.
    pub fn expression(&self) -> i32 {
        let [a1, a2] = self.alice.map(i32::from);
        let [b1, b2] = self.bob.map(i32::from);
        let [c1, c2] = self.charlie.map(i32::from);
        -a1 * b1 * c1 + a2 * b1 * c2 + a2 * b2 * c1 + a1 * b2 * c2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LhvBound {
    pub value: f64,
    /// Strategies whose expression reaches `value`.
    pub achieving: usize,
    /// First achieving strategy in enumeration order.
    pub witness: DeterministicStrategy,
}

/// Maximum of the MABK expression over all deterministic strategies.
pub fn classical_max() -> LhvBound {
    let best = DeterministicStrategy::all()
        .map(|s| s.expression())
        .max()
        .expect("non-empty enumeration");
    let mut achieving = DeterministicStrategy::all().filter(|s| s.expression() == best);
    let witness = achieving.next().expect("maximum is attained");
    LhvBound {
        value: f64::from(best),
        achieving: 1 + achieving.count(),
        witness,
    }
}

/// Whether `b_value` exceeds the local bound.
pub fn is_violation(b_value: f64) -> bool {
    b_value > LHV_BOUND + VIOLATION_MARGIN
}
