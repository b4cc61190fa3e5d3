//! Run configuration: JSON file format, command-line overrides and
//! resolution into validated simulator inputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use seqshare::analysis::{Objective, OmegaSet, SearchSpace};
use seqshare::{canonical_plan, ghz, CMatrix, DensityOperator, Direction, MeasurementPlan, Site};

/// An angle in radians that remembers how it was written, so that `pi/2`
/// echoes back as `pi/2` rather than as a rounded decimal.
#[derive(Clone, Debug)]
pub struct Angle {
    value: f64,
    text: Option<String>,
}

impl Angle {
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl PartialEq for Angle {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl From<f64> for Angle {
    fn from(value: f64) -> Self {
        Self { value, text: None }
    }
}

impl FromStr for Angle {
    type Err = String;

    /// Accepts plain decimals and multiples of pi such as `pi`, `-pi/2`,
    /// `3pi/2`, `0.25*pi` or `2π/3`.
    fn from_str(s: &str) -> Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("cannot parse angle {s:?}");
        let value = match compact.replace('π', "pi").split_once("pi") {
            None => compact.parse::<f64>().map_err(|_| bad())?,
            Some((coef, rest)) => {
                let coef = coef.strip_suffix('*').unwrap_or(coef);
                let c = match coef {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => coef.parse::<f64>().map_err(|_| bad())?,
                };
                let d = match rest {
                    "" => 1.0,
                    _ => rest
                        .strip_prefix('/')
                        .ok_or_else(bad)?
                        .parse::<f64>()
                        .map_err(|_| bad())?,
                };
                if d == 0.0 {
                    return Err(bad());
                }
                c * std::f64::consts::PI / d
            }
        };
        if !value.is_finite() {
            return Err(bad());
        }
        Ok(Self {
            value,
            text: Some(s.trim().to_string()),
        })
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match &self.text {
            Some(t) => ser.serialize_str(t),
            None => ser.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(Angle::from(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Ghz,
    MaximallyMixed,
    /// Plain text, 8 rows of 8 complex literals such as `0.5`, `0.5+0i`, `-0.25i`.
    File(PathBuf),
}

impl FromStr for StateSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ghz" => StateSpec::Ghz,
            "mixed" | "maximally_mixed" => StateSpec::MaximallyMixed,
            path => StateSpec::File(PathBuf::from(path)),
        })
    }
}

/// `[theta, phi]` for the two settings of one observer.
pub type ObserverAngles = [[Angle; 2]; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSettings {
    pub alice1: ObserverAngles,
    pub alice2: ObserverAngles,
    pub bob1: ObserverAngles,
    pub bob2: ObserverAngles,
    pub charlie1: ObserverAngles,
    pub charlie2: ObserverAngles,
}

impl ExplicitSettings {
    fn directions(&self) -> Result<[[Direction; 2]; 6], String> {
        let slots = [
            ("alice1", &self.alice1),
            ("alice2", &self.alice2),
            ("bob1", &self.bob1),
            ("bob2", &self.bob2),
            ("charlie1", &self.charlie1),
            ("charlie2", &self.charlie2),
        ];
        let mut out = [[Direction::equatorial(0.0).expect("valid"); 2]; 6];
        for (k, (name, angles)) in slots.iter().enumerate() {
            for l in 0..2 {
                let [theta, phi] = &angles[l];
                out[k][l] = Direction::new(theta.value(), phi.value())
                    .map_err(|e| format!("plan.explicit.settings.{name}[{l}]: {e}"))?;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    /// Canonical equatorial settings with optimal pointers.
    Canonical { g: [f64; 3] },
    /// Explicit `[theta, phi]` per observer and setting, optimal pointers.
    Explicit { g: [f64; 3], settings: ExplicitSettings },
}

impl PlanSpec {
    pub fn g(&self) -> [f64; 3] {
        match self {
            PlanSpec::Canonical { g } | PlanSpec::Explicit { g, .. } => *g,
        }
    }

    fn g_mut(&mut self) -> &mut [f64; 3] {
        match self {
            PlanSpec::Canonical { g } | PlanSpec::Explicit { g, .. } => g,
        }
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self, PlanSpec::Canonical { .. })
    }
}

impl Default for PlanSpec {
    fn default() -> Self {
        PlanSpec::Canonical { g: [0.8; 3] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Alice,
    Bob,
    Charlie,
}

impl From<Side> for Site {
    fn from(s: Side) -> Site {
        match s {
            Side::Alice => Site::Alice,
            Side::Bob => Site::Bob,
            Side::Charlie => Site::Charlie,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSpec {
    /// Optional path for the full joint probability table.
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    /// Zero skips the grid and only computes windows.
    pub points: usize,
    /// Vary only this side; the others keep the plan's values.
    pub side: Option<Side>,
    pub windows: Vec<Vec<u8>>,
    pub tol: f64,
    pub intervals_output: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 1.0,
            points: 101,
            side: None,
            windows: Vec::new(),
            tol: 1e-9,
            intervals_output: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Single(u8),
    MinOver(Vec<u8>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SpaceSpec {
    /// One G for all sides, canonical settings.
    EqualG,
    /// G₁, G₂, G₃, canonical settings.
    PerSideG,
    /// All twelve settings, G fixed by the plan.
    Angles,
    /// G₁, G₂, G₃ and all twelve settings.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSpec {
    pub objective: ObjectiveSpec,
    pub space: SpaceSpec,
    pub full_sphere: bool,
    pub restarts: usize,
    pub seed: u64,
    pub step_floor: f64,
    pub max_evaluations: usize,
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            objective: ObjectiveSpec::Single(1),
            space: SpaceSpec::EqualG,
            full_sphere: false,
            restarts: 4,
            seed: 0,
            step_floor: 1e-9,
            max_evaluations: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub omega: u8,
    pub rounds: u64,
    pub seed: u64,
    /// Optional per-round CSV log.
    pub log: Option<PathBuf>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            omega: 1,
            rounds: 100_000,
            seed: 0,
            log: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub state: StateSpec,
    pub plan: PlanSpec,
    /// Main output file; standard output when absent.
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub evaluate: EvaluateSpec,
    pub sweep: SweepSpec,
    pub optimize: OptimizeSpec,
    pub sample: SampleSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            state: StateSpec::Ghz,
            plan: PlanSpec::default(),
            output: None,
            threads: None,
            evaluate: EvaluateSpec::default(),
            sweep: SweepSpec::default(),
            optimize: OptimizeSpec::default(),
            sample: SampleSpec::default(),
        }
    }
}

impl RunConfig {
    /// Parses JSON; `origin` prefixes error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("{origin}: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn set_equal_g(&mut self, g: f64) {
        *self.plan.g_mut() = [g; 3];
    }

    pub fn set_side_g(&mut self, side: usize, g: f64) {
        self.plan.g_mut()[side] = g;
    }

    /// Checks every field and builds the simulator inputs.
    pub fn resolve(&self) -> Result<Resolved, String> {
        let rho = match &self.state {
            StateSpec::Ghz => ghz(),
            StateSpec::MaximallyMixed => DensityOperator::maximally_mixed(),
            StateSpec::File(p) => read_state(p)?,
        };
        let g = self.plan.g();
        let plan = match &self.plan {
            PlanSpec::Canonical { g } => canonical_plan(g[0], g[1], g[2]),
            PlanSpec::Explicit { g, settings } => {
                MeasurementPlan::with_optimal_pointers(settings.directions()?, *g)
            }
        }
        .map_err(|e| format!("plan: {e}"))?;
        if self.threads == Some(0) {
            return Err("threads: must be at least 1".into());
        }

        let s = &self.sweep;
        if !(s.start.is_finite() && s.stop.is_finite() && 0.0 <= s.start && s.start <= s.stop && s.stop <= 1.0) {
            return Err(format!("sweep: need 0 <= start <= stop <= 1, got [{}, {}]", s.start, s.stop));
        }
        if !(s.tol > 0.0) {
            return Err(format!("sweep.tol: {} must be positive", s.tol));
        }
        let windows = s
            .windows
            .iter()
            .map(|w| OmegaSet::new(w.iter().copied()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("sweep.windows: {e}"))?;

        let o = &self.optimize;
        let objective = match &o.objective {
            ObjectiveSpec::Single(w) => {
                OmegaSet::new([*w]).map_err(|e| format!("optimize.objective: {e}"))?;
                Objective::Single(*w)
            }
            ObjectiveSpec::MinOver(ws) => Objective::MinOver(
                OmegaSet::new(ws.iter().copied()).map_err(|e| format!("optimize.objective: {e}"))?,
            ),
        };
        let space = match o.space {
            SpaceSpec::EqualG => SearchSpace::EqualG,
            SpaceSpec::PerSideG => SearchSpace::PerSideG,
            SpaceSpec::Angles => SearchSpace::Angles { g, full_sphere: o.full_sphere },
            SpaceSpec::Both => SearchSpace::Both { full_sphere: o.full_sphere },
        };
        if o.restarts == 0 {
            return Err("optimize.restarts: must be at least 1".into());
        }
        if !(o.step_floor > 0.0 && o.step_floor < 0.1) {
            return Err(format!("optimize.step_floor: {} not in (0, 0.1)", o.step_floor));
        }

        if !(1..=8).contains(&self.sample.omega) {
            return Err(format!("sample.omega: {} not in 1..=8", self.sample.omega));
        }
        if self.sample.rounds < seqshare::sampling::MIN_ROUNDS {
            return Err(format!(
                "sample.rounds: need at least {}, got {}",
                seqshare::sampling::MIN_ROUNDS,
                self.sample.rounds
            ));
        }
        Ok(Resolved {
            rho,
            plan,
            windows,
            objective,
            space,
        })
    }
}

/// Validated inputs derived from a [`RunConfig`].
pub struct Resolved {
    pub rho: DensityOperator,
    pub plan: MeasurementPlan,
    pub windows: Vec<OmegaSet>,
    pub objective: Objective,
    pub space: SearchSpace,
}

impl fmt::Debug for Resolved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Resolved").field("plan", &self.plan).finish_non_exhaustive()
    }
}

/// Parses an 8×8 density matrix. Blank lines and `#` comments are skipped.
pub fn parse_state(text: &str, origin: &str) -> Result<DensityOperator, String> {
    let mut data = Vec::with_capacity(64);
    let mut rows = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        if rows > 8 {
            return Err(format!("{origin}:{}: more than 8 rows", n + 1));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(format!("{origin}:{}: expected 8 entries, found {}", n + 1, fields.len()));
        }
        for (c, f) in fields.iter().enumerate() {
            let z = Complex64::from_str(f)
                .map_err(|_| format!("{origin}:{}: column {}: bad complex literal {f:?}", n + 1, c + 1))?;
            data.push(z);
        }
    }
    if rows != 8 {
        return Err(format!("{origin}: expected 8 rows, found {rows}"));
    }
    let m = CMatrix::from_vec(8, data).map_err(|e| format!("{origin}: {e}"))?;
    let rho = DensityOperator::from_matrix(m).map_err(|e| format!("{origin}: {e}"))?;
    if !rho.is_normalized() {
        return Err(format!("{origin}: trace {} is not 1", rho.trace()));
    }
    Ok(rho)
}

fn read_state(path: &Path) -> Result<DensityOperator, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_state(&text, &path.display().to_string())
}
