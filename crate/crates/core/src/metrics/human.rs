use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    Specificity,
    ReadingComprehension,
    Helpfulness,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Specificity, Criterion::ReadingComprehension, Criterion::Helpfulness];

    pub fn title(self) -> &'static str {
        match self {
            Criterion::Specificity => "Specificity and actionability",
            Criterion::ReadingComprehension => "Reading comprehension",
            Criterion::Helpfulness => "Overall helpfulness",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "specificity" | "specificityandactionability" => Ok(Criterion::Specificity),
            "readingcomprehension" | "comprehension" => Ok(Criterion::ReadingComprehension),
            "helpfulness" | "overallhelpfulness" => Ok(Criterion::Helpfulness),
            _ => Err(format!("unknown criterion `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

impl Outcome {
    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::AWins => Outcome::BWins,
            Outcome::BWins => Outcome::AWins,
            Outcome::Tie => Outcome::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresentationOrder {
    AB,
    BA,
}

/// One pairwise preference. `outcome` is always relative to
/// `(system_a, system_b)`, whatever order the annotator saw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonJudgment {
    pub example_id: String,
    pub criterion: Criterion,
    pub system_a: String,
    pub system_b: String,
    pub outcome: Outcome,
    pub annotator_id: String,
    pub presentation_order: PresentationOrder,
}

impl ComparisonJudgment {
    /// The judgment re-expressed with the pair in lexicographic order.
    fn canonical(&self) -> (&str, &str, Outcome) {
        if self.system_a <= self.system_b {
            (&self.system_a, &self.system_b, self.outcome)
        } else {
            (&self.system_b, &self.system_a, self.outcome.flipped())
        }
    }
}

pub fn read_judgments(text: &str) -> Result<Vec<ComparisonJudgment>, MetricError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| MetricError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn write_judgments(judgments: &[ComparisonJudgment]) -> String {
    let mut out = String::new();
    for j in judgments {
        out.push_str(&serde_json::to_string(j).expect("judgment serialises"));
        out.push('\n');
    }
    out
}

/// Systems in order of first appearance.
pub fn systems_in(judgments: &[ComparisonJudgment]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for j in judgments {
        for s in [&j.system_a, &j.system_b] {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
    }
    out
}

/// `cells[a][b]` is the mass with which the winner-column system `b` beat
/// the row system `a`, ties counting half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceTable {
    pub systems: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
}

impl DominanceTable {
    /// Builds a table from already aggregated cells. Diagonal entries are
    /// ignored.
    pub fn from_cells(systems: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = systems.len();
        if cells.len() != n || cells.iter().any(|r| r.len() != n) {
            return Err(MetricError::LengthMismatch { left: n, right: cells.len() });
        }
        let totals = (0..n).map(|b| (0..n).filter(|&a| a != b).map(|a| cells[a][b]).sum()).collect();
        Ok(DominanceTable { systems, cells, totals })
    }

    pub fn total_mass(&self) -> f64 {
        self.totals.iter().sum()
    }

    pub fn total(&self, system: &str) -> Option<f64> {
        self.systems.iter().position(|s| s == system).map(|i| self.totals[i])
    }

    /// Winner columns, loser rows, a totals row.
    pub fn render(&self, title: &str) -> String {
        let width = self.systems.iter().map(|s| s.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        writeln!(out, "{title}").ok();
        writeln!(out, "{:width$}  winners", "").ok();
        write!(out, "{:width$}", "").ok();
        for s in &self.systems {
            write!(out, "  {s:>width$}").ok();
        }
        out.push('\n');
        for (a, row) in self.systems.iter().enumerate() {
            write!(out, "{row:<width$}").ok();
            for b in 0..self.systems.len() {
                if a == b {
                    write!(out, "  {:>width$}", "-").ok();
                } else {
                    write!(out, "  {:>width$.2}", self.cells[a][b]).ok();
                }
            }
            out.push('\n');
        }
        write!(out, "{:<width$}", "Total").ok();
        for t in &self.totals {
            write!(out, "  {t:>width$.2}").ok();
        }
        out.push('\n');
        out
    }
}

/// Accumulates judgments for one criterion. Examples judged by several
/// annotators contribute the mean of their masses.
pub fn dominance(
    judgments: &[ComparisonJudgment],
    criterion: Criterion,
    systems: &[String],
) -> Result<DominanceTable, MetricError> {
    let index: HashMap<&str, usize> = systems.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lookup = |s: &str| index.get(s).copied().ok_or_else(|| MetricError::UnknownSystem(s.to_string()));

    // (example, a, b) -> annotator -> outcome, with (a, b) canonical
    let mut grouped: BTreeMap<(&str, &str, &str), BTreeMap<&str, Outcome>> = BTreeMap::new();
    for j in judgments.iter().filter(|j| j.criterion == criterion) {
        if j.system_a == j.system_b {
            return Err(MetricError::SelfComparison(j.system_a.clone()));
        }
        let (a, b, outcome) = j.canonical();
        lookup(a)?;
        lookup(b)?;
        let by_annotator = grouped.entry((&j.example_id, a, b)).or_default();
        if by_annotator.insert(&j.annotator_id, outcome).is_some() {
            return Err(MetricError::DuplicateJudgment {
                example_id: j.example_id.clone(),
                annotator_id: j.annotator_id.clone(),
                pair: (a.to_string(), b.to_string()),
            });
        }
    }

    let n = systems.len();
    let mut cells = vec![vec![0.0; n]; n];
    for ((_, a, b), outcomes) in grouped {
        let (ia, ib) = (lookup(a)?, lookup(b)?);
        let k = outcomes.len() as f64;
        for outcome in outcomes.values() {
            let (to_b, to_a) = match outcome {
                Outcome::AWins => (0.0, 1.0),
                Outcome::BWins => (1.0, 0.0),
                Outcome::Tie => (0.5, 0.5),
            };
            cells[ia][ib] += to_b / k;
            cells[ib][ia] += to_a / k;
        }
    }
    DominanceTable::from_cells(systems.to_vec(), cells)
}

/// Percentage of ties among the judgments for `criterion`, or `None` when
/// there are none.
pub fn tie_rate(judgments: &[ComparisonJudgment], criterion: Criterion) -> Option<f64> {
    let (ties, total) = judgments
        .iter()
        .filter(|j| j.criterion == criterion)
        .fold((0usize, 0usize), |(t, n), j| (t + usize::from(j.outcome == Outcome::Tie), n + 1));
    (total > 0).then(|| 100.0 * ties as f64 / total as f64)
}

/// Which positions survive when ties are excluded from agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieHandling {
    Include,
    /// Drop a position when either annotator chose Tie.
    #[default]
    DropEither,
    /// Drop a position only when both annotators chose Tie.
    DropMutual,
}

/// Cohen's kappa over any label type.
pub fn kappa<T: Eq + Hash + Ord>(a: &[T], b: &[T]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ma: HashMap<&T, usize> = HashMap::new();
    let mut mb: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    let labels: BTreeSet<&T> = ma.keys().chain(mb.keys()).copied().collect();
    let expected: f64 = labels
        .iter()
        .map(|l| ma.get(l).copied().unwrap_or(0) as f64 * mb.get(l).copied().unwrap_or(0) as f64 / (n * n))
        .sum();
    if (1.0 - expected).abs() < f64::EPSILON {
        return Err(MetricError::DegenerateDistribution);
    }
    Ok((observed - expected) / (1.0 - expected))
}

pub fn cohen_kappa(a: &[Outcome], b: &[Outcome], ties: TieHandling) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let keep = |x: Outcome, y: Outcome| match ties {
        TieHandling::Include => true,
        TieHandling::DropEither => x != Outcome::Tie && y != Outcome::Tie,
        TieHandling::DropMutual => !(x == Outcome::Tie && y == Outcome::Tie),
    };
    let (fa, fb): (Vec<Outcome>, Vec<Outcome>) = a.iter().zip(b).filter(|(x, y)| keep(**x, **y)).map(|(x, y)| (*x, *y)).unzip();
    kappa(&fa, &fb)
}

/// Aligned label lists from items judged by exactly two annotators, every
/// outcome expressed in the canonical pair order. Annotators are ordered
/// by id within an item.
pub fn agreement_pairs(judgments: &[ComparisonJudgment]) -> (Vec<Outcome>, Vec<Outcome>) {
    let mut grouped: BTreeMap<(&str, Criterion, &str, &str), BTreeMap<&str, Outcome>> = BTreeMap::new();
    for j in judgments {
        let (a, b, outcome) = j.canonical();
        grouped.entry((&j.example_id, j.criterion, a, b)).or_default().insert(&j.annotator_id, outcome);
    }
    grouped
        .into_values()
        .filter(|m| m.len() == 2)
        .map(|m| {
            let mut v = m.into_values();
            (v.next().unwrap(), v.next().unwrap())
        })
        .unzip()
}
