//! Review aspects (weakness types).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Review aspect. The first five are the weakness types the pipeline
/// produces feedback for; the last three are recognised by the aspect
/// classifier only so that they can be filtered out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Aspect {
    Replicability,
    Originality,
    Soundness,
    MeaningfulComparison,
    Substance,
    Summary,
    Clarity,
    Motivation,
}

impl Aspect {
    pub const ALL: [Aspect; 8] = [
        Aspect::Replicability,
        Aspect::Originality,
        Aspect::Soundness,
        Aspect::MeaningfulComparison,
        Aspect::Substance,
        Aspect::Summary,
        Aspect::Clarity,
        Aspect::Motivation,
    ];

    /// The five weakness types feedback is generated for.
    pub const IN_SCOPE: [Aspect; 5] = [
        Aspect::Replicability,
        Aspect::Originality,
        Aspect::Soundness,
        Aspect::MeaningfulComparison,
        Aspect::Substance,
    ];

    pub fn is_in_scope(self) -> bool {
        Self::IN_SCOPE.contains(&self)
    }

    /// Human-readable label, as used in prompts.
    pub fn label(self) -> &'static str {
        match self {
            Aspect::Replicability => "Replicability",
            Aspect::Originality => "Originality",
            Aspect::Soundness => "Empirical and Theoretical Soundness",
            Aspect::MeaningfulComparison => "Meaningful Comparison",
            Aspect::Substance => "Substance",
            Aspect::Summary => "Summary",
            Aspect::Clarity => "Clarity",
            Aspect::Motivation => "Motivation",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown aspect label `{0}`")]
pub struct UnknownAspect(pub String);

impl FromStr for Aspect {
    type Err = UnknownAspect;

    /// Accepts the display labels, the enum names and a few common
    /// spellings, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '.')
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let aspect = match key.as_str() {
            "replicability" | "reproducibility" => Aspect::Replicability,
            "originality" | "novelty" => Aspect::Originality,
            "soundness"
            | "empiricalandtheoreticalsoundness"
            | "soundnesscorrectness"
            | "empiricalsoundness"
            | "theoreticalsoundness" => Aspect::Soundness,
            "meaningfulcomparison" | "comparison" => Aspect::MeaningfulComparison,
            "substance" => Aspect::Substance,
            "summary" => Aspect::Summary,
            "clarity" => Aspect::Clarity,
            "motivation" | "motivationimpact" => Aspect::Motivation,
            _ => return Err(UnknownAspect(s.to_string())),
        };
        Ok(aspect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_soundness_label_maps_to_soundness() {
        assert_eq!(
            "Empirical and Theoretical Soundness".parse::<Aspect>(),
            Ok(Aspect::Soundness)
        );
        assert_eq!("meaningful comparison".parse::<Aspect>(), Ok(Aspect::MeaningfulComparison));
        assert!("Readability".parse::<Aspect>().is_err());
    }

    #[test]
    fn labels_round_trip() {
        for aspect in Aspect::ALL {
            assert_eq!(aspect.label().parse::<Aspect>(), Ok(aspect));
        }
    }
}
