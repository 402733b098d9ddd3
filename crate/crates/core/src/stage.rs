use core::fmt;
use core::str::FromStr;

/// Every LLM interaction carries exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Descriptor,
    Explainer,
    ExplainerRefine,
    Coder,
    CoderRepair,
    InterpreterType,
    InterpreterCoerce,
}

impl StageName {
    pub const ALL: [StageName; 7] = [
        StageName::Descriptor,
        StageName::Explainer,
        StageName::ExplainerRefine,
        StageName::Coder,
        StageName::CoderRepair,
        StageName::InterpreterType,
        StageName::InterpreterCoerce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Descriptor => "descriptor",
            StageName::Explainer => "explainer",
            StageName::ExplainerRefine => "explainer_refine",
            StageName::Coder => "coder",
            StageName::CoderRepair => "coder_repair",
            StageName::InterpreterType => "interpreter_type",
            StageName::InterpreterCoerce => "interpreter_coerce",
        }
    }

    /// Default completion budget per stage.
    pub fn default_max_tokens(self) -> u32 {
        match self {
            StageName::Descriptor | StageName::Explainer | StageName::ExplainerRefine => 1024,
            StageName::Coder | StageName::CoderRepair => 2048,
            StageName::InterpreterType | StageName::InterpreterCoerce => 256,
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStage;

impl fmt::Display for UnknownStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown stage name")
    }
}

impl FromStr for StageName {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StageName::ALL.into_iter().find(|st| st.as_str() == s).ok_or(UnknownStage)
    }
}
