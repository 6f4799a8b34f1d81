use serde_json::json;
use wki_core::{ErrorClass, WkiError};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(std::io::Error),
    Core(WkiError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<WkiError> for CliError {
    fn from(e: WkiError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    /// 1 for bad input, 2 for regime outcomes, 3 for numerical failures, 4 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Io(_) => 4,
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Regime => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "invalid-config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn record(&self) -> serde_json::Value {
        let class = match self {
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => "input",
                ErrorClass::Regime => "regime",
                ErrorClass::Numerical => "numerical",
            },
        };
        let mut rec = json!({
            "kind": self.kind(),
            "class": class,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Core(e) = self {
            rec["details"] = details(e);
        }
        rec
    }
}

fn details(e: &WkiError) -> serde_json::Value {
    match e {
        WkiError::PossibleBoundState {
            min_abs_a,
            floor,
            winding,
        } => {
            json!({ "min_abs_a": min_abs_a, "floor": floor, "winding": winding })
        }
        WkiError::ResolutionExceeded {
            lambda,
            substeps,
            cap,
        } => {
            json!({ "lambda": lambda, "substeps": substeps, "cap": cap })
        }
        WkiError::SlopeConditionViolated { slope, margin } => {
            json!({ "slope": slope, "margin": margin })
        }
        WkiError::HodographUnsolved { iterations, change } => {
            json!({ "iterations": iterations, "change": change })
        }
        WkiError::EvolutionDiverged { time, x, value } => {
            json!({ "time": time, "x": x, "value": value })
        }
        WkiError::InCell { x_h, t, source } => {
            json!({ "x_h": x_h, "t": t, "cause": source.kind(), "cause_details": details(source) })
        }
        _ => serde_json::Value::Null,
    }
}
