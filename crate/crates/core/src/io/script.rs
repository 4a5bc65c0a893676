//! Attack-script files: a JSON list of `{"A": [...], "B": [...]}` steps, or
//! an object `{"seed_loss": [...], "attacks": [...]}`.

use serde::Deserialize;

use crate::attack::Attack;
use crate::dynamics::Script;
use crate::error::{Error, Result};
use crate::io::document::json_error;

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Steps(Vec<RawStep>),
    Full {
        #[serde(default)]
        seed_loss: Vec<usize>,
        attacks: Vec<RawStep>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    #[serde(rename = "A")]
    a: Vec<usize>,
    #[serde(rename = "B")]
    b: Vec<usize>,
}

pub fn parse_script(text: &str) -> Result<Script> {
    // Parse to a value first so syntax errors keep their position.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error("attack script", &e))?;
    let file: ScriptFile = serde_json::from_value(value)
        .map_err(|_| Error::Document("attack script must be a list of {\"A\", \"B\"} steps or an object with `attacks`".into()))?;
    let (seed_loss, steps) = match file {
        ScriptFile::Steps(steps) => (Vec::new(), steps),
        ScriptFile::Full { seed_loss, attacks } => (seed_loss, attacks),
    };
    let attacks = steps
        .into_iter()
        .enumerate()
        .map(|(i, st)| Attack::new(st.a, st.b).map_err(|e| Error::Document(format!("step {i}: {e}"))))
        .collect::<Result<_>>()?;
    Ok(Script { seed_loss, attacks })
}

pub fn script_to_json(script: &Script) -> String {
    let mut out = serde_json::to_string_pretty(script).expect("scripts always serialize");
    out.push('\n');
    out
}
