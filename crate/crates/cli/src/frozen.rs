//! Frozen regression constants, versioned in `frozen_constants.json`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

const EMBEDDED: &str = include_str!("../frozen_constants.json");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstants {
    pub version: u32,
    pub values: BTreeMap<String, f64>,
}

impl FrozenConstants {
    /// The constants compiled into this binary.
    pub fn embedded() -> Self {
        serde_json::from_str(EMBEDDED).expect("embedded constants file is valid JSON")
    }

    pub fn path() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("frozen_constants.json")
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.values
            .get(key)
            .copied()
            .ok_or_else(|| anyhow!("frozen constant `{key}` is missing; run with --freeze"))
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }

    /// Rewrites the versioned constants file in the source tree.
    pub fn save(&self) -> Result<()> {
        let path = Self::path();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `x` rounded to six significant digits, away from zero when `up` is set
/// and towards zero otherwise.
pub fn round_sig(x: f64, up: bool) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32 - 5;
    let scale = 10f64.powi(e);
    let m = x / scale;
    let r = if up == (x > 0.0) { m.ceil() } else { m.floor() };
    // parse the decimal so the stored value prints with six digits
    format!("{r}e{e}").parse().unwrap_or(r * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_direction() {
        assert!(round_sig(0.123456789, true) >= 0.123456789);
        assert!(round_sig(0.123456789, false) <= 0.123456789);
        assert!((round_sig(0.123456789, true) - 0.123457).abs() < 1e-12);
        assert!((round_sig(0.123456789, false) - 0.123456).abs() < 1e-12);
        assert!((round_sig(1234.5678, false) - 1234.56).abs() < 1e-9);
    }

    #[test]
    fn embedded_file_parses() {
        let f = FrozenConstants::embedded();
        assert!(f.version >= 1);
    }
}
