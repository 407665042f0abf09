//! JSON formats shared by the library and the command-line tool.
//!
//! Floats are written with 17 significant digits, complex numbers as
//! `[re, im]`, angles in radians. Non-finite floats are written as `null`.

use std::collections::BTreeMap;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::states::{FockState, SpinState};

/// Compact JSON with every finite float in `{:.16e}` form.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreciseFormatter;

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` with [`PreciseFormatter`].
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// A pure state of either system.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFile {
    Cv(FockState),
    Spin(SpinState),
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    system: String,
    #[serde(rename = "two_S", default, skip_serializing_if = "Option::is_none")]
    two_s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cutoff: Option<usize>,
    amplitudes: Vec<Complex64>,
}

impl StateFile {
    fn to_raw(&self) -> StateJson {
        match self {
            StateFile::Cv(psi) => StateJson {
                system: "cv".into(),
                two_s: None,
                cutoff: Some(psi.cutoff()),
                amplitudes: psi.amplitudes().to_vec(),
            },
            StateFile::Spin(psi) => StateJson {
                system: "spin".into(),
                two_s: Some(psi.two_s()),
                cutoff: None,
                amplitudes: psi.amplitudes().to_vec(),
            },
        }
    }

    fn from_raw(raw: StateJson) -> Result<Self> {
        let n = raw.amplitudes.len();
        match raw.system.as_str() {
            "cv" => {
                if let Some(c) = raw.cutoff {
                    if c + 1 != n {
                        return Err(Error::InvalidState(format!("cutoff {c} does not match {n} amplitudes")));
                    }
                }
                Ok(StateFile::Cv(FockState::new(raw.amplitudes)?))
            }
            "spin" => {
                let two_s = raw.two_s.ok_or_else(|| Error::InvalidState("spin state without two_S".into()))?;
                Ok(StateFile::Spin(SpinState::new(two_s, raw.amplitudes)?))
            }
            other => Err(Error::InvalidState(format!("unknown system {other:?}"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(&self.to_raw())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StateJson = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }
}

impl Serialize for StateFile {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for StateFile {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        StateFile::from_raw(StateJson::deserialize(de)?).map_err(serde::de::Error::custom)
    }
}

/// Writes a spin state in the state-file layout.
pub fn serialize_spin_state<S: Serializer>(psi: &SpinState, ser: S) -> std::result::Result<S::Ok, S::Error> {
    StateFile::Spin(psi.clone()).serialize(ser)
}

/// Reads a spin state from the state-file layout.
pub fn deserialize_spin_state<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<SpinState, D::Error> {
    match StateFile::deserialize(de)? {
        StateFile::Spin(psi) => Ok(psi),
        StateFile::Cv(_) => Err(serde::de::Error::custom("expected a spin state")),
    }
}

/// Output of one measure evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureOutput {
    pub measure: String,
    /// `null` in JSON stands for +∞.
    #[serde(deserialize_with = "null_as_infinity")]
    pub value: f64,
    #[serde(default)]
    pub argmax: Option<serde_json::Value>,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl MeasureOutput {
    pub fn new(measure: impl Into<String>, value: f64) -> Self {
        MeasureOutput { measure: measure.into(), value, argmax: None, details: BTreeMap::new() }
    }

    pub fn with_argmax<T: Serialize>(mut self, argmax: &T) -> Result<Self> {
        self.argmax = Some(serde_json::to_value(argmax)?);
        Ok(self)
    }

    pub fn with_detail<T: Serialize>(mut self, key: &str, value: &T) -> Result<Self> {
        self.details.insert(key.into(), serde_json::to_value(value)?);
        Ok(self)
    }
}

fn null_as_infinity<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
}

/// Reproducibility record attached to every command output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: Vec<String>, seed: Option<u64>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("quantumness".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("parallel".into(), cfg!(feature = "parallel").to_string());
        RunManifest { command, seed, tolerances: BTreeMap::new(), versions, threads: crate::par::current_threads(), wall_time_s: 0.0 }
    }
}

/// Header row plus one comma-separated row per point.
pub fn to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::PointConfig;
    use crate::states::{make_dicke, make_fock};
    use crate::stellar::extract_constellation;

    #[test]
    fn state_files_round_trip() {
        let cv = StateFile::Cv(make_fock(3));
        let text = cv.to_json().unwrap();
        assert!(text.contains("\"system\":\"cv\"") && text.contains("\"cutoff\":3"));
        assert_eq!(StateFile::from_json(&text).unwrap(), cv);
        let spin = StateFile::Spin(make_dicke(4, 0).unwrap());
        let text = spin.to_json().unwrap();
        assert!(text.contains("\"two_S\":4") && !text.contains("cutoff"));
        assert_eq!(StateFile::from_json(&text).unwrap(), spin);
        assert!(StateFile::from_json(r#"{"system":"spin","amplitudes":[[1,0]]}"#).is_err());
        assert!(StateFile::from_json(r#"{"system":"cv","cutoff":2,"amplitudes":[[1,0]]}"#).is_err());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let text = to_json(&[0.1f64, 1.0 / 3.0]).unwrap();
        assert_eq!(text, "[1.0000000000000001e-1,3.3333333333333331e-1]");
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
        assert_eq!(to_json(&f64::INFINITY).unwrap(), "null");
    }

    #[test]
    fn other_formats_round_trip() {
        let c = extract_constellation(&make_dicke(2, 0).unwrap(), 1e-7).unwrap();
        let text = to_json(&c).unwrap();
        assert!(text.contains("\"two_S\":2") && text.contains("infinity_mult"));
        let back: crate::stellar::Constellation = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let p = PointConfig::new(vec![[0.0, 0.0, 2.0], [1.0, 0.0, 0.0]]).unwrap();
        let back: PointConfig = serde_json::from_str(&to_json(&p).unwrap()).unwrap();
        assert_eq!(back.points, p.points);
        let m = MeasureOutput::new("wehrl", 1.0).with_detail("grid", &64).unwrap();
        let back: MeasureOutput = serde_json::from_str(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back.value, 1.0);
        assert_eq!(to_csv(&["x", "y"], &[vec![1.0, 2.0]]), "x,y\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
