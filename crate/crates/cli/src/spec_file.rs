//! On-disk diffusion specs and form functions.

use std::path::Path;

use lindiff::form::{FormFunction, StepCoeff};
use lindiff::{DiffusionSpec, Interval, MeasureComponent, RadonMeasure, ScaleFunction};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

pub const VERSION: u64 = 1;

pub const EXAMPLES: [&str; 4] = ["brownian_line", "brownian_01", "cantor_scale", "rational_windows"];

#[derive(Clone, Debug, PartialEq)]
pub struct SpecFile {
    pub name: String,
    pub spec: DiffusionSpec,
}

pub fn build_named_example(name: &str, signed: bool) -> Result<SpecFile, String> {
    let spec = match name {
        "brownian_line" => DiffusionSpec::brownian_line(),
        "brownian_01" => DiffusionSpec::brownian_unit(),
        "cantor_scale" => DiffusionSpec::cantor_scale(),
        "rational_windows" => DiffusionSpec::rational_windows(signed),
        other => return Err(format!("unknown example {other:?}; known: {}", EXAMPLES.join(", "))),
    };
    let name = if name == "rational_windows" && signed { "rational_windows_signed".to_string() } else { name.to_string() };
    Ok(SpecFile { name, spec })
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<T, String> {
    let v = obj.get(key).ok_or_else(|| format!("/{key}: missing field"))?;
    serde_json::from_value(v.clone()).map_err(|e| format!("/{key}: {e}"))
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
        let obj = v.as_object().ok_or("/: expected an object")?;
        let version: u64 = field(obj, "version")?;
        if version != VERSION {
            return Err(format!("/version: unsupported version {version}"));
        }
        let name: String = field(obj, "name")?;
        let interval: Interval = field(obj, "interval")?;
        let scale: ScaleFunction = field(obj, "scale")?;
        let speed: RadonMeasure = field(obj, "speed")?;
        let killing: RadonMeasure = match obj.get("killing") {
            Some(_) => field(obj, "killing")?,
            None => RadonMeasure::zero(),
        };
        let spec = DiffusionSpec::new(interval, scale, speed, killing).map_err(|e| format!("/: {e}"))?;
        Ok(SpecFile { name, spec })
    }

    /// A file path, or the name of a built-in example when no such file exists.
    pub fn load(arg: &str) -> Result<Self, String> {
        let path = Path::new(arg);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
            return Self::from_json(&text).map_err(|e| format!("{arg}: {e}"));
        }
        match arg.strip_suffix("_signed") {
            Some("rational_windows") => build_named_example("rational_windows", true),
            _ => build_named_example(arg, false),
        }
        .map_err(|e| format!("{arg}: no such file; {e}"))
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("version".into(), VERSION.into());
        obj.insert("name".into(), self.name.clone().into());
        let s = &self.spec;
        obj.insert("interval".into(), serde_json::to_value(s.interval).expect("interval"));
        obj.insert("scale".into(), serde_json::to_value(&s.scale).expect("scale"));
        obj.insert("speed".into(), serde_json::to_value(&s.speed).expect("speed"));
        obj.insert("killing".into(), serde_json::to_value(&s.killing).expect("killing"));
        Value::Object(obj)
    }

    /// Canonical form: sorted keys, two-space indentation, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        canonical(&self.to_value())
    }
}

pub fn canonical(v: &Value) -> String {
    // serde_json's default map is ordered by key.
    let mut s = serde_json::to_string_pretty(v).expect("serialize");
    s.push('\n');
    s
}

/// A form function together with the scale it is written over.
pub struct FunctionArg {
    pub scale: ScaleFunction,
    pub function: FormFunction,
}

/// `s` (the spec's scale), `c` (the Cantor function over `x + c(x)`), or a
/// JSON file `{"scale": ..., "function": ...}`.
pub fn load_function(arg: &str, spec: &DiffusionSpec) -> Result<FunctionArg, String> {
    match arg {
        "s" => Ok(FunctionArg { scale: spec.scale.clone(), function: FormFunction::of_scale(&spec.scale) }),
        "c" => {
            let scale = ScaleFunction::lebesgue_plus_cantor();
            let coeffs = scale
                .ds
                .components
                .iter()
                .map(|c| if matches!(c, MeasureComponent::CantorCopy { .. }) { StepCoeff::constant(1.0) } else { StepCoeff::zero() })
                .collect();
            Ok(FunctionArg { scale, function: FormFunction { base_x: 0.0, base_val: 0.0, coeffs } })
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| format!("{path}: not JSON: {e}"))?;
            let obj = v.as_object().ok_or_else(|| format!("{path}: /: expected an object"))?;
            let scale = field(obj, "scale").map_err(|e| format!("{path}: {e}"))?;
            let function = field(obj, "function").map_err(|e| format!("{path}: {e}"))?;
            Ok(FunctionArg { scale, function })
        }
    }
}
