//! Scenario files in TOML.

use std::fs;
use std::path::Path;

use crate::sim::Scenario;
use crate::{Error, Result};

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// For an unknown key the parser reports the span of the whole table;
/// narrow it to the offending key.
fn unknown_key_offset(text: &str, span: std::ops::Range<usize>, message: &str) -> Option<usize> {
    let key = message.strip_prefix("unknown field `")?.split('`').next()?;
    let body = text.get(span.clone())?;
    let mut offset = span.start;
    for line in body.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.split('=').next().is_some_and(|k| k.trim() == key) && trimmed.contains('=') {
            return Some(offset + line.len() - trimmed.len());
        }
        offset += line.len();
    }
    None
}

/// Best-effort line of a dotted field such as `vehicle.config` or
/// `faults[1].rotor`.
fn field_line(text: &str, field: &str) -> Option<usize> {
    let mut parts: Vec<&str> = field.split('.').collect();
    let key = parts.pop()?;
    let section = parts.join(".");
    let (section, index) = match section.rfind('[') {
        Some(open) if section.ends_with(']') => (
            section[..open].to_owned(),
            section[open + 1..section.len() - 1].parse::<usize>().ok(),
        ),
        _ => (section, None),
    };
    let mut current = String::new();
    let mut seen = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            current = name.trim().to_owned();
            if current == section {
                seen += 1;
            }
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_owned();
            continue;
        }
        let in_place = current == section && index.is_none_or(|n| seen == n + 1);
        if in_place && line.split('=').next().is_some_and(|k| k.trim() == key) {
            return Some(i + 1);
        }
    }
    None
}

/// Parses and validates scenario text. `path` is only used in messages.
pub fn parse_scenario_str(text: &str, path: &Path) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let start = unknown_key_offset(text, s.clone(), e.message()).unwrap_or(s.start);
                let (line, col) = line_col(text, start);
                format!("line {line}, column {col}: ")
            })
            .unwrap_or_default();
        Error::Scenario {
            path: path.to_owned(),
            message: format!("{at}{}", e.message().trim()),
        }
    })?;
    scenario.resolve().map_err(|e| {
        let message = match &e {
            Error::InvalidParameter { field, reason } => match field_line(text, field) {
                Some(line) => format!("line {line}: `{field}`: {reason}"),
                None => format!("`{field}`: {reason}"),
            },
            other => other.to_string(),
        };
        Error::Scenario {
            path: path.to_owned(),
            message,
        }
    })?;
    Ok(scenario)
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_str(&text, path)
}

pub fn serialize_scenario(scenario: &Scenario) -> Result<String> {
    toml::to_string_pretty(scenario).map_err(|e| Error::invalid("scenario", e.to_string()))
}

pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_scenario(scenario)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[vehicle]
config = "PNPNPN"

[trajectory]
start = [0.0, 0.0, 5.0]

[[trajectory.segments]]
kind = "hover-hold"
duration = 3.0

[sim]
duration = 3.0
"#;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_file() {
        let s = parse(MINIMAL).unwrap();
        let p = s.vehicle.params().unwrap();
        assert_eq!(p.rotor_count(), 6);
        assert_eq!(p.spin_config().to_string(), "PNPNPN");
        for (n, r) in p.rotors.iter().enumerate() {
            assert!((r.angle - n as f64 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotor_count_mismatch_names_the_field() {
        let text = MINIMAL.replace("config = \"PNPNPN\"", "config = \"PNPNP\"\nrotors = 6");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("vehicle.config"), "{err}");
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let text = MINIMAL.replace("[sim]\n", "[sim]\nstep = 0.01\n");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("step"), "{err}");
        assert!(err.contains("line 15"), "{err}");
    }

    #[test]
    fn fault_rotor_is_checked() {
        let text = format!("{MINIMAL}\n[[faults]]\nt_inject = 1.0\nrotor = 7\n");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("faults[0].rotor"), "{err}");
        let text = format!("{MINIMAL}\n[[faults]]\nt_inject = 1.0\nrotor = 0\n");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn round_trip() {
        let s = parse(MINIMAL).unwrap();
        let again = parse(&serialize_scenario(&s).unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(parse_scenario("/nonexistent/x.toml"), Err(Error::Io { .. })));
    }
}
