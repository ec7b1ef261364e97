use std::path::PathBuf;

use regimes_core::reference_example::reference_scenario;
use regimes_core::scenario::{parse_scenario, scenario_schema};
use serde_json::Value;

fn schema_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/scenario.schema.json")
}

/// Set `REGIMES_UPDATE_SCHEMA=1` to regenerate the checked-in file.
#[test]
fn checked_in_schema_is_current() {
    let generated = scenario_schema();
    if std::env::var_os("REGIMES_UPDATE_SCHEMA").is_some() {
        std::fs::write(schema_path(), &generated).unwrap();
    }
    let on_disk = std::fs::read_to_string(schema_path()).expect("schema/scenario.schema.json exists");
    assert_eq!(on_disk, generated, "rerun with REGIMES_UPDATE_SCHEMA=1");
}

fn object_keys(v: &Value, out: &mut Vec<Vec<String>>, path: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                path.push(k.clone());
                out.push(path.clone());
                object_keys(child, out, path);
                path.pop();
            }
        }
        Value::Array(items) => items.iter().for_each(|c| object_keys(c, out, path)),
        _ => {}
    }
}

#[test]
fn every_consumed_field_is_declared() {
    let schema: Value = serde_json::from_str(&scenario_schema()).unwrap();
    let mut declared = std::collections::BTreeSet::new();
    let mut stack = vec![&schema];
    while let Some(node) = stack.pop() {
        match node {
            Value::Object(map) => {
                if let Some(Value::Object(props)) = map.get("properties") {
                    declared.extend(props.keys().cloned());
                }
                if let Some(Value::Array(req)) = map.get("required") {
                    declared.extend(req.iter().filter_map(|v| v.as_str().map(String::from)));
                }
                stack.extend(map.values());
            }
            Value::Array(items) => stack.extend(items),
            _ => {}
        }
    }
    let mut file = reference_scenario();
    file.output = Some(regimes_core::scenario::OutputSpec { dir: "out".into() });
    let full: Value = serde_json::to_value(&file).unwrap();
    let mut keys = Vec::new();
    object_keys(&full, &mut keys, &mut Vec::new());
    for path in keys {
        let last = path.last().unwrap();
        assert!(declared.contains(last), "field {} missing from schema", path.join("."));
    }
}

#[test]
fn schema_is_strict() {
    let schema: Value = serde_json::from_str(&scenario_schema()).unwrap();
    assert_eq!(schema["additionalProperties"], Value::Bool(false));
    let text = serde_json::to_string(&reference_scenario()).unwrap();
    let extra = text.replacen('{', r#"{"unexpected": 1, "#, 1);
    assert!(parse_scenario(&extra, "x").is_err());
}
