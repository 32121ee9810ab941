//! Schema-driven random actions. Every action produced validates against
//! the tool it names; whether the benchmark likes it is another matter.

use cube_core::{ActionRequest, ArgType, PropertySchema, SplitMix64, Tool};
use serde_json::{json, Map, Value};

const STRINGS: [&str; 4] = ["", "x", "secret", "key-0"];

fn pick<'a, T>(items: &'a [T], rng: &mut SplitMix64) -> &'a T {
    &items[rng.below(items.len() as u64) as usize]
}

fn random_value(prop: &PropertySchema, rng: &mut SplitMix64) -> Value {
    if let Some(allowed) = prop.allowed.as_deref().filter(|a| !a.is_empty()) {
        return pick(allowed, rng).clone();
    }
    match prop.ty {
        ArgType::String => match rng.below(STRINGS.len() as u64 + 1) as usize {
            i if i < STRINGS.len() => json!(STRINGS[i]),
            _ => json!(format!("{:016x}", rng.next_u64())),
        },
        ArgType::Integer => json!(rng.below(10)),
        ArgType::Number => json!(rng.below(100) as f64 / 4.0),
        ArgType::Boolean => json!(rng.below(2) == 1),
        ArgType::Object => json!({}),
        ArgType::Array => json!([]),
    }
}

/// A random valid call of a random tool, or None when no tool is listed.
pub fn random_action(tools: &[Tool], rng: &mut SplitMix64) -> Option<ActionRequest> {
    if tools.is_empty() {
        return None;
    }
    let tool = pick(tools, rng);
    let schema = &tool.input_schema;
    let mut args = Map::new();
    for (name, prop) in &schema.properties {
        if schema.required.contains(name) || rng.below(2) == 1 {
            args.insert(name.clone(), random_value(prop, rng));
        }
    }
    Some(ActionRequest { name: tool.name.clone(), args })
}

pub fn random_script(tools: &[Tool], len: usize, rng: &mut SplitMix64) -> Vec<ActionRequest> {
    (0..len).map_while(|_| random_action(tools, rng)).collect()
}
