//! Canonical report tree: deterministic structured text and JSON renderings
//! (sorted keys, normalized rationals).

use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub enum Val {
    Str(String),
    UInt(u64),
    Bool(bool),
    List(Vec<Val>),
    Map(BTreeMap<String, Val>),
}

impl Val {
    pub fn map(entries: Vec<(&str, Val)>) -> Val {
        Val::Map(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Val {
        Val::Str(s.into())
    }

    fn scalar_text(&self) -> Option<String> {
        match self {
            Val::Str(s) => Some(s.clone()),
            Val::UInt(u) => Some(u.to_string()),
            Val::Bool(b) => Some(b.to_string()),
            _ => None,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        match self {
            Val::Map(m) => {
                for (k, v) in m {
                    match v.scalar_text() {
                        Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
                        None => {
                            out.push_str(&format!("{pad}{k}:\n"));
                            v.render_into(out, indent + 1);
                        }
                    }
                }
            }
            Val::List(items) => {
                for v in items {
                    match v.scalar_text() {
                        Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                        None => {
                            out.push_str(&format!("{pad}-\n"));
                            v.render_into(out, indent + 1);
                        }
                    }
                }
            }
            other => {
                let s = other.scalar_text().unwrap_or_default();
                out.push_str(&format!("{pad}{s}\n"));
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Val::Str(s) => serde_json::Value::String(s.clone()),
            Val::UInt(u) => serde_json::Value::from(*u),
            Val::Bool(b) => serde_json::Value::Bool(*b),
            Val::List(items) => {
                serde_json::Value::Array(items.iter().map(|v| v.to_json()).collect())
            }
            Val::Map(m) => {
                let mut obj = serde_json::Map::new();
                for (k, v) in m {
                    obj.insert(k.clone(), v.to_json());
                }
                serde_json::Value::Object(obj)
            }
        }
    }
}
