//! Structural validation of snapshot documents before decoding, so that every
//! failure points at the offending field. Mirrors `docs/snapshot.schema.json`.

use std::collections::HashSet;

use serde_json::{Map, Value};

use super::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("snapshot schema violation at {pointer}: {message}")]
pub struct SchemaViolation {
    /// RFC 6901 JSON pointer to the offending field.
    pub pointer: String,
    pub message: String,
}

type Check = Result<(), SchemaViolation>;

fn violation(pointer: &str, message: impl Into<String>) -> SchemaViolation {
    SchemaViolation {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn object<'a>(v: &'a Value, ptr: &str) -> Result<&'a Map<String, Value>, SchemaViolation> {
    v.as_object().ok_or_else(|| violation(ptr, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, ptr: &str, key: &str) -> Result<&'a Value, SchemaViolation> {
    obj.get(key)
        .ok_or_else(|| violation(&format!("{ptr}/{key}"), "required field is missing"))
}

fn string(obj: &Map<String, Value>, ptr: &str, key: &str, non_empty: bool) -> Check {
    let p = format!("{ptr}/{key}");
    match field(obj, ptr, key)?.as_str() {
        Some(s) if non_empty && s.is_empty() => Err(violation(&p, "must not be empty")),
        Some(_) => Ok(()),
        None => Err(violation(&p, "expected a string")),
    }
}

fn timestamp(v: &Value, ptr: &str) -> Check {
    match v.as_str() {
        Some(s) if Timestamp::parse(s).is_some() => Ok(()),
        Some(_) => Err(violation(ptr, "expected an ISO-8601 UTC timestamp")),
        None => Err(violation(ptr, "expected a timestamp string")),
    }
}

fn positive_int(obj: &Map<String, Value>, ptr: &str, key: &str) -> Result<u64, SchemaViolation> {
    let p = format!("{ptr}/{key}");
    match field(obj, ptr, key)?.as_u64() {
        Some(n) if n > 0 => Ok(n),
        _ => Err(violation(&p, "expected a positive integer")),
    }
}

fn string_array(obj: &Map<String, Value>, ptr: &str, key: &str) -> Check {
    let p = format!("{ptr}/{key}");
    // optional arrays default to empty
    let Some(v) = obj.get(key) else {
        return Ok(());
    };
    let arr = v
        .as_array()
        .ok_or_else(|| violation(&p, "expected an array of strings"))?;
    for (i, item) in arr.iter().enumerate() {
        if !item.is_string() {
            return Err(violation(&format!("{p}/{i}"), "expected a string"));
        }
    }
    Ok(())
}

fn optional_string(obj: &Map<String, Value>, ptr: &str, key: &str) -> Check {
    match obj.get(key) {
        None | Some(Value::String(_)) => Ok(()),
        Some(_) => Err(violation(&format!("{ptr}/{key}"), "expected a string")),
    }
}

pub(super) fn validate(root: &Value) -> Check {
    let top = object(root, "")?;

    let project = object(field(top, "", "project")?, "/project")?;
    string(project, "/project", "owner", true)?;
    string(project, "/project", "name", true)?;
    string(project, "/project", "display_label", true)?;

    timestamp(field(top, "", "fetched_at")?, "/fetched_at")?;

    let issues = field(top, "", "issues")?
        .as_array()
        .ok_or_else(|| violation("/issues", "expected an array"))?;
    let mut seen = HashSet::new();
    for (i, issue) in issues.iter().enumerate() {
        let ptr = format!("/issues/{i}");
        let obj = object(issue, &ptr)?;
        let number = positive_int(obj, &ptr, "number")?;
        if !seen.insert(number) {
            return Err(violation(
                &format!("{ptr}/number"),
                format!("duplicate issue number {number}"),
            ));
        }
        string(obj, &ptr, "title", false)?;
        optional_string(obj, &ptr, "body")?;
        string(obj, &ptr, "url", false)?;
        let state = field(obj, &ptr, "state")?;
        let closed = match state.as_str() {
            Some("open") => false,
            Some("closed") => true,
            _ => return Err(violation(&format!("{ptr}/state"), "expected \"open\" or \"closed\"")),
        };
        let closed_ptr = format!("{ptr}/closed_at");
        match obj.get("closed_at") {
            None | Some(Value::Null) if closed => {
                return Err(violation(&closed_ptr, "closed issues require closed_at"))
            }
            None | Some(Value::Null) => {}
            Some(_) if !closed => return Err(violation(&closed_ptr, "open issues must not have closed_at")),
            Some(v) => timestamp(v, &closed_ptr)?,
        }
        string_array(obj, &ptr, "comments")?;
    }

    let pulls = field(top, "", "pulls")?
        .as_array()
        .ok_or_else(|| violation("/pulls", "expected an array"))?;
    let mut seen = HashSet::new();
    for (i, pull) in pulls.iter().enumerate() {
        let ptr = format!("/pulls/{i}");
        let obj = object(pull, &ptr)?;
        let number = positive_int(obj, &ptr, "number")?;
        if !seen.insert(number) {
            return Err(violation(
                &format!("{ptr}/number"),
                format!("duplicate pull number {number}"),
            ));
        }
        string(obj, &ptr, "title", false)?;
        optional_string(obj, &ptr, "body")?;
        if !field(obj, &ptr, "merged")?.is_boolean() {
            return Err(violation(&format!("{ptr}/merged"), "expected a boolean"));
        }
        string_array(obj, &ptr, "changed_files")?;
        string_array(obj, &ptr, "commit_messages")?;
    }

    let files = object(field(top, "", "file_contents")?, "/file_contents")?;
    for (path, content) in files {
        if !content.is_string() {
            return Err(violation(
                &format!("/file_contents/{}", escape(path)),
                "expected file text",
            ));
        }
    }
    Ok(())
}
