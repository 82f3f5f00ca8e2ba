//! Event trace: one whitespace-separated line per delivered packet or
//! steering decision.

use std::fmt;

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub kind: &'static str,
    pub node: String,
    pub class: &'static str,
    pub size: u32,
    pub path: &'static str,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.9} {} {} {} {} {}",
            self.time.as_secs_f64(),
            self.kind,
            self.node,
            self.class,
            self.size,
            self.path
        )
    }
}

pub const HEADER: &str = "# time_s kind node class size path";

/// Parses a line written by [`TraceRecord`]'s `Display`. Returns the time
/// in seconds and the remaining fields.
pub fn parse_line(line: &str) -> Option<(f64, Vec<&str>)> {
    if line.starts_with('#') {
        return None;
    }
    let mut it = line.split_whitespace();
    let t = it.next()?.parse().ok()?;
    let rest: Vec<&str> = it.collect();
    (rest.len() == 5).then_some((t, rest))
}
