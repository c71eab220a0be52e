//! Parsers for list and range flags: `6`, `4,8,10`, `4:2:16`.

use crate::error::{usage, Result};

/// Even term counts. `a:s:b` is inclusive of `b` when reachable.
pub fn parse_terms(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let parse = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| usage(format!("bad term count {s:?}")))
    };
    let values: Vec<usize> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let (start, step, end) = match parts.as_slice() {
            [a, b] => (parse(a)?, 2, parse(b)?),
            [a, s, b] => (parse(a)?, parse(s)?, parse(b)?),
            _ => return Err(usage(format!("bad range {spec:?}, expected start:step:end"))),
        };
        if step == 0 || start > end {
            return Err(usage(format!("empty or invalid range {spec:?}")));
        }
        (start..=end).step_by(step).collect()
    } else {
        spec.split(',').map(parse).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(usage("no term counts given"));
    }
    for &p in &values {
        gslap::stehfest::validate_terms(p).map_err(|e| usage(strip_prefix(&e)))?;
    }
    Ok(values)
}

pub fn parse_floats(spec: &str, what: &str) -> Result<Vec<f64>> {
    let values = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("bad {what} value {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(usage(format!("no {what} values given")));
    }
    Ok(values)
}

fn strip_prefix(e: &gslap::Error) -> String {
    match e {
        gslap::Error::InvalidArgument(msg) => msg.clone(),
        other => other.to_string(),
    }
}
