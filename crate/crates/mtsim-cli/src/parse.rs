//! Flag-value parsers for sizes, hierarchy specs, and capacity sets.

/// Parses a capacity like `0`, `4096`, `16GB`, or `1TB`. Plain numbers are
/// bytes; suffixes are binary (KB = 2^10 ... TB = 2^40), case-insensitive.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty size".into());
    }
    let upper = s.to_ascii_uppercase();
    let (digits, multiplier) = if let Some(d) = upper.strip_suffix("KB") {
        (d, 1u64 << 10)
    } else if let Some(d) = upper.strip_suffix("MB") {
        (d, 1 << 20)
    } else if let Some(d) = upper.strip_suffix("GB") {
        (d, 1 << 30)
    } else if let Some(d) = upper.strip_suffix("TB") {
        (d, 1 << 40)
    } else if let Some(d) = upper.strip_suffix('B') {
        (d, 1)
    } else {
        (upper.as_str(), 1)
    };
    let value: u64 = digits
        .trim()
        .parse()
        .map_err(|_| format!("invalid size `{s}`"))?;
    value
        .checked_mul(multiplier)
        .ok_or_else(|| format!("size `{s}` overflows"))
}

/// Parses `dram:<size>,nvm:<size>,ssd:<size>` into capacities in bytes.
/// Missing tiers default to 0; unknown or duplicate tier names are rejected.
pub fn parse_hierarchy(s: &str) -> Result<(u64, u64, u64), String> {
    let mut dram = None;
    let mut nvm = None;
    let mut ssd = None;
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, size) = part
            .split_once(':')
            .ok_or_else(|| format!("expected `tier:size`, found `{part}`"))?;
        let slot = match name.trim().to_ascii_lowercase().as_str() {
            "dram" => &mut dram,
            "nvm" => &mut nvm,
            "ssd" => &mut ssd,
            other => return Err(format!("unknown tier `{other}`")),
        };
        if slot.is_some() {
            return Err(format!("tier `{}` specified twice", name.trim()));
        }
        *slot = Some(parse_size(size)?);
    }
    if dram.is_none() && nvm.is_none() && ssd.is_none() {
        return Err(format!("no tiers in hierarchy spec `{s}`"));
    }
    Ok((dram.unwrap_or(0), nvm.unwrap_or(0), ssd.unwrap_or(0)))
}

/// A comma list of capacities parsed as one flag value (clap would other-
/// wise treat a `Vec` field as a repeatable flag).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeSet(pub Vec<u64>);

/// Parses a comma list of capacities, e.g. `0,4GB,8GB`.
pub fn parse_size_set(s: &str) -> Result<SizeSet, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(parse_size(part)?);
    }
    if out.is_empty() {
        return Err(format!("empty capacity set `{s}`"));
    }
    Ok(SizeSet(out))
}

/// Clap value parser for probabilities and fractions.
pub fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number `{s}`"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside [0, 1]"));
    }
    Ok(v)
}
