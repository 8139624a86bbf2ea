// SPDX-License-Identifier: Apache-2.0
//! Command-line quantities with optional SI prefixes: `16ns`, `300nA`, `10fF`.

/// Parses `value[prefix][unit]` into SI units. A bare number is taken as SI.
pub fn parse_quantity(text: &str, unit: &str) -> Result<f64, String> {
    let s = text.trim();
    let body = s.strip_suffix(unit).unwrap_or(s);
    let (num, scale) = match body.char_indices().last() {
        Some((i, c)) if !c.is_ascii_digit() && c != '.' => match prefix_scale(c) {
            Some(k) if body.len() > c.len_utf8() => (&body[..i], k),
            _ => return Err(format!("cannot parse {text:?} as {unit}")),
        },
        _ => (body, 0),
    };
    let num = num.trim();
    let bad = || format!("cannot parse {text:?} as {unit}");
    let v: f64 = num.parse().map_err(|_| bad())?;
    // Re-parse with a shifted exponent so `300n` is the double nearest 3e-7.
    let v = if scale == 0 || num.contains(['e', 'E']) {
        v * 10f64.powi(scale)
    } else {
        format!("{num}e{scale}").parse().map_err(|_| bad())?
    };
    if !v.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(v)
}

/// Decimal exponent of an SI prefix.
fn prefix_scale(c: char) -> Option<i32> {
    Some(match c {
        'a' => -18,
        'f' => -15,
        'p' => -12,
        'n' => -9,
        'u' | 'µ' => -6,
        'm' => -3,
        'k' => 3,
        'M' => 6,
        'G' => 9,
        _ => return None,
    })
}

/// `T:I` pairs separated by commas, e.g. `16ns:300nA,32ns:100nA`.
pub fn parse_columns(text: &str) -> Result<Vec<(f64, f64)>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            let (t, i) = c
                .split_once(':')
                .ok_or_else(|| format!("column {c:?} is not T_int:I_max"))?;
            Ok((parse_quantity(t, "s")?, parse_quantity(i, "A")?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_normalize_to_si() {
        assert_eq!(parse_quantity("16ns", "s").unwrap(), 16e-9);
        assert_eq!(parse_quantity("300nA", "A").unwrap(), 3e-7);
        assert_eq!(parse_quantity("12.5fF", "F").unwrap(), 12.5e-15);
        assert_eq!(parse_quantity("2.5e-8", "s").unwrap(), 2.5e-8);
        assert_eq!(parse_quantity("25n", "s").unwrap(), 25e-9);
        assert_eq!(parse_quantity("-1.5k", "s").unwrap(), -1500.0);
        for bad in ["", "ns", "16xs", "nan"] {
            assert!(parse_quantity(bad, "s").is_err(), "{bad}");
        }
    }

    #[test]
    fn columns() {
        let c = parse_columns("16ns:300nA, 8ns:100nA").unwrap();
        assert_eq!(c, vec![(16e-9, 300e-9), (8e-9, 100e-9)]);
        assert!(parse_columns("").unwrap().is_empty());
        assert!(parse_columns("16ns").is_err());
    }
}
