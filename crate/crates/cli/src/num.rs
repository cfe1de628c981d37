//! Numbers in configs and reports.

use serde::{Deserialize, Serialize};
use shockdefault::Scalar;

/// A config number: TOML integer, float, or a string `"a/b"` / `"0.125"`
/// that is read exactly by the rational backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn to_scalar<S: Scalar>(&self) -> Result<S, String> {
        match self {
            Num::Int(i) => Ok(S::ratio(*i, 1)),
            Num::Float(x) if x.is_finite() => Ok(S::from_f64(*x)),
            Num::Float(x) => Err(format!("non-finite number {}", x)),
            Num::Text(s) => parse_exact(s).map(|(n, d)| S::ratio(n, d)),
        }
    }
}

impl From<i64> for Num {
    fn from(i: i64) -> Self {
        Num::Int(i)
    }
}

/// `"p/q"`, `"-3"` or a plain decimal such as `"0.125"` as a fraction.
pub fn parse_exact(s: &str) -> Result<(i64, i64), String> {
    let t = s.trim();
    let bad = || format!("cannot read '{}' as a number (use 'a/b' or a decimal)", s);
    if let Some((a, b)) = t.split_once('/') {
        let n: i64 = a.trim().parse().map_err(|_| bad())?;
        let d: i64 = b.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(format!("zero denominator in '{}'", s));
        }
        return Ok((n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac.len() > 17 {
        return Err(format!("too many decimals in '{}'", s));
    }
    let digits = format!("{}{}", int, frac);
    let n: i64 = digits.parse().map_err(|_| bad())?;
    let d = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    Ok((if neg { -n } else { n }, d))
}

/// Decimal with 17 significant digits, trailing zeros trimmed; exponent
/// notation outside `1e-5 ..= 1e17`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{}", x);
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if neg { "-" } else { "" };
    if !(-5..17).contains(&exp) {
        let m = trim(&format!("{}.{}", &digits[..1], &digits[1..]));
        return format!("{}{}e{}", sign, m, exp);
    }
    let s = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let k = exp as usize + 1;
        format!("{}.{}", &digits[..k], &digits[k..])
    };
    format!("{}{}", sign, trim(&s))
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use shockdefault::Rational;

    #[test]
    fn exact_strings() {
        assert_eq!(parse_exact("3/8").unwrap(), (3, 8));
        assert_eq!(parse_exact("-0.125").unwrap(), (-125, 1000));
        assert_eq!(parse_exact("2").unwrap(), (2, 1));
        assert!(parse_exact("1/0").is_err());
        assert!(parse_exact("x").is_err());
        assert!(parse_exact(".").is_err());
        let r: Rational = Num::Text("0.1".into()).to_scalar().unwrap();
        assert_eq!(r, Rational::ratio(1, 10));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(sig17(1.0), "1");
        assert_eq!(sig17(0.5), "0.5");
        assert_eq!(sig17(0.25), "0.25");
        assert_eq!(sig17(-2.5e-7), "-2.4999999999999999e-7");
        assert_eq!(sig17(1e20), "1e20");
        assert_eq!(sig17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(sig17(123.0), "123");
        for x in [1.0 / 3.0, std::f64::consts::PI * 1e-3, 2.0f64.ln() * 1e20, -7.25e-9] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
