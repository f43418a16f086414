//! Complex-number text format shared by model files and reports: `"a+bi"`.

use crate::error::{Error, Result};
use crate::C64;

/// Formats a complex number as `a+bi` (or `a` when the imaginary part is
/// zero) with shortest round-trip decimal digits.
pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 && z.im.is_sign_positive() {
        format!("{:?}", z.re)
    } else if z.im.is_sign_negative() {
        format!("{:?}-{:?}i", z.re, -z.im)
    } else {
        format!("{:?}+{:?}i", z.re, z.im)
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (whitespace is not allowed
/// inside the literal).
pub fn parse_complex(s: &str) -> Result<C64> {
    let err = || Error::Parse {
        offset: 0,
        message: format!("invalid complex literal {s:?}"),
    };
    let s = s.trim();
    if s.is_empty() {
        return Err(err());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let parse_imag = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| err()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| err())?;
            Ok(C64::new(re, parse_imag(&body[k..])?))
        }
        None => Ok(C64::new(0.0, parse_imag(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_complex("0.5+1.2i").unwrap(), C64::new(0.5, 1.2));
        assert_eq!(parse_complex("-2").unwrap(), C64::new(-2.0, 0.0));
        assert_eq!(parse_complex("3i").unwrap(), C64::new(0.0, 3.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3-2.5e-7i").unwrap(), C64::new(1e-3, -2.5e-7));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn format_round_trips() {
        for z in [
            C64::new(0.1, 0.0),
            C64::new(-1e-9, 3.25),
            C64::new(1.0 / 3.0, -2.0 / 7.0),
            C64::new(0.0, -1e20),
        ] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }
}
