//! Re-parsable complex literals such as `1.5-2e-3i`.

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Formats `z` as `<re><sign><im>i` using the shortest round-tripping
/// decimal representation of each part.
pub fn format_complex(z: Complex<f64>) -> String {
    let im = z.im;
    let sign = if im.is_sign_negative() && !im.is_nan() { '-' } else { '+' };
    format!("{:?}{}{:?}i", z.re, sign, im.abs())
}

/// Parses the output of [`format_complex`] (and plain `a+bi` forms).
pub fn parse_complex(s: &str) -> Option<Complex<f64>> {
    let s = s.trim();
    let body = s.strip_suffix('i')?;
    let bytes = body.as_bytes();
    // Split at the last sign that is neither leading nor part of an exponent.
    let split = (1..bytes.len()).rev().find(|&j| {
        (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E')
    })?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split + 1..].parse().ok()?;
    let im = if bytes[split] == b'-' { -im } else { im };
    Some(Complex::new(re, im))
}

pub(crate) mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex<f64>], s: S) -> Result<S::Ok, S::Error> {
        let lits: Vec<String> = v.iter().map(|&z| format_complex(z)).collect();
        lits.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex<f64>>, D::Error> {
        let lits = Vec::<String>::deserialize(d)?;
        lits.iter()
            .map(|s| {
                parse_complex(s)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad complex literal '{s}'")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_readably() {
        assert_eq!(format_complex(Complex::new(1.0, 2.0)), "1.0+2.0i");
        assert_eq!(format_complex(Complex::new(-0.5, -1e-20)), "-0.5-1e-20i");
        assert_eq!(parse_complex("3-4i"), Some(Complex::new(3.0, -4.0)));
        assert_eq!(parse_complex("1e-3+2.5e+2i"), Some(Complex::new(1e-3, 250.0)));
        assert!(parse_complex("nonsense").is_none());
        let nan = parse_complex(&format_complex(Complex::new(f64::NAN, 1.0))).unwrap();
        assert!(nan.re.is_nan() && nan.im == 1.0);
    }

    proptest! {
        #[test]
        fn round_trips_bitwise(re in proptest::num::f64::ANY, im in proptest::num::f64::ANY) {
            prop_assume!(!re.is_nan() && !im.is_nan());
            let z = Complex::new(re, im);
            let back = parse_complex(&format_complex(z)).unwrap();
            prop_assert_eq!(back.re.to_bits(), re.to_bits());
            prop_assert_eq!(back.im.to_bits(), im.to_bits());
        }
    }
}
