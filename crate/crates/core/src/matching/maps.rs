use crate::error::{Error, Result};

pub const DEFAULT_DIFF_SCALE: f64 = 10.0;

/// `100 * ||a - b|| / ||b||` over the pixels where `b` is nonzero.
pub fn rel_rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("maps have {} and {} pixels", a.len(), b.len())));
    }
    let (mut num, mut den, mut count) = (0.0, 0.0, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        if y != 0.0 {
            num += (x - y) * (x - y);
            den += y * y;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::config("reference map has no foreground pixels"));
    }
    Ok(100.0 * (num / den).sqrt())
}

/// `(a - b) * scale` per pixel with its value range for a legend.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffImage {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn diff_map(a: &[f64], b: &[f64], scale: f64) -> Result<DiffImage> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("maps have {} and {} pixels", a.len(), b.len())));
    }
    let values: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * scale).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiffImage { values, min, max })
}

/// Linear value-to-gray mapping of a 16-bit image: `value = offset + gray * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmScaling {
    pub offset: f64,
    pub step: f64,
}

impl PgmScaling {
    /// Sidecar text describing the mapping.
    pub fn to_sidecar_string(&self) -> String {
        format!(
            "# value = offset + gray * step, gray in 0..=65535\noffset = {}\nstep = {}\n",
            self.offset, self.step
        )
    }
}

/// Binary (P5) 16-bit PGM spanning the value range of `values`.
/// A constant image maps to gray 0 with step 0.
pub fn write_pgm16(values: &[f64], width: usize, height: usize) -> Result<(Vec<u8>, PgmScaling)> {
    if values.len() != width * height {
        return Err(Error::shape(format!(
            "{width}x{height} image needs {} pixels, got {}",
            width * height,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("image contains non-finite values"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = if hi > lo { (hi - lo) / 65535.0 } else { 0.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        let gray = if step > 0.0 { ((v - lo) / step).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        out.extend_from_slice(&gray.to_be_bytes());
    }
    Ok((out, PgmScaling { offset: if lo.is_finite() { lo } else { 0.0 }, step }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_rmse_values() {
        let b = [0.0, 100.0, 200.0, 0.0];
        assert_eq!(rel_rmse(&b, &b).unwrap(), 0.0);
        let a: Vec<f64> = b.iter().map(|v| v * 1.01).collect();
        assert!((rel_rmse(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        // Background pixels of the reference are ignored.
        assert_eq!(rel_rmse(&[5.0, 100.0, 200.0, 7.0], &b).unwrap(), 0.0);
        assert!(matches!(rel_rmse(&[1.0], &[0.0]), Err(Error::Config(_))));
        assert!(matches!(rel_rmse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn diff_values() {
        let a = [10.0, 20.0, 33.0];
        let b = [7.0, 17.0, 30.0];
        let d = diff_map(&a, &b, DEFAULT_DIFF_SCALE).unwrap();
        assert_eq!(d.values, vec![30.0, 30.0, 30.0]);
        assert_eq!((d.min, d.max), (30.0, 30.0));
        assert!(diff_map(&a, &a, 10.0).unwrap().values.iter().all(|&v| v == 0.0));
        let r = diff_map(&b, &a, 10.0).unwrap();
        assert!(d.values.iter().zip(&r.values).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn pgm_layout() {
        let (bytes, s) = write_pgm16(&[0.0, 1000.0, 500.0, 250.0], 2, 2).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..].chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        assert_eq!(px[0], 0);
        assert_eq!(px[1], 65535);
        assert!((s.offset + px[2] as f64 * s.step - 500.0).abs() <= s.step);
        assert!(s.to_sidecar_string().contains("offset = 0\n"));
        let (flat, s) = write_pgm16(&[3.0; 4], 2, 2).unwrap();
        assert!(flat[header.len()..].iter().all(|&b| b == 0));
        assert_eq!((s.offset, s.step), (3.0, 0.0));
        assert!(write_pgm16(&[1.0], 2, 2).is_err());
    }
}
