use crate::error::{Error, Result};

/// Pearson product-moment correlation. Zero variance on either side is an
/// error rather than a silent 0.
pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::ShapeMismatch {
            op: "pearson_r",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 {
        return Err(Error::UndefinedCorrelation("first input"));
    }
    if vb == 0.0 {
        return Err(Error::UndefinedCorrelation("second input"));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean absolute error.
pub fn mae(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "mae",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}
