use crate::error::{Error, Result};

fn counts(x: &[u32]) -> Vec<usize> {
    let size = x.iter().max().map_or(0, |&m| m as usize + 1);
    let mut c = vec![0; size];
    for &v in x {
        c[v as usize] += 1;
    }
    c
}

/// Plug-in Shannon entropy in bits.
pub fn entropy(x: &[u32]) -> f64 {
    let n = x.len() as f64;
    counts(x)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in mutual information of two discrete variables, in bits.
pub fn mutual_information(x: &[u32], y: &[u32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Invalid("mutual information of empty variables".into()));
    }
    let cx = counts(x);
    let cy = counts(y);
    if cx.iter().filter(|&&c| c > 0).count() < 2 || cy.iter().filter(|&&c| c > 0).count() < 2 {
        return Ok(0.0);
    }
    let ny = cy.len();
    let mut joint = vec![0usize; cx.len() * ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * ny + b as usize] += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for (idx, &c) in joint.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (a, b) = (idx / ny, idx % ny);
        let c = c as f64;
        mi += c / n * (c * n / (cx[a] as f64 * cy[b] as f64)).log2();
    }
    Ok(mi.max(0.0))
}
