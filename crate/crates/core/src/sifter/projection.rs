//! Dominant principal axis by power iteration.

pub const MAX_ITERATIONS: usize = 30;
pub const TOLERANCE: f64 = 1e-6;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean-centred rows plus the normalised mean-absolute start vector.
fn centre<W: AsRef<[f32]>>(waveforms: &[W]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = waveforms.len();
    let d = waveforms[0].as_ref().len();
    let mut mean = vec![0.0; d];
    let mut mean_abs = vec![0.0; d];
    for w in waveforms {
        let w = w.as_ref();
        assert_eq!(w.len(), d, "waveforms must share one dimension");
        for (k, &v) in w.iter().enumerate() {
            mean[k] += f64::from(v);
            mean_abs[k] += f64::from(v).abs();
        }
    }
    let inv = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    let rows = waveforms
        .iter()
        .map(|w| w.as_ref().iter().zip(&mean).map(|(&v, m)| f64::from(v) - m).collect())
        .collect();
    let scale = norm(&mean_abs);
    if scale > 0.0 {
        mean_abs.iter_mut().for_each(|m| *m /= scale);
    } else {
        let u = 1.0 / (d as f64).sqrt();
        mean_abs.iter_mut().for_each(|m| *m = u);
    }
    (rows, mean_abs)
}

/// `X^T X v` for centred rows `X`.
fn gram_apply(rows: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for row in rows {
        let dot: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        if dot != 0.0 {
            for (o, r) in out.iter_mut().zip(row) {
                *o += dot * r;
            }
        }
    }
}

fn iterate(rows: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let mut next = vec![0.0; v.len()];
    for _ in 0..MAX_ITERATIONS {
        gram_apply(rows, &v, &mut next);
        let len = norm(&next);
        if len == 0.0 {
            return None;
        }
        next.iter_mut().for_each(|x| *x /= len);
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut next);
        if change < TOLERANCE {
            break;
        }
    }
    Some(v)
}

/// Unit-norm dominant covariance eigenvector, or `None` when the set has no variance.
pub fn principal_axis<W: AsRef<[f32]>>(waveforms: &[W]) -> Option<Vec<f64>> {
    if waveforms.len() < 2 {
        return None;
    }
    let (rows, start) = centre(waveforms);
    if let Some(v) = iterate(&rows, start) {
        return Some(v);
    }
    // The start vector was orthogonal to all variance; restart on the widest coordinate.
    let d = rows[0].len();
    let widest = (0..d)
        .map(|k| (k, rows.iter().map(|r| r[k] * r[k]).sum::<f64>()))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
    if widest.1 == 0.0 {
        return None;
    }
    let mut e = vec![0.0; d];
    e[widest.0] = 1.0;
    iterate(&rows, e)
}

/// Projections of the mean-centred waveforms onto their principal axis. All zeros when the
/// set has no variance.
pub fn principal_projection<W: AsRef<[f32]>>(waveforms: &[W]) -> Vec<f64> {
    if waveforms.is_empty() {
        return Vec::new();
    }
    let Some(axis) = principal_axis(waveforms) else {
        return vec![0.0; waveforms.len()];
    };
    let (rows, _) = centre(waveforms);
    rows.iter()
        .map(|r| r.iter().zip(&axis).map(|(a, b)| a * b).sum())
        .collect()
}
