//! Spatial signatures and recursive binary splitting of waveform sets.

use crate::error::{Error, Result};
use crate::sifter::agglomerate::cluster_1d;
use crate::sifter::projection::principal_projection;

/// Layout of a multichannel waveform window: `channels` rows of `width` samples, row-major.
/// Row 0 is the reference channel and column `width / 2` the detection sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowShape {
    pub channels: usize,
    pub width: usize,
}

impl WindowShape {
    pub fn len(&self) -> usize {
        self.channels * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self) -> usize {
        self.width / 2
    }

    pub fn row<'a, T>(&self, data: &'a [T], ch: usize) -> &'a [T] {
        &data[ch * self.width..(ch + 1) * self.width]
    }

    /// Values at the detection sample, one per channel.
    pub fn center_column(&self, data: &[f64]) -> Vec<f64> {
        (0..self.channels)
            .map(|ch| data[ch * self.width + self.center()])
            .collect()
    }
}

/// Element-wise mean of the selected waveforms.
pub fn mean_waveform<W: AsRef<[f32]>>(waveforms: &[W], members: &[usize]) -> Vec<f64> {
    let d = waveforms[members[0]].as_ref().len();
    let mut mean = vec![0.0; d];
    for &i in members {
        for (m, &v) in mean.iter_mut().zip(waveforms[i].as_ref()) {
            *m += f64::from(v);
        }
    }
    let inv = 1.0 / members.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    mean
}

/// Maxima of `W(c_i) - W(c_j)` over the window for every ordered pair `i != j`, in
/// lexicographic pair order.
pub fn difference_vector(template: &[f64], shape: WindowShape) -> Vec<f64> {
    let k = shape.channels;
    let mut out = Vec::with_capacity(k * k.saturating_sub(1));
    for i in 0..k {
        let a = shape.row(template, i);
        for j in 0..k {
            if i == j {
                continue;
            }
            let b = shape.row(template, j);
            let m = a
                .iter()
                .zip(b)
                .map(|(x, y)| x - y)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(m);
        }
    }
    out
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `||D_x - D_y|| <= lambda * max(||D_x||, ||D_y||)`.
pub fn same_neuron(dx: &[f64], dy: &[f64], lambda: f64) -> bool {
    assert_eq!(dx.len(), dy.len(), "difference vectors differ in length");
    l2_dist(dx, dy) <= lambda * l2(dx).max(l2(dy))
}

/// Which half to keep when the two halves of a split come from different neurons.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitMode {
    /// The half with the larger mean reference-channel peak magnitude.
    LargestAmplitude,
    /// The half whose difference vector is closest to the target.
    NearestTemplate(Vec<f64>),
}

/// Repeatedly projects, splits in two and either stops (halves look like one neuron) or
/// descends into one half. Returns ascending indices into `waveforms`; never empty for a
/// non-empty input, and sets of at most two are returned unsplit.
pub fn binary_split_cluster<W: AsRef<[f32]>>(
    waveforms: &[W],
    shape: WindowShape,
    lambda: f64,
    mode: &SplitMode,
) -> Vec<usize> {
    let mut current: Vec<usize> = (0..waveforms.len()).collect();
    let center = shape.center();
    loop {
        if current.len() <= 2 {
            return current;
        }
        let subset: Vec<&[f32]> = current.iter().map(|&i| waveforms[i].as_ref()).collect();
        let projections = principal_projection(&subset);
        let (lower, upper) = cluster_1d(&projections);
        let mean_lower = mean_waveform(&subset, &lower);
        let mean_upper = mean_waveform(&subset, &upper);
        let d_lower = difference_vector(&mean_lower, shape);
        let d_upper = difference_vector(&mean_upper, shape);
        if same_neuron(&d_lower, &d_upper, lambda) {
            return current;
        }
        let keep_lower = match mode {
            SplitMode::LargestAmplitude => {
                let peak = |members: &[usize]| {
                    members
                        .iter()
                        .map(|&i| f64::from(subset[i][center]).abs())
                        .sum::<f64>()
                        / members.len() as f64
                };
                peak(&lower) >= peak(&upper)
            }
            SplitMode::NearestTemplate(target) => {
                l2_dist(&d_lower, target) <= l2_dist(&d_upper, target)
            }
        };
        let chosen = if keep_lower { lower } else { upper };
        current = chosen.into_iter().map(|k| current[k]).collect();
    }
}

/// Keeps candidates at least as close to the template as to the origin:
/// `v . T >= |T|^2 / 2`.
pub fn template_filter(candidates: &[Vec<f64>], template: &[f64]) -> Result<Vec<usize>> {
    let t2: f64 = template.iter().map(|t| t * t).sum();
    if t2 == 0.0 {
        return Err(Error::DegenerateTemplate);
    }
    Ok(candidates
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            assert_eq!(v.len(), template.len(), "feature/template length mismatch");
            let dot: f64 = v.iter().zip(template).map(|(a, b)| a * b).sum();
            dot >= 0.5 * t2
        })
        .map(|(i, _)| i)
        .collect())
}
