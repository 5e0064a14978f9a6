use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// One recording site. Coordinates are in micrometres; `y` runs along the shank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// Probe layout with dense channel ids `0..C`. Drift is modelled along `y` only.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGeometry {
    channels: Vec<Channel>,
}

impl ProbeGeometry {
    pub fn new(mut channels: Vec<Channel>) -> Result<Self> {
        channels.sort_by_key(|c| c.id);
        for pair in channels.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateChannel(pair[0].id));
            }
        }
        for (expected, ch) in channels.iter().enumerate() {
            if ch.id != expected {
                return Err(Error::SparseChannelIds {
                    count: channels.len(),
                    missing: expected,
                });
            }
        }
        for ch in &channels {
            if !ch.x.is_finite() || !ch.y.is_finite() {
                return Err(Error::MalformedGeometry {
                    line: 0,
                    msg: format!("channel {} has non-finite position", ch.id),
                });
            }
        }
        let mut by_pos: Vec<&Channel> = channels.iter().collect();
        by_pos.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        for pair in by_pos.windows(2) {
            if pair[0].x == pair[1].x && pair[0].y == pair[1].y {
                let (a, b) = (pair[0].id.min(pair[1].id), pair[0].id.max(pair[1].id));
                return Err(Error::DuplicatePosition { a, b });
            }
        }
        if channels.is_empty() {
            return Err(Error::MalformedGeometry {
                line: 0,
                msg: "probe has no channels".into(),
            });
        }
        Ok(Self { channels })
    }

    /// Two-column layout: channel `i` sits in column `i % 2` and row `i / 2`.
    pub fn two_column(n_channels: usize, pitch_um: f64, column_spacing_um: f64) -> Self {
        let channels = (0..n_channels)
            .map(|id| Channel {
                id,
                x: (id % 2) as f64 * column_spacing_um,
                y: (id / 2) as f64 * pitch_um,
            })
            .collect();
        Self::new(channels).expect("two-column layout is always valid")
    }

    /// Parses the `channel <id> <x_um> <y_um>` text schema. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut channels = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let bad = |msg: &str| Error::MalformedGeometry {
                line: lineno,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "channel" {
                return Err(bad("expected `channel <id> <x_um> <y_um>`"));
            }
            let id = fields[1].parse::<usize>().map_err(|_| bad("bad channel id"))?;
            let x = fields[2].parse::<f64>().map_err(|_| bad("bad x"))?;
            let y = fields[3].parse::<f64>().map_err(|_| bad("bad y"))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(bad("non-finite coordinate"));
            }
            channels.push(Channel { id, x, y });
        }
        Self::new(channels)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# channel <id> <x_um> <y_um>\n");
        for ch in &self.channels {
            let _ = writeln!(out, "channel {} {} {}", ch.id, ch.x, ch.y);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, id: usize) -> Result<&Channel> {
        self.channels.get(id).ok_or(Error::UnknownChannel(id))
    }

    /// The `k` channels closest to `c` by Euclidean distance, ties to the lower id.
    /// `c` itself always comes first.
    pub fn nearest_channels(&self, c: usize, k: usize) -> Result<Vec<usize>> {
        let origin = *self.channel(c)?;
        if k == 0 || k > self.len() {
            return Err(Error::InvalidParameter(format!(
                "k must be in 1..={}, got {k}",
                self.len()
            )));
        }
        let mut order: Vec<(f64, usize)> = self
            .channels
            .iter()
            .map(|ch| {
                let (dx, dy) = (ch.x - origin.x, ch.y - origin.y);
                (dx * dx + dy * dy, ch.id)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(order.into_iter().take(k).map(|(_, id)| id).collect())
    }

    /// Channels grouped by identical lateral coordinate, each column sorted by `y`.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut ids: Vec<usize> = (0..self.len()).collect();
        ids.sort_by(|&a, &b| {
            let (ca, cb) = (&self.channels[a], &self.channels[b]);
            ca.x.total_cmp(&cb.x).then(ca.y.total_cmp(&cb.y))
        });
        let mut columns: Vec<Vec<usize>> = Vec::new();
        for id in ids {
            match columns.last_mut() {
                Some(col) if self.channels[col[0]].x == self.channels[id].x => col.push(id),
                _ => columns.push(vec![id]),
            }
        }
        columns
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collinear(ys: &[f64]) -> ProbeGeometry {
        ProbeGeometry::new(
            ys.iter()
                .enumerate()
                .map(|(id, &y)| Channel { id, x: 0.0, y })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        let g = collinear(&[0.0, 15.0, 30.0, 45.0]);
        assert_eq!(g.nearest_channels(0, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(g.nearest_channels(2, 1).unwrap(), vec![2]);
    }

    #[test]
    fn nearest_tie_goes_to_lower_id() {
        let mut chans: Vec<Channel> = (0..8)
            .map(|id| Channel {
                id,
                x: 100.0 + id as f64 * 40.0,
                y: 200.0,
            })
            .collect();
        chans[0] = Channel { id: 0, x: 0.0, y: 0.0 };
        chans[2] = Channel { id: 2, x: 0.0, y: 15.0 };
        chans[7] = Channel { id: 7, x: 15.0, y: 0.0 };
        let g = ProbeGeometry::new(chans).unwrap();
        assert_eq!(g.nearest_channels(0, 3).unwrap(), vec![0, 2, 7]);
    }

    #[test]
    fn nearest_rejects_bad_args() {
        let g = collinear(&[0.0, 15.0]);
        assert!(matches!(g.nearest_channels(5, 1), Err(Error::UnknownChannel(5))));
        assert!(g.nearest_channels(0, 0).is_err());
        assert!(g.nearest_channels(0, 3).is_err());
    }

    #[test]
    fn parse_rejects_duplicates() {
        let text = "channel 0 0 0\nchannel 1 0 15\nchannel 2 0 30\nchannel 3 0 45\nchannel 3 32 0\n";
        let err = ProbeGeometry::parse(text).unwrap_err();
        assert!(matches!(err, Error::DuplicateChannel(3)));
        assert_eq!(err.to_string(), "duplicate channel 3");

        let text = "channel 0 0 0\nchannel 1 0 0\n";
        assert!(matches!(
            ProbeGeometry::parse(text),
            Err(Error::DuplicatePosition { a: 0, b: 1 })
        ));
        assert!(matches!(
            ProbeGeometry::parse("channel 0 0 0\nchannel 2 0 15\n"),
            Err(Error::SparseChannelIds { missing: 1, .. })
        ));
        assert!(matches!(
            ProbeGeometry::parse("channel 0 zero 0\n"),
            Err(Error::MalformedGeometry { line: 1, .. })
        ));
        assert!(ProbeGeometry::parse("# only a comment\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = ProbeGeometry::two_column(16, 15.0, 32.0);
        let back = ProbeGeometry::parse(&g.to_text()).unwrap();
        assert_eq!(g, back);
        let cols = g.columns();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[0], vec![0, 2, 4, 6, 8, 10, 12, 14]);
    }
}
