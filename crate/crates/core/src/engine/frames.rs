use std::io::{BufRead, Write};

use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::VertexId;

pub const FRAME_FORMAT: &str = "dynlayout-frames";

/// First line of a frame stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub levels: usize,
    pub dt: f64,
}

impl FrameHeader {
    pub fn new(dim: usize, levels: usize, dt: f64) -> Self {
        FrameHeader { format: FRAME_FORMAT.into(), version: 1, dim, levels, dt }
    }
}

/// One vertex of a frame, written as `[id, x, y(, z)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameVertex {
    pub id: VertexId,
    pub position: Vec<f64>,
}

impl Serialize for FrameVertex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(1 + self.position.len()))?;
        seq.serialize_element(&self.id.0)?;
        for x in &self.position {
            seq.serialize_element(x)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for FrameVertex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<serde_json::Number>::deserialize(d)?;
        let (id, rest) = raw.split_first().ok_or_else(|| serde::de::Error::custom("empty vertex entry"))?;
        let id = id.as_u64().ok_or_else(|| serde::de::Error::custom("vertex id must be an integer"))?;
        let position = rest.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect();
        Ok(FrameVertex { id: VertexId(id), position })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub vertices: usize,
    #[serde(rename = "V")]
    pub potential: f64,
    #[serde(rename = "T")]
    pub kinetic: f64,
    pub max_force: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame: u64,
    pub t: f64,
    pub vertices: Vec<FrameVertex>,
    #[serde(rename = "V")]
    pub potential: f64,
    #[serde(rename = "T")]
    pub kinetic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<LevelDiagnostics>>,
}

pub struct FrameWriter<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut out: W, header: &FrameHeader) -> Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(FrameWriter { out, written: 0 })
    }

    pub fn write(&mut self, frame: &Frame) -> Result<()> {
        serde_json::to_writer(&mut self.out, frame)?;
        self.out.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parses a frame stream written by [`FrameWriter`].
pub fn read_frames<R: BufRead>(reader: R) -> Result<(FrameHeader, Vec<Frame>)> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => serde_json::from_str::<FrameHeader>(&line?)
            .map_err(|e| Error::MalformedEvent { line: 1, message: e.to_string() })?,
        None => return Err(Error::MalformedEvent { line: 1, message: "missing frame header".into() }),
    };
    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedEvent { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_line_format() {
        let f = Frame {
            frame: 3,
            t: 1.25,
            vertices: vec![FrameVertex { id: VertexId(7), position: vec![0.5, -1.0, 2.0] }],
            potential: 4.0,
            kinetic: 0.5,
            levels: None,
        };
        let line = serde_json::to_string(&f).unwrap();
        assert_eq!(line, r#"{"frame":3,"t":1.25,"vertices":[[7,0.5,-1.0,2.0]],"V":4.0,"T":0.5}"#);
        let back: Frame = serde_json::from_str(&line).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn round_trip_stream() {
        let mut w = FrameWriter::new(Vec::new(), &FrameHeader::new(2, 3, 0.01)).unwrap();
        let f = Frame { frame: 0, t: 0.01, vertices: vec![], potential: 0.0, kinetic: 0.0, levels: None };
        w.write(&f).unwrap();
        let bytes = w.finish().unwrap();
        let (h, frames) = read_frames(&bytes[..]).unwrap();
        assert_eq!(h.dim, 2);
        assert_eq!(frames, vec![f]);
    }
}
