//! Little-endian binary containers for animations (FANIM) and audio (FAUD).
//!
//! FANIM: "FAP1", u32 version, u32 V, u32 N, f32 fps, V*3 f32 template,
//! N*V*3 f32 frames.
//! FAUD: "FAU1", u32 version, u32 sample rate, u64 sample count, f32 samples.

use std::path::Path;

use facepolicy_core::features::AudioTrack;
use facepolicy_core::{FaceTemplate, VertexSequence};

use crate::error::{read_file, write_file, Error, Result};

pub const FANIM_MAGIC: &[u8; 4] = b"FAP1";
pub const FAUD_MAGIC: &[u8; 4] = b"FAU1";
pub const VERSION: u32 = 1;

/// A template with the frames animated on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    pub template: FaceTemplate,
    pub sequence: VertexSequence,
}

impl Animation {
    pub fn new(template: FaceTemplate, sequence: VertexSequence) -> Result<Self> {
        if template.num_vertices() != sequence.num_vertices() {
            return Err(Error::Invalid(format!(
                "template has {} vertices, frames have {}",
                template.num_vertices(),
                sequence.num_vertices()
            )));
        }
        Ok(Self { template, sequence })
    }
}

/// Reads fixed-width fields and names the section that ran short.
pub(crate) struct Cursor<'a> {
    kind: &'static str,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(kind: &'static str, buf: &'a [u8]) -> Self {
        Self { kind, buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let have = self.buf.len() - self.pos;
        if n > have {
            return Err(Error::Truncated {
                kind: self.kind,
                section,
                need: n,
                have,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::format(
                self.kind,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn version(&mut self, expected: u32) -> Result<u32> {
        let v = self.u32("version")?;
        if v != expected {
            return Err(Error::format(
                self.kind,
                format!("unsupported version {v}, expected {expected}"),
            ));
        }
        Ok(v)
    }

    pub(crate) fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, section: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, count: usize, section: &'static str) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.kind, format!("{section} size overflows")))?;
        Ok(self
            .take(bytes, section)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(self) -> Result<()> {
        let left = self.buf.len() - self.pos;
        if left > 0 {
            return Err(Error::format(self.kind, format!("{left} trailing bytes")));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn to_u32(kind: &'static str, what: &str, n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::format(kind, format!("{what} {n} does not fit in u32")))
}

pub fn encode_animation(anim: &Animation) -> Result<Vec<u8>> {
    let (v, n) = (anim.sequence.num_vertices(), anim.sequence.num_frames());
    let mut out = Vec::with_capacity(20 + (v + n * v) * 12);
    out.extend_from_slice(FANIM_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32("FANIM", "vertex count", v)?.to_le_bytes());
    out.extend_from_slice(&to_u32("FANIM", "frame count", n)?.to_le_bytes());
    out.extend_from_slice(&(anim.sequence.fps() as f32).to_le_bytes());
    put_f32s(&mut out, anim.template.flat());
    put_f32s(&mut out, anim.sequence.data().iter().copied());
    Ok(out)
}

pub fn decode_animation(bytes: &[u8]) -> Result<Animation> {
    const K: &str = "FANIM";
    let mut c = Cursor::new(K, bytes);
    c.magic(FANIM_MAGIC)?;
    c.version(VERSION)?;
    let v = c.u32("vertex count")? as usize;
    let n = c.u32("frame count")? as usize;
    let fps = c.f32("fps")?;
    if v == 0 || n == 0 {
        return Err(Error::format(K, format!("empty animation (V={v}, N={n})")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::format(K, format!("fps must be positive, got {fps}")));
    }
    let template = c.f32s(v * 3, "template")?;
    let frame_count = n
        .checked_mul(v * 3)
        .ok_or_else(|| Error::format(K, "frame block size overflows"))?;
    let frames = c.f32s(frame_count, "frames")?;
    c.finish()?;
    let template = FaceTemplate::from_flat(&template.iter().map(|&x| x as f64).collect::<Vec<_>>())?;
    let sequence = VertexSequence::new(v, fps as f64, frames.iter().map(|&x| x as f64).collect())?;
    Animation::new(template, sequence)
}

pub fn encode_audio(track: &AudioTrack) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + track.samples.len() * 4);
    out.extend_from_slice(FAUD_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&track.sample_rate.to_le_bytes());
    out.extend_from_slice(&(track.samples.len() as u64).to_le_bytes());
    for s in &track.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_audio(bytes: &[u8]) -> Result<AudioTrack> {
    const K: &str = "FAUD";
    let mut c = Cursor::new(K, bytes);
    c.magic(FAUD_MAGIC)?;
    c.version(VERSION)?;
    let sample_rate = c.u32("sample rate")?;
    let count = usize::try_from(c.u64("sample count")?).map_err(|_| Error::format(K, "sample count too large"))?;
    let samples = c.f32s(count, "samples")?;
    c.finish()?;
    Ok(AudioTrack::new(sample_rate, samples)?)
}

pub fn write_animation(path: &Path, anim: &Animation) -> Result<()> {
    write_file(path, &encode_animation(anim).map_err(|e| e.in_file(path))?)
}

pub fn read_animation(path: &Path) -> Result<Animation> {
    decode_animation(&read_file(path)?).map_err(|e| e.in_file(path))
}

pub fn write_audio(path: &Path, track: &AudioTrack) -> Result<()> {
    write_file(path, &encode_audio(track))
}

pub fn read_audio(path: &Path) -> Result<AudioTrack> {
    decode_audio(&read_file(path)?).map_err(|e| e.in_file(path))
}
