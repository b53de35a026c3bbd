//! Lowering of move plans into sampled intensity and deflection waveforms.
//!
//! Each move becomes: a linear intensity ramp from zero to full scale with the
//! tweezers parked on the source, a constant-speed sweep along the path at
//! full depth, and a linear ramp back to zero parked on the release point.
//! Position codes only jump while the intensity is zero.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FieldOfView, Point, TrapArray};
use crate::physics::PhysicsParams;
use crate::planner::{Move, MovePlan};

const MAGIC: &[u8; 4] = b"ATWF";
const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 20;

/// Affine map between positions in um and DAC codes, one per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub scale_x: f64,
    pub offset_x: f64,
    pub scale_y: f64,
    pub offset_y: f64,
    pub fov: FieldOfView,
    pub dac_bits: u16,
    /// Seconds per sample.
    pub sample_period: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self::centered(Point::new(0.0, 0.0), FieldOfView::default(), 12, 1e-6)
    }
}

impl Calibration {
    /// Calibration whose code range spans exactly `fov` around `center`.
    pub fn centered(center: Point, fov: FieldOfView, dac_bits: u16, sample_period: f64) -> Self {
        let max = ((1u32 << dac_bits) - 1) as f64;
        let scale_x = max / fov.width;
        let scale_y = max / fov.height;
        Self {
            scale_x,
            offset_x: max / 2.0 - scale_x * center.x,
            scale_y,
            offset_y: max / 2.0 - scale_y * center.y,
            fov,
            dac_bits,
            sample_period,
        }
    }

    /// Calibration centered on the bounding box of `array`, using its field of view.
    pub fn for_array(array: &TrapArray) -> Self {
        Self::centered(array.bounds().center(), array.field_of_view(), 12, 1e-6)
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.dac_bits) - 1) as u16
    }

    /// Size of one code step in um, per axis.
    pub fn step(&self) -> (f64, f64) {
        (1.0 / self.scale_x, 1.0 / self.scale_y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.dac_bits) {
            return Err(Error::validation(format!(
                "dac_bits must be in 1..=16, got {}",
                self.dac_bits
            )));
        }
        let ok = |v: f64| v.is_finite() && v != 0.0;
        if !ok(self.scale_x)
            || !ok(self.scale_y)
            || !self.offset_x.is_finite()
            || !self.offset_y.is_finite()
        {
            return Err(Error::validation(
                "calibration must be an invertible affine map",
            ));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(Error::validation("sample_period must be positive"));
        }
        Ok(())
    }

    pub fn to_code(&self, p: Point) -> Result<(u16, u16)> {
        let max = self.max_code() as f64;
        let cx = (self.offset_x + self.scale_x * p.x).round();
        let cy = (self.offset_y + self.scale_y * p.y).round();
        if !(0.0..=max).contains(&cx) || !(0.0..=max).contains(&cy) {
            return Err(Error::CalibrationRange { x: p.x, y: p.y });
        }
        Ok((cx as u16, cy as u16))
    }

    pub fn to_point(&self, x: u16, y: u16) -> Point {
        Point::new(
            (x as f64 - self.offset_x) / self.scale_x,
            (y as f64 - self.offset_y) / self.scale_y,
        )
    }
}

/// Ramp and sweep timing used when sampling moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveTiming {
    pub tau_ramp: f64,
    /// um/s
    pub v_move: f64,
    /// Zero-intensity samples inserted between consecutive moves.
    pub gap_samples: usize,
}

impl Default for MoveTiming {
    fn default() -> Self {
        Self::from(&PhysicsParams::default())
    }
}

impl From<&PhysicsParams> for MoveTiming {
    fn from(p: &PhysicsParams) -> Self {
        Self {
            tau_ramp: p.tau_ramp,
            v_move: p.v_move,
            gap_samples: 0,
        }
    }
}

/// Three equal-length channels of DAC codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveformSet {
    pub intensity: Vec<u16>,
    pub x: Vec<u16>,
    pub y: Vec<u16>,
    pub sample_period_ns: u32,
    pub dac_bits: u16,
}

impl WaveformSet {
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period_ns as f64 * 1e-9
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.sample_period()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.dac_bits.to_le_bytes())?;
        w.write_all(&self.sample_period_ns.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.len() * 2);
        for channel in [&self.intensity, &self.x, &self.y] {
            buf.clear();
            for v in channel.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 6 * self.len());
        self.write_binary(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Decode(format!(
                "unsupported format version {version}"
            )));
        }
        let dac_bits = u16::from_le_bytes([header[6], header[7]]);
        let sample_period_ns = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let n = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        let mut channel = || -> Result<Vec<u16>> {
            let mut raw = vec![0u8; n * 2];
            r.read_exact(&mut raw)?;
            Ok(raw
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect())
        };
        let intensity = channel()?;
        let x = channel()?;
        let y = channel()?;
        Ok(Self {
            intensity,
            x,
            y,
            sample_period_ns,
            dac_bits,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_binary(bytes)
    }

    /// CSV with columns sample_index, intensity, x, y.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sample_index", "intensity", "x", "y"])?;
        for i in 0..self.len() {
            out.write_record([
                i.to_string(),
                self.intensity[i].to_string(),
                self.x[i].to_string(),
                self.y[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Point at arc length `s` along a polyline.
fn point_along(path: &[Point], mut s: f64) -> Point {
    for w in path.windows(2) {
        let seg = w[0].distance(w[1]);
        if s <= seg {
            return if seg > 0.0 {
                w[0].lerp(w[1], s / seg)
            } else {
                w[1]
            };
        }
        s -= seg;
    }
    *path.last().unwrap()
}

fn ramp_samples(timing: &MoveTiming, cal: &Calibration) -> Result<usize> {
    let r = (timing.tau_ramp / cal.sample_period).round();
    if !r.is_finite() || r < 2.0 {
        return Err(Error::validation(format!(
            "ramp time {} s spans fewer than 2 samples of {} s",
            timing.tau_ramp, cal.sample_period
        )));
    }
    Ok(r as usize)
}

fn compile_move(
    mv: &Move,
    cal: &Calibration,
    timing: &MoveTiming,
    ramp: usize,
    wf: &mut WaveformSet,
) -> Result<()> {
    let full = cal.max_code() as f64;
    let codes = mv
        .path
        .iter()
        .map(|p| cal.to_code(*p))
        .collect::<Result<Vec<_>>>()?;
    let (sx, sy) = codes[0];
    let (ex, ey) = *codes.last().unwrap();

    let total = ((2.0 * timing.tau_ramp + mv.path_length / timing.v_move) / cal.sample_period)
        .round() as usize;
    let sweep = total.saturating_sub(2 * ramp);

    for k in 0..ramp {
        wf.intensity
            .push((full * k as f64 / ramp as f64).round() as u16);
        wf.x.push(sx);
        wf.y.push(sy);
    }
    for j in 0..sweep {
        let p = point_along(&mv.path, mv.path_length * (j + 1) as f64 / sweep as f64);
        let (cx, cy) = cal.to_code(p)?;
        wf.intensity.push(cal.max_code());
        wf.x.push(cx);
        wf.y.push(cy);
    }
    for k in 0..ramp {
        wf.intensity
            .push((full * (ramp - 1 - k) as f64 / ramp as f64).round() as u16);
        wf.x.push(ex);
        wf.y.push(ey);
    }
    Ok(())
}

/// Sample every move of `plan` into intensity, x and y channels.
pub fn compile(plan: &MovePlan, cal: &Calibration, timing: &MoveTiming) -> Result<WaveformSet> {
    cal.validate()?;
    if !(timing.v_move.is_finite() && timing.v_move > 0.0) {
        return Err(Error::validation("v_move must be positive"));
    }
    let ramp = ramp_samples(timing, cal)?;
    let mut wf = WaveformSet {
        intensity: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
        sample_period_ns: (cal.sample_period * 1e9).round() as u32,
        dac_bits: cal.dac_bits,
    };
    for (i, mv) in plan.moves.iter().enumerate() {
        if i > 0 && timing.gap_samples > 0 {
            let (x, y) = (*wf.x.last().unwrap(), *wf.y.last().unwrap());
            wf.intensity
                .extend(std::iter::repeat_n(0, timing.gap_samples));
            wf.x.extend(std::iter::repeat_n(x, timing.gap_samples));
            wf.y.extend(std::iter::repeat_n(y, timing.gap_samples));
        }
        compile_move(mv, cal, timing, ramp, &mut wf)?;
    }
    Ok(wf)
}

/// Extract and release positions of one decoded move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedMove {
    pub extract: Point,
    pub release: Point,
}

/// Recover move endpoints from the intensity envelope.
///
/// Every maximal run of nonzero intensity is one move. A run must rise
/// monotonically to full scale, hold, and fall monotonically, and the
/// position must stay parked while ramping.
pub fn decode(wf: &WaveformSet, cal: &Calibration) -> Result<Vec<DecodedMove>> {
    let n = wf.intensity.len();
    if wf.x.len() != n || wf.y.len() != n {
        return Err(Error::Decode("channel lengths differ".into()));
    }
    let max = cal.max_code();
    if [&wf.intensity, &wf.x, &wf.y]
        .iter()
        .any(|c| c.iter().any(|&v| v > max))
    {
        return Err(Error::Decode(format!("code above {max}")));
    }

    let mut moves = Vec::new();
    let mut i = 0;
    while i < n {
        if wf.intensity[i] == 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && wf.intensity[i] != 0 {
            i += 1;
        }
        let end = i - 1;
        if start == 0 || i == n {
            return Err(Error::Decode(format!(
                "move at sample {start} is truncated"
            )));
        }
        check_envelope(wf, start, end, max)?;
        moves.push(DecodedMove {
            extract: cal.to_point(wf.x[start], wf.y[start]),
            release: cal.to_point(wf.x[end], wf.y[end]),
        });
    }
    Ok(moves)
}

fn check_envelope(wf: &WaveformSet, start: usize, end: usize, max: u16) -> Result<()> {
    let run = &wf.intensity[start..=end];
    let top = run.iter().position(|&v| v == max).ok_or_else(|| {
        Error::Decode(format!(
            "move at sample {start} never reaches full intensity"
        ))
    })?;
    let last_top = run.iter().rposition(|&v| v == max).unwrap();
    let rising = run[..=top].windows(2).all(|w| w[0] <= w[1]);
    let holding = run[top..=last_top].iter().all(|&v| v == max);
    let falling = run[last_top..].windows(2).all(|w| w[0] >= w[1]);
    if !(rising && holding && falling) {
        return Err(Error::Decode(format!(
            "move at sample {start} has a malformed envelope"
        )));
    }
    let parked = |a: usize, b: usize| (a..=b).all(|k| wf.x[k] == wf.x[a] && wf.y[k] == wf.y[a]);
    if !parked(start - 1, start + top - 1) || !parked(start + last_top + 1, end + 1) {
        return Err(Error::Decode(format!(
            "position changes during a ramp at move starting {start}"
        )));
    }
    Ok(())
}
