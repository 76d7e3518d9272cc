//! Binary wire format.
//!
//! A frame is a 4-byte little-endian length, a 1-byte message tag, then the
//! payload; the length counts the tag and the payload. Payload fields are
//! written in a fixed order: integers little-endian (`u32` counts, `u64`
//! indices), floats as little-endian IEEE-754 `f64`, strings as a `u32`
//! byte length followed by UTF-8.
//!
//! | tag | message    | payload |
//! |-----|------------|---------|
//! | 1   | Metadata   | mode `u8` (0 MW, 1 MWD), params, extent header, clutter table, `u32` diagram count, diagrams |
//! | 2   | Idle       | worker id `u32` |
//! | 3   | KeepAlive  | empty |
//! | 4   | Assignment | transmitter, terrain sub-grid, clutter sub-grid |
//! | 5   | Result     | transmitter id, loss field |
//! | 6   | Stop       | empty |
//!
//! Composite fields:
//! - params: frequency, rx height, radius, roof height, street width,
//!   building separation, Fresnel clearance (7 × `f64`)
//! - header: ncols `u64`, nrows `u64`, xll, yll, cellsize, nodata (`f64`)
//! - grid: header, then nrows·ncols `f64` row-major
//! - sub-grid / loss field: row offset `u64`, col offset `u64`, grid
//! - clutter table: `u32` count, then (code `i64`, loss `f64`) pairs
//! - diagram: name, gain `f64`, 360 horizontal `f64`, 360 vertical `f64`
//! - transmitter: id, easting, northing, height, power, frequency,
//!   radius km, azimuth, mech tilt, elec tilt (`f64`), diagram id

use std::io::{Read, Write};

use crate::antenna::{AntennaDiagram, AntennaMount, PATTERN_SAMPLES};
use crate::engine::TransmitterConfig;
use crate::error::{Error, Result};
use crate::propagation::{ClutterLossTable, PathLossField, PropagationParams};
use crate::terrain::{GeoPoint, GridHeader, RasterGrid, SubGrid};

use super::message::{Assignment, Message, MessageKind, Metadata, RunMode};

/// Upper bound on a frame, guarding against corrupt length prefixes.
pub const MAX_FRAME_BYTES: usize = 1 << 30;

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn params(&mut self, p: &PropagationParams) {
        for v in [
            p.frequency_mhz,
            p.rx_height_m,
            p.radius_m,
            p.roof_height_m,
            p.street_width_m,
            p.building_separation_m,
            p.fresnel_clearance,
        ] {
            self.f64(v);
        }
    }
    fn header(&mut self, h: &GridHeader) {
        self.u64(h.ncols as u64);
        self.u64(h.nrows as u64);
        self.f64(h.xll);
        self.f64(h.yll);
        self.f64(h.cellsize);
        self.f64(h.nodata);
    }
    fn grid(&mut self, g: &RasterGrid) {
        self.header(g.header());
        self.buf.reserve(g.values().len() * 8);
        for v in g.values() {
            self.f64(*v);
        }
    }
    fn windowed(&mut self, offset: (usize, usize), g: &RasterGrid) {
        self.u64(offset.0 as u64);
        self.u64(offset.1 as u64);
        self.grid(g);
    }
    fn diagram(&mut self, d: &AntennaDiagram) {
        self.str(&d.name);
        self.f64(d.gain_dbi);
        for v in d.horizontal.iter().chain(&d.vertical) {
            self.f64(*v);
        }
    }
    fn tx(&mut self, t: &TransmitterConfig) {
        self.str(&t.id);
        for v in [
            t.position.easting,
            t.position.northing,
            t.height_agl_m,
            t.power_dbm,
            t.frequency_mhz,
            t.radius_km,
            t.mount.azimuth_deg,
            t.mount.mech_tilt_deg,
            t.mount.elec_tilt_deg,
        ] {
            self.f64(v);
        }
        self.str(&t.diagram_id);
    }
}

/// Encodes the tag and payload of a message (everything after the length).
pub fn encode_body(msg: &Message) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u8(msg.kind().tag());
    match msg {
        Message::Metadata(m) => {
            e.u8(match m.mode {
                RunMode::Mw => 0,
                RunMode::Mwd => 1,
            });
            e.params(&m.params);
            e.header(&m.extent);
            e.u32(m.clutter_losses.len() as u32);
            for (code, loss) in m.clutter_losses.iter() {
                e.i64(code);
                e.f64(loss);
            }
            e.u32(m.diagrams.len() as u32);
            for d in &m.diagrams {
                e.diagram(d);
            }
        }
        Message::Idle { worker_id } => e.u32(*worker_id),
        Message::KeepAlive | Message::Stop => {}
        Message::Assignment(a) => {
            e.tx(&a.tx);
            e.windowed(a.dem.offset, &a.dem.grid);
            e.windowed(a.clutter.offset, &a.clutter.grid);
        }
        Message::Result { tx_id, field } => {
            e.str(tx_id);
            e.windowed(field.offset, &field.grid);
        }
    }
    e.buf
}

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let body = encode_body(msg);
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
    frame.extend_from_slice(&body);
    frame
}

struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Protocol(format!(
                "truncated payload: need {n} bytes, have {}",
                self.buf.len()
            )));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Protocol("index overflows usize".into()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Protocol("string is not UTF-8".into()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::Protocol("array length overflows".into())
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
    fn params(&mut self) -> Result<PropagationParams> {
        Ok(PropagationParams {
            frequency_mhz: self.f64()?,
            rx_height_m: self.f64()?,
            radius_m: self.f64()?,
            roof_height_m: self.f64()?,
            street_width_m: self.f64()?,
            building_separation_m: self.f64()?,
            fresnel_clearance: self.f64()?,
        })
    }
    fn header(&mut self) -> Result<GridHeader> {
        Ok(GridHeader {
            ncols: self.usize()?,
            nrows: self.usize()?,
            xll: self.f64()?,
            yll: self.f64()?,
            cellsize: self.f64()?,
            nodata: self.f64()?,
        })
    }
    fn grid(&mut self) -> Result<RasterGrid> {
        let h = self.header()?;
        let n = h
            .ncols
            .checked_mul(h.nrows)
            .ok_or_else(|| Error::Protocol("grid size overflows".into()))?;
        let values = self.f64s(n)?;
        RasterGrid::new(h, values).map_err(|e| Error::Protocol(e.to_string()))
    }
    fn windowed(&mut self) -> Result<((usize, usize), RasterGrid)> {
        let offset = (self.usize()?, self.usize()?);
        Ok((offset, self.grid()?))
    }
    fn diagram(&mut self) -> Result<AntennaDiagram> {
        let name = self.str()?;
        let gain_dbi = self.f64()?;
        let horizontal = self.f64s(PATTERN_SAMPLES)?;
        let vertical = self.f64s(PATTERN_SAMPLES)?;
        Ok(AntennaDiagram {
            name,
            gain_dbi,
            horizontal,
            vertical,
        })
    }
    fn tx(&mut self) -> Result<TransmitterConfig> {
        let id = self.str()?;
        let position = GeoPoint::new(self.f64()?, self.f64()?);
        let height_agl_m = self.f64()?;
        let power_dbm = self.f64()?;
        let frequency_mhz = self.f64()?;
        let radius_km = self.f64()?;
        let mount = AntennaMount {
            azimuth_deg: self.f64()?,
            mech_tilt_deg: self.f64()?,
            elec_tilt_deg: self.f64()?,
        };
        Ok(TransmitterConfig {
            id,
            position,
            height_agl_m,
            power_dbm,
            frequency_mhz,
            radius_km,
            mount,
            diagram_id: self.str()?,
        })
    }
}

/// Decodes a tag-plus-payload body.
pub fn decode_body(body: &[u8]) -> Result<Message> {
    let mut d = Decoder { buf: body };
    let tag = d.u8()?;
    let kind =
        MessageKind::from_tag(tag).ok_or_else(|| Error::Protocol(format!("unknown tag {tag}")))?;
    let msg = match kind {
        MessageKind::Metadata => {
            let mode = match d.u8()? {
                0 => RunMode::Mw,
                1 => RunMode::Mwd,
                other => return Err(Error::Protocol(format!("unknown run mode {other}"))),
            };
            let params = d.params()?;
            let extent = d.header()?;
            let mut clutter_losses = ClutterLossTable::new();
            for _ in 0..d.u32()? {
                let code = d.i64()?;
                clutter_losses.insert(code, d.f64()?);
            }
            let n = d.u32()?;
            let diagrams = (0..n).map(|_| d.diagram()).collect::<Result<_>>()?;
            Message::Metadata(Box::new(Metadata {
                mode,
                params,
                clutter_losses,
                diagrams,
                extent,
            }))
        }
        MessageKind::Idle => Message::Idle { worker_id: d.u32()? },
        MessageKind::KeepAlive => Message::KeepAlive,
        MessageKind::Stop => Message::Stop,
        MessageKind::Assignment => {
            let tx = d.tx()?;
            let (dem_off, dem) = d.windowed()?;
            let (clut_off, clutter) = d.windowed()?;
            Message::Assignment(Box::new(Assignment {
                tx,
                dem: SubGrid {
                    offset: dem_off,
                    grid: dem,
                },
                clutter: SubGrid {
                    offset: clut_off,
                    grid: clutter,
                },
            }))
        }
        MessageKind::Result => {
            let tx_id = d.str()?;
            let (offset, grid) = d.windowed()?;
            Message::Result {
                tx_id,
                field: PathLossField { offset, grid },
            }
        }
    };
    if !d.buf.is_empty() {
        return Err(Error::Protocol(format!(
            "{} trailing bytes after {kind:?}",
            d.buf.len()
        )));
    }
    Ok(msg)
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. Returns `Ok(None)` on a clean end of stream before the
/// length prefix.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len) as usize;
    if len == 0 || len > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("invalid frame length {len}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    decode_body(&body).map(Some)
}
