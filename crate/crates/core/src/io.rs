//! Binary volume, projection and pattern stacks, scheme text files and CSV.
//!
//! All binary formats are little-endian. Complex values are stored as
//! `(re, im)` pairs of `f64`. Grids are written in ascending centered
//! coordinates with the last axis fastest.
//!
//! ```text
//! VOL1  magic, n u32, p u32, kappa f64, n^3 complex (axis 0 slowest)
//! PRJ1  magic, count u32, n u32, p u32, kappa f64,
//!       per projection: family u8, alpha f64, beta f64, p^2 complex
//! PAT1  magic, count u32, n u32, p u32, kappa f64, oversampled u8,
//!       per pattern: has_direction u8, family u8, alpha f64, beta f64, N^2 f64
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{slot, LatticeSpec, Object3D};
use crate::measurement::DiffractionPattern;
use crate::projector::{Direction, Family, Projection2D};
use crate::recon::ReconReport;
use crate::tilt::TiltScheme;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        Self { buf: magic.to_vec() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn complex(&mut self, values: &[Complex64]) {
        for v in values {
            self.f64(v.re);
            self.f64(v.im);
        }
    }

    fn header(&mut self, spec: &LatticeSpec) -> Result<()> {
        self.u32(spec.n())?;
        self.u32(spec.p())?;
        self.f64(spec.kappa());
        Ok(())
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if data.len() < 4 || &data[..4] != magic {
            return Err(Error::Format(format!("missing {} magic", String::from_utf8_lossy(magic))));
        }
        Ok(Self { data, pos: 4 })
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self, len: usize) -> Result<Vec<Complex64>> {
        (0..len).map(|_| Ok(Complex64::new(self.f64()?, self.f64()?))).collect()
    }

    fn header(&mut self) -> Result<LatticeSpec> {
        let n = self.u32()?;
        let p = self.u32()?;
        let kappa = self.f64()?;
        LatticeSpec::new(n, p, kappa)
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

/// Storage indices of a `len^dims` grid listed in ascending coordinate order.
fn ascending(len: usize, dims: u32) -> Vec<usize> {
    let slots: Vec<usize> = crate::lattice::coords(len).map(|c| slot(c, len)).collect();
    let mut out = vec![0usize];
    for _ in 0..dims {
        out = out.iter().flat_map(|&base| slots.iter().map(move |&s| base * len + s)).collect();
    }
    out
}

fn reorder<T: Copy>(values: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&k| values[k]).collect()
}

fn restore<T: Copy + Default>(values: &[T], order: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); values.len()];
    for (v, &k) in values.iter().zip(order) {
        out[k] = *v;
    }
    out
}

fn family_from_code(code: u8) -> Result<Family> {
    Family::ALL
        .into_iter()
        .find(|f| f.code() == code)
        .ok_or_else(|| Error::Format(format!("unknown family code {code}")))
}

pub fn encode_volume(obj: &Object3D) -> Result<Vec<u8>> {
    let mut w = Writer::new(b"VOL1");
    w.header(obj.spec())?;
    w.complex(&reorder(obj.values(), &ascending(obj.n(), 3)));
    Ok(w.buf)
}

pub fn decode_volume(data: &[u8]) -> Result<Object3D> {
    let mut r = Reader::new(data, b"VOL1")?;
    let spec = r.header()?;
    let n = spec.n();
    let values = r.complex(n * n * n)?;
    r.finish()?;
    Object3D::from_storage(spec, restore(&values, &ascending(n, 3)))
}

pub fn encode_projections(projections: &[Projection2D]) -> Result<Vec<u8>> {
    let mut w = Writer::new(b"PRJ1");
    w.u32(projections.len())?;
    let spec = projections
        .first()
        .map(|q| *q.spec())
        .ok_or_else(|| Error::Format("empty projection stack".into()))?;
    w.header(&spec)?;
    let order = ascending(spec.p(), 2);
    for q in projections {
        if q.spec() != &spec {
            return Err(Error::LatticeMismatch);
        }
        let d = q.direction();
        w.u8(d.family().code());
        w.f64(d.alpha());
        w.f64(d.beta());
        w.complex(&reorder(q.values(), &order));
    }
    Ok(w.buf)
}

pub fn decode_projections(data: &[u8]) -> Result<Vec<Projection2D>> {
    let mut r = Reader::new(data, b"PRJ1")?;
    let count = r.u32()?;
    let spec = r.header()?;
    let p = spec.p();
    let order = ascending(p, 2);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let family = family_from_code(r.u8()?)?;
        let d = Direction::new(family, r.f64()?, r.f64()?)?;
        let values = restore(&r.complex(p * p)?, &order);
        out.push(Projection2D::from_storage(spec, d, values)?);
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_patterns(patterns: &[DiffractionPattern]) -> Result<Vec<u8>> {
    let mut w = Writer::new(b"PAT1");
    w.u32(patterns.len())?;
    let first = patterns.first().ok_or_else(|| Error::Format("empty pattern stack".into()))?;
    w.header(first.spec())?;
    w.u8(first.oversampled() as u8);
    let order = ascending(first.grid_len(), 2);
    for pat in patterns {
        if pat.spec() != first.spec() || pat.oversampled() != first.oversampled() {
            return Err(Error::LatticeMismatch);
        }
        match pat.direction() {
            Some(d) => {
                w.u8(1);
                w.u8(d.family().code());
                w.f64(d.alpha());
                w.f64(d.beta());
            }
            None => {
                w.u8(0);
                w.u8(0);
                w.f64(0.0);
                w.f64(0.0);
            }
        }
        for v in reorder(pat.intensities(), &order) {
            w.f64(v);
        }
    }
    Ok(w.buf)
}

pub fn decode_patterns(data: &[u8]) -> Result<Vec<DiffractionPattern>> {
    let mut r = Reader::new(data, b"PAT1")?;
    let count = r.u32()?;
    let spec = r.header()?;
    let oversampled = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("bad oversampling flag {b}"))),
    };
    let g = if oversampled { 2 * spec.p() - 1 } else { spec.p() };
    let order = ascending(g, 2);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let has = r.u8()?;
        let code = r.u8()?;
        let (a, b) = (r.f64()?, r.f64()?);
        let direction = match has {
            0 => None,
            1 => Some(Direction::new(family_from_code(code)?, a, b)?),
            h => return Err(Error::Format(format!("bad direction flag {h}"))),
        };
        let intensities = (0..g * g).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        out.push(DiffractionPattern::new(spec, oversampled, direction, restore(&intensities, &order))?);
    }
    r.finish()?;
    Ok(out)
}

/// `direction,row,col,intensity` with centered pixel coordinates.
pub fn patterns_csv(patterns: &[DiffractionPattern]) -> String {
    let mut out = String::from("direction,row,col,intensity\n");
    for (t, pat) in patterns.iter().enumerate() {
        let g = pat.grid_len();
        for (k, v) in pat.intensities().iter().enumerate() {
            let (r, c) = (crate::lattice::centered(k / g, g), crate::lattice::centered(k % g, g));
            writeln!(out, "{t},{r},{c},{v:.16e}").expect("string write");
        }
    }
    out
}

/// Scheme text: `epsilon=` and `seed=` headers, then `family alpha beta` lines.
pub fn format_scheme(scheme: &TiltScheme) -> String {
    let mut out = format!("epsilon={:?}\n", scheme.epsilon());
    if let Some(seed) = scheme.seed() {
        writeln!(out, "seed={seed}").expect("string write");
    }
    for d in scheme.directions() {
        writeln!(out, "{} {:?} {:?}", d.family().letter(), d.alpha(), d.beta()).expect("string write");
    }
    out
}

pub fn parse_scheme(text: &str) -> Result<TiltScheme> {
    let mut epsilon = None;
    let mut seed = None;
    let mut dirs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: {what}: {raw:?}", lineno + 1));
        if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "epsilon" => epsilon = Some(value.trim().parse::<f64>().map_err(|_| bad("bad epsilon"))?),
                "seed" => seed = Some(value.trim().parse::<u64>().map_err(|_| bad("bad seed"))?),
                _ => return Err(bad("unknown header")),
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad("expected `family alpha beta`"));
        }
        let family = match fields[0] {
            "x" | "X" => Family::X,
            "y" | "Y" => Family::Y,
            "z" | "Z" => Family::Z,
            _ => return Err(bad("unknown family")),
        };
        let alpha = fields[1].parse::<f64>().map_err(|_| bad("bad alpha"))?;
        let beta = fields[2].parse::<f64>().map_err(|_| bad("bad beta"))?;
        dirs.push(Direction::new(family, alpha, beta)?);
    }
    let epsilon = epsilon.ok_or_else(|| Error::Format("missing epsilon header".into()))?;
    let scheme = TiltScheme::new(dirs, epsilon)?;
    Ok(match seed {
        Some(s) => scheme.with_seed(s),
        None => scheme,
    })
}

/// `iteration,residual,correlation`; correlation is blank without ground truth.
pub fn report_csv(report: &ReconReport) -> String {
    let mut out = String::from("iteration,residual,correlation\n");
    for (k, r) in report.residual_history.iter().enumerate() {
        match report.correlation_history.get(k) {
            Some(c) => writeln!(out, "{k},{r:.16e},{c:.16e}"),
            None => writeln!(out, "{k},{r:.16e},"),
        }
        .expect("string write");
    }
    out
}

/// 8-bit grayscale raster with values scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

fn pgm_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&data[start..*pos])
}

/// Parses a binary (`P5`) PGM with `maxval <= 255`.
pub fn decode_pgm(data: &[u8]) -> Result<Raster> {
    let mut pos = 0;
    if pgm_token(data, &mut pos)? != b"P5" {
        return Err(Error::Format("only binary P5 PGM is supported".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        let tok = pgm_token(data, &mut pos)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad PGM {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("PGM maxval {maxval} is not 8-bit")));
    }
    pos += 1;
    let pixels = data
        .get(pos..pos + width * height)
        .ok_or_else(|| Error::Format("truncated PGM pixel data".into()))?;
    Ok(Raster {
        width,
        height,
        data: pixels.iter().map(|&b| b as f64 / maxval as f64).collect(),
    })
}

pub fn encode_pgm(raster: &Raster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    out.extend(raster.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(data)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn volume_is_written_in_ascending_order() {
        let spec = LatticeSpec::with_n(3).unwrap();
        let obj = Object3D::from_fn(spec, |i, j, k| Complex64::new((9 * (i + 1) + 3 * (j + 1) + k + 1) as f64, 0.0));
        let bytes = encode_volume(&obj).unwrap();
        let first = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let second = f64::from_le_bytes(bytes[36..44].try_into().unwrap());
        assert_eq!((first, second), (0.0, 1.0));
    }

    #[test]
    fn volume_round_trip() {
        let spec = LatticeSpec::new(4, 9, 2.5).unwrap();
        let obj = Object3D::from_fn(spec, |i, j, k| Complex64::new(i as f64 * 0.1, (j - k) as f64));
        let bytes = encode_volume(&obj).unwrap();
        assert_eq!(&bytes[..4], b"VOL1");
        assert_eq!(decode_volume(&bytes).unwrap(), obj);
        assert!(decode_volume(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn projection_round_trip() {
        let spec = LatticeSpec::with_n(3).unwrap();
        let projs = vec![
            Projection2D::zeros(spec, Direction::x(0.3, -0.2).unwrap()).map(|_| Complex64::new(1.0, 2.0)),
            Projection2D::zeros(spec, Direction::z(0.1, 0.9).unwrap()),
        ];
        let bytes = encode_projections(&projs).unwrap();
        assert_eq!(decode_projections(&bytes).unwrap(), projs);
    }

    #[test]
    fn pattern_round_trip() {
        let spec = LatticeSpec::new(3, 5, PI).unwrap();
        let pats = vec![
            DiffractionPattern::new(spec, true, Some(Direction::y(0.5, 0.5).unwrap()), (0..81).map(|k| k as f64).collect()).unwrap(),
            DiffractionPattern::new(spec, true, None, vec![0.25; 81]).unwrap(),
        ];
        let bytes = encode_patterns(&pats).unwrap();
        assert_eq!(decode_patterns(&bytes).unwrap(), pats);
        assert_eq!(patterns_csv(&pats).lines().count(), 1 + 2 * 81);
    }

    #[test]
    fn scheme_round_trip() {
        let scheme = crate::tilt::tset_scheme(3, 4).unwrap();
        let text = format_scheme(&scheme);
        assert!(text.starts_with("epsilon="));
        assert_eq!(parse_scheme(&text).unwrap(), scheme);
        assert!(parse_scheme("x 0.1 0.2\n").is_err());
        assert!(parse_scheme("epsilon=0.1\nw 0.1 0.2\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let raster = Raster {
            width: 3,
            height: 2,
            data: vec![0.0, 1.0, 128.0 / 255.0, 1.0 / 255.0, 0.5, 1.0],
        };
        let bytes = encode_pgm(&raster);
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back.width, 3);
        assert_eq!(back.data[..4], raster.data[..4]);
        let with_comment = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        assert_eq!(decode_pgm(with_comment).unwrap().data, vec![0.0, 1.0]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }
}
