//! Length-prefixed classifier wire protocol.
//!
//! Every frame is a little-endian `u32` payload length followed by the
//! payload. A request payload is one line of JSON terminated by `\n`; a
//! `predict` request is followed by `count * dim` little-endian `f32`s in
//! row-major order. A response payload is a single JSON object.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::ClassIndex;

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: u32 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RequestHeader {
    Info,
    Predict {
        count: usize,
        dim: usize,
        dtype: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Info,
    Predict { dim: usize, data: Vec<f32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<ClassIndex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn labels(labels: Vec<ClassIndex>) -> Self {
        Self {
            ok: true,
            labels: Some(labels),
            label_count: None,
            model: None,
            dim: None,
            error: None,
        }
    }

    pub fn info(label_count: usize, model: String, dim: Option<usize>) -> Self {
        Self {
            ok: true,
            labels: None,
            label_count: Some(label_count),
            model: Some(model),
            dim,
            error: None,
        }
    }

    pub fn error(msg: impl Into<String>) -> Self {
        Self {
            ok: false,
            labels: None,
            label_count: None,
            model: None,
            dim: None,
            error: Some(msg.into()),
        }
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "stream ended inside a frame length",
                ))
            }
            n => got += n,
        }
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {len} exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

pub fn encode_request(req: &Request) -> Vec<u8> {
    let header = match req {
        Request::Info => RequestHeader::Info,
        Request::Predict { dim, data } => RequestHeader::Predict {
            count: if *dim == 0 { 0 } else { data.len() / dim },
            dim: *dim,
            dtype: "f32".into(),
        },
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    if let Request::Predict { data, .. } = req {
        out.reserve(data.len() * 4);
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_request(payload: &[u8]) -> Result<Request, String> {
    let nl = payload
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("request header is not newline-terminated")?;
    let header: RequestHeader =
        serde_json::from_slice(&payload[..nl]).map_err(|e| format!("bad request header: {e}"))?;
    let body = &payload[nl + 1..];
    match header {
        RequestHeader::Info => Ok(Request::Info),
        RequestHeader::Predict { count, dim, dtype } => {
            if dtype != "f32" {
                return Err(format!("unsupported dtype `{dtype}`"));
            }
            let expected = count
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or("count * dim overflows")?;
            if body.len() != expected {
                return Err(format!(
                    "predict body has {} bytes, header promises {expected}",
                    body.len()
                ));
            }
            let data = body
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Request::Predict { dim, data })
        }
    }
}

/// Static facts a server reports for `info`.
#[derive(Debug, Clone)]
pub struct ServerInfo {
    pub label_count: usize,
    pub model: String,
    pub dim: Option<usize>,
}

/// Runs a request/response loop until the peer closes the stream.
/// Malformed frames are answered with `ok: false`; the loop continues.
pub fn serve<R, W, F>(mut reader: R, mut writer: W, info: &ServerInfo, mut predict: F) -> io::Result<()>
where
    R: Read,
    W: Write,
    F: FnMut(&[f32], usize) -> Result<Vec<ClassIndex>, String>,
{
    while let Some(payload) = read_frame(&mut reader)? {
        let resp = match decode_request(&payload) {
            Ok(Request::Info) => Response::info(info.label_count, info.model.clone(), info.dim),
            Ok(Request::Predict { dim, data }) => {
                if info.dim.is_some_and(|d| d != dim) {
                    Response::error(format!(
                        "dimension {dim} does not match model dimension {}",
                        info.dim.unwrap_or_default()
                    ))
                } else {
                    match predict(&data, dim) {
                        Ok(labels) => Response::labels(labels),
                        Err(e) => Response::error(e),
                    }
                }
            }
            Err(e) => Response::error(e),
        };
        let bytes = serde_json::to_vec(&resp).expect("response serializes");
        write_frame(&mut writer, &bytes)?;
    }
    Ok(())
}

/// Reference model for protocol tests: label 1 when the first coordinate is
/// non-negative, else 0. Matches an ascending `Threshold1D` at zero.
pub fn sign_of_first_coordinate(data: &[f32], dim: usize) -> Result<Vec<ClassIndex>, String> {
    if dim == 0 {
        return Err("dimension must be positive".into());
    }
    Ok(data
        .chunks_exact(dim)
        .map(|row| ClassIndex::from(row[0] >= 0.0))
        .collect())
}
