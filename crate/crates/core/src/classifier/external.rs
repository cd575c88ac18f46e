//! Client side of the wire protocol: classifiers served by another process.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::wire::{self, Request, Response};
use super::ClassIndex;
use crate::error::{Error, Result};

/// Environment variable consulted when a descriptor carries no command.
pub const ADAPTER_ENV: &str = "RECERT_ADAPTER_CMD";

pub const DEFAULT_BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "lowercase")]
pub enum Endpoint {
    /// Spawn `program args...` and talk over its stdin/stdout.
    Command { program: String, args: Vec<String> },
    Tcp { addr: String },
}

impl Endpoint {
    /// Splits a shell-like command line on whitespace.
    pub fn from_command_line(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty adapter command".into()))?;
        Ok(Endpoint::Command {
            program,
            args: parts.collect(),
        })
    }

    fn describe(&self) -> String {
        match self {
            Endpoint::Command { program, args } => {
                std::iter::once(program.as_str())
                    .chain(args.iter().map(String::as_str))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
            Endpoint::Tcp { addr } => format!("tcp://{addr}"),
        }
    }
}

enum Connection {
    Child {
        child: Child,
        stdin: BufWriter<ChildStdin>,
        stdout: BufReader<ChildStdout>,
    },
    Tcp {
        reader: BufReader<TcpStream>,
        writer: BufWriter<TcpStream>,
    },
}

impl Connection {
    fn open(endpoint: &Endpoint) -> Result<Self> {
        match endpoint {
            Endpoint::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| {
                        Error::Transport(format!("cannot launch adapter `{}`: {e}", endpoint.describe()))
                    })?;
                let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
                let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
                Ok(Connection::Child {
                    child,
                    stdin,
                    stdout,
                })
            }
            Endpoint::Tcp { addr } => {
                let stream = TcpStream::connect(addr).map_err(|e| {
                    Error::Transport(format!("cannot connect to adapter at {addr}: {e}"))
                })?;
                stream.set_nodelay(true).ok();
                let reader = BufReader::new(stream.try_clone().map_err(|e| {
                    Error::Transport(format!("cannot clone socket for {addr}: {e}"))
                })?);
                Ok(Connection::Tcp {
                    reader,
                    writer: BufWriter::new(stream),
                })
            }
        }
    }

    fn round_trip(&mut self, req: &Request) -> Result<Response> {
        let payload = wire::encode_request(req);
        let (reader, writer): (&mut dyn Read, &mut dyn Write) = match self {
            Connection::Child { stdin, stdout, .. } => (stdout, stdin),
            Connection::Tcp { reader, writer } => (reader, writer),
        };
        wire::write_frame(writer, &payload)
            .map_err(|e| Error::Transport(format!("write to adapter failed: {e}")))?;
        let frame = wire::read_frame(reader)
            .map_err(|e| Error::Transport(format!("read from adapter failed: {e}")))?
            .ok_or_else(|| Error::Transport("adapter closed the connection".into()))?;
        let resp: Response = serde_json::from_slice(&frame)
            .map_err(|e| Error::Transport(format!("malformed adapter response: {e}")))?;
        if !resp.ok {
            return Err(Error::Transport(format!(
                "adapter reported failure: {}",
                resp.error.as_deref().unwrap_or("<no diagnostic>")
            )));
        }
        Ok(resp)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Connection::Child { child, .. } = self {
            // Closing stdin ends the adapter's serve loop.
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A classifier behind the wire protocol.
///
/// Connections are pooled: a caller takes one for the duration of a batch
/// and returns it afterwards, so concurrent workers never share a stream.
pub struct ExternalClassifier {
    endpoint: Endpoint,
    dim: usize,
    label_count: usize,
    model: String,
    batch_size: usize,
    pool: Mutex<Vec<Connection>>,
}

impl std::fmt::Debug for ExternalClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClassifier")
            .field("endpoint", &self.endpoint)
            .field("dim", &self.dim)
            .field("label_count", &self.label_count)
            .field("model", &self.model)
            .finish()
    }
}

impl ExternalClassifier {
    /// Opens a first connection and asks the adapter for its label count.
    pub fn connect(endpoint: Endpoint, dim: usize, batch_size: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("external classifier needs dim >= 1"));
        }
        let mut conn = Connection::open(&endpoint)?;
        let info = conn.round_trip(&Request::Info)?;
        let label_count = info
            .label_count
            .ok_or_else(|| Error::Transport("info response lacks label_count".into()))?;
        if label_count < 2 {
            return Err(Error::Transport(format!("adapter reports {label_count} labels")));
        }
        if let Some(d) = info.dim.filter(|&d| d != dim) {
            return Err(Error::domain(format!(
                "adapter expects dimension {d}, configured {dim}"
            )));
        }
        Ok(Self {
            endpoint,
            dim,
            label_count,
            model: info.model.unwrap_or_else(|| "unknown".into()),
            batch_size: batch_size.max(1),
            pool: Mutex::new(vec![conn]),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub(crate) fn predict(&self, rows: &[f64], out: &mut Vec<ClassIndex>) -> Result<()> {
        let mut conn = match self.pool.lock().expect("pool lock").pop() {
            Some(c) => c,
            None => Connection::open(&self.endpoint)?,
        };
        for chunk in rows.chunks(self.batch_size * self.dim) {
            let req = Request::Predict {
                dim: self.dim,
                data: chunk.iter().map(|&v| v as f32).collect(),
            };
            // A failed connection is dropped, not returned to the pool.
            let resp = conn.round_trip(&req)?;
            let labels = resp
                .labels
                .ok_or_else(|| Error::Transport("predict response lacks labels".into()))?;
            let expected = chunk.len() / self.dim;
            if labels.len() != expected {
                return Err(Error::Transport(format!(
                    "adapter returned {} labels for {expected} inputs",
                    labels.len()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l as usize >= self.label_count) {
                return Err(Error::Transport(format!(
                    "adapter returned label {bad} outside [0, {})",
                    self.label_count
                )));
            }
            out.extend(labels);
        }
        self.pool.lock().expect("pool lock").push(conn);
        Ok(())
    }
}
