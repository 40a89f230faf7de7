use std::io::Write;

use crate::error::{Error, Result};
use crate::node::Tech;

pub const TRACE_HEADER: &str = "time_us,node,tech,from,to,event,actions";

/// CSV sink for per-event simulator records.
pub struct TraceWriter<'a> {
    out: &'a mut dyn Write,
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Internal(format!("trace write failed: {e}"))
}

impl<'a> TraceWriter<'a> {
    pub fn new(out: &'a mut dyn Write) -> Result<Self> {
        writeln!(out, "{TRACE_HEADER}").map_err(io)?;
        Ok(Self { out })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        time_us: u64,
        node: &str,
        tech: Tech,
        from: &str,
        to: &str,
        event: &str,
        actions: &str,
    ) -> Result<()> {
        writeln!(
            self.out,
            "{time_us},{},{},{},{},{},{}",
            field(node),
            tech.as_str(),
            field(from),
            field(to),
            field(event),
            field(actions)
        )
        .map_err(io)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(io)
    }
}
