use std::io::Write;

use crate::error::Result;
use crate::federation::RoundRecord;

pub const METRICS_HEADER: [&str; 9] = ["round", "delta", "lambda", "reward", "client", "loss", "kappa", "edges", "bytes"];
pub const RETURNS_HEADER: [&str; 2] = ["episode", "return"];

/// Per-round metrics, one row per client. `reward` is empty outside
/// controller runs.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(METRICS_HEADER)?;
        Ok(MetricsWriter { inner })
    }

    pub fn write(&mut self, r: &RoundRecord) -> Result<()> {
        let reward = r.reward.map(|x| x.to_string()).unwrap_or_default();
        for c in &r.clients {
            self.inner.write_record([
                r.round.to_string(),
                r.delta.to_string(),
                r.lambda.to_string(),
                reward.clone(),
                c.client.to_string(),
                c.loss.to_string(),
                c.kappa.to_string(),
                c.edges.to_string(),
                c.bytes.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| crate::error::Error::Io(std::io::Error::other(e.to_string())))
    }
}

pub struct ReturnsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ReturnsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(RETURNS_HEADER)?;
        Ok(ReturnsWriter { inner })
    }

    pub fn write(&mut self, episode: usize, ret: f64) -> Result<()> {
        self.inner.write_record([episode.to_string(), ret.to_string()])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
