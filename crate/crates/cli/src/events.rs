//! Event stream: `event_id,left_tag,right_tag,left_t,right_t,truth`, one
//! record per line after a header. Times are empty for sides measured in
//! the strangeness setting.

use std::io::{self, BufRead, Write};

use kaon_core::montecarlo::{EventRecord, EventSampler, Tag, Tally, Truth};
use rayon::prelude::*;

use crate::output::fmt_num;

pub const HEADER: &str = "event_id,left_tag,right_tag,left_t,right_t,truth";

pub fn format_record(e: &EventRecord, out: &mut String) {
    use std::fmt::Write as _;
    let t = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        e.event_id,
        e.left_tag.as_str(),
        e.right_tag.as_str(),
        t(e.left_t),
        t(e.right_t),
        e.truth.as_str()
    );
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Bad { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_record(s: &str, line: usize) -> Result<EventRecord, ParseError> {
    let bad = |reason: String| ParseError::Bad { line, reason };
    let f: Vec<&str> = s.trim_end().split(',').collect();
    if f.len() != 6 {
        return Err(bad(format!("expected 6 fields, got {}", f.len())));
    }
    let tag = |x: &str| Tag::parse(x).ok_or_else(|| bad(format!("unknown tag `{x}`")));
    let time = |x: &str| -> Result<Option<f64>, ParseError> {
        if x.is_empty() {
            Ok(None)
        } else {
            x.parse()
                .map(Some)
                .map_err(|_| bad(format!("bad time `{x}`")))
        }
    };
    Ok(EventRecord {
        event_id: f[0]
            .parse()
            .map_err(|_| bad(format!("bad event id `{}`", f[0])))?,
        left_tag: tag(f[1])?,
        right_tag: tag(f[2])?,
        left_t: time(f[3])?,
        right_t: time(f[4])?,
        truth: Truth::parse(f[5]).ok_or_else(|| bad(format!("unknown truth `{}`", f[5])))?,
    })
}

/// Tallies an event stream. The hidden in-window K_S K_S count stays 0.
pub fn tally_reader(r: impl BufRead) -> Result<Tally, ParseError> {
    let mut tally = Tally::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || (i == 0 && line == HEADER) {
            continue;
        }
        tally.record(&parse_record(&line, i + 1)?);
    }
    Ok(tally)
}

/// Chunks processed per parallel batch, per worker.
const BATCH_PER_WORKER: u64 = 4;

/// Generates `n_events` on `workers` threads and writes them in event order.
/// The output does not depend on `workers`.
pub fn simulate(
    sampler: &EventSampler,
    n_events: u64,
    seed: u64,
    workers: usize,
    mut sink: Option<&mut dyn Write>,
) -> io::Result<Tally> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(io::Error::other)?;
    let chunks = EventSampler::chunk_count(n_events);
    let batch = BATCH_PER_WORKER * workers.max(1) as u64;
    let keep = sink.is_some();
    if let Some(w) = sink.as_deref_mut() {
        writeln!(w, "{HEADER}")?;
    }
    let mut tally = Tally::default();
    let mut start = 0;
    while start < chunks {
        let end = chunks.min(start + batch);
        let results: Vec<(Tally, String)> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|k| {
                    let mut text = String::new();
                    let t = sampler.run_chunk(seed, k, n_events, |e| {
                        if keep {
                            format_record(e, &mut text)
                        }
                    });
                    (t, text)
                })
                .collect()
        });
        for (t, text) in results {
            tally.merge(&t);
            if let Some(w) = sink.as_deref_mut() {
                w.write_all(text.as_bytes())?;
            }
        }
        start = end;
    }
    if let Some(w) = sink {
        w.flush()?;
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kaon_core::decay::TaggingWindow;
    use kaon_core::montecarlo::Source;
    use kaon_core::pair::build_phi_strangeness_basis;
    use kaon_core::{ComplexAmplitude, DetectionModel, PhysicalConstants};

    fn sampler() -> EventSampler {
        let s = build_phi_strangeness_basis(ComplexAmplitude::new(-1.0, 0.0)).unwrap();
        let d = DetectionModel::new(0.7, 0.7, 0.01, 0.001, TaggingWindow::standard()).unwrap();
        EventSampler::new(Source::Qm(s), d, &PhysicalConstants::pdg()).unwrap()
    }

    #[test]
    fn record_round_trip() {
        let e = EventRecord {
            event_id: 42,
            left_tag: Tag::K0,
            right_tag: Tag::KL,
            left_t: None,
            right_t: Some(12.5),
            truth: Truth::Lhv,
        };
        let mut s = String::new();
        format_record(&e, &mut s);
        assert_eq!(s, "42,K0,KL,,12.5,LHV\n");
        assert_eq!(parse_record(&s, 1).unwrap(), e);
        assert!(parse_record("1,K0,KL,,x,QM", 3).is_err());
        assert!(parse_record("1,K0,KL,QM", 3).is_err());
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let s = sampler();
        let n = 200_000;
        let mut one = Vec::new();
        let mut many = Vec::new();
        let t1 = simulate(&s, n, 9, 1, Some(&mut one)).unwrap();
        let t4 = simulate(&s, n, 9, 4, Some(&mut many)).unwrap();
        assert_eq!(t1, t4);
        assert!(one == many);
        let reread = tally_reader(&one[..]).unwrap();
        assert_eq!(reread.n_events, n);
        assert_eq!(reread.settings, t1.settings);
        assert_eq!(reread.k0_k0bar, t1.k0_k0bar);
        assert_eq!(reread.ks_ks, t1.ks_ks);
    }
}
