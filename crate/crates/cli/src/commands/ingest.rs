use std::fs::File;
use std::io::BufWriter;
use std::time::Duration;

use flowcap::netflow::{
    receive_udp, FrameReader, IngestConfig, IngestCounts, Ingestor, ReceiveLimit,
};
use flowcap::samples::{CsvError, SampleWriter};
use flowcap::LinkSample;

use crate::config::OutDir;
use crate::error::{write_error, CliError};
use crate::IngestArgs;

fn ingest_config(args: &IngestArgs) -> Result<IngestConfig, CliError> {
    if args.interval == 0 {
        return Err(CliError::config(
            "invalid interval: must be a positive number of seconds",
        ));
    }
    let mut config = IngestConfig::new(args.capacity);
    config.interval = args.interval as f64;
    config.interfaces = (!args.interfaces.is_empty()).then(|| args.interfaces.clone());
    config.direction = args.direction;
    config.apply_sampling = args.apply_sampling;
    config.validate()?;
    Ok(config)
}

fn report(counts: &IngestCounts, samples: u64) {
    println!(
        "datagrams {} records {} parse_errors {} clock_errors {} filtered {} late_dropped {} samples {}",
        counts.datagrams,
        counts.records,
        counts.parse_errors,
        counts.clock_errors,
        counts.filtered,
        counts.late_dropped,
        samples
    );
}

pub fn run(args: &IngestArgs) -> Result<(), CliError> {
    let mut config = ingest_config(args)?;
    if args.duration.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
        return Err(CliError::config(
            "invalid duration: must be positive seconds",
        ));
    }
    for path in &args.from {
        if !path.is_file() {
            return Err(CliError::config(format!(
                "input {} does not exist",
                path.display()
            )));
        }
    }

    let out = OutDir::create(&args.out)?;
    let samples_path = out.file("samples.csv");
    let file = File::create(&samples_path)?;
    let mut writer =
        SampleWriter::new(BufWriter::new(file)).map_err(|e| write_error(&samples_path, e))?;
    let mut written = 0u64;
    let mut emit = |writer: &mut SampleWriter<BufWriter<File>>,
                    samples: Vec<LinkSample>|
     -> Result<(), CsvError> {
        for s in &samples {
            writer.write(s)?;
            written += 1;
        }
        if !samples.is_empty() {
            writer.flush()?;
        }
        Ok(())
    };

    let counts = match args.listen {
        None => {
            // Files are replayed exactly: every interval stays open until the end.
            config.lateness_intervals = None;
            let mut ingestor = Ingestor::new(config)?;
            let mut frame_errors = 0u64;
            for path in &args.from {
                for frame in FrameReader::open(path)? {
                    match frame {
                        Ok(bytes) => {
                            ingestor.feed(&bytes);
                        }
                        Err(e) => {
                            log::warn!("{}: {e}", path.display());
                            frame_errors += 1;
                        }
                    }
                }
            }
            let (samples, mut counts) = ingestor.finish();
            counts.parse_errors += frame_errors;
            emit(&mut writer, samples).map_err(|e| write_error(&samples_path, e))?;
            counts
        }
        Some(addr) => {
            config.lateness_intervals = Some(args.lateness);
            let mut ingestor = Ingestor::new(config)?;
            let limit = ReceiveLimit {
                max_datagrams: args.max_datagrams,
                duration: args.duration.map(Duration::from_secs_f64),
            };
            let mut failure = None;
            receive_udp(addr, limit, |bytes| {
                if failure.is_some() {
                    return;
                }
                let ready = ingestor.feed(bytes);
                if let Err(e) = emit(&mut writer, ready) {
                    failure = Some(e);
                }
            })
            .map_err(|e| CliError::config(format!("cannot receive on {addr}: {e}")))?;
            if let Some(e) = failure {
                return Err(write_error(&samples_path, e));
            }
            let (samples, counts) = ingestor.finish();
            emit(&mut writer, samples).map_err(|e| write_error(&samples_path, e))?;
            counts
        }
    };
    writer.flush().map_err(|e| write_error(&samples_path, e))?;
    report(&counts, written);
    Ok(())
}
