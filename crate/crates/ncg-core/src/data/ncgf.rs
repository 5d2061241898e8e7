//! NCGF feature files: precomputed spike timestamps from an external
//! feature extractor.
//!
//! Little-endian layout:
//!   magic `NCGF` | u32 version=1 | u8 no_spike_flag | u64 n_samples |
//!   u32 n_features | u32 n_classes | n_samples u32 labels |
//!   n_samples * n_features f32 values row-major, each in [0, 1]
//!
//! When the no-spike flag is set, a stored value of exactly 1.0 means "this
//! input never spikes"; otherwise 1.0 is a spike at the end of the window.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{SpikeDataset, SpikeVector, NO_SPIKE, T_MAX};
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"NCGF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 4 + 4;

/// Parse an NCGF byte buffer into a spike dataset.
pub fn parse_features(data: &[u8]) -> Result<SpikeDataset> {
    if data.len() < HEADER_LEN {
        return Err(Error::format("truncated header"));
    }
    if data[0..4] != MAGIC {
        return Err(Error::format("bad magic, expected NCGF"));
    }
    let version = LittleEndian::read_u32(&data[4..8]);
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let no_spike_flag = match data[8] {
        0 => false,
        1 => true,
        v => return Err(Error::format(format!("no-spike flag must be 0 or 1, got {v}"))),
    };
    let n_samples = LittleEndian::read_u64(&data[9..17]);
    let n_features = LittleEndian::read_u32(&data[17..21]) as u64;
    let n_classes = LittleEndian::read_u32(&data[21..25]);

    // Size check before any allocation: counts are attacker-controlled.
    let expect = (HEADER_LEN as u128)
        + (n_samples as u128) * 4
        + (n_samples as u128) * (n_features as u128) * 4;
    if (data.len() as u128) != expect {
        return Err(Error::consistency(format!(
            "file is {} bytes, header declares {expect}",
            data.len()
        )));
    }
    if n_classes == 0 && n_samples > 0 {
        return Err(Error::consistency("n_classes is 0 but samples are present"));
    }

    let n_samples = n_samples as usize;
    let n_features = n_features as usize;
    let labels_at = HEADER_LEN;
    let values_at = labels_at + 4 * n_samples;

    let mut samples = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let label = LittleEndian::read_u32(&data[labels_at + 4 * s..]) as usize;
        if label >= n_classes as usize {
            return Err(Error::consistency(format!(
                "sample {s} label {label} >= n_classes {n_classes}"
            )));
        }
        let mut times = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let raw = LittleEndian::read_f32(&data[values_at + 4 * (s * n_features + f)..]);
            if !raw.is_finite() || !(0.0..=1.0).contains(&raw) {
                return Err(Error::format(format!(
                    "value {raw} at sample {s} feature {f} outside [0, 1]"
                )));
            }
            let t = raw as f64;
            times.push(if no_spike_flag && raw == 1.0 { NO_SPIKE } else { t });
        }
        samples.push(SpikeVector::from_raw(times, label));
    }
    SpikeDataset::new(samples, n_features, n_classes as usize)
}

/// Read an NCGF file from disk.
pub fn load_features(path: &Path) -> Result<SpikeDataset> {
    parse_features(&std::fs::read(path)?)
}

/// Serialize a dataset to NCGF bytes.
///
/// With `no_spike_flag` set, absent spikes are stored as 1.0; without it the
/// dataset must not contain absent spikes. Values are stored as f32.
pub fn encode_features(dataset: &SpikeDataset, no_spike_flag: bool) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(
        HEADER_LEN + 4 * dataset.len() + 4 * dataset.len() * dataset.n_inputs(),
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(no_spike_flag as u8);
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    out.extend_from_slice(&(dataset.n_inputs() as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.n_classes() as u32).to_le_bytes());
    for s in dataset.iter() {
        out.extend_from_slice(&(s.label() as u32).to_le_bytes());
    }
    for (k, s) in dataset.iter().enumerate() {
        for i in 0..s.len() {
            let v = match s.time(i) {
                Some(t) if no_spike_flag && t == T_MAX => {
                    return Err(Error::consistency(format!(
                        "sample {k} input {i}: spike at exactly {T_MAX} is not \
                         representable with the no-spike flag set"
                    )))
                }
                Some(t) => t as f32,
                None if no_spike_flag => 1.0f32,
                None => {
                    return Err(Error::consistency(format!(
                        "sample {k} input {i}: absent spike requires the no-spike flag"
                    )))
                }
            };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Write a dataset to an NCGF file.
pub fn write_features(path: &Path, dataset: &SpikeDataset, no_spike_flag: bool) -> Result<()> {
    std::fs::write(path, encode_features(dataset, no_spike_flag)?)?;
    Ok(())
}
