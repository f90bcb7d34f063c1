//! Output formatting: the tail CSV, JSON reports, atomic file writes, and
//! config hashing.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use upcross_core::upcrossings::TailRow;

/// Write via a temp file and rename, so outputs are never half-written.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed column order; floats in shortest round-trip decimal form, so equal
/// runs are equal byte for byte.
pub fn tail_csv(rows: &[TailRow]) -> String {
    let mut out = String::from("k,trials,hits,p_hat,ci_low,ci_high\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.trials, r.hits, r.p_hat, r.ci_low, r.ci_high
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let rows = vec![TailRow {
            k: 1,
            trials: 10,
            hits: 3,
            p_hat: 0.3,
            ci_low: 0.1,
            ci_high: 0.6,
        }];
        let csv = tail_csv(&rows);
        assert_eq!(
            csv,
            "k,trials,hits,p_hat,ci_low,ci_high\n1,10,3,0.3,0.1,0.6\n"
        );
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
