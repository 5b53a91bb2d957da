//! Bit-exact checkpoint serialization.
//!
//! Layout: magic `GLYPHNET` (8 bytes), version u32 LE, class count u32 LE,
//! parameter payload as f32 LE in declared layer order (conv1 W, conv1 b,
//! conv2 W, conv2 b, dense W, dense b), then u32 LE JSON length and the
//! label map as UTF-8 JSON. Only the standard geometry serializes, so the
//! payload size is a function of the class count alone.

use std::path::Path;

use super::net::Glyphnet;
use super::GlyphnetError;
use crate::corpus::LabelMap;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GLYPHNET";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A loaded (or about-to-be-saved) model: network parameters plus the label
/// map it was trained against.
#[derive(Clone, Debug)]
pub struct ModelCheckpoint {
    pub network: Glyphnet,
    pub labels: LabelMap,
    pub version: u32,
}

impl ModelCheckpoint {
    pub fn new(network: Glyphnet, labels: LabelMap) -> Self {
        Self {
            network,
            labels,
            version: CHECKPOINT_VERSION,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.network.num_classes()
    }

    /// Fail with `ShapeMismatch` when the caller needs a different class
    /// count than this checkpoint provides.
    pub fn require_classes(&self, expected: usize) -> Result<(), GlyphnetError> {
        let found = self.num_classes();
        if found != expected {
            return Err(GlyphnetError::ShapeMismatch {
                expected: format!("{expected} classes"),
                found: format!("{found} classes"),
            });
        }
        Ok(())
    }
}

/// Serialize to the checkpoint byte layout.
pub fn checkpoint_to_bytes(network: &Glyphnet, labels: &LabelMap) -> Vec<u8> {
    assert!(
        network.is_standard(),
        "only the standard geometry serializes"
    );
    assert_eq!(
        labels.num_classes(),
        network.num_classes(),
        "label map must cover the dense head"
    );
    let json = labels.to_json();
    let mut out = Vec::with_capacity(20 + 4 * network.parameter_count() + json.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(network.num_classes() as u32).to_le_bytes());
    for slice in network.param_slices() {
        for &v in slice {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out
}

pub fn save_checkpoint(
    network: &Glyphnet,
    labels: &LabelMap,
    path: &Path,
) -> Result<(), GlyphnetError> {
    std::fs::write(path, checkpoint_to_bytes(network, labels))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GlyphnetError> {
        if self.pos + n > self.bytes.len() {
            return Err(GlyphnetError::CorruptCheckpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let chunk = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(chunk)
    }

    fn u32(&mut self) -> Result<u32, GlyphnetError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse checkpoint bytes, validating magic, version, parameter counts, and
/// the label map.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<ModelCheckpoint, GlyphnetError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(GlyphnetError::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(GlyphnetError::CorruptCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let num_classes = r.u32()? as usize;
    if num_classes == 0 {
        return Err(GlyphnetError::CorruptCheckpoint("zero classes".into()));
    }

    // Parameter values land in a fresh standard network of the right width.
    let mut network = Glyphnet::new(num_classes, 0);
    let expected = network.parameter_count();
    let payload = r.take(4 * expected)?;
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    for slice in network.param_slices_mut() {
        for v in slice.iter_mut() {
            *v = values.next().expect("length checked above");
        }
    }

    let json_len = r.u32()? as usize;
    let json = r.take(json_len)?;
    if r.pos != bytes.len() {
        return Err(GlyphnetError::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let labels = LabelMap::from_json(json)
        .map_err(|e| GlyphnetError::CorruptCheckpoint(format!("label map: {e}")))?;
    if labels.num_classes() != num_classes {
        return Err(GlyphnetError::CorruptCheckpoint(format!(
            "label map covers {} classes, header says {num_classes}",
            labels.num_classes()
        )));
    }
    Ok(ModelCheckpoint {
        network,
        labels,
        version,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, GlyphnetError> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}
