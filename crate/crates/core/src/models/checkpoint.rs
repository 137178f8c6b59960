use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelSpec, Network, Objective, Target};
use crate::data::AugmentationFamily;
use crate::error::{Error, Result};
use crate::tensor::ParamVector;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SIFC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// Epoch the stored parameters come from (0 = initialization).
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    /// Training objective on the members at the end of each epoch, index 0
    /// being the initialization.
    pub train_loss: Vec<f64>,
    pub train_accuracy_history: Vec<f64>,
    pub val_accuracy_history: Vec<Option<f64>>,
    pub lr_history: Vec<f64>,
    pub augmentation: AugmentationFamily,
}

impl TrainingMetadata {
    pub fn new(augmentation: AugmentationFamily) -> Self {
        Self {
            best_epoch: 0,
            epochs_run: 0,
            train_accuracy: 0.0,
            val_accuracy: None,
            train_loss: Vec::new(),
            train_accuracy_history: Vec::new(),
            val_accuracy_history: Vec::new(),
            lr_history: Vec::new(),
            augmentation,
        }
    }

    pub(crate) fn record_epoch(&mut self, loss: f64, train_acc: f64, val_acc: Option<f64>, lr: f64) {
        self.train_loss.push(loss);
        self.train_accuracy_history.push(train_acc);
        self.val_accuracy_history.push(val_acc);
        self.lr_history.push(lr);
    }
}

#[derive(Serialize, Deserialize)]
struct MetadataBlob {
    l2: f64,
    #[serde(flatten)]
    training: TrainingMetadata,
}

/// Frozen target-model parameters with their architecture and training
/// record.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    spec: ModelSpec,
    params: ParamVector,
    l2: f64,
    metadata: TrainingMetadata,
    network: Network,
}

impl Checkpoint {
    pub fn new(spec: ModelSpec, params: ParamVector, l2: f64, metadata: TrainingMetadata) -> Result<Self> {
        let network = Network::new(spec.clone())?;
        if params.layout().as_ref() != network.layout().as_ref() {
            return Err(Error::LayoutMismatch("checkpoint parameters do not match the model spec".into()));
        }
        // share the network's layout so downstream vectors combine cheaply
        let params = ParamVector::new(Arc::clone(network.layout()), params.into_vec())?;
        Ok(Self {
            spec,
            params,
            l2,
            metadata,
            network,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn target(&self) -> Target<'_> {
        Target::new(&self.network, &self.params, self.l2)
    }

    /// Stable identity of spec + parameters, used to tie attacks to the
    /// checkpoint they were fitted on.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        for x in self.params.as_slice() {
            h.update(x.to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let spec = serde_json::to_vec(&self.spec)?;
        let meta = serde_json::to_vec(&MetadataBlob {
            l2: self.l2,
            training: self.metadata.clone(),
        })?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(spec.len() as u64).to_le_bytes())?;
        w.write_all(&spec)?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for x in self.params.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "missing SIFC magic".into(),
            });
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let spec_len = cur.u64()? as usize;
        let spec: ModelSpec = serde_json::from_slice(cur.take(spec_len)?)?;
        let count = cur.u64()? as usize;
        let raw = cur.take(count.checked_mul(8).ok_or_else(|| cur.error("parameter count overflow"))?)?;
        let params: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let meta_len = cur.u64()? as usize;
        let blob: MetadataBlob = serde_json::from_slice(cur.take(meta_len)?)?;
        let network = Network::new(spec.clone())?;
        let params = ParamVector::new(Arc::clone(network.layout()), params)?;
        Checkpoint::new(spec, params, blob.l2, blob.training)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Format {
            offset: self.pos,
            message: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.error("truncated checkpoint")),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
