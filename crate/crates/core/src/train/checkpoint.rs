//! Checkpoint directory: `manifest.json` plus `params.bin`, a flat
//! little-endian dump of every parameter in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Variant};
use crate::tensor::{ParamStore, Precision, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT: &str = "hssc-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: String,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_hidden: usize,
    pub num_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub precision: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub model: ModelSpec,
    pub params: Vec<ParamRecord>,
}

impl Manifest {
    pub fn for_model(model: &Model, precision: Precision) -> Self {
        let c = model.config;
        Manifest {
            format: FORMAT.to_string(),
            model: ModelSpec {
                variant: c.variant.name().to_string(),
                vocab_size: c.vocab_size,
                embed_dim: c.embed_dim,
                hidden_dim: c.hidden_dim,
                classifier_hidden: c.classifier_hidden,
                num_classes: c.num_classes,
            },
            params: model
                .params
                .entries()
                .iter()
                .map(|e| ParamRecord {
                    name: e.name.clone(),
                    shape: e.value.shape().to_vec(),
                    precision: precision.name().to_string(),
                })
                .collect(),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        Ok(ModelConfig {
            variant: m.variant.parse::<Variant>().map_err(Error::Checkpoint)?,
            vocab_size: m.vocab_size,
            embed_dim: m.embed_dim,
            hidden_dim: m.hidden_dim,
            classifier_hidden: m.classifier_hidden,
            num_classes: m.num_classes,
        })
    }
}

pub fn encode_params(model: &Model, precision: Precision) -> Vec<u8> {
    let mut out = Vec::with_capacity(model.num_scalars() * precision.bytes());
    for e in model.params.entries() {
        for &v in e.value.data() {
            match precision {
                Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    out
}

pub fn save_checkpoint(dir: &Path, model: &Model, precision: Precision) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let manifest = Manifest::for_model(model, precision);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json).map_err(|e| Error::file(&mpath, e))?;
    let ppath = dir.join(PARAMS_FILE);
    fs::write(&ppath, encode_params(model, precision)).map_err(|e| Error::file(&ppath, e))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::file(&mpath, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", mpath.display())))?;
    if manifest.format != FORMAT {
        return Err(Error::Checkpoint(format!("unsupported checkpoint format {:?}", manifest.format)));
    }
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model, Precision)> {
    let manifest = read_manifest(dir)?;
    let ppath = dir.join(PARAMS_FILE);
    let bytes = fs::read(&ppath).map_err(|e| Error::file(&ppath, e))?;

    let mut store = ParamStore::new();
    let mut offset = 0usize;
    let mut precision = None;
    for rec in &manifest.params {
        let p = Precision::parse(&rec.precision)
            .ok_or_else(|| Error::Checkpoint(format!("{}: unknown precision {:?}", rec.name, rec.precision)))?;
        if *precision.get_or_insert(p) != p {
            return Err(Error::Checkpoint("mixed parameter precisions".into()));
        }
        let n: usize = rec.shape.iter().product();
        let need = n * p.bytes();
        let chunk = bytes.get(offset..offset + need).ok_or_else(|| {
            Error::Checkpoint(format!(
                "{} truncated: parameter {} needs bytes {offset}..{}, file has {}",
                ppath.display(),
                rec.name,
                offset + need,
                bytes.len()
            ))
        })?;
        let data: Vec<f64> = match p {
            Precision::F64 => chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
            Precision::F32 => chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect(),
        };
        offset += need;
        store.add(rec.name.clone(), Tensor::new(rec.shape.clone(), data)?);
    }
    if offset != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} has {} trailing bytes",
            ppath.display(),
            bytes.len() - offset
        )));
    }
    let model = Model::from_params(manifest.model_config()?, store)?;
    Ok((model, precision.unwrap_or_default()))
}
