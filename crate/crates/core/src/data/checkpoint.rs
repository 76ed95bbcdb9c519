//! Checkpoint persistence: a JSON manifest describing the layer tape plus
//! one binary container per state tensor, all inside a directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::container::{read_container, write_container, Payload};
use crate::error::{Error, Result};
use crate::prior::{BatchNorm2d, Conv2d, DaeNetwork, Layer, NetSpec};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDesc {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    BatchNorm {
        channels: usize,
        eps: f64,
        momentum: f64,
    },
    Relu,
    ResidualBegin,
    ResidualEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorDesc {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u16,
    pub sigma_eta: f64,
    pub train_seed: u64,
    pub epochs: usize,
    pub filter_bank: String,
    pub spec: Option<NetSpec>,
    pub layers: Vec<LayerDesc>,
    pub tensors: Vec<TensorDesc>,
}

/// Training provenance carried alongside the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub train_seed: u64,
    pub epochs: usize,
    pub filter_bank: String,
    pub spec: Option<NetSpec>,
}

/// State tensors of one layer, in checkpoint order.
fn layer_tensors(layer: &Layer) -> Vec<(&'static str, Vec<usize>, &[f64])> {
    match layer {
        Layer::Conv(c) => vec![
            (
                "weight",
                vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
                &c.weight[..],
            ),
            ("bias", vec![c.out_channels], &c.bias[..]),
        ],
        Layer::BatchNorm(b) => vec![
            ("gamma", vec![b.channels], &b.gamma[..]),
            ("beta", vec![b.channels], &b.beta[..]),
            ("running_mean", vec![b.channels], &b.running_mean[..]),
            ("running_var", vec![b.channels], &b.running_var[..]),
        ],
        _ => vec![],
    }
}

/// Save a checkpoint directory; an existing directory at the target path
/// is replaced atomically (write to a sibling, then rename).
pub fn save_checkpoint(dir: &Path, net: &DaeNetwork, meta: &CheckpointMeta) -> Result<()> {
    let mut tmp_name = dir
        .file_name()
        .ok_or_else(|| Error::Io(format!("invalid checkpoint path {}", dir.display())))?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = dir.with_file_name(tmp_name);
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;

    let mut layers = Vec::new();
    let mut tensors = Vec::new();
    let mut tensor_idx = 0;
    for (li, layer) in net.layers().iter().enumerate() {
        layers.push(match layer {
            Layer::Conv(c) => LayerDesc::Conv {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
            },
            Layer::BatchNorm(b) => LayerDesc::BatchNorm {
                channels: b.channels,
                eps: b.eps,
                momentum: b.momentum,
            },
            Layer::Relu => LayerDesc::Relu,
            Layer::ResidualBegin => LayerDesc::ResidualBegin,
            Layer::ResidualEnd => LayerDesc::ResidualEnd,
        });
        for (name, shape, data) in layer_tensors(layer) {
            let file = format!("t{tensor_idx:03}.bin");
            let dims: Vec<u32> = shape.iter().map(|&s| s as u32).collect();
            write_container(&tmp.join(&file), &dims, &Payload::F64(data.to_vec()))?;
            tensors.push(TensorDesc {
                name: format!("layer{li}.{name}"),
                shape,
                file,
            });
            tensor_idx += 1;
        }
    }

    let manifest = CheckpointManifest {
        version: 1,
        sigma_eta: net.sigma_eta(),
        train_seed: meta.train_seed,
        epochs: meta.epochs,
        filter_bank: meta.filter_bank.clone(),
        spec: meta.spec,
        layers,
        tensors,
    };
    let json =
        serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(tmp.join(MANIFEST_NAME), json)?;

    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(DaeNetwork, CheckpointMeta)> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let json = fs::read(&manifest_path)
        .map_err(|e| Error::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&json).map_err(|e| {
        Error::CorruptFile(format!("{}: {e}", manifest_path.display()))
    })?;
    if manifest.version != 1 {
        return Err(Error::VersionMismatch {
            found: manifest.version,
            expected: 1,
        });
    }

    let mut layers: Vec<Layer> = manifest
        .layers
        .iter()
        .map(|d| match d {
            LayerDesc::Conv {
                in_channels,
                out_channels,
                kernel,
            } => Layer::Conv(Conv2d::zeros(*in_channels, *out_channels, *kernel)),
            LayerDesc::BatchNorm {
                channels,
                eps,
                momentum,
            } => {
                let mut b = BatchNorm2d::new(*channels);
                b.eps = *eps;
                b.momentum = *momentum;
                Layer::BatchNorm(b)
            }
            LayerDesc::Relu => Layer::Relu,
            LayerDesc::ResidualBegin => Layer::ResidualBegin,
            LayerDesc::ResidualEnd => Layer::ResidualEnd,
        })
        .collect();

    let mut cursor = 0usize;
    for layer in layers.iter_mut() {
        let slots: Vec<(&'static str, Vec<usize>)> = layer_tensors(layer)
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        for (name, shape) in slots {
            let desc = manifest.tensors.get(cursor).ok_or_else(|| {
                Error::CorruptFile(format!("{}: manifest lists too few tensors", dir.display()))
            })?;
            if desc.shape != shape {
                return Err(Error::CorruptFile(format!(
                    "{}: tensor {} has shape {:?}, expected {:?}",
                    dir.display(),
                    desc.name,
                    desc.shape,
                    shape
                )));
            }
            let (dims, payload) = read_container(&dir.join(&desc.file))?;
            let expect: Vec<u32> = shape.iter().map(|&s| s as u32).collect();
            if dims != expect {
                return Err(Error::CorruptFile(format!(
                    "{}: file {} dims {:?} do not match manifest {:?}",
                    dir.display(),
                    desc.file,
                    dims,
                    expect
                )));
            }
            let values = match payload {
                Payload::F64(v) => v,
                _ => {
                    return Err(Error::CorruptFile(format!(
                        "{}: tensor {} is not f64",
                        dir.display(),
                        desc.file
                    )))
                }
            };
            match layer {
                Layer::Conv(c) => match name {
                    "weight" => c.weight = values,
                    _ => c.bias = values,
                },
                Layer::BatchNorm(b) => match name {
                    "gamma" => b.gamma = values,
                    "beta" => b.beta = values,
                    "running_mean" => b.running_mean = values,
                    _ => b.running_var = values,
                },
                _ => unreachable!(),
            }
            cursor += 1;
        }
    }
    if cursor != manifest.tensors.len() {
        return Err(Error::CorruptFile(format!(
            "{}: manifest lists {} tensors but layers consume {cursor}",
            dir.display(),
            manifest.tensors.len()
        )));
    }

    let net = DaeNetwork::from_layers(layers, manifest.sigma_eta)?;
    Ok((
        net,
        CheckpointMeta {
            train_seed: manifest.train_seed,
            epochs: manifest.epochs,
            filter_bank: manifest.filter_bank,
            spec: manifest.spec,
        },
    ))
}
