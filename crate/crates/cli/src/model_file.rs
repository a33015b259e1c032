//! JSON persistence for trained models.

use std::path::Path;

use anomix::encoder::EncoderParams;
use anomix::mixture::{DensityMode, MixtureParams};
use anomix::{Model, StandardizationStats, TrainConfig};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::commands::write_atomic;
use crate::config::read_text;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderTensors {
    pub enc_w1: Vec<Vec<f64>>,
    pub enc_b1: Vec<f64>,
    pub enc_w2: Vec<Vec<f64>>,
    pub enc_b2: Vec<f64>,
    pub dec_w1: Vec<Vec<f64>>,
    pub dec_b1: Vec<f64>,
    pub dec_w2: Vec<Vec<f64>>,
    pub dec_b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub weights: Vec<f64>,
    pub prototypes: Vec<Vec<f64>>,
    pub scales: Vec<Vec<f64>>,
    pub density_mode: DensityMode,
    pub u_unsquared: bool,
}

/// On-disk form of a [`Model`]. Floats are written in shortest round-trip
/// form, so loading reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub config: TrainConfig,
    pub standardization: StandardizationStats,
    pub encoder: EncoderTensors,
    pub mixture: MixtureRecord,
}

fn nested(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<Array2<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{name} has rows of unequal length"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| format!("{name}: {e}"))
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        let e = &model.encoder;
        let m = &model.mixture;
        Self {
            schema_version: SCHEMA_VERSION,
            config: model.config.clone(),
            standardization: model.standardization.clone(),
            encoder: EncoderTensors {
                enc_w1: nested(&e.enc_w1),
                enc_b1: e.enc_b1.to_vec(),
                enc_w2: nested(&e.enc_w2),
                enc_b2: e.enc_b2.to_vec(),
                dec_w1: nested(&e.dec_w1),
                dec_b1: e.dec_b1.to_vec(),
                dec_w2: nested(&e.dec_w2),
                dec_b2: e.dec_b2.to_vec(),
            },
            mixture: MixtureRecord {
                weights: m.weights.to_vec(),
                prototypes: nested(&m.prototypes),
                scales: nested(&m.scales),
                density_mode: m.density_mode,
                u_unsquared: m.u_unsquared,
            },
        }
    }

    /// Rebuilds the model, checking that every tensor shape agrees.
    pub fn to_model(&self) -> Result<Model, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let t = &self.encoder;
        let encoder = EncoderParams {
            enc_w1: matrix(&t.enc_w1, "enc_w1")?,
            enc_b1: Array1::from(t.enc_b1.clone()),
            enc_w2: matrix(&t.enc_w2, "enc_w2")?,
            enc_b2: Array1::from(t.enc_b2.clone()),
            dec_w1: matrix(&t.dec_w1, "dec_w1")?,
            dec_b1: Array1::from(t.dec_b1.clone()),
            dec_w2: matrix(&t.dec_w2, "dec_w2")?,
            dec_b2: Array1::from(t.dec_b2.clone()),
        };
        let (d_in, h) = encoder.enc_w1.dim();
        let d = encoder.enc_w2.ncols();
        let shapes_ok = encoder.enc_b1.len() == h
            && encoder.enc_w2.nrows() == h
            && encoder.enc_b2.len() == d
            && encoder.dec_w1.dim() == (d, h)
            && encoder.dec_b1.len() == h
            && encoder.dec_w2.dim() == (h, d_in)
            && encoder.dec_b2.len() == d_in
            && self.standardization.mean.len() == d_in
            && self.standardization.std.len() == d_in;
        if !shapes_ok {
            return Err("encoder or standardization shapes are inconsistent".into());
        }
        let m = &self.mixture;
        let mut mixture = MixtureParams::new(
            Array1::from(m.weights.clone()),
            matrix(&m.prototypes, "prototypes")?,
            matrix(&m.scales, "scales")?,
            m.density_mode,
        )
        .map_err(|e| e.to_string())?;
        mixture.u_unsquared = m.u_unsquared;
        if mixture.latent_dim() != d {
            return Err(format!("mixture width {} does not match latent width {d}", mixture.latent_dim()));
        }
        Ok(Model {
            encoder,
            mixture,
            standardization: self.standardization.clone(),
            config: self.config.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn save(model: &Model, path: &Path) -> Result<(), CliError> {
        let mut text = Self::from_model(model).to_json();
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Model, CliError> {
        let invalid = |message: String| CliError::ModelFile {
            path: path.to_path_buf(),
            message,
        };
        let text = read_text(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        file.to_model().map_err(invalid)
    }
}
