//! JSON document format for networks.
//!
//! ```json
//! {"type": "mlp", "layers": [{"weights": [[...]], "bias": [...], "activation": "tanh"}]}
//! {"type": "gru", "layers": [...readout...], "gru": {"update": {"w": .., "u": .., "b": ..}, ...},
//!  "outputs_feed_inputs": false}
//! ```
//!
//! Matrices are row-major nested arrays; floats are written in shortest
//! round-trip form so a save/load cycle is bit-exact.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, GateWeights, GruNetwork, Network};
use crate::error::{AceError, Result};

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Mlp(Network),
    Gru(GruNetwork),
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct GateDoc {
    w: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GruDoc {
    update: GateDoc,
    reset: GateDoc,
    candidate: GateDoc,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    #[serde(rename = "type")]
    kind: String,
    layers: Vec<LayerDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gru: Option<GruDoc>,
    #[serde(default)]
    outputs_feed_inputs: bool,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(AceError::Parse(format!("ragged matrix in {what}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| AceError::Parse(e.to_string()))
}

fn layer_doc(l: &DenseLayer) -> LayerDoc {
    LayerDoc { weights: rows(&l.weights), bias: l.bias.to_vec(), activation: l.activation }
}

fn gate_doc(g: &GateWeights) -> GateDoc {
    GateDoc { w: rows(&g.w), u: rows(&g.u), b: g.b.to_vec() }
}

fn gate(doc: &GateDoc, name: &str, input_dim: usize, hidden_dim: usize) -> Result<GateWeights> {
    // empty matrices come back as 0x0, so fix their shape from the known sizes
    let w = if doc.w.is_empty() { Array2::zeros((0, input_dim)) } else { matrix(&doc.w, name)? };
    let u = if doc.u.is_empty() { Array2::zeros((0, hidden_dim)) } else { matrix(&doc.u, name)? };
    Ok(GateWeights { w, u, b: Array1::from(doc.b.clone()) })
}

fn network(layers: &[LayerDoc]) -> Result<Network> {
    let layers = layers
        .iter()
        .enumerate()
        .map(|(i, l)| DenseLayer::new(matrix(&l.weights, &format!("layer {i}"))?, Array1::from(l.bias.clone()), l.activation))
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

impl Model {
    pub fn to_json(&self) -> String {
        let doc = match self {
            Model::Mlp(net) => ModelDoc {
                kind: "mlp".into(),
                layers: net.layers().iter().map(layer_doc).collect(),
                gru: None,
                outputs_feed_inputs: false,
            },
            Model::Gru(rnn) => ModelDoc {
                kind: "gru".into(),
                layers: rnn.readout.layers().iter().map(layer_doc).collect(),
                gru: Some(GruDoc {
                    update: gate_doc(&rnn.update),
                    reset: gate_doc(&rnn.reset),
                    candidate: gate_doc(&rnn.candidate),
                }),
                outputs_feed_inputs: rnn.outputs_feed_inputs,
            },
        };
        serde_json::to_string_pretty(&doc).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        match doc.kind.as_str() {
            "mlp" => Ok(Model::Mlp(network(&doc.layers)?)),
            "gru" => {
                let g = doc.gru.as_ref().ok_or_else(|| AceError::Parse("gru model without `gru` block".into()))?;
                let readout = network(&doc.layers)?;
                let hidden = g.update.b.len();
                let input = g.update.w.first().map_or(0, Vec::len);
                Ok(Model::Gru(GruNetwork::new(
                    gate(&g.update, "update gate", input, hidden)?,
                    gate(&g.reset, "reset gate", input, hidden)?,
                    gate(&g.candidate, "candidate gate", input, hidden)?,
                    readout,
                    doc.outputs_feed_inputs,
                )?))
            }
            other => Err(AceError::Parse(format!("unknown model type `{other}`"))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures;

    #[test]
    fn mlp_round_trip_is_bit_exact() {
        let net = fixtures::random_net(&[3, 7, 2], Activation::Softplus, 21);
        let back = Model::from_json(&Model::Mlp(net.clone()).to_json()).unwrap();
        assert_eq!(back, Model::Mlp(net));
    }

    #[test]
    fn gru_round_trip_is_bit_exact() {
        let rnn = fixtures::random_gru(2, 3, 2, Activation::Tanh, true, 4);
        let back = Model::from_json(&Model::Gru(rnn.clone()).to_json()).unwrap();
        assert_eq!(back, Model::Gru(rnn));
    }

    #[test]
    fn parses_handwritten_document() {
        let text = r#"{"type":"mlp","layers":[{"weights":[[1,1],[1,-1]],"bias":[0,0],"activation":"square"},
            {"weights":[[0.25,-0.25]],"bias":[0],"activation":"identity"}]}"#;
        assert_eq!(Model::from_json(text).unwrap(), Model::Mlp(fixtures::product_net()));
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(Model::from_json(r#"{"type":"cnn","layers":[]}"#).is_err());
        assert!(Model::from_json(r#"{"type":"mlp","layers":[{"weights":[[1,2],[3]],"bias":[0,0],"activation":"tanh"}]}"#).is_err());
        assert!(Model::from_json(r#"{"type":"gru","layers":[]}"#).is_err());
        assert!(Model::from_json(r#"{"type":"mlp","layers":[{"weights":[[1]],"bias":[0],"activation":"gelu"}]}"#).is_err());
    }
}
