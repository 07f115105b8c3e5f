//! JSON network files.
//!
//! ```json
//! {
//!   "inputs": 2,
//!   "layers": [
//!     {"weights": [["0.5", "-1.25"], ["0.1", "2"]], "bias": ["0", "0.3"], "activation": "tanh"},
//!     {"weights": [["1", "-1"]], "bias": ["0.2"], "activation": "linear"}
//!   ]
//! }
//! ```
//!
//! Weights are row-major (outer index = neuron, inner = input). Numbers are
//! written as shortest round-trip decimal strings; plain JSON numbers are
//! accepted on input.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{Activation, Layer, Network};
use crate::{Error, Result};

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = match v {
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| schema(path, format!("`{s}` is not a decimal number")))?,
        Value::Number(n) => n.as_f64().ok_or_else(|| schema(path, "number out of range"))?,
        _ => return Err(schema(path, "expected a decimal string or number")),
    };
    if !x.is_finite() {
        return Err(schema(path, "value is not finite"));
    }
    Ok(x)
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| schema(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    let inputs = root
        .get("inputs")
        .ok_or_else(|| schema("inputs", "missing field"))?
        .as_u64()
        .filter(|&n| n > 0)
        .ok_or_else(|| schema("inputs", "expected a positive integer"))? as usize;
    let layers_v = array(
        root.get("layers").ok_or_else(|| schema("layers", "missing field"))?,
        "layers",
    )?;
    let mut layers = Vec::with_capacity(layers_v.len());
    let mut width = inputs;
    for (li, lv) in layers_v.iter().enumerate() {
        let base = format!("layers[{li}]");
        let act_path = format!("{base}.activation");
        let activation: Activation = lv
            .get("activation")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(&act_path, "expected an activation name"))?
            .parse()
            .map_err(|e: Error| schema(&act_path, e.to_string()))?;
        let w_path = format!("{base}.weights");
        let rows = array(
            lv.get("weights").ok_or_else(|| schema(&w_path, "missing field"))?,
            &w_path,
        )?;
        let mut weights = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            let rp = format!("{w_path}[{r}]");
            let row = array(row, &rp)?;
            if row.len() != width {
                return Err(schema(
                    &rp,
                    format!("row has {} entries but the layer input width is {width}", row.len()),
                ));
            }
            for (c, x) in row.iter().enumerate() {
                weights.push(number(x, &format!("{rp}[{c}]"))?);
            }
        }
        let b_path = format!("{base}.bias");
        let bias_v = array(lv.get("bias").ok_or_else(|| schema(&b_path, "missing field"))?, &b_path)?;
        if bias_v.len() != rows.len() {
            return Err(schema(
                &b_path,
                format!("{} biases for {} neurons", bias_v.len(), rows.len()),
            ));
        }
        let bias = bias_v
            .iter()
            .enumerate()
            .map(|(i, x)| number(x, &format!("{b_path}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        layers
            .push(Layer::new(width, rows.len(), weights, bias, activation).map_err(|e| schema(&base, e.to_string()))?);
        width = rows.len();
    }
    Network::new(inputs, layers).map_err(|e| schema("layers", e.to_string()))
}

pub fn network_to_json(net: &Network) -> String {
    let layers: Vec<Value> = net
        .layers()
        .iter()
        .map(|l| {
            let rows: Vec<Value> = (0..l.outputs())
                .map(|n| Value::from(l.row(n).iter().map(|w| w.to_string()).collect::<Vec<_>>()))
                .collect();
            json!({
                "weights": rows,
                "bias": l.bias().iter().map(|b| b.to_string()).collect::<Vec<_>>(),
                "activation": l.activation().name(),
            })
        })
        .collect();
    let root = json!({ "inputs": net.num_inputs(), "layers": layers });
    let mut s = serde_json::to_string_pretty(&root).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn load_network(path: &Path) -> Result<Network> {
    network_from_json(&fs::read_to_string(path)?)
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, network_to_json(net))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_plain_numbers() {
        let net = network_from_json(
            r#"{"inputs": 1, "layers": [
                {"weights": [[2.0]], "bias": [0.5], "activation": "relu"},
                {"weights": [[1]], "bias": ["-0.5"], "activation": "linear"}]}"#,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn rejects_unknown_activation() {
        let err =
            network_from_json(r#"{"inputs": 1, "layers": [{"weights": [[1]], "bias": [0], "activation": "gelu"}]}"#)
                .unwrap_err();
        match err {
            Error::Schema { location, .. } => assert_eq!(location, "layers[0].activation"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_chaining_dimensions() {
        let err = network_from_json(
            r#"{"inputs": 2, "layers": [
                {"weights": [["1", "2"]], "bias": ["0"], "activation": "tanh"},
                {"weights": [["1", "2"]], "bias": ["0"], "activation": "linear"}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Schema { location, .. } => assert_eq!(location, "layers[1].weights[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_report_line() {
        let err = network_from_json("{\n\"inputs\": 1,\n\"layers\": [}\n").unwrap_err();
        match err {
            Error::Schema { location, .. } => assert!(location.starts_with("line 3"), "{location}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = Network::random(3, &[4], 2, Activation::Relu, 3).unwrap();
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn save_load_identity(seed in 0u64..10_000, depth in 1usize..4) {
            let hidden: Vec<usize> = (0..depth).map(|i| 2 + (seed as usize + i) % 5).collect();
            let net = Network::random(1 + seed as usize % 3, &hidden, 1, Activation::Tanh, seed).unwrap();
            prop_assert_eq!(network_from_json(&network_to_json(&net)).unwrap(), net);
        }
    }
}
