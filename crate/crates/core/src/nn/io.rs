//! Plain-text network format.
//!
//! ```text
//! dims: 2 3 1
//! activation: swish
//! layer 0
//! <d_1 lines of d_0 weights>
//! bias: <d_1 entries>
//! layer 1
//! ...
//! ```
//!
//! A standardized network appends `input_shift:`, `input_scale:`,
//! `output_shift:` and `output_scale:` lines and closes with `end`. Floats are
//! written with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::{Activation, Affine, Network, StandardizedNetwork};
use crate::{Error, Result};

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(" ")
}

pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    let dims: Vec<String> = net.dims().iter().map(usize::to_string).collect();
    writeln!(out, "dims: {}", dims.join(" ")).unwrap();
    writeln!(out, "activation: {}", net.activation().name()).unwrap();
    for (k, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        writeln!(out, "layer {k}").unwrap();
        for row in w.rows() {
            writeln!(out, "{}", join(row.iter().copied())).unwrap();
        }
        writeln!(out, "bias: {}", join(b.iter().copied())).unwrap();
    }
    out
}

pub fn write_standardized(model: &StandardizedNetwork) -> String {
    let mut out = write_network(&model.net);
    writeln!(out, "input_shift: {}", join(model.input.shift.iter().copied())).unwrap();
    writeln!(out, "input_scale: {}", join(model.input.scale.iter().copied())).unwrap();
    writeln!(out, "output_shift: {}", join(model.output.shift.iter().copied())).unwrap();
    writeln!(out, "output_scale: {}", join(model.output.scale.iter().copied())).unwrap();
    out.push_str("end\n");
    out
}

/// Line reader that skips blank lines and `#` comments.
pub(crate) struct LineCursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(line)
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    /// Next line, which must start with `key:`; returns the remainder.
    pub(crate) fn expect_key(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(':'))
            .map(str::trim)
            .ok_or_else(|| Error::Parse(format!("line {no}: expected `{key}:`, found `{line}`")))
    }

    pub(crate) fn expect_exact(&mut self, want: &str) -> Result<()> {
        let (no, line) = self.next_line()?;
        if line == want {
            Ok(())
        } else {
            Err(Error::Parse(format!("line {no}: expected `{want}`, found `{line}`")))
        }
    }
}

pub(crate) fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad float `{t}`: {e}"))))
        .collect()
}

pub(crate) fn parse_network(cur: &mut LineCursor<'_>) -> Result<Network> {
    let dims: Vec<usize> = cur
        .expect_key("dims")?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("bad width `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() < 2 {
        return Err(Error::Parse(format!("need at least two widths, got {dims:?}")));
    }
    let activation = Activation::parse(cur.expect_key("activation")?)?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (k, pair) in dims.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        cur.expect_exact(&format!("layer {k}"))?;
        let mut flat = Vec::with_capacity(d_in * d_out);
        for _ in 0..d_out {
            let (no, line) = cur.next_line()?;
            let row = parse_floats(line)?;
            if row.len() != d_in {
                return Err(Error::Parse(format!(
                    "line {no}: layer {k} row has {} entries, expected {d_in}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        let bias = parse_floats(cur.expect_key("bias")?)?;
        if bias.len() != d_out {
            return Err(Error::Parse(format!(
                "layer {k} bias has {} entries, expected {d_out}",
                bias.len()
            )));
        }
        weights.push(Array2::from_shape_vec((d_out, d_in), flat).unwrap());
        biases.push(Array1::from(bias));
    }
    Network::from_parts(weights, biases, activation)
}

pub(crate) fn parse_standardized(cur: &mut LineCursor<'_>) -> Result<StandardizedNetwork> {
    let net = parse_network(cur)?;
    let input = Affine {
        shift: parse_floats(cur.expect_key("input_shift")?)?,
        scale: parse_floats(cur.expect_key("input_scale")?)?,
    };
    let output = Affine {
        shift: parse_floats(cur.expect_key("output_shift")?)?,
        scale: parse_floats(cur.expect_key("output_scale")?)?,
    };
    cur.expect_exact("end")?;
    if input.scale.len() != input.shift.len() || output.scale.len() != output.shift.len() {
        return Err(Error::Parse("transform shift/scale lengths differ".into()));
    }
    StandardizedNetwork::new(input, net, output)
}

pub fn read_network(text: &str) -> Result<Network> {
    parse_network(&mut LineCursor::new(text))
}

pub fn read_standardized(text: &str) -> Result<StandardizedNetwork> {
    parse_standardized(&mut LineCursor::new(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn header_line_first() {
        let net = Network::zeros(&[2, 3, 1]).unwrap();
        let text = write_network(&net);
        assert!(text.starts_with("dims: 2 3 1\n"));
    }

    #[test]
    fn truncated_input_is_an_error() {
        let net = Network::new(&[2, 3, 1], &mut seeded(0)).unwrap();
        let text = write_network(&net);
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(read_network(&cut).is_err());
    }

    proptest! {
        #[test]
        fn standardized_round_trip_is_bit_exact(seed in any::<u64>(), shift in -1e6..1e6f64, scale in 1e-8..1e8f64) {
            let net = Network::new(&[3, 4, 2], &mut seeded(seed)).unwrap();
            let model = StandardizedNetwork::new(
                Affine { shift: vec![shift, -shift, 1.0 / 3.0], scale: vec![scale, 1.0, 0.1] },
                net,
                Affine { shift: vec![std::f64::consts::PI, shift * 1e-7], scale: vec![scale.sqrt(), 2.0] },
            ).unwrap();
            let back = read_standardized(&write_standardized(&model)).unwrap();
            prop_assert_eq!(back, model);
        }
    }
}
