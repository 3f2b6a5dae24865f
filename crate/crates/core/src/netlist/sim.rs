//! Bit-parallel simulation: every wire holds 64 independent patterns in a `u64`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Circuit, Driver, NetlistError};

/// Wire name to bit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub BTreeMap<String, bool>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, wire: impl Into<String>, value: bool) -> &mut Self {
        self.0.insert(wire.into(), value);
        self
    }

    pub fn get(&self, wire: &str) -> Option<bool> {
        self.0.get(wire).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Positional values for `names`, failing on the first missing one.
    pub fn values_for<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<Vec<bool>, NetlistError> {
        names
            .into_iter()
            .map(|n| self.get(n).ok_or_else(|| NetlistError::MissingInput(n.to_string())))
            .collect()
    }
}

impl<S: Into<String>> FromIterator<(S, bool)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (S, bool)>>(iter: T) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl Circuit {
    /// Evaluates every wire; `inputs[i]` carries the 64 lanes of primary input `i`.
    pub fn eval_wires(&self, inputs: &[u64], values: &mut Vec<u64>) {
        assert_eq!(inputs.len(), self.num_inputs(), "input word count");
        values.clear();
        values.extend_from_slice(inputs);
        for w in &self.wires()[self.num_inputs()..] {
            let v = match &w.driver {
                Driver::Zero => 0,
                Driver::Gate { kind, fanin } => kind.eval_words(fanin.iter().map(|&f| values[f])),
                Driver::Input => unreachable!("inputs precede all other wires"),
            };
            values.push(v);
        }
    }

    /// Output words for 64 packed input patterns.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        let mut values = Vec::with_capacity(self.wires().len());
        self.eval_wires(inputs, &mut values);
        self.outputs().iter().map(|&o| values[o]).collect()
    }

    /// Output bits for a single positional input pattern.
    pub fn eval_bits(&self, inputs: &[bool]) -> Vec<bool> {
        let words: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
        self.eval_words(&words).into_iter().map(|w| w & 1 == 1).collect()
    }
}

const LANE_BITS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Packed words for the 64 consecutive `width`-bit values `base..base+64`
/// (`base` a multiple of 64). Element `i` carries bit `width-1-i`, i.e. the
/// first word is the most significant bit. Lanes past `2^width` repeat.
pub fn counting_words(width: usize, base: u64) -> Vec<u64> {
    debug_assert_eq!(base % 64, 0);
    (0..width)
        .map(|i| {
            let bit = width - 1 - i;
            if bit < 6 {
                LANE_BITS[bit]
            } else if (base >> bit) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

/// Mask of the lanes that hold real patterns when enumerating `2^width` values.
pub fn valid_lanes(width: usize) -> u64 {
    if width >= 6 {
        !0
    } else {
        (1u64 << (1u32 << width)) - 1
    }
}

/// Computes all primary outputs for a complete input assignment. Extra
/// entries in `a` that are not primary inputs are ignored.
pub fn simulate(c: &Circuit, a: &Assignment) -> Result<Assignment, NetlistError> {
    let bits = a.values_for(c.input_names())?;
    let out = c.eval_bits(&bits);
    Ok(c.output_names().into_iter().zip(out).collect())
}

/// Elementwise [`simulate`], packing 64 assignments per evaluation and
/// spreading chunks over the rayon pool.
pub fn simulate_batch(c: &Circuit, inputs: &[Assignment]) -> Result<Vec<Assignment>, NetlistError> {
    let names = c.input_names();
    let rows: Vec<Vec<bool>> = inputs.iter().map(|a| a.values_for(names.iter().copied())).collect::<Result<_, _>>()?;
    let out_names = c.output_names();
    let chunks: Vec<Vec<Assignment>> = rows
        .par_chunks(64)
        .map(|chunk| {
            let mut words = vec![0u64; c.num_inputs()];
            for (lane, row) in chunk.iter().enumerate() {
                for (i, &bit) in row.iter().enumerate() {
                    words[i] |= (bit as u64) << lane;
                }
            }
            let outs = c.eval_words(&words);
            (0..chunk.len())
                .map(|lane| out_names.iter().zip(&outs).map(|(n, w)| (*n, (w >> lane) & 1 == 1)).collect())
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}
