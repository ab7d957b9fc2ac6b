//! Plain-text checkpoint format, version 1:
//!
//! ```text
//! uavwet-checkpoint 1
//! variant <name>
//! agents <U>
//! obs_dim <M>
//! hidden <width>
//! alpha <alpha_0> ... <alpha_{U-1}>
//! tensor <name> <rows> <cols>
//! <rows * cols space-separated values, row-major>
//! ...
//! end
//! ```
//!
//! Values are written with the shortest representation that parses back
//! to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trainer::Model;
use crate::config::Variant;
use crate::error::CheckpointError;
use crate::nn::{Params, Tensor};

const MAGIC: &str = "uavwet-checkpoint";
const VERSION: u32 = 1;

pub fn to_text(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "variant {}", model.variant.name());
    let _ = writeln!(s, "agents {}", model.agents.len());
    let _ = writeln!(s, "obs_dim {}", model.obs_dim());
    let _ = writeln!(s, "hidden {}", model.hidden());
    let alphas: Vec<String> = model.agents.iter().map(|a| a.alpha.to_string()).collect();
    let _ = writeln!(s, "alpha {}", alphas.join(" "));
    for (name, t) in model.param_names().iter().zip(model.params()) {
        let _ = writeln!(s, "tensor {name} {} {}", t.rows(), t.cols());
        let vals: Vec<String> = t.data().iter().map(f64::to_string).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    s.push_str("end\n");
    s
}

pub fn save(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_text(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model, CheckpointError> {
    from_text(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, CheckpointError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: impl Into<String>) -> CheckpointError {
        CheckpointError::Format { line: self.line, reason: reason.into() }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>, CheckpointError> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize, CheckpointError> {
        let v = self.keyed(key)?;
        match v.as_slice() {
            [x] => x.parse().map_err(|_| self.err(format!("bad `{key}` value"))),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }
}

pub fn from_text(text: &str) -> Result<Model, CheckpointError> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let header = lines.keyed(MAGIC)?;
    if header != [VERSION.to_string().as_str()] {
        return Err(lines.err(format!("unsupported version {header:?}")));
    }
    let variant: Variant = match lines.keyed("variant")?.as_slice() {
        [v] => v.parse().map_err(|e: String| lines.err(e))?,
        _ => return Err(lines.err("`variant` takes one value")),
    };
    let agents = lines.keyed_usize("agents")?;
    let obs_dim = lines.keyed_usize("obs_dim")?;
    let hidden = lines.keyed_usize("hidden")?;
    if agents == 0 || obs_dim == 0 || hidden == 0 {
        return Err(lines.err("dimensions must be positive"));
    }
    let alphas: Vec<f64> =
        lines.keyed("alpha")?.iter().map(|a| a.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| lines.err("bad alpha"))?;
    if alphas.len() != agents {
        return Err(lines.err("one alpha per agent expected"));
    }

    let mut model = Model::new(variant, agents, obs_dim, hidden, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    for (a, alpha) in model.agents.iter_mut().zip(alphas) {
        a.alpha = alpha;
    }
    let names = model.param_names();
    for (name, slot) in names.iter().zip(model.params_mut()) {
        let head = lines.keyed("tensor")?;
        let [n, r, c] = head.as_slice() else {
            return Err(lines.err("tensor header needs name, rows and cols"));
        };
        if n != name {
            return Err(lines.err(format!("expected tensor `{name}`, found `{n}`")));
        }
        let (rows, cols): (usize, usize) =
            (r.parse().map_err(|_| lines.err("bad rows"))?, c.parse().map_err(|_| lines.err("bad cols"))?);
        if [rows, cols] != slot.shape() {
            return Err(lines.err(format!("tensor `{name}` has shape {rows}x{cols}, expected {:?}", slot.shape())));
        }
        let vals: Vec<f64> = lines
            .next()?
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<_, _>>()
            .map_err(|_| lines.err("bad value"))?;
        *slot = Tensor::from_vec(rows, cols, vals)
            .map_err(|_| lines.err(format!("tensor `{name}` has the wrong number of values")))?;
    }
    if lines.next()?.trim() != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(model)
}
