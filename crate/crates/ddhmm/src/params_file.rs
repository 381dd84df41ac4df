//! Versioned TOML files holding [`ModelParams`].
//!
//! Floats are written in shortest round-trip form, so reading a written
//! file reproduces every field bit for bit.

use std::fs;
use std::path::Path;

use ddhmm_core::model::EmissionParams;
use ddhmm_core::{CovariateKind, ModelParams, PageCategory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "ddhmm-params";
pub const VERSION: u32 = 1;
pub const MODEL_KIND: &str = "ddhmm";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    model: String,
    states: usize,
    page_order: Vec<String>,
    covariates: Vec<String>,
    demographic_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Emission {
    /// Layout `[state][page][demographic]`.
    intercepts: Vec<f64>,
    /// Layout `[state][page][covariate][demographic]`.
    coefficients: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsFile {
    header: Header,
    pi: Vec<f64>,
    theta: Vec<f64>,
    c: Vec<f64>,
    mu: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    emission: Emission,
}

fn rows(flat: &[f64], k: usize) -> Vec<Vec<f64>> {
    flat.chunks(k.max(1)).map(<[f64]>::to_vec).collect()
}

pub fn params_to_string(params: &ModelParams) -> Result<String> {
    params.validate()?;
    let k = params.k();
    let file = ParamsFile {
        header: Header {
            format: FORMAT.into(),
            version: VERSION,
            model: MODEL_KIND.into(),
            states: k,
            page_order: PageCategory::ALL.iter().map(|p| p.name().to_owned()).collect(),
            covariates: params.emission.covariates.iter().map(|c| c.name().to_owned()).collect(),
            demographic_dim: params.emission.demographic_dim,
        },
        pi: params.pi.clone(),
        theta: params.theta.clone(),
        c: params.c.clone(),
        mu: rows(&params.mu, k),
        delta: rows(&params.delta, k),
        emission: Emission {
            intercepts: params.emission.intercepts.clone(),
            coefficients: params.emission.coefficients.clone(),
        },
    };
    toml::to_string(&file).map_err(|e| Error::Params(e.to_string()))
}

pub fn params_from_str(text: &str) -> Result<ModelParams> {
    let file: ParamsFile = toml::from_str(text).map_err(|e| Error::Params(e.to_string()))?;
    let h = &file.header;
    if h.format != FORMAT {
        return Err(Error::Params(format!("unrecognized format `{}`", h.format)));
    }
    if h.version != VERSION {
        return Err(Error::Params(format!("unsupported version {} (expected {VERSION})", h.version)));
    }
    if h.model != MODEL_KIND {
        return Err(Error::Params(format!("model kind `{}` is not `{MODEL_KIND}`", h.model)));
    }
    let expected: Vec<&str> = PageCategory::ALL.iter().map(|p| p.name()).collect();
    if h.page_order != expected {
        return Err(Error::Params(format!("page_order {:?} does not match {expected:?}", h.page_order)));
    }
    let k = h.states;
    let square_ok = |m: &[Vec<f64>]| m.len() == k && m.iter().all(|r| r.len() == k);
    for (name, len) in [("pi", file.pi.len()), ("theta", file.theta.len()), ("c", file.c.len())] {
        if len != k {
            return Err(Error::Params(format!("header declares {k} states but `{name}` has {len} entries")));
        }
    }
    for (name, m) in [("mu", &file.mu), ("delta", &file.delta)] {
        if !square_ok(m) {
            return Err(Error::Params(format!("header declares {k} states but `{name}` is not {k} x {k}")));
        }
    }
    let covariates = h.covariates.iter().map(|c| c.parse::<CovariateKind>()).collect::<Result<Vec<_>, _>>()?;
    let params = ModelParams {
        pi: file.pi,
        theta: file.theta,
        c: file.c,
        mu: file.mu.concat(),
        delta: file.delta.concat(),
        emission: EmissionParams {
            k,
            covariates,
            demographic_dim: h.demographic_dim,
            intercepts: file.emission.intercepts,
            coefficients: file.emission.coefficients,
        },
    };
    params.validate()?;
    Ok(params)
}

pub fn write_params(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, params_to_string(params)?).map_err(|e| Error::io(path, e))
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    params_from_str(&text)
}
