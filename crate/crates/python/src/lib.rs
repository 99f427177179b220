//! Python module `ncilab`: calculators, the dataset generator, the algebra
//! suite and the command-line dispatcher.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nci_lab::config::LabConfig;
use nci_lab::divergence::{self, BoundInputs, HypothesisFamily};
use nci_lab::experiments::benchmark_dataset;

fn to_py(e: nci_lab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Smallest sample count `M` with `(ln|T| + ln(1/delta)) / M <= epsilon`.
#[pyfunction]
fn haussler_sample_complexity(hypotheses: u64, delta: f64, epsilon: f64) -> PyResult<u64> {
    divergence::haussler_sample_complexity(hypotheses, delta, epsilon).map_err(to_py)
}

#[pyfunction]
fn target_risk_bound(r_s: f64, n: f64, d: f64, delta: f64, beta: f64, d_hat: f64) -> PyResult<f64> {
    divergence::target_risk_bound(&BoundInputs {
        r_s,
        n,
        d,
        delta,
        beta,
        d_hat,
    })
    .map_err(to_py)
}

/// Exact divergence over every axis threshold the two point sets induce.
#[pyfunction]
fn exact_h_divergence(source: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    let family = HypothesisFamily::from_data(&[&source, &target]).map_err(to_py)?;
    Ok(divergence::exact_h_divergence(&source, &target, &family)
        .map_err(to_py)?
        .d_hat)
}

/// `(features, labels, domain names, support ids)` for the `[dataset]`
/// section of `config_toml`, or the benchmark dataset when absent.
#[pyfunction]
#[pyo3(signature = (config_toml=None))]
#[allow(clippy::type_complexity)]
fn generate_dataset(
    config_toml: Option<&str>,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, Vec<String>, Vec<u64>)> {
    let config = match config_toml {
        Some(text) => LabConfig::from_toml_str(text).map_err(to_py)?,
        None => LabConfig::default(),
    };
    let dc = config.dataset.unwrap_or_else(|| benchmark_dataset(0));
    let ds = nci_lab::synth::generate(&dc).map_err(to_py)?;
    let names = ds
        .domain_names()
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    Ok((
        ds.samples.iter().map(|s| s.features.clone()).collect(),
        ds.samples.iter().map(|s| s.label).collect(),
        ds.samples.iter().map(|s| names[s.domain].clone()).collect(),
        ds.samples.iter().map(|s| s.support_id).collect(),
    ))
}

/// `(as_expected, report text)` for the default algebra suite.
#[pyfunction]
#[pyo3(signature = (random_triples=1000, seed=0))]
fn algebra_check(random_triples: usize, seed: u64) -> PyResult<(bool, String)> {
    let r = nci_lab::algebra::algebra_suite(random_triples, seed).map_err(to_py)?;
    Ok((r.as_expected(), r.to_text()))
}

/// Runs the command line with `argv` (without the program name) and
/// returns its exit code.
#[pyfunction]
fn run(argv: Vec<String>) -> i32 {
    nci_lab_cli::dispatch(std::iter::once("ncilab".to_string()).chain(argv))
}

#[pymodule]
fn ncilab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(haussler_sample_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(target_risk_bound, m)?)?;
    m.add_function(wrap_pyfunction!(exact_h_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(algebra_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
