//! Python bindings over the simulated core: scenario runs, the cost model,
//! the frame codec, and the percentile helper. Results cross the boundary
//! as plain dicts and lists mirroring the JSON the command line prints, so
//! anything scriptable against the CLI output works identically here.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use pfaas::costmodel::CostParams;
use pfaas::loadgen::{self, RunOptions, ScenarioSpec};
use pfaas::metrics;
use pfaas::n2proxy::{self, N2Frame};

fn json_to_py(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)?
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)?
            } else {
                n.as_f64()
                    .ok_or_else(|| PyValueError::new_err("non-finite number"))?
                    .into_py_any(py)?
            }
        }
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

fn py_to_json(value: &Bound<'_, PyAny>) -> PyResult<Value> {
    if value.is_none() {
        return Ok(Value::Null);
    }
    if value.is_instance_of::<PyBool>() {
        return Ok(Value::Bool(value.extract()?));
    }
    if let Ok(i) = value.extract::<i64>() {
        return Ok(Value::from(i));
    }
    if let Ok(u) = value.extract::<u64>() {
        return Ok(Value::from(u));
    }
    if let Ok(s) = value.extract::<String>() {
        return Ok(Value::String(s));
    }
    if let Ok(f) = value.extract::<f64>() {
        return serde_json::Number::from_f64(f)
            .map(Value::Number)
            .ok_or_else(|| PyValueError::new_err("non-finite number"));
    }
    if let Ok(list) = value.cast::<PyList>() {
        return list.iter().map(|item| py_to_json(&item)).collect();
    }
    if let Ok(tuple) = value.cast::<PyTuple>() {
        return tuple.iter().map(|item| py_to_json(&item)).collect();
    }
    if let Ok(dict) = value.cast::<PyDict>() {
        let mut map = serde_json::Map::new();
        for (key, item) in dict.iter() {
            map.insert(key.extract::<String>()?, py_to_json(&item)?);
        }
        return Ok(Value::Object(map));
    }
    Err(PyValueError::new_err(format!(
        "cannot convert {} to JSON",
        value.get_type().name()?
    )))
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

fn build_inputs(
    scenario: &str,
    calibration: Option<&str>,
    opts: RunOptions,
) -> PyResult<(ScenarioSpec, RunOptions)> {
    let mut spec =
        loadgen::resolve_scenario(scenario).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(name) = calibration {
        let cal = loadgen::calibration(name).ok_or_else(|| {
            let known: Vec<&str> = loadgen::CALIBRATIONS.iter().map(|c| c.name).collect();
            PyValueError::new_err(format!(
                "unknown calibration {name:?}; expected one of {}",
                known.join(", ")
            ))
        })?;
        spec.apply_calibration(cal);
    }
    Ok((spec, opts))
}

/// Scenario preset names, in rising load order.
#[pyfunction]
fn presets() -> Vec<String> {
    loadgen::PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Named radio and device timing profiles.
#[pyfunction]
fn calibrations(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &loadgen::CALIBRATIONS.to_vec())
}

/// The scenario a preset name or file path resolves to.
#[pyfunction]
fn scenario_spec(py: Python<'_>, name_or_path: &str) -> PyResult<Py<PyAny>> {
    let spec = loadgen::resolve_scenario(name_or_path)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &spec)
}

/// Function names in one registration chain, in invocation order.
#[pyfunction]
#[pyo3(signature = (r17 = false))]
fn registration_chain(r17: bool) -> Vec<String> {
    loadgen::registration_chain_functions(r17)
        .into_iter()
        .map(str::to_string)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_options(
    r17: bool,
    seed: u64,
    cold_storm: bool,
    idle_window_s: u64,
    cold_start_ms: u64,
    jitter_pct: f64,
    n4_nested: bool,
) -> RunOptions {
    RunOptions {
        r17,
        seed,
        cold_storm,
        idle_window_s,
        cold_start_ms,
        jitter_pct,
        n4_nested,
        subscribers: None,
        capture_state: false,
    }
}

/// Run a scenario and return its report as a dict.
#[pyfunction]
#[pyo3(signature = (
    scenario,
    *,
    r17 = false,
    seed = 42,
    cold_storm = false,
    idle_window_s = 60,
    cold_start_ms = 4000,
    jitter_pct = 0.0,
    n4_nested = false,
    calibration = None,
    platform_mb = pfaas::costmodel::DEFAULT_PLATFORM_MB,
))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    scenario: &str,
    r17: bool,
    seed: u64,
    cold_storm: bool,
    idle_window_s: u64,
    cold_start_ms: u64,
    jitter_pct: f64,
    n4_nested: bool,
    calibration: Option<&str>,
    platform_mb: f64,
) -> PyResult<Py<PyAny>> {
    let opts = run_options(
        r17,
        seed,
        cold_storm,
        idle_window_s,
        cold_start_ms,
        jitter_pct,
        n4_nested,
    );
    let (spec, opts) = build_inputs(scenario, calibration, opts)?;
    let result =
        loadgen::run_scenario(&spec, &opts).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &result.report(platform_mb))
}

/// Run a scenario and return the complete result: procedure records, the
/// invocation ledger, replica periods, and final replica counts.
#[pyfunction]
#[pyo3(signature = (
    scenario,
    *,
    r17 = false,
    seed = 42,
    cold_storm = false,
    idle_window_s = 60,
    cold_start_ms = 4000,
    jitter_pct = 0.0,
    n4_nested = false,
    calibration = None,
    capture_state = false,
))]
#[allow(clippy::too_many_arguments)]
fn run_result(
    py: Python<'_>,
    scenario: &str,
    r17: bool,
    seed: u64,
    cold_storm: bool,
    idle_window_s: u64,
    cold_start_ms: u64,
    jitter_pct: f64,
    n4_nested: bool,
    calibration: Option<&str>,
    capture_state: bool,
) -> PyResult<Py<PyAny>> {
    let mut opts = run_options(
        r17,
        seed,
        cold_storm,
        idle_window_s,
        cold_start_ms,
        jitter_pct,
        n4_nested,
    );
    opts.capture_state = capture_state;
    let (spec, opts) = build_inputs(scenario, calibration, opts)?;
    let result =
        loadgen::run_scenario(&spec, &opts).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &result)
}

/// Compare deployment memory costs and return the summary as a dict.
#[pyfunction]
#[pyo3(signature = (
    *,
    ma = pfaas::costmodel::DEFAULT_ALWAYS_ON_MB,
    mp = pfaas::costmodel::DEFAULT_PLATFORM_MB,
    mf = pfaas::costmodel::DEFAULT_FUNCTIONS_MB,
    ms = pfaas::costmodel::DEFAULT_FULL_CORE_MB,
    mi = pfaas::costmodel::DEFAULT_IDLE_FLOOR_MB,
    g = pfaas::costmodel::DEFAULT_PER_INVOCATION_GB_S,
    lambda_per_s = 0.0,
    duty = 0.33,
    tenants = 1,
    horizon_s = 1.0,
))]
#[allow(clippy::too_many_arguments)]
fn cost_summary(
    py: Python<'_>,
    ma: f64,
    mp: f64,
    mf: f64,
    ms: f64,
    mi: f64,
    g: f64,
    lambda_per_s: f64,
    duty: f64,
    tenants: u32,
    horizon_s: f64,
) -> PyResult<Py<PyAny>> {
    let params = CostParams {
        ms_mb: ms,
        mp_mb: mp,
        mf_mb: mf,
        ma_mb: ma,
        mi_mb: mi,
        g_gb_s: g,
        lambda_per_s,
        duty,
        tenants,
        horizon_s,
    };
    let summary = params
        .summarize()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &summary)
}

/// Decode a hex-encoded frame into a message dict.
#[pyfunction]
fn decode_frame(py: Python<'_>, frame_hex: &str) -> PyResult<Py<PyAny>> {
    let bytes = hex::decode(frame_hex.trim())
        .map_err(|e| PyValueError::new_err(format!("invalid hex: {e}")))?;
    let frame =
        N2Frame::decode(&bytes).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &n2proxy::frame_to_dto(&frame))
}

/// Encode a message dict into a hex frame.
#[pyfunction]
fn encode_frame(message: &Bound<'_, PyAny>) -> PyResult<String> {
    let json = py_to_json(message)?;
    let dto: n2proxy::FrameDto = serde_json::from_value(json)
        .map_err(|e| PyValueError::new_err(format!("invalid message: {e}")))?;
    let frame =
        n2proxy::dto_to_frame(&dto).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let bytes = frame
        .encode()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(hex::encode(bytes))
}

/// Nearest-rank percentile of microsecond samples.
#[pyfunction]
fn percentile(samples: Vec<u64>, p: f64) -> u64 {
    metrics::percentile_us(&samples, p)
}

#[pymodule]
fn pfaas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(calibrations, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_spec, m)?)?;
    m.add_function(wrap_pyfunction!(registration_chain, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_result, m)?)?;
    m.add_function(wrap_pyfunction!(cost_summary, m)?)?;
    m.add_function(wrap_pyfunction!(decode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    Ok(())
}
