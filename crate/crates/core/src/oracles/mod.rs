//! Independent reference implementations for verification.
//!
//! Nothing here is used on the propagation path, and nothing here calls the
//! closed-form integral or matrix-assembly code it is meant to check, except
//! `report`, which sets the two side by side.

pub mod closed_form;
pub mod fd;
pub mod quadrature;
pub mod report;

use serde::{Deserialize, Serialize};

/// Reference value(s) with an error estimate and a description of the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub values: Vec<f64>,
    pub error: f64,
    pub method: String,
}

impl OracleResult {
    pub fn scalar(value: f64, error: f64, method: impl Into<String>) -> Self {
        OracleResult {
            values: vec![value],
            error,
            method: method.into(),
        }
    }

    pub fn value(&self) -> f64 {
        self.values[0]
    }
}
