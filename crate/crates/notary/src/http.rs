//! Blocking JSON/HTTP client for a remote notary.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use pits_core::{LogBatch, Receipt, ReceiptUpdate, TreeParams};

use crate::api::{
    endpoint, ApiError, AuditReport, AuditRequest, BatchAck, EpochRef, InconsistencyQuery, InconsistencyRecord,
    NotaryApi, NotaryError, ReceiptRequest, RootResponse, StartEpochRequest,
};

pub struct HttpNotary {
    base: String,
    agent: ureq::Agent,
}

impl HttpNotary {
    /// `base` is e.g. `http://127.0.0.1:7400`.
    pub fn new(base: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build();
        HttpNotary {
            base: base.into().trim_end_matches('/').to_owned(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(&self, name: &str, req: &Req) -> Result<Resp, ApiError> {
        let url = format!("{}/{}", self.base, name);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(req)
            .map_err(|e| ApiError::Transport(e.to_string()))?;
        let ok = resp.status().is_success();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ApiError::Transport(e.to_string()))?;
        if ok {
            serde_json::from_str(&body).map_err(|e| ApiError::Transport(format!("bad response: {e}")))
        } else {
            match serde_json::from_str::<NotaryError>(&body) {
                Ok(e) => Err(ApiError::Notary(e)),
                Err(_) => Err(ApiError::Transport(format!("HTTP {}: {body}", resp.status()))),
            }
        }
    }
}

impl NotaryApi for HttpNotary {
    fn params(&self) -> Result<TreeParams, ApiError> {
        self.call(endpoint::GET_PARAMS, &serde_json::json!({}))
    }
    fn submit_batch(&self, batch: &LogBatch) -> Result<BatchAck, ApiError> {
        self.call(endpoint::SUBMIT_BATCH, batch)
    }
    fn start_epoch(&self, req: &StartEpochRequest) -> Result<BatchAck, ApiError> {
        self.call(endpoint::START_EPOCH, req)
    }
    fn get_receipt(&self, req: &ReceiptRequest) -> Result<Receipt, ApiError> {
        self.call(endpoint::GET_RECEIPT, req)
    }
    fn get_update(&self, req: &EpochRef) -> Result<ReceiptUpdate, ApiError> {
        self.call(endpoint::GET_UPDATE, req)
    }
    fn get_root(&self, req: &EpochRef) -> Result<RootResponse, ApiError> {
        self.call(endpoint::GET_ROOT, req)
    }
    fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ApiError> {
        self.call(endpoint::AUDIT, req)
    }
    fn get_inconsistencies(&self, req: &InconsistencyQuery) -> Result<Vec<InconsistencyRecord>, ApiError> {
        self.call(endpoint::GET_INCONSISTENCIES, req)
    }
}
