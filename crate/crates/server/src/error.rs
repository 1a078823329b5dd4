use std::fmt;

use atelier_core::annotation::{SplitError, ViaError};
use atelier_core::insights::InsightsError;
use atelier_core::merge::MergeError;
use atelier_core::metrics::MetricsError;
use atelier_core::raster::RasterError;
use atelier_core::store::StoreError;
use atelier_core::transfer::TransferError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// The one error shape shared by HTTP responses and CLI failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Box<Value>>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NOT_FOUND: i32 = 3;
    pub const IO: i32 = 4;
}

impl ApiError {
    pub fn new(status: u16, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(Box::new(details));
        self
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(400, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(404, code, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(500, "IoError", message)
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::bad_request("InvalidRequest", message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            404 => exit::NOT_FOUND,
            400..=499 => exit::VALIDATION,
            _ => exit::IO,
        }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<MergeError> for ApiError {
    fn from(e: MergeError) -> Self {
        let status = match &e {
            MergeError::UnknownApparel(_) => 404,
            MergeError::Catalog(_) => 500,
            _ => 400,
        };
        let code = match &e {
            MergeError::Raster(r) => raster_code(r),
            other => other.code(),
        };
        let details = match &e {
            MergeError::MissingPart { apparel, part } => {
                Some(serde_json::json!({ "apparel_id": apparel, "part": part }))
            }
            MergeError::UnknownApparel(id) => Some(serde_json::json!({ "apparel_id": id })),
            _ => None,
        };
        Self {
            status,
            code: code.into(),
            message: e.to_string(),
            details: details.map(Box::new),
        }
    }
}

fn raster_code(e: &RasterError) -> &'static str {
    match e {
        RasterError::DimensionMismatch { .. } => "DimensionMismatch",
        RasterError::EmptyCanvas => "EmptyCanvas",
        RasterError::Png(_) => "InvalidImage",
        _ => "ValidationFailed",
    }
}

impl From<RasterError> for ApiError {
    fn from(e: RasterError) -> Self {
        Self::bad_request(raster_code(&e), e.to_string())
    }
}

impl From<TransferError> for ApiError {
    fn from(e: TransferError) -> Self {
        Self::bad_request(e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => 404,
            StoreError::ValidationFailed(_) => 400,
            StoreError::DuplicateId(_) => 409,
            StoreError::Integrity { .. } | StoreError::CorruptIndex(_) | StoreError::Io(_) => 500,
        };
        let details = match &e {
            StoreError::ValidationFailed(v) => Some(serde_json::json!({ "violations": v })),
            _ => None,
        };
        Self {
            status,
            code: e.code().into(),
            message: e.to_string(),
            details: details.map(Box::new),
        }
    }
}

impl From<ViaError> for ApiError {
    fn from(e: ViaError) -> Self {
        Self::bad_request(e.code(), e.to_string())
    }
}

impl From<InsightsError> for ApiError {
    fn from(e: InsightsError) -> Self {
        let code = match e {
            InsightsError::MissingHeader => "MissingHeader",
            InsightsError::Csv(_) => "MalformedCatalog",
        };
        Self::bad_request(code, e.to_string())
    }
}

impl From<SplitError> for ApiError {
    fn from(e: SplitError) -> Self {
        let code = match e {
            SplitError::EmptyInput => "EmptyInput",
            SplitError::InvalidRatios(..) => "InvalidRatios",
            SplitError::DuplicateId(_) => "DuplicateId",
        };
        Self::bad_request(code, e.to_string())
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Raster(r) => r.into(),
            other => Self::bad_request("EmptyUnion", other.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            Self::not_found("NotFound", e.to_string())
        } else {
            Self::io(e.to_string())
        }
    }
}
