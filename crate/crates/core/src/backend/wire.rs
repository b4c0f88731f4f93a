//! Chat-completions request body.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::Serialize;
use serde_json::{json, Value};

use super::{BackendError, BackendErrorKind, DecodingParams, ResponseMode, VisionRequest, DEFAULT_IMAGE_CAP_BYTES};
use crate::schema::{Category, FdiTooth};

/// JSON-schema response format describing the structured record.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaDescriptor {
    pub name: String,
    pub schema: Value,
}

impl SchemaDescriptor {
    /// Descriptor generated from the schema vocabulary table.
    pub fn cyst_analysis() -> Self {
        let mut properties = serde_json::Map::new();
        for category in Category::enumerated() {
            properties.insert(category.key().into(), json!({ "type": "string", "enum": category.vocabulary() }));
        }
        let teeth: Vec<String> = FdiTooth::all().map(|t| t.to_string()).collect();
        properties.insert(
            Category::AffectedTeeth.key().into(),
            json!({ "type": "array", "items": { "type": "string", "enum": teeth }, "minItems": 1 }),
        );
        let required: Vec<&str> = Category::ALL.iter().map(|c| c.key()).collect();
        SchemaDescriptor {
            name: "CystAnalysis".into(),
            schema: json!({
                "type": "object",
                "properties": properties,
                "required": required,
                "additionalProperties": false,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WireRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_format: Option<Value>,
}

impl WireRequest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WireMessage {
    pub role: &'static str,
    pub content: WireContent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum WireContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageUrl {
    pub url: String,
}

pub fn build_wire_request(request: &VisionRequest, model_id: &str) -> Result<WireRequest, BackendError> {
    build_wire_request_capped(request, model_id, DEFAULT_IMAGE_CAP_BYTES)
}

pub fn build_wire_request_capped(
    request: &VisionRequest,
    model_id: &str,
    image_cap_bytes: usize,
) -> Result<WireRequest, BackendError> {
    let mut parts = vec![ContentPart::Text { text: request.user_text.clone() }];
    if let Some(image) = &request.image {
        if image.bytes.len() > image_cap_bytes {
            return Err(BackendError::new(
                BackendErrorKind::OversizedImage,
                format!("{} bytes exceeds cap of {image_cap_bytes}", image.bytes.len()),
            ));
        }
        let url = format!("data:{};base64,{}", image.media_type, STANDARD.encode(&image.bytes));
        parts.push(ContentPart::ImageUrl { image_url: ImageUrl { url } });
    }

    let response_format = match &request.response_mode {
        ResponseMode::FreeText => None,
        ResponseMode::JsonConstrained(descriptor) => Some(json!({
            "type": "json_schema",
            "json_schema": { "name": descriptor.name, "strict": true, "schema": descriptor.schema },
        })),
    };

    let DecodingParams { temperature, top_p, max_tokens, frequency_penalty, presence_penalty } = request.params;
    Ok(WireRequest {
        model: model_id.to_string(),
        messages: vec![
            WireMessage { role: "system", content: WireContent::Text(request.system_text.clone()) },
            WireMessage { role: "user", content: WireContent::Parts(parts) },
        ],
        temperature,
        top_p,
        max_tokens,
        frequency_penalty,
        presence_penalty,
        response_format,
    })
}
