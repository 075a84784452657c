use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EngineError;
use crate::dsl::TypeTag;

/// A runtime value: opaque bytes with a type tag and an accounting size.
///
/// `size_mb` drives transfer costs and may exceed the encoded length, which
/// lets experiments emulate large payloads with small encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct Datum {
    pub ty: TypeTag,
    pub size_mb: f64,
    pub payload: Vec<u8>,
}

impl Datum {
    /// Canonical decimal encoding.
    pub fn int(value: i64, size_mb: f64) -> Self {
        Self {
            ty: TypeTag::Int,
            size_mb,
            payload: value.to_string().into_bytes(),
        }
    }

    pub fn string(value: &str, size_mb: f64) -> Self {
        Self {
            ty: TypeTag::String,
            size_mb,
            payload: value.as_bytes().to_vec(),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        std::str::from_utf8(&self.payload).ok()?.parse().ok()
    }

    pub fn as_text(&self) -> Option<&str> {
        std::str::from_utf8(&self.payload).ok()
    }

    /// Parses `text` according to `ty`. `any` keeps the raw text.
    pub fn parse(ty: TypeTag, text: &str, size_mb: f64) -> Result<Self, EngineError> {
        match ty {
            TypeTag::Int => text
                .trim()
                .parse::<i64>()
                .map(|v| Datum::int(v, size_mb))
                .map_err(|_| EngineError::BadValue(format!("{text:?} is not an int"))),
            TypeTag::String => Ok(Datum::string(text, size_mb)),
            TypeTag::Any => Ok(Datum {
                ty: TypeTag::Any,
                size_mb,
                payload: text.as_bytes().to_vec(),
            }),
        }
    }

    /// Human-readable rendering for reports and the CLI.
    pub fn render(&self) -> String {
        match std::str::from_utf8(&self.payload) {
            Ok(s) if self.ty == TypeTag::String => format!("{s:?}"),
            Ok(s) => s.to_string(),
            Err(_) => format!("<{} bytes>", self.payload.len()),
        }
    }
}

/// One dataflow value in flight between engines.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEnvelope {
    /// Base uid of the workflow execution the value belongs to.
    pub uid: String,
    pub variable: String,
    pub datum: Datum,
}

#[derive(Serialize, Deserialize)]
struct EnvelopeWire {
    uid: String,
    variable: String,
    #[serde(rename = "type")]
    ty: TypeTag,
    size_mb: f64,
    payload_b64: String,
}

impl Serialize for ValueEnvelope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EnvelopeWire {
            uid: self.uid.clone(),
            variable: self.variable.clone(),
            ty: self.datum.ty,
            size_mb: self.datum.size_mb,
            payload_b64: STANDARD.encode(&self.datum.payload),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValueEnvelope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = EnvelopeWire::deserialize(d)?;
        let payload = STANDARD
            .decode(w.payload_b64.as_bytes())
            .map_err(serde::de::Error::custom)?;
        Ok(ValueEnvelope {
            uid: w.uid,
            variable: w.variable,
            datum: Datum {
                ty: w.ty,
                size_mb: w.size_mb,
                payload,
            },
        })
    }
}

/// Messages exchanged between engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum WireMessage {
    Deploy { spec_text: String },
    Value { envelope: ValueEnvelope },
    Ack { id: String },
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire message serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::BadValue(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_json_shape() {
        let env = ValueEnvelope {
            uid: "618e.1".into(),
            variable: "c".into(),
            datum: Datum::int(42, 3.5),
        };
        let json = serde_json::to_value(&env).unwrap();
        assert_eq!(json["type"], "int");
        assert_eq!(json["size_mb"], 3.5);
        assert_eq!(json["payload_b64"], "NDI=");
        let back: ValueEnvelope = serde_json::from_value(json).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.datum.as_int(), Some(42));
    }

    #[test]
    fn wire_round_trip() {
        let msgs = [
            WireMessage::Deploy { spec_text: "workflow w\n".into() },
            WireMessage::Value {
                envelope: ValueEnvelope {
                    uid: "u".into(),
                    variable: "s".into(),
                    datum: Datum::string("hi", 0.0),
                },
            },
            WireMessage::Ack { id: "7".into() },
        ];
        for m in msgs {
            let text = m.to_json();
            assert_eq!(WireMessage::from_json(&text).unwrap(), m);
        }
        assert!(WireMessage::Deploy { spec_text: String::new() }.to_json().contains("\"DEPLOY\""));
    }

    #[test]
    fn parse_by_type() {
        assert_eq!(Datum::parse(TypeTag::Int, " 5", 1.0).unwrap().as_int(), Some(5));
        assert!(Datum::parse(TypeTag::Int, "five", 1.0).is_err());
        assert_eq!(Datum::parse(TypeTag::String, "five", 0.0).unwrap().render(), "\"five\"");
    }
}
