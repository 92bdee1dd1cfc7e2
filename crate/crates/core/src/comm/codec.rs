//! MOP/1 framing: `"MOP1"`, a big-endian u32 body length, then a JSON body.

use std::io::{self, Read, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use super::Message;
use crate::value::{BasicValue, ValueTree};

pub const MAGIC: [u8; 4] = *b"MOP1";
pub const HEADER_LEN: usize = 8;
pub const MAX_BODY_LEN: usize = 16 * 1024 * 1024;

const ROOT_KEY: &str = "$";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot encode message: {0}")]
pub struct EncodeError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed frame: {0}")]
pub struct DecodeError(pub String);

fn encode_root(v: &BasicValue) -> Result<Value, EncodeError> {
    let tagged = |tag: &str, v: Value| Value::Object(Map::from_iter([(tag.to_owned(), v)]));
    Ok(match v {
        BasicValue::Empty => Value::Null,
        BasicValue::Int(i) => tagged("i", (*i).into()),
        BasicValue::Long(l) => tagged("l", (*l).into()),
        BasicValue::Double(d) => {
            let n = Number::from_f64(*d)
                .ok_or_else(|| EncodeError(format!("double {d} has no JSON form")))?;
            tagged("d", Value::Number(n))
        }
        BasicValue::Str(s) => Value::String(s.clone()),
        BasicValue::Bool(b) => Value::Bool(*b),
        BasicValue::Bytes(b) => tagged("b", Value::String(BASE64.encode(b))),
    })
}

fn encode_node(t: &ValueTree) -> Result<Value, EncodeError> {
    let mut obj = Map::new();
    obj.insert(ROOT_KEY.into(), encode_root(t.root())?);
    for (name, list) in t.children() {
        if name == ROOT_KEY {
            return Err(EncodeError(format!("child name `{ROOT_KEY}` is reserved")));
        }
        let items = list.iter().map(encode_node).collect::<Result<Vec<_>, _>>()?;
        obj.insert(name.clone(), Value::Array(items));
    }
    Ok(Value::Object(obj))
}

/// Encodes one complete frame.
pub fn encode_message(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    if msg.operation.is_empty() {
        return Err(EncodeError("operation name is empty".into()));
    }
    let mut body = Map::new();
    if let Some(f) = &msg.fault {
        body.insert("fault".into(), Value::String(f.clone()));
    }
    body.insert("op".into(), Value::String(msg.operation.clone()));
    body.insert("res".into(), Value::String(msg.resource.clone()));
    body.insert("val".into(), encode_node(&msg.payload)?);
    let json = serde_json::to_vec(&Value::Object(body)).map_err(|e| EncodeError(e.to_string()))?;
    if json.len() > MAX_BODY_LEN {
        return Err(EncodeError(format!(
            "body of {} bytes exceeds the {MAX_BODY_LEN} byte limit",
            json.len()
        )));
    }
    let mut frame = Vec::with_capacity(HEADER_LEN + json.len());
    frame.extend_from_slice(&MAGIC);
    frame.extend_from_slice(&(json.len() as u32).to_be_bytes());
    frame.extend_from_slice(&json);
    Ok(frame)
}

fn bad(msg: impl Into<String>) -> DecodeError {
    DecodeError(msg.into())
}

fn decode_root(v: &Value) -> Result<BasicValue, DecodeError> {
    match v {
        Value::Null => Ok(BasicValue::Empty),
        Value::String(s) => Ok(BasicValue::Str(s.clone())),
        Value::Bool(b) => Ok(BasicValue::Bool(*b)),
        Value::Object(obj) if obj.len() == 1 => {
            let (tag, inner) = obj.iter().next().unwrap();
            match (tag.as_str(), inner) {
                ("i", Value::Number(n)) => n
                    .as_i64()
                    .and_then(|i| i32::try_from(i).ok())
                    .map(BasicValue::Int)
                    .ok_or_else(|| bad(format!("int out of range: {n}"))),
                ("l", Value::Number(n)) => n
                    .as_i64()
                    .map(BasicValue::Long)
                    .ok_or_else(|| bad(format!("long out of range: {n}"))),
                ("d", Value::Number(n)) => n
                    .as_f64()
                    .map(BasicValue::Double)
                    .ok_or_else(|| bad(format!("bad double: {n}"))),
                ("b", Value::String(s)) => BASE64
                    .decode(s)
                    .map(BasicValue::Bytes)
                    .map_err(|e| bad(format!("bad base64: {e}"))),
                _ => Err(bad(format!("unknown value tag `{tag}`"))),
            }
        }
        other => Err(bad(format!("unsupported root value {other}"))),
    }
}

fn decode_node(v: &Value) -> Result<ValueTree, DecodeError> {
    let Value::Object(obj) = v else {
        return Err(bad("value node is not an object"));
    };
    let root = obj.get(ROOT_KEY).ok_or_else(|| bad("value node has no `$`"))?;
    let mut tree = ValueTree::leaf(decode_root(root)?);
    for (name, list) in obj {
        if name == ROOT_KEY {
            continue;
        }
        let Value::Array(items) = list else {
            return Err(bad(format!("children of `{name}` are not an array")));
        };
        if items.is_empty() {
            return Err(bad(format!("children of `{name}` are an empty array")));
        }
        let nodes = items.iter().map(decode_node).collect::<Result<Vec<_>, _>>()?;
        tree.set_children(name.clone(), nodes);
    }
    Ok(tree)
}

fn decode_body(body: &[u8]) -> Result<Message, DecodeError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| bad(format!("bad JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(bad("body is not an object"));
    };
    let string = |key: &str| match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(bad(format!("`{key}` is not a string"))),
        None => Err(bad(format!("missing `{key}`"))),
    };
    if let Some(k) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "fault" | "op" | "res" | "val"))
    {
        return Err(bad(format!("unknown key `{k}`")));
    }
    let operation = string("op")?;
    if operation.is_empty() {
        return Err(bad("operation name is empty"));
    }
    let fault = match obj.get("fault") {
        None => None,
        Some(_) => Some(string("fault")?),
    };
    let payload = decode_node(obj.get("val").ok_or_else(|| bad("missing `val`"))?)?;
    Ok(Message {
        resource: string("res")?,
        operation,
        payload,
        fault,
    })
}

fn body_len(header: &[u8]) -> Result<usize, DecodeError> {
    if header[..4] != MAGIC {
        return Err(bad(format!("bad magic {:02x?}", &header[..4])));
    }
    let n = u32::from_be_bytes(header[4..8].try_into().unwrap()) as usize;
    if n > MAX_BODY_LEN {
        return Err(bad(format!("body length {n} exceeds {MAX_BODY_LEN}")));
    }
    Ok(n)
}

/// Decodes exactly one frame; trailing or missing bytes are an error.
pub fn decode_message(bytes: &[u8]) -> Result<Message, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than a header", bytes.len())));
    }
    let n = body_len(&bytes[..HEADER_LEN])?;
    let actual = bytes.len() - HEADER_LEN;
    if actual != n {
        return Err(bad(format!("header announces {n} body bytes, frame has {actual}")));
    }
    decode_body(&bytes[HEADER_LEN..])
}

/// Reads one frame. `Ok(None)` on end of stream at a frame boundary.
/// Returns the message together with the frame length in bytes.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<(Message, usize)>, super::CommError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(bad("stream ended inside a frame header").into()),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let n = body_len(&header)?;
    let mut body = vec![0u8; n];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => bad("stream ended inside a frame body").into(),
        _ => super::CommError::Io(e),
    })?;
    Ok(Some((decode_body(&body)?, HEADER_LEN + n)))
}

/// Writes one frame and returns its length in bytes.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<usize, super::CommError> {
    let frame = encode_message(msg)?;
    w.write_all(&frame)?;
    w.flush()?;
    Ok(frame.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body_text(msg: &Message) -> String {
        String::from_utf8(encode_message(msg).unwrap()[HEADER_LEN..].to_vec()).unwrap()
    }

    #[test]
    fn minimal_ping() {
        let ping = Message::new("ping", ValueTree::new());
        assert_eq!(body_text(&ping), r#"{"op":"ping","res":"/","val":{"$":null}}"#);
        let frame = encode_message(&ping).unwrap();
        assert_eq!(&frame[..4], &[0x4D, 0x4F, 0x50, 0x31]);
        assert_eq!(u32::from_be_bytes(frame[4..8].try_into().unwrap()) as usize, frame.len() - 8);
        assert_eq!(decode_message(&frame).unwrap(), ping);
    }

    #[test]
    fn customer_request() {
        let customer = ValueTree::new()
            .with_child("name", "John Smith".into())
            .with_child("age", 25.into())
            .with_child("license", "B".into());
        let msg = Message::new("get_car", customer);
        let text = body_text(&msg);
        assert!(text.contains(r#""name":[{"$":"John Smith"}]"#), "{text}");
        assert!(text.contains(r#""age":[{"$":{"i":25}}]"#), "{text}");
        let back = decode_message(&encode_message(&msg).unwrap()).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.payload.child_list("license").len(), 1);
    }

    #[test]
    fn tags_and_fault_key_order() {
        let v = ValueTree::leaf(BasicValue::Long(-3))
            .with_child("d", 1.0.into())
            .with_child("b", BasicValue::Bytes(vec![0, 255]).into())
            .with_child("t", true.into());
        let msg = Message::fault("op", "TypeMismatch", v);
        assert_eq!(
            body_text(&msg),
            r#"{"fault":"TypeMismatch","op":"op","res":"/","val":{"$":{"l":-3},"b":[{"$":{"b":"AP8="}}],"d":[{"$":{"d":1.0}}],"t":[{"$":true}]}}"#
        );
        assert_eq!(decode_message(&encode_message(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn encode_errors() {
        assert!(encode_message(&Message::new("", ValueTree::new())).is_err());
        assert!(encode_message(&Message::new("x", f64::NAN.into())).is_err());
        let reserved = ValueTree::new().with_child("$", ValueTree::new());
        assert!(encode_message(&Message::new("x", reserved)).is_err());
    }

    fn frame_of(body: &str) -> Vec<u8> {
        let mut f = MAGIC.to_vec();
        f.extend_from_slice(&(body.len() as u32).to_be_bytes());
        f.extend_from_slice(body.as_bytes());
        f
    }

    #[test]
    fn decode_errors() {
        let good = encode_message(&Message::new("ping", ValueTree::new())).unwrap();
        assert!(decode_message(&good[..good.len() - 1]).is_err());
        assert!(decode_message(&good[..5]).is_err());
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(decode_message(&magic).is_err());
        let mut huge = good.clone();
        huge[4..8].copy_from_slice(&((MAX_BODY_LEN + 1) as u32).to_be_bytes());
        assert!(decode_message(&huge).is_err());
        for body in [
            r#"[]"#,
            r#"{"op":"x","res":"/"}"#,
            r#"{"op":"","res":"/","val":{"$":null}}"#,
            r#"{"op":"x","res":"/","val":{"$":{"q":1}}}"#,
            r#"{"op":"x","res":"/","val":{"$":{"i":3000000000}}}"#,
            r#"{"op":"x","res":"/","val":{"$":null,"a":[]}}"#,
            r#"{"op":"x","res":"/","val":{"$":null,"a":{"$":null}}}"#,
            r#"{"op":"x","res":"/","val":{"a":[]}}"#,
            r#"{"op":"x","res":"/","val":{"$":null},"extra":1}"#,
            r#"{"op":"x","res":"/","val":{"$":[1]}}"#,
            r#"{"op":"x","res":"/","val":{"$":{"b":"!!"}}}"#,
            "not json",
        ] {
            assert!(decode_message(&frame_of(body)).is_err(), "{body}");
        }
    }

    #[test]
    fn stream_of_frames() {
        let msgs: Vec<_> = (0..5)
            .map(|i| Message::new(format!("op{i}"), ValueTree::leaf(i)))
            .collect();
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut r = buf.as_slice();
        for m in &msgs {
            assert_eq!(&read_frame(&mut r).unwrap().unwrap().0, m);
        }
        assert!(read_frame(&mut r).unwrap().is_none());
        let mut cut = &buf[..buf.len() - 2];
        for _ in 0..4 {
            read_frame(&mut cut).unwrap();
        }
        assert!(read_frame(&mut cut).is_err());
    }
}
