//! Report encoding: JSON with sorted keys and 12 significant digits,
//! non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`, and CSV series.

use std::path::Path;

use serde::ser::{self, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().expect("formatted float parses")
}

/// Decimal text of `v` with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(v);
    if r == 0.0 {
        return "0".into();
    }
    let exp = r.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        let s = format!("{r:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, r);
        let (m, e) = s.split_once('e').expect("exponent form");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        format!("{m}e{e}")
    }
}

fn float_value(v: f64) -> Value {
    match Number::from_f64(round_sig(v)) {
        Some(n) => Value::Number(n),
        None => Value::String(format_float(v)),
    }
}

/// Encode any serializable value into a JSON tree, keeping non-finite floats.
pub fn to_value<T: Serialize + ?Sized>(v: &T) -> Result<Value> {
    v.serialize(ValueSerializer)
        .map_err(|e| Error::Invariant(format!("report encoding failed: {e}")))
}

/// Pretty JSON text; keys come out sorted because `serde_json::Map` is ordered.
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always encode");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::Io)
}

/// A CSV series with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvCell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvTable {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        CsvTable {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<CsvCell>) {
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let enc = |e: csv::Error| Error::Invariant(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(enc)?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    CsvCell::Int(i) => i.to_string(),
                    CsvCell::Float(f) => format_float(*f),
                    CsvCell::Text(t) => t.clone(),
                })
                .collect();
            w.write_record(&cells).map_err(enc)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invariant(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug)]
pub struct EncodeError(String);

impl std::fmt::Display for EncodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for EncodeError {}

impl ser::Error for EncodeError {
    fn custom<T: std::fmt::Display>(msg: T) -> Self {
        EncodeError(msg.to_string())
    }
}

type EncodeResult = std::result::Result<Value, EncodeError>;

struct ValueSerializer;

fn key_string(v: Value) -> std::result::Result<String, EncodeError> {
    match v {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(EncodeError(format!("unsupported map key {other}"))),
    }
}

impl ser::Serializer for ValueSerializer {
    type Ok = Value;
    type Error = EncodeError;
    type SerializeSeq = SeqBuilder;
    type SerializeTuple = SeqBuilder;
    type SerializeTupleStruct = SeqBuilder;
    type SerializeTupleVariant = VariantSeqBuilder;
    type SerializeMap = MapBuilder;
    type SerializeStruct = MapBuilder;
    type SerializeStructVariant = VariantMapBuilder;

    fn serialize_bool(self, v: bool) -> EncodeResult {
        Ok(Value::Bool(v))
    }
    fn serialize_i8(self, v: i8) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_i16(self, v: i16) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_i32(self, v: i32) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_i64(self, v: i64) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_i128(self, v: i128) -> EncodeResult {
        Ok(i64::try_from(v).map(Value::from).unwrap_or_else(|_| Value::String(v.to_string())))
    }
    fn serialize_u8(self, v: u8) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_u16(self, v: u16) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_u32(self, v: u32) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_u64(self, v: u64) -> EncodeResult {
        Ok(Value::from(v))
    }
    fn serialize_u128(self, v: u128) -> EncodeResult {
        Ok(u64::try_from(v).map(Value::from).unwrap_or_else(|_| Value::String(v.to_string())))
    }
    fn serialize_f32(self, v: f32) -> EncodeResult {
        Ok(float_value(v as f64))
    }
    fn serialize_f64(self, v: f64) -> EncodeResult {
        Ok(float_value(v))
    }
    fn serialize_char(self, v: char) -> EncodeResult {
        Ok(Value::String(v.to_string()))
    }
    fn serialize_str(self, v: &str) -> EncodeResult {
        Ok(Value::String(v.to_string()))
    }
    fn serialize_bytes(self, v: &[u8]) -> EncodeResult {
        Ok(Value::Array(v.iter().map(|b| Value::from(*b)).collect()))
    }
    fn serialize_none(self) -> EncodeResult {
        Ok(Value::Null)
    }
    fn serialize_some<T: Serialize + ?Sized>(self, v: &T) -> EncodeResult {
        v.serialize(self)
    }
    fn serialize_unit(self) -> EncodeResult {
        Ok(Value::Null)
    }
    fn serialize_unit_struct(self, _: &'static str) -> EncodeResult {
        Ok(Value::Null)
    }
    fn serialize_unit_variant(self, _: &'static str, _: u32, variant: &'static str) -> EncodeResult {
        Ok(Value::String(variant.to_string()))
    }
    fn serialize_newtype_struct<T: Serialize + ?Sized>(self, _: &'static str, v: &T) -> EncodeResult {
        v.serialize(self)
    }
    fn serialize_newtype_variant<T: Serialize + ?Sized>(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        v: &T,
    ) -> EncodeResult {
        let mut m = Map::new();
        m.insert(variant.to_string(), v.serialize(ValueSerializer)?);
        Ok(Value::Object(m))
    }
    fn serialize_seq(self, len: Option<usize>) -> std::result::Result<SeqBuilder, EncodeError> {
        Ok(SeqBuilder(Vec::with_capacity(len.unwrap_or(0))))
    }
    fn serialize_tuple(self, len: usize) -> std::result::Result<SeqBuilder, EncodeError> {
        self.serialize_seq(Some(len))
    }
    fn serialize_tuple_struct(self, _: &'static str, len: usize) -> std::result::Result<SeqBuilder, EncodeError> {
        self.serialize_seq(Some(len))
    }
    fn serialize_tuple_variant(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        len: usize,
    ) -> std::result::Result<VariantSeqBuilder, EncodeError> {
        Ok(VariantSeqBuilder(variant, Vec::with_capacity(len)))
    }
    fn serialize_map(self, _: Option<usize>) -> std::result::Result<MapBuilder, EncodeError> {
        Ok(MapBuilder(Map::new(), None))
    }
    fn serialize_struct(self, _: &'static str, _: usize) -> std::result::Result<MapBuilder, EncodeError> {
        Ok(MapBuilder(Map::new(), None))
    }
    fn serialize_struct_variant(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        _: usize,
    ) -> std::result::Result<VariantMapBuilder, EncodeError> {
        Ok(VariantMapBuilder(variant, Map::new()))
    }
}

struct SeqBuilder(Vec<Value>);

impl ser::SerializeSeq for SeqBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, v: &T) -> std::result::Result<(), EncodeError> {
        self.0.push(v.serialize(ValueSerializer)?);
        Ok(())
    }
    fn end(self) -> EncodeResult {
        Ok(Value::Array(self.0))
    }
}

impl ser::SerializeTuple for SeqBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, v: &T) -> std::result::Result<(), EncodeError> {
        ser::SerializeSeq::serialize_element(self, v)
    }
    fn end(self) -> EncodeResult {
        ser::SerializeSeq::end(self)
    }
}

impl ser::SerializeTupleStruct for SeqBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, v: &T) -> std::result::Result<(), EncodeError> {
        ser::SerializeSeq::serialize_element(self, v)
    }
    fn end(self) -> EncodeResult {
        ser::SerializeSeq::end(self)
    }
}

struct VariantSeqBuilder(&'static str, Vec<Value>);

impl ser::SerializeTupleVariant for VariantSeqBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, v: &T) -> std::result::Result<(), EncodeError> {
        self.1.push(v.serialize(ValueSerializer)?);
        Ok(())
    }
    fn end(self) -> EncodeResult {
        let mut m = Map::new();
        m.insert(self.0.to_string(), Value::Array(self.1));
        Ok(Value::Object(m))
    }
}

struct MapBuilder(Map<String, Value>, Option<String>);

impl ser::SerializeMap for MapBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_key<T: Serialize + ?Sized>(&mut self, k: &T) -> std::result::Result<(), EncodeError> {
        self.1 = Some(key_string(k.serialize(ValueSerializer)?)?);
        Ok(())
    }
    fn serialize_value<T: Serialize + ?Sized>(&mut self, v: &T) -> std::result::Result<(), EncodeError> {
        let key = self.1.take().ok_or_else(|| EncodeError("map value without key".into()))?;
        self.0.insert(key, v.serialize(ValueSerializer)?);
        Ok(())
    }
    fn end(self) -> EncodeResult {
        Ok(Value::Object(self.0))
    }
}

impl ser::SerializeStruct for MapBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, v: &T) -> std::result::Result<(), EncodeError> {
        self.0.insert(key.to_string(), v.serialize(ValueSerializer)?);
        Ok(())
    }
    fn end(self) -> EncodeResult {
        Ok(Value::Object(self.0))
    }
}

struct VariantMapBuilder(&'static str, Map<String, Value>);

impl ser::SerializeStructVariant for VariantMapBuilder {
    type Ok = Value;
    type Error = EncodeError;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, v: &T) -> std::result::Result<(), EncodeError> {
        self.1.insert(key.to_string(), v.serialize(ValueSerializer)?);
        Ok(())
    }
    fn end(self) -> EncodeResult {
        let mut m = Map::new();
        m.insert(self.0.to_string(), Value::Object(self.1));
        Ok(Value::Object(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde::Serialize;
    use std::collections::BTreeMap;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: Vec<f64>,
        nested: BTreeMap<usize, &'static str>,
        tag: Option<u8>,
    }

    #[test]
    fn nonfinite_and_sorted() {
        let v = to_value(&Sample {
            zeta: f64::NEG_INFINITY,
            alpha: vec![1.0 / 3.0, f64::INFINITY, f64::NAN],
            nested: BTreeMap::from([(10, "b"), (2, "a")]),
            tag: None,
        })
        .unwrap();
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(
            text,
            r#"{"alpha":[0.333333333333,"inf","nan"],"nested":{"10":"b","2":"a"},"tag":null,"zeta":"-inf"}"#
        );
    }

    #[test]
    fn float_text() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(std::f64::consts::E), "2.71828182846");
        assert_eq!(format_float(1.0e-9), "1e-9");
        assert_eq!(format_float(123456789012345.0), "123456789012000");
        assert_eq!(format_float(1.5e20), "1.5e20");
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = CsvTable::new("s", &["n", "q", "e_n"]);
        t.push(vec![CsvCell::Int(16), CsvCell::Int(1), CsvCell::Float(0.125)]);
        t.push(vec![CsvCell::Int(32), CsvCell::Int(1), CsvCell::Float(f64::NEG_INFINITY)]);
        assert_eq!(t.to_csv_string().unwrap(), "n,q,e_n\n16,1,0.125\n32,1,-inf\n");
    }

    proptest! {
        #[test]
        fn rounding_is_within_twelve_digits(v in -1e12f64..1e12) {
            let r = round_sig(v);
            prop_assert!((r - v).abs() <= v.abs() * 1e-11);
            prop_assert_eq!(round_sig(r), r);
            let parsed: f64 = format_float(v).parse().unwrap();
            prop_assert!((parsed - r).abs() <= r.abs() * 1e-15);
        }
    }
}
