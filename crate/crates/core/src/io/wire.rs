//! JSON-lines stream files.
//!
//! Line 1 is a header naming the format version, stream kind and coordinate
//! frame. Every following line is one [`FrameRecord`]:
//!
//! ```text
//! {"format":"obtrack-stream","version":1,"kind":"detections","frame":"sensor"}
//! {"t":0.0,"robot":{"x":0.0,"y":0.0,"heading":0.0},"boxes":[{"class":"MW","cx":2.5,...,"score":0.9}]}
//! ```
//!
//! Box ids are written when present, scores only for detection streams.
//! Angles are radians.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{ClassId, OrientedBox, PlanarPose};
use crate::stream::{CoordFrame, FrameRecord, LabeledBox, Stream, StreamKind};

pub const FORMAT_NAME: &str = "obtrack-stream";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
    version: u64,
    kind: &'a str,
    frame: &'a str,
}

#[derive(Serialize)]
struct WireRobot {
    x: f64,
    y: f64,
    heading: f64,
}

#[derive(Serialize)]
struct WireBox<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    class: &'a str,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

#[derive(Serialize)]
struct WireRecord<'a> {
    t: f64,
    robot: WireRobot,
    boxes: Vec<WireBox<'a>>,
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("wire structs serialize infallibly")
}

/// Canonical text of a stream, newline-terminated.
pub fn write_stream(stream: &Stream) -> String {
    let mut out = to_line(&Header {
        format: FORMAT_NAME,
        version: FORMAT_VERSION,
        kind: stream.kind.as_str(),
        frame: stream.frame.as_str(),
    });
    out.push('\n');
    let with_score = stream.kind == StreamKind::Detections;
    for rec in &stream.records {
        let boxes = rec
            .boxes
            .iter()
            .map(|b| {
                let e = b.bbox.extent();
                WireBox {
                    id: b.id,
                    class: b.bbox.class_id.as_str(),
                    cx: b.bbox.center[0],
                    cy: b.bbox.center[1],
                    cz: b.bbox.center[2],
                    l: e[0],
                    w: e[1],
                    h: e[2],
                    yaw: b.bbox.yaw(),
                    score: with_score.then(|| b.bbox.confidence()),
                }
            })
            .collect();
        out.push_str(&to_line(&WireRecord {
            t: rec.timestamp,
            robot: WireRobot {
                x: rec.robot.x,
                y: rec.robot.y,
                heading: rec.robot.heading(),
            },
            boxes,
        }));
        out.push('\n');
    }
    out
}

struct Fields<'a> {
    line: usize,
    prefix: String,
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, prefix: String, value: &'a Value) -> Result<Self> {
        match value.as_object() {
            Some(map) => Ok(Self { line, prefix, map }),
            None => Err(Error::Parse {
                line,
                field: if prefix.is_empty() { "<record>".into() } else { prefix },
                message: "expected a JSON object".into(),
            }),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            field: self.path(key),
            message: message.into(),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "unknown field")),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.map.get(key).ok_or_else(|| self.err(key, "missing field"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key)?.as_f64() {
            Some(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(key, "expected a finite number")),
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.map.contains_key(key) {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn opt_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected a non-negative integer")),
        }
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| self.err(key, "expected a string"))
    }
}

fn parse_header(line: usize, text: &str) -> Result<(StreamKind, CoordFrame)> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        field: "<header>".into(),
        message: e.to_string(),
    })?;
    let f = Fields::new(line, String::new(), &value)?;
    f.only(&["format", "version", "kind", "frame"])?;
    if f.str("format")? != FORMAT_NAME {
        return Err(f.err("format", format!("expected \"{FORMAT_NAME}\"")));
    }
    match f.opt_u64("version")? {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(f.err("version", format!("unsupported version {v}"))),
        None => return Err(f.err("version", "missing field")),
    }
    let kind = match f.str("kind")? {
        "ground_truth" => StreamKind::GroundTruth,
        "detections" => StreamKind::Detections,
        "tracklets" => StreamKind::Tracklets,
        other => return Err(f.err("kind", format!("unknown stream kind `{other}`"))),
    };
    let frame = match f.str("frame")? {
        "map" => CoordFrame::Map,
        "sensor" => CoordFrame::Sensor,
        other => return Err(f.err("frame", format!("unknown frame `{other}`"))),
    };
    Ok((kind, frame))
}

fn parse_box(line: usize, index: usize, value: &Value) -> Result<LabeledBox> {
    let f = Fields::new(line, format!("boxes[{index}]"), value)?;
    f.only(&["id", "class", "cx", "cy", "cz", "l", "w", "h", "yaw", "score"])?;
    let class: ClassId = f
        .str("class")?
        .parse()
        .map_err(|e: Error| f.err("class", e.to_string()))?;
    let bbox = OrientedBox::new(
        [f.f64("cx")?, f.f64("cy")?, f.f64("cz")?],
        [f.f64("l")?, f.f64("w")?, f.f64("h")?],
        f.f64("yaw")?,
        class,
    )
    .map_err(|e| f.err("l", e.to_string()))?;
    let bbox = match f.opt_f64("score")? {
        Some(s) => bbox
            .with_confidence(s)
            .map_err(|e| f.err("score", e.to_string()))?,
        None => bbox,
    };
    Ok(LabeledBox {
        id: f.opt_u64("id")?,
        bbox,
    })
}

fn parse_record(line: usize, text: &str) -> Result<FrameRecord> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let f = Fields::new(line, String::new(), &value)?;
    f.only(&["t", "robot", "boxes"])?;
    let t = f.f64("t")?;
    let r = Fields::new(line, "robot".into(), f.get("robot")?)?;
    r.only(&["x", "y", "heading"])?;
    let robot = PlanarPose::new(r.f64("x")?, r.f64("y")?, r.f64("heading")?, t);
    let boxes = f
        .get("boxes")?
        .as_array()
        .ok_or_else(|| f.err("boxes", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, b)| parse_box(line, i, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameRecord {
        timestamp: t,
        robot,
        boxes,
    })
}

/// Parses a stream file. Line numbers in errors are 1-based; blank lines
/// are ignored.
pub fn parse_stream(text: &str) -> Result<Stream> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((n, header)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            field: "<header>".into(),
            message: "empty stream file".into(),
        });
    };
    let (kind, frame) = parse_header(n, header)?;
    let mut stream = Stream::new(kind, frame);
    for (n, text) in lines {
        let rec = parse_record(n, text)?;
        if let Some(last) = stream.records.last() {
            if rec.timestamp <= last.timestamp {
                return Err(Error::Parse {
                    line: n,
                    field: "t".into(),
                    message: format!(
                        "timestamp {} does not follow {}",
                        rec.timestamp, last.timestamp
                    ),
                });
            }
        }
        stream.records.push(rec);
    }
    Ok(stream)
}

pub fn read_stream(path: &std::path::Path) -> Result<Stream> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stream(&text)
}

pub fn write_stream_file(path: &std::path::Path, stream: &Stream) -> Result<()> {
    std::fs::write(path, write_stream(stream)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Stream {
        let mut s = Stream::new(StreamKind::Detections, CoordFrame::Sensor);
        for k in 0..3 {
            let t = 0.1 * k as f64;
            let b = OrientedBox::new([2.5 + t, -0.3, 0.35], [1.2, 0.8, 0.7], 0.4, ClassId::Mw)
                .unwrap()
                .with_confidence(0.87)
                .unwrap();
            s.records.push(FrameRecord {
                timestamp: t,
                robot: PlanarPose::new(t, 0.0, 0.01, t),
                boxes: vec![LabeledBox::anonymous(b)],
            });
        }
        s
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = write_stream(&sample());
        let parsed = parse_stream(&text).unwrap();
        assert_eq!(parsed, sample());
        assert_eq!(write_stream(&parsed), text);
        assert!(text.starts_with(
            "{\"format\":\"obtrack-stream\",\"version\":1,\"kind\":\"detections\",\"frame\":\"sensor\"}\n"
        ));
    }

    #[test]
    fn ids_and_scores_by_kind() {
        let mut s = sample();
        s.kind = StreamKind::GroundTruth;
        s.frame = CoordFrame::Map;
        for r in &mut s.records {
            r.boxes[0].id = Some(4);
        }
        let text = write_stream(&s);
        assert!(text.contains("\"id\":4") && !text.contains("score"));
    }

    #[test]
    fn errors_carry_line_and_field() {
        let text = write_stream(&sample());
        let broken = text.replacen("\"cy\":-0.3", "\"cy\":\"x\"", 1);
        match parse_stream(&broken) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "boxes[0].cy");
            }
            other => panic!("{other:?}"),
        }
        let missing = text.replacen("\"heading\":0.01,", "", 1).replacen(",\"heading\":0.01", "", 1);
        assert!(matches!(
            parse_stream(&missing),
            Err(Error::Parse { line: 2, ref field, .. }) if field == "robot.heading"
        ));
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 3);
        assert!(matches!(
            parse_stream(&lines.join("\n")),
            Err(Error::Parse { line: 4, ref field, .. }) if field == "t"
        ));
        assert!(matches!(
            parse_stream("{\"format\":\"obtrack-stream\",\"version\":1,\"kind\":\"detections\",\"frame\":\"sensor\"}\n{not json\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_stream(""), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rejects_unknown_and_nonpositive() {
        let text = write_stream(&sample());
        let extra = text.replacen("\"boxes\"", "\"bogus\":1,\"boxes\"", 1);
        assert!(matches!(
            parse_stream(&extra),
            Err(Error::Parse { ref field, .. }) if field == "bogus"
        ));
        let flat = text.replacen("\"w\":0.8", "\"w\":0.0", 1);
        assert!(matches!(parse_stream(&flat), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn arbitrary_streams_round_trip(
            frames in proptest::collection::vec(
                (0.0..1.0f64, -50.0..50.0f64, -3.2..3.2f64,
                 proptest::collection::vec((-20.0..20.0f64, 0.05..4.0f64, -3.2..3.2f64, proptest::option::of(0..1000u64)), 0..4)),
                0..6),
        ) {
            let mut s = Stream::new(StreamKind::Tracklets, CoordFrame::Map);
            let mut t = 0.0;
            for (dt, x, h, boxes) in frames {
                t += dt + 1e-3;
                let boxes = boxes.into_iter().map(|(c, e, yaw, id)| LabeledBox {
                    id,
                    bbox: OrientedBox::new([c, -c, 0.5 * c], [e, e * 0.5, e * 2.0], yaw, ClassId::Custom("cart".into())).unwrap(),
                }).collect();
                s.records.push(FrameRecord { timestamp: t, robot: PlanarPose::new(x, -x, h, t), boxes });
            }
            let text = write_stream(&s);
            let back = parse_stream(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(write_stream(&back), text);
        }
    }
}
