//! Landmark track files: JSON Lines, a header line then one line per frame.
//!
//! ```text
//! {"video_id":"spk1","fps":25.0,"duration_s":2.0,"points_schema":"ibug-68"}
//! {"frame":0,"t":0.0,"face_id":0,"points":[[x,y], ...68 pairs]}
//! {"frame":1,"t":0.04}
//! ```

use std::io::{BufRead, Write};

use lipread_core::landmark::{Face, LandmarkFrame, LandmarkTrack, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const POINTS_SCHEMA: &str = "ibug-68";

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: frame index or timestamp does not increase")]
    NonMonotonicTimestamps { line: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    video_id: String,
    fps: f64,
    duration_s: f64,
    #[serde(default = "schema")]
    points_schema: String,
}

fn schema() -> String {
    POINTS_SCHEMA.to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    frame: u64,
    t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    face_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
}

pub fn parse_track<R: BufRead>(reader: R) -> Result<LandmarkTrack, TrackError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = loop {
        match lines.next() {
            None => return Err(TrackError::MissingHeader),
            Some((n, l)) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break (n, l);
                }
            }
        }
    };
    let value: serde_json::Value =
        serde_json::from_str(first.trim_end_matches('\r')).map_err(|e| TrackError::MalformedRecord { line: 1, message: e.to_string() })?;
    if value.get("video_id").is_none() {
        return Err(TrackError::MissingHeader);
    }
    let header: Header = serde_json::from_value(value).map_err(|e| TrackError::MalformedRecord { line: 1, message: e.to_string() })?;
    if header.points_schema != POINTS_SCHEMA {
        return Err(TrackError::MalformedRecord { line: 1, message: format!("unsupported points_schema {:?}", header.points_schema) });
    }
    if !(header.fps.is_finite() && header.fps > 0.0) || !(header.duration_s.is_finite() && header.duration_s >= 0.0) {
        return Err(TrackError::MalformedRecord { line: 1, message: "fps must be positive and duration_s non-negative".into() });
    }

    let mut frames: Vec<(usize, LandmarkFrame)> = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TrackError::MalformedRecord { line: line_no, message };
        let rec: FrameLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if !rec.t.is_finite() {
            return Err(bad("timestamp is not finite".into()));
        }
        let face = match rec.points {
            None => None,
            Some(pts) => {
                let pts = pts.into_iter().map(|[x, y]| Point::new(x, y)).collect();
                Some(Face::new(pts).map_err(|e| bad(e.to_string()))?)
            }
        };
        if face.is_none() && rec.face_id.is_some() {
            return Err(bad("face_id given without points".into()));
        }
        frames.push((line_no, LandmarkFrame { frame_index: rec.frame, timestamp_s: rec.t, face_id: rec.face_id, face }));
    }

    frames.sort_by_key(|(_, f)| f.frame_index);
    for w in frames.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        if b.frame_index == a.frame_index || b.timestamp_s <= a.timestamp_s {
            return Err(TrackError::NonMonotonicTimestamps { line: w[1].0.max(w[0].0) });
        }
    }

    Ok(LandmarkTrack {
        video_id: header.video_id,
        fps: header.fps,
        duration_s: header.duration_s,
        frames: frames.into_iter().map(|(_, f)| f).collect(),
    })
}

pub fn write_track<W: Write>(track: &LandmarkTrack, mut out: W) -> std::io::Result<()> {
    let header = Header { video_id: track.video_id.clone(), fps: track.fps, duration_s: track.duration_s, points_schema: schema() };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for f in &track.frames {
        let line = FrameLine {
            frame: f.frame_index,
            t: f.timestamp_s,
            face_id: f.face.as_ref().and(f.face_id),
            points: f.face.as_ref().map(|face| face.points().iter().map(|p| [p.x, p.y]).collect()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn track_to_string(track: &LandmarkTrack) -> String {
    let mut buf = Vec::new();
    write_track(track, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_track_file(path: &std::path::Path) -> Result<LandmarkTrack, TrackError> {
    let f = std::fs::File::open(path)?;
    parse_track(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lipread_core::landmark::synthetic::{track, FacePose};
    use proptest::prelude::*;

    fn steady(n: usize) -> LandmarkTrack {
        track("spk1", 25.0, &vec![Some(FacePose::default()); n])
    }

    #[test]
    fn fifty_frames() {
        let t = steady(50);
        let text = track_to_string(&t);
        assert!(text.starts_with("{\"video_id\":\"spk1\",\"fps\":25.0,\"duration_s\":2.0,\"points_schema\":\"ibug-68\"}\n"));
        let parsed = parse_track(text.as_bytes()).unwrap();
        assert_eq!(parsed.frames.len(), 50);
        assert_eq!(parsed, t);
    }

    #[test]
    fn empty_stream_is_missing_header() {
        assert!(matches!(parse_track(&b""[..]), Err(TrackError::MissingHeader)));
        assert!(matches!(parse_track(&b"\n\n"[..]), Err(TrackError::MissingHeader)));
        assert!(matches!(parse_track(&b"{\"frame\":0,\"t\":0.0}\n"[..]), Err(TrackError::MissingHeader)));
    }

    #[test]
    fn short_point_list_reports_line() {
        let t = steady(3);
        let mut lines: Vec<String> = track_to_string(&t).lines().map(String::from).collect();
        let mut v: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
        v["points"].as_array_mut().unwrap().pop();
        lines[2] = v.to_string();
        match parse_track(lines.join("\n").as_bytes()) {
            Err(TrackError::MalformedRecord { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("67"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn faceless_frames_round_trip() {
        let t = track("v", 30.0, &[Some(FacePose::default()), None, Some(FacePose::default())]);
        let text = track_to_string(&t);
        assert!(text.lines().nth(2).unwrap() == "{\"frame\":1,\"t\":0.03333333333333333}");
        assert_eq!(parse_track(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn frames_are_sorted_by_index() {
        let t = steady(4);
        let text = track_to_string(&t);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 4);
        assert_eq!(parse_track(lines.join("\n").as_bytes()).unwrap(), t);
    }

    #[test]
    fn duplicate_or_backwards_time_is_rejected() {
        let head = "{\"video_id\":\"v\",\"fps\":25,\"duration_s\":0.12}";
        let dup = format!("{head}\n{{\"frame\":0,\"t\":0.0}}\n{{\"frame\":0,\"t\":0.04}}\n");
        assert!(matches!(parse_track(dup.as_bytes()), Err(TrackError::NonMonotonicTimestamps { line: 3 })));
        let back = format!("{head}\n{{\"frame\":0,\"t\":0.04}}\n{{\"frame\":1,\"t\":0.0}}\n");
        assert!(matches!(parse_track(back.as_bytes()), Err(TrackError::NonMonotonicTimestamps { line: 3 })));
    }

    #[test]
    fn bad_header_fields() {
        let r = parse_track(&b"{\"video_id\":\"v\",\"fps\":0,\"duration_s\":1}\n"[..]);
        assert!(matches!(r, Err(TrackError::MalformedRecord { line: 1, .. })));
        let r = parse_track(&b"{\"video_id\":\"v\",\"fps\":25,\"duration_s\":1,\"points_schema\":\"mp-468\"}\n"[..]);
        assert!(matches!(r, Err(TrackError::MalformedRecord { line: 1, .. })));
        let r = parse_track(&b"not json\n"[..]);
        assert!(matches!(r, Err(TrackError::MalformedRecord { line: 1, .. })));
    }

    fn arb_frame_face() -> impl Strategy<Value = Option<(FacePose, u32)>> {
        prop_oneof![
            1 => Just(None),
            4 => (200.0f64..500.0, 200.0f64..400.0, 40.0f64..150.0, 0.7f64..1.4, 0.0f64..0.5, 0u32..3).prop_map(
                |(x, y, scale, yaw, mouth_open, id)| Some((FacePose { center: Point::new(x, y), scale, yaw, mouth_open }, id))
            ),
        ]
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(
            fps in prop_oneof![Just(25.0), Just(29.97), 1.0f64..120.0],
            frames in proptest::collection::vec(arb_frame_face(), 1..40),
            id in "[a-z0-9_-]{1,12}",
        ) {
            let poses: Vec<Option<FacePose>> = frames.iter().map(|f| f.map(|(p, _)| p)).collect();
            let mut t = track(&id, fps, &poses);
            for (frame, spec) in t.frames.iter_mut().zip(&frames) {
                frame.face_id = spec.map(|(_, id)| id);
            }
            let parsed = parse_track(track_to_string(&t).as_bytes()).unwrap();
            prop_assert_eq!(parsed, t);
        }
    }
}
