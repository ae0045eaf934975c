use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{us_to_ms, Micros, Packet};
use crate::codec::CodecMode;
use crate::controllers::{ControllerDecision, SwitchEvent};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub encode_us: Micros,
    pub deadline_us: Micros,
    pub bitrate_kbps: f64,
    pub packets: usize,
    /// Frame-level loss: share of packets missing at the decode deadline.
    pub loss_rate: f64,
    pub decode_us: Option<Micros>,
    pub quality_db: Option<f64>,
    /// Quality mapped to `[0, 1]` over the profile's range.
    #[serde(default)]
    pub quality_norm: Option<f64>,
    /// Mean RTT of the frame's acknowledged packets.
    pub mean_rtt_ms: Option<f64>,
}

impl FrameRecord {
    pub fn delay_ms(&self) -> Option<f64> {
        self.decode_us.map(|d| us_to_ms(d - self.encode_us))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub controller: String,
    pub trace: String,
    pub profile: String,
    pub codec_mode: CodecMode,
    pub seed: u64,
    pub duration_us: Micros,
    pub owd_us: Micros,
    /// Packets still inside the link when the session stopped.
    pub link_backlog_at_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub meta: SessionMeta,
    pub packets: Vec<Packet>,
    pub frames: Vec<FrameRecord>,
    pub decisions: Vec<ControllerDecision>,
    pub switches: Vec<SwitchEvent>,
    /// `(time, reward)` as reported by learning controllers.
    pub rewards: Vec<(Micros, f64)>,
}

/// One line of the NDJSON event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    Meta(SessionMeta),
    Packet(Packet),
    Frame(FrameRecord),
    Decision(ControllerDecision),
    Switch(SwitchEvent),
    Reward { t_us: Micros, value: f64 },
}

pub const FRAME_CSV_HEADER: [&str; 6] = [
    "frame_id",
    "encode_ms",
    "decode_ms",
    "bitrate_kbps",
    "loss_rate",
    "quality_db",
];

impl SessionLog {
    pub fn sent(&self) -> usize {
        self.packets.len()
    }

    pub fn delivered(&self) -> usize {
        self.packets.iter().filter(|p| p.deliver_us.is_some()).count()
    }

    pub fn dropped(&self) -> usize {
        self.packets.iter().filter(|p| p.drop_cause.is_some()).count()
    }

    pub fn in_flight(&self) -> usize {
        self.packets
            .iter()
            .filter(|p| p.deliver_us.is_none() && p.drop_cause.is_none())
            .count()
    }

    /// sent = delivered + dropped + in-flight, with in-flight matching what
    /// the link still held, and no packet both delivered and dropped.
    pub fn conservation_holds(&self) -> bool {
        let both = self
            .packets
            .iter()
            .any(|p| p.deliver_us.is_some() && p.drop_cause.is_some());
        !both
            && self.sent() == self.delivered() + self.dropped() + self.in_flight()
            && self.in_flight() == self.meta.link_backlog_at_end
    }

    pub fn duration_s(&self) -> f64 {
        self.meta.duration_us as f64 / 1e6
    }

    pub fn events(&self) -> impl Iterator<Item = LogEvent> + '_ {
        std::iter::once(LogEvent::Meta(self.meta.clone()))
            .chain(self.packets.iter().cloned().map(LogEvent::Packet))
            .chain(self.frames.iter().cloned().map(LogEvent::Frame))
            .chain(self.decisions.iter().cloned().map(LogEvent::Decision))
            .chain(self.switches.iter().cloned().map(LogEvent::Switch))
            .chain(
                self.rewards
                    .iter()
                    .map(|&(t_us, value)| LogEvent::Reward { t_us, value }),
            )
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for ev in self.events() {
            serde_json::to_writer(&mut w, &ev)?;
            w.write_all(b"\n").map_err(|e| Error::io("<ndjson>", e))?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = None;
        let mut log = SessionLog {
            meta: SessionMeta {
                controller: String::new(),
                trace: String::new(),
                profile: String::new(),
                codec_mode: CodecMode::Nvc,
                seed: 0,
                duration_us: 0,
                owd_us: 0,
                link_backlog_at_end: 0,
            },
            packets: Vec::new(),
            frames: Vec::new(),
            decisions: Vec::new(),
            switches: Vec::new(),
            rewards: Vec::new(),
        };
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<ndjson>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: LogEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: "<ndjson>".into(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            match ev {
                LogEvent::Meta(m) => meta = Some(m),
                LogEvent::Packet(p) => log.packets.push(p),
                LogEvent::Frame(f) => log.frames.push(f),
                LogEvent::Decision(d) => log.decisions.push(d),
                LogEvent::Switch(s) => log.switches.push(s),
                LogEvent::Reward { t_us, value } => log.rewards.push((t_us, value)),
            }
        }
        log.meta = meta.ok_or(Error::Empty("event stream has no meta record"))?;
        Ok(log)
    }

    /// Per-frame CSV with columns [`FRAME_CSV_HEADER`]; undecoded frames
    /// leave `decode_ms` and `quality_db` empty.
    pub fn write_frames_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(FRAME_CSV_HEADER)?;
        for f in &self.frames {
            out.write_record([
                f.frame_id.to_string(),
                us_to_ms(f.encode_us).to_string(),
                f.decode_us.map(|d| us_to_ms(d).to_string()).unwrap_or_default(),
                f.bitrate_kbps.to_string(),
                f.loss_rate.to_string(),
                f.quality_db.map(|q| q.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}
