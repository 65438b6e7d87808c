//! Binary database file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "FSDB" | schema u32 | n_policies u64 | traj_per_policy u64 | seed u64
//! config_len u32 | config JSON bytes | scales 5 x f64 | n_records u64 | records
//! ```
//!
//! Each record is fixed width: features (5 f64), action (u8, 0 = suppress),
//! reward (5 f64), successor features (5 f64), burned cells (u32), smoky days
//! (u32), suppression cost (f64), summary (3 f64), source policy (u32),
//! source seed (u64), source step (u32).

use std::io::{Read, Write};

use super::{BuildInfo, Features, RecordSource, SurrogateError, TrajectoryDb, TransitionRecord, N_FEATURES};
use crate::mdp::{FireOutcome, LandscapeSummary, RewardVector, SimConfig};
use crate::policy::Action;

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FSDB";

pub fn write_database<W: Write>(mut out: W, db: &TrajectoryDb) -> Result<(), SurrogateError> {
    let config = serde_json::to_vec(&db.config).map_err(|e| SurrogateError::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(64 + config.len() + db.records.len() * 200);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    buf.extend_from_slice(&(db.info.n_policies as u64).to_le_bytes());
    buf.extend_from_slice(&(db.info.trajectories_per_policy as u64).to_le_bytes());
    buf.extend_from_slice(&db.info.seed.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    put_features(&mut buf, &db.scales);
    buf.extend_from_slice(&(db.records.len() as u64).to_le_bytes());
    for r in &db.records {
        put_features(&mut buf, &r.features);
        buf.push(match r.action {
            Action::Suppress => 0,
            Action::LetBurn => 1,
        });
        let rw = &r.reward;
        for v in [rw.suppression, rw.timber, rw.ecology, rw.air, rw.recreation] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        put_features(&mut buf, &r.successor_features);
        buf.extend_from_slice(&r.outcome.burned_cells.to_le_bytes());
        buf.extend_from_slice(&r.outcome.smoky_days.to_le_bytes());
        buf.extend_from_slice(&r.outcome.suppression_cost.to_le_bytes());
        let s = &r.summary;
        for v in [s.fraction_high_fuel, s.fraction_old_lowdensity, s.total_fuel] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&r.source.policy.to_le_bytes());
        buf.extend_from_slice(&r.source.trajectory_seed.to_le_bytes());
        buf.extend_from_slice(&r.source.step.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_database<R: Read>(mut input: R) -> Result<TrajectoryDb, SurrogateError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Cursor { bytes: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(SurrogateError::Format("not a trajectory database (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != SCHEMA_VERSION {
        return Err(SurrogateError::Format(format!("schema version {version}, expected {SCHEMA_VERSION}")));
    }
    let info = BuildInfo {
        n_policies: r.u64()? as usize,
        trajectories_per_policy: r.u64()? as usize,
        seed: r.u64()?,
    };
    let config_len = r.u32()? as usize;
    let config: SimConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| SurrogateError::Format(format!("embedded config: {e}")))?;
    let scales = r.features()?;
    if scales.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(SurrogateError::Format("normalization scales must be positive".into()));
    }
    let n = r.u64()? as usize;
    let mut records = Vec::with_capacity(n.min(bytes.len() / 150));
    for _ in 0..n {
        let features = r.features()?;
        let action = match r.take(1)?[0] {
            0 => Action::Suppress,
            1 => Action::LetBurn,
            other => return Err(SurrogateError::Format(format!("bad action tag {other}"))),
        };
        let reward = RewardVector {
            suppression: r.f64()?,
            timber: r.f64()?,
            ecology: r.f64()?,
            air: r.f64()?,
            recreation: r.f64()?,
        };
        let successor_features = r.features()?;
        let outcome =
            FireOutcome { burned_cells: r.u32()?, smoky_days: r.u32()?, suppression_cost: r.f64()? };
        let summary = LandscapeSummary {
            fraction_high_fuel: r.f64()?,
            fraction_old_lowdensity: r.f64()?,
            total_fuel: r.f64()?,
        };
        let source = RecordSource { policy: r.u32()?, trajectory_seed: r.u64()?, step: r.u32()? };
        records.push(TransitionRecord {
            features,
            action,
            reward,
            successor_features,
            outcome,
            summary,
            source,
        });
    }
    if r.pos != bytes.len() {
        return Err(SurrogateError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(TrajectoryDb::with_scales(config, info, records, scales))
}

fn put_features(buf: &mut Vec<u8>, f: &Features) {
    for v in f {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SurrogateError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| SurrogateError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SurrogateError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SurrogateError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SurrogateError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn features(&mut self) -> Result<Features, SurrogateError> {
        let mut f = [0.0; N_FEATURES];
        for v in &mut f {
            *v = self.f64()?;
        }
        Ok(f)
    }
}
