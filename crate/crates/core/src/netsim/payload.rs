//! ADD-field layouts used by simulated nodes.
//!
//! ```text
//! info    0x55 tick(8) value(8) check(4)       UPDATE / REPLY content
//! query   0x51 tick(8)
//! rating  tag(1) quality f64(8) completed(8)   RATE
//! flood   0xf1 counter(8)
//! ```
//!
//! `check` is the first four bytes of the digest of `tick ‖ value`. Nodes
//! spreading false information send a wrong check, which any receiver can
//! detect.

use crate::codec::{hash80, Payload, TxType};
use crate::reputation::Tick;

const INFO_TAG: u8 = 0x55;
const QUERY_TAG: u8 = 0x51;
const FLOOD_TAG: u8 = 0xf1;

fn check_bytes(tick: Tick, value: u64) -> [u8; 4] {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&tick.to_be_bytes());
    buf[8..].copy_from_slice(&value.to_be_bytes());
    let h = hash80(&buf);
    [h.0[0], h.0[1], h.0[2], h.0[3]]
}

pub fn info(tick: Tick, value: u64, truthful: bool) -> Payload {
    let mut check = check_bytes(tick, value);
    if !truthful {
        for b in &mut check {
            *b ^= 0xff;
        }
    }
    let mut buf = Vec::with_capacity(21);
    buf.push(INFO_TAG);
    buf.extend_from_slice(&tick.to_be_bytes());
    buf.extend_from_slice(&value.to_be_bytes());
    buf.extend_from_slice(&check);
    Payload::from_slice(&buf).expect("fits")
}

/// `Some(truthful)` for an info payload, `None` for anything else.
pub fn info_is_truthful(p: &Payload) -> Option<bool> {
    let a = &p.0;
    if a[0] != INFO_TAG {
        return None;
    }
    let tick = u64::from_be_bytes(a[1..9].try_into().unwrap());
    let value = u64::from_be_bytes(a[9..17].try_into().unwrap());
    Some(a[17..21] == check_bytes(tick, value))
}

pub fn query(tick: Tick) -> Payload {
    let mut buf = vec![QUERY_TAG];
    buf.extend_from_slice(&tick.to_be_bytes());
    Payload::from_slice(&buf).expect("fits")
}

pub fn flood(counter: u64) -> Payload {
    let mut buf = vec![FLOOD_TAG];
    buf.extend_from_slice(&counter.to_be_bytes());
    Payload::from_slice(&buf).expect("fits")
}

/// Content of a RATE transaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    /// Type of the rated interaction; selects the significance weight.
    pub interaction: TxType,
    pub quality: f64,
    pub completed_at: Tick,
}

pub fn rating(r: &Rating) -> Payload {
    let mut buf = Vec::with_capacity(17);
    buf.push(r.interaction.tag());
    buf.extend_from_slice(&r.quality.to_bits().to_be_bytes());
    buf.extend_from_slice(&r.completed_at.to_be_bytes());
    Payload::from_slice(&buf).expect("fits")
}

pub fn parse_rating(p: &Payload) -> Option<Rating> {
    let a = &p.0;
    let interaction = TxType::from_tag(a[0]).ok()?;
    let quality = f64::from_bits(u64::from_be_bytes(a[1..9].try_into().unwrap()));
    let completed_at = u64::from_be_bytes(a[9..17].try_into().unwrap());
    Some(Rating {
        interaction,
        quality,
        completed_at,
    })
}
