//! Emulated valve controller link.
//!
//! Wire grammar, one frame per jaw change: `[LR][01]\n`. The board answers
//! each accepted frame with `ACK <side><bit>\n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Jaws, Side};

pub fn valve_encode(side: Side, closed: bool) -> [u8; 3] {
    [side.as_char() as u8, if closed { b'1' } else { b'0' }, b'\n']
}

pub fn valve_parse(bytes: &[u8]) -> Result<(Side, bool)> {
    let reject = || Error::Protocol {
        bytes: bytes.to_vec(),
    };
    let [side, bit, b'\n'] = bytes else {
        return Err(reject());
    };
    let side = match side {
        b'L' => Side::L,
        b'R' => Side::R,
        _ => return Err(reject()),
    };
    let closed = match bit {
        b'0' => false,
        b'1' => true,
        _ => return Err(reject()),
    };
    Ok((side, closed))
}

pub fn valve_ack(side: Side, closed: bool) -> String {
    format!("ACK {}{}\n", side.as_char(), closed as u8)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValveExchange {
    pub tick: u64,
    pub frame: String,
    pub ack: String,
}

/// The microcontroller end: holds the solenoid states it has been told to set.
#[derive(Debug, Clone, Default)]
pub struct ValveBoard {
    pub valves: Jaws,
}

impl ValveBoard {
    pub fn handle(&mut self, frame: &[u8]) -> Result<String> {
        let (side, closed) = valve_parse(frame)?;
        self.valves.set(side, closed);
        Ok(valve_ack(side, closed))
    }
}

/// Host end: emits one frame per changed jaw bit (left before right) and
/// records every exchange in order.
#[derive(Debug, Clone, Default)]
pub struct ValveLink {
    commanded: Jaws,
    board: ValveBoard,
    pub transcript: Vec<ValveExchange>,
}

impl ValveLink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn command(&mut self, tick: u64, jaws: Jaws) -> Result<()> {
        for side in Side::BOTH {
            let want = jaws.get(side);
            if want == self.commanded.get(side) {
                continue;
            }
            let frame = valve_encode(side, want);
            let ack = self.board.handle(&frame)?;
            self.commanded.set(side, want);
            self.transcript.push(ValveExchange {
                tick,
                frame: String::from_utf8_lossy(&frame).into_owned(),
                ack,
            });
        }
        Ok(())
    }

    pub fn board_state(&self) -> Jaws {
        self.board.valves
    }
}
