#![allow(dead_code)]

use midly::{MetaMessage, MidiMessage, Smf, Timing, TrackEventKind};
use quantone::midi::NoteEvent;

/// A note as `(pitch, on tick, off tick, velocity)`.
pub type Note = (u8, u32, u32, u8);

#[derive(Debug)]
pub struct DecodedMidi {
    pub ticks_per_quarter: u16,
    pub tracks: usize,
    pub tempo_us: Option<u32>,
    pub notes: Vec<Note>,
}

/// Decodes a file with midly and pairs note-ons with note-offs per pitch in
/// first-in first-out order. Notes come back sorted.
pub fn decode_midi(bytes: &[u8]) -> Result<DecodedMidi, String> {
    let smf = Smf::parse(bytes).map_err(|e| e.to_string())?;
    let ticks_per_quarter = match smf.header.timing {
        Timing::Metrical(t) => t.as_int(),
        Timing::Timecode(..) => return Err("timecode timing".into()),
    };
    let mut tempo_us = None;
    let mut open: Vec<(u8, u32, u8)> = Vec::new();
    let mut notes = Vec::new();
    for track in &smf.tracks {
        let mut now = 0u32;
        for ev in track {
            now += ev.delta.as_int();
            match ev.kind {
                TrackEventKind::Meta(MetaMessage::Tempo(t)) => tempo_us = Some(t.as_int()),
                TrackEventKind::Midi { message, .. } => match message {
                    MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => open.push((key.as_int(), now, vel.as_int())),
                    MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                        let i = open
                            .iter()
                            .position(|&(p, _, _)| p == key.as_int())
                            .ok_or_else(|| format!("note-off without note-on at tick {now}"))?;
                        let (p, on, v) = open.remove(i);
                        notes.push((p, on, now, v));
                    }
                    _ => {}
                },
                _ => {}
            }
        }
    }
    if !open.is_empty() {
        return Err(format!("{} notes never end", open.len()));
    }
    notes.sort_unstable();
    Ok(DecodedMidi {
        ticks_per_quarter,
        tracks: smf.tracks.len(),
        tempo_us,
        notes,
    })
}

/// The notes a file rendered from `events` should contain.
pub fn expected_notes(events: &[NoteEvent], ticks_per_quarter: u16) -> Vec<Note> {
    let tick = |beats: num_rational::Rational64| {
        (*beats.numer() as f64 / *beats.denom() as f64 * f64::from(ticks_per_quarter)).round() as u32
    };
    let mut v: Vec<Note> = events
        .iter()
        .map(|e| (e.pitch, tick(e.onset), tick(e.onset + e.duration), e.velocity))
        .collect();
    v.sort_unstable();
    v
}
