use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use pragsynth::eval::{Trial, TrialSource};
use pragsynth::{ListenerKind, Program, Spec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Solved,
    GivenUp,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Solved => "solved",
            Status::GivenUp => "given_up",
        }
    }
}

/// Who the client plays. A `speaker` client is shown the target on creation;
/// a `hidden` one only learns it once the game ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Hidden,
    Speaker,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub target: Program,
    pub listener: ListenerKind,
    pub role: Role,
    pub top_k: usize,
    pub revealed: Spec,
    pub status: Status,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

impl Session {
    pub fn target_visible(&self) -> bool {
        self.role == Role::Speaker || self.status != Status::Active
    }

    pub fn trial(&self) -> Trial {
        Trial {
            target: self.target,
            utterances: self.revealed.clone(),
            source: if self.listener.is_pragmatic() {
                TrialSource::HumanPragmatic
            } else {
                TrialSource::HumanLiteral
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Create {
        id: String,
        listener: ListenerKind,
        target: Program,
        role: Role,
        top_k: usize,
        created_at: u64,
    },
    Reveal {
        id: String,
        x: u8,
        y: u8,
        status: Status,
    },
    GiveUp {
        id: String,
    },
    Expire {
        id: String,
    },
}

/// Append-only JSON-lines log of session events.
pub struct Journal {
    file: Mutex<File>,
}

impl Journal {
    /// Opens `path` for appending and returns the events already in it.
    pub fn open(path: &Path) -> io::Result<(Journal, Vec<JournalEvent>)> {
        let mut events = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event = serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("journal line {}: {e}", i + 1)))?;
                events.push(event);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((Journal { file: Mutex::new(file) }, events))
    }

    pub fn append(&self, event: &JournalEvent) -> io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut file = self.file.lock().expect("journal lock poisoned");
        file.write_all(&line)?;
        file.flush()
    }
}

/// Rebuilds live sessions from a journal. Expired sessions stay gone.
pub fn replay(events: &[JournalEvent]) -> Vec<Session> {
    let mut sessions: Vec<Session> = Vec::new();
    let find = |sessions: &mut Vec<Session>, id: &str| sessions.iter().position(|s| s.id == id);
    for event in events {
        match event {
            JournalEvent::Create {
                id,
                listener,
                target,
                role,
                top_k,
                created_at,
            } => sessions.push(Session {
                id: id.clone(),
                target: *target,
                listener: *listener,
                role: *role,
                top_k: *top_k,
                revealed: Spec::new(),
                status: Status::Active,
                created_at: *created_at,
            }),
            JournalEvent::Reveal { id, x, y, status } => {
                if let Some(i) = find(&mut sessions, id) {
                    let s = &mut sessions[i];
                    if let Some(c) = s.target.cell(*x as usize, *y as usize).content() {
                        let u = pragsynth::Utterance::from_content(*x as usize, *y as usize, c);
                        if s.revealed.push(u).is_ok() {
                            s.status = *status;
                        }
                    }
                }
            }
            JournalEvent::GiveUp { id } => {
                if let Some(i) = find(&mut sessions, id) {
                    sessions[i].status = Status::GivenUp;
                }
            }
            JournalEvent::Expire { id } => {
                if let Some(i) = find(&mut sessions, id) {
                    sessions.remove(i);
                }
            }
        }
    }
    sessions
}
