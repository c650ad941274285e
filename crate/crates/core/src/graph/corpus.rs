use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named-entity mention inside an utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub ne_type: String,
}

/// A transcribed utterance together with its gold (or ASR-derived) entity
/// annotations. One line of the corpus JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub entities: Vec<EntityMention>,
}

impl UtteranceRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            utterance_id: id.into(),
            text: text.into(),
            entities: Vec::new(),
        }
    }

    pub fn with_entity(mut self, surface: impl Into<String>, ne_type: impl Into<String>) -> Self {
        self.entities.push(EntityMention {
            surface: surface.into(),
            ne_type: ne_type.into(),
        });
        self
    }
}

/// Reads a JSONL corpus. Blank lines are skipped; a malformed line yields a
/// corpus error naming its 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<UtteranceRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: UtteranceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Corpus(format!("line {}: {e}", idx + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus<W: std::io::Write>(mut writer: W, records: &[UtteranceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
