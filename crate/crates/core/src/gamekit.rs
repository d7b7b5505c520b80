//! The profiling game: the teacher releases hints one at a time, pairs of
//! students draft a profile of a mystery user, drafts go up on a shared
//! bulletin board, and finally the solution is revealed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Role, ValidationError};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub prompts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub attributes: BTreeMap<String, String>,
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScriptWire")]
pub struct GameScript {
    pub title: String,
    pub hints: Vec<Hint>,
    pub solution: Solution,
}

#[derive(Deserialize)]
struct ScriptWire {
    title: String,
    hints: Vec<Hint>,
    solution: Solution,
}

impl TryFrom<ScriptWire> for GameScript {
    type Error = ValidationError;
    fn try_from(w: ScriptWire) -> Result<Self, Self::Error> {
        GameScript::new(w.title, w.hints, w.solution)
    }
}

const SAMPLE_SCRIPT: &str = include_str!("../fixtures/mystery_user.json");

impl GameScript {
    pub fn new(title: String, hints: Vec<Hint>, solution: Solution) -> Result<Self, ValidationError> {
        if hints.is_empty() {
            return Err(ValidationError::new("hints", "at least one hint is required"));
        }
        let mut ids = BTreeSet::new();
        for h in &hints {
            if !ids.insert(h.id.as_str()) {
                return Err(ValidationError::new("hints", format!("duplicate hint id {}", h.id)));
            }
        }
        Ok(Self {
            title,
            hints,
            solution,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Bundled synthetic storyline.
    pub fn sample() -> Self {
        Self::from_json(SAMPLE_SCRIPT).expect("bundled script is valid")
    }
}

/// What a pair submits; the game assigns the version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftInput {
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileDraft {
    pub pair_id: String,
    pub fields: BTreeMap<String, String>,
    pub tags: Vec<String>,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    script: GameScript,
    /// Number of hints released so far.
    hint_index: usize,
    drafts: BTreeMap<String, Vec<ProfileDraft>>,
    board_published: bool,
    revealed: bool,
}

fn require_teacher(role: Role, what: &str) -> Result<()> {
    if role == Role::Teacher {
        Ok(())
    } else {
        Err(Error::Role(format!("only the teacher can {what}")))
    }
}

impl Game {
    pub fn new(script: GameScript) -> Self {
        Self {
            script,
            hint_index: 0,
            drafts: BTreeMap::new(),
            board_published: false,
            revealed: false,
        }
    }

    pub fn script(&self) -> &GameScript {
        &self.script
    }

    pub fn hint_index(&self) -> usize {
        self.hint_index
    }

    /// The most recently released hint.
    pub fn current_hint(&self) -> Option<&Hint> {
        self.hint_index.checked_sub(1).map(|i| &self.script.hints[i])
    }

    /// Releases the next hint and returns the new index with that hint.
    pub fn advance_hint(&mut self, role: Role) -> Result<(usize, &Hint)> {
        require_teacher(role, "advance hints")?;
        if self.hint_index >= self.script.hints.len() {
            return Err(Error::Game(format!(
                "all {} hints are already released",
                self.script.hints.len()
            )));
        }
        self.hint_index += 1;
        Ok((self.hint_index, &self.script.hints[self.hint_index - 1]))
    }

    /// Stores a new draft version for `pair_id`.
    pub fn submit_draft(&mut self, pair_id: &str, input: DraftInput) -> Result<u32> {
        if pair_id.trim().is_empty() {
            return Err(ValidationError::new("pair_id", "must not be empty").into());
        }
        let tags = input
            .tags
            .iter()
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        let history = self.drafts.entry(pair_id.to_string()).or_default();
        let version = history.last().map_or(1, |d| d.version + 1);
        history.push(ProfileDraft {
            pair_id: pair_id.to_string(),
            fields: input.fields,
            tags,
            version,
        });
        Ok(version)
    }

    pub fn history(&self, pair_id: &str) -> &[ProfileDraft] {
        self.drafts.get(pair_id).map_or(&[], Vec::as_slice)
    }

    /// Latest draft of every pair, ordered by pair id.
    pub fn board(&self) -> Vec<ProfileDraft> {
        self.drafts
            .values()
            .filter_map(|h| h.last().cloned())
            .collect()
    }

    pub fn publish_board(&mut self, role: Role) -> Result<Vec<ProfileDraft>> {
        require_teacher(role, "publish the board")?;
        let board = self.board();
        if board.is_empty() {
            return Err(Error::Game("no drafts to publish".into()));
        }
        self.board_published = true;
        Ok(board)
    }

    pub fn reveal(&mut self, role: Role) -> Result<&Solution> {
        require_teacher(role, "reveal the solution")?;
        if !self.board_published {
            return Err(Error::Game("publish the board before the reveal".into()));
        }
        self.revealed = true;
        Ok(&self.script.solution)
    }

    pub fn is_board_published(&self) -> bool {
        self.board_published
    }

    pub fn is_revealed(&self) -> bool {
        self.revealed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft(field: &str) -> DraftInput {
        DraftInput {
            fields: BTreeMap::from([("hobby".to_string(), field.to_string())]),
            tags: vec![" Sports ".into(), "".into()],
        }
    }

    #[test]
    fn sample_script_loads() {
        let s = GameScript::sample();
        assert_eq!(s.hints.len(), 3);
        assert!(s.title.contains("synthetic"));
    }

    #[test]
    fn script_validation() {
        let sol = Solution { attributes: BTreeMap::new(), narrative: String::new() };
        assert_eq!(GameScript::new("t".into(), vec![], sol.clone()).unwrap_err().field, "hints");
        let h = Hint { id: "a".into(), text: "x".into(), prompts: vec![] };
        assert!(GameScript::new("t".into(), vec![h.clone(), h], sol).is_err());
    }

    #[test]
    fn hint_flow() {
        let mut g = Game::new(GameScript::sample());
        assert_eq!(g.hint_index(), 0);
        assert!(g.current_hint().is_none());
        let (idx, hint) = g.advance_hint(Role::Teacher).unwrap();
        assert_eq!((idx, hint.id.as_str()), (1, "h1"));
        assert!(matches!(g.advance_hint(Role::Student), Err(Error::Role(_))));
        assert_eq!(g.hint_index(), 1);
        g.advance_hint(Role::Teacher).unwrap();
        g.advance_hint(Role::Teacher).unwrap();
        assert!(matches!(g.advance_hint(Role::Teacher), Err(Error::Game(_))));
        assert_eq!(g.hint_index(), 3);
        assert_eq!(g.current_hint().unwrap().id, "h3");
    }

    #[test]
    fn draft_versions_and_board() {
        let mut g = Game::new(GameScript::sample());
        assert!(matches!(g.publish_board(Role::Teacher), Err(Error::Game(_))));
        assert_eq!(g.submit_draft("pair-b", draft("chess")).unwrap(), 1);
        assert_eq!(g.submit_draft("pair-a", draft("skating")).unwrap(), 1);
        assert_eq!(g.submit_draft("pair-a", draft("hockey")).unwrap(), 2);
        assert_eq!(g.submit_draft("pair-a", draft("ice hockey")).unwrap(), 3);
        let history = g.history("pair-a");
        assert_eq!(history.iter().map(|d| d.version).collect::<Vec<_>>(), [1, 2, 3]);
        assert_eq!(history[0].fields["hobby"], "skating");
        assert_eq!(history[0].tags, ["sports"]);

        assert!(matches!(g.reveal(Role::Teacher), Err(Error::Game(_))));
        assert!(matches!(g.publish_board(Role::Student), Err(Error::Role(_))));
        let board = g.publish_board(Role::Teacher).unwrap();
        assert_eq!(board.len(), 2);
        assert_eq!(board[0].pair_id, "pair-a");
        assert_eq!(board[0].version, 3);
        assert_eq!(board[1].pair_id, "pair-b");
        assert_eq!(g.reveal(Role::Teacher).unwrap().attributes["age"], "12");
        assert!(g.is_revealed());
    }
}
