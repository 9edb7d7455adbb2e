//! Structured tool errors shared by the session backend and the wire protocol.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Every error code a tool call can return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    #[serde(rename = "E_STATE")]
    State,
    #[serde(rename = "E_NOT_FOUND")]
    NotFound,
    #[serde(rename = "E_GENDER_MISMATCH")]
    GenderMismatch,
    #[serde(rename = "E_DUPLICATE")]
    Duplicate,
    #[serde(rename = "E_WRONG_REGION")]
    WrongRegion,
    #[serde(rename = "E_CAPACITY")]
    Capacity,
    #[serde(rename = "E_POSTURE")]
    Posture,
    #[serde(rename = "E_CHAIN_OPEN")]
    ChainOpen,
    #[serde(rename = "E_NO_CHAIN")]
    NoChain,
    #[serde(rename = "E_INVALID_NEXT")]
    InvalidNext,
    #[serde(rename = "E_NOT_TERMINAL")]
    NotTerminal,
    #[serde(rename = "E_EMPTY_CHAIN")]
    EmptyChain,
    #[serde(rename = "E_LIFECYCLE")]
    Lifecycle,
    #[serde(rename = "E_LOCKED")]
    Locked,
    #[serde(rename = "E_INTERACTION")]
    Interaction,
    #[serde(rename = "E_CYCLE")]
    Cycle,
    #[serde(rename = "E_SELF")]
    SelfRelation,
    #[serde(rename = "E_BAD_RELATION")]
    BadRelation,
    #[serde(rename = "E_EMPTY_STORY")]
    EmptyStory,
    #[serde(rename = "E_UNKNOWN_ACTION")]
    UnknownAction,
    #[serde(rename = "E_PAGINATION")]
    Pagination,
    #[serde(rename = "E_BAD_ARGS")]
    BadArgs,
    #[serde(rename = "E_UNKNOWN_TOOL")]
    UnknownTool,
    #[serde(rename = "E_BUSY")]
    Busy,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 24] = [
        ErrorCode::State,
        ErrorCode::NotFound,
        ErrorCode::GenderMismatch,
        ErrorCode::Duplicate,
        ErrorCode::WrongRegion,
        ErrorCode::Capacity,
        ErrorCode::Posture,
        ErrorCode::ChainOpen,
        ErrorCode::NoChain,
        ErrorCode::InvalidNext,
        ErrorCode::NotTerminal,
        ErrorCode::EmptyChain,
        ErrorCode::Lifecycle,
        ErrorCode::Locked,
        ErrorCode::Interaction,
        ErrorCode::Cycle,
        ErrorCode::SelfRelation,
        ErrorCode::BadRelation,
        ErrorCode::EmptyStory,
        ErrorCode::UnknownAction,
        ErrorCode::Pagination,
        ErrorCode::BadArgs,
        ErrorCode::UnknownTool,
        ErrorCode::Busy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::State => "E_STATE",
            ErrorCode::NotFound => "E_NOT_FOUND",
            ErrorCode::GenderMismatch => "E_GENDER_MISMATCH",
            ErrorCode::Duplicate => "E_DUPLICATE",
            ErrorCode::WrongRegion => "E_WRONG_REGION",
            ErrorCode::Capacity => "E_CAPACITY",
            ErrorCode::Posture => "E_POSTURE",
            ErrorCode::ChainOpen => "E_CHAIN_OPEN",
            ErrorCode::NoChain => "E_NO_CHAIN",
            ErrorCode::InvalidNext => "E_INVALID_NEXT",
            ErrorCode::NotTerminal => "E_NOT_TERMINAL",
            ErrorCode::EmptyChain => "E_EMPTY_CHAIN",
            ErrorCode::Lifecycle => "E_LIFECYCLE",
            ErrorCode::Locked => "E_LOCKED",
            ErrorCode::Interaction => "E_INTERACTION",
            ErrorCode::Cycle => "E_CYCLE",
            ErrorCode::SelfRelation => "E_SELF",
            ErrorCode::BadRelation => "E_BAD_RELATION",
            ErrorCode::EmptyStory => "E_EMPTY_STORY",
            ErrorCode::UnknownAction => "E_UNKNOWN_ACTION",
            ErrorCode::Pagination => "E_PAGINATION",
            ErrorCode::BadArgs => "E_BAD_ARGS",
            ErrorCode::UnknownTool => "E_UNKNOWN_TOOL",
            ErrorCode::Busy => "E_BUSY",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorCode> {
        ErrorCode::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// One-line explanation served to agents through the rules tool.
    pub fn explanation(self) -> &'static str {
        match self {
            ErrorCode::State => "the tool is not allowed in the current session phase (IDLE, STORY_CREATED, IN_SCENE, IN_ROUND), or a recording toggle was repeated",
            ErrorCode::NotFound => "an episode, region, POI, skin, actor, event or interaction id does not exist or is not part of the current scene",
            ErrorCode::GenderMismatch => "the chosen skin belongs to the other gender",
            ErrorCode::Duplicate => "an actor with this name already exists, or an id was listed twice",
            ErrorCode::WrongRegion => "an actor is not located in the scene region; move them first with move_actors",
            ErrorCode::Capacity => "an exclusive POI (chair, bed, gym equipment) is already in use by another actor",
            ErrorCode::Posture => "the actor must be standing (or resume at the POI they are seated at)",
            ErrorCode::ChainOpen => "the actor already has an open chain, or chains are still open when closing a round",
            ErrorCode::NoChain => "the actor has no open chain",
            ErrorCode::InvalidNext => "the action is not a valid next action at this POI in the actor's current state",
            ErrorCode::NotTerminal => "the chain cannot end on its last action; continue it to a terminal action",
            ErrorCode::EmptyChain => "end_chain was called before any action was added",
            ErrorCode::Lifecycle => "object lifecycle rule broken: nothing to put down, put-down outside the object's origin region, or giving an object the actor does not hold",
            ErrorCode::Locked => "the actor is in the middle of an atomic spawnable sequence (take out, use, stash) and must finish it",
            ErrorCode::Interaction => "interaction rule broken: both actors must be distinct, standing, in the same region, without open chains or spawnables, and not both coming straight from another interaction",
            ErrorCode::Cycle => "the temporal relation would create a cycle in the event ordering",
            ErrorCode::SelfRelation => "an event cannot be related to itself",
            ErrorCode::BadRelation => "the relation is not in the allowed vocabulary (logical: causes, enables, prevents, requires; semantic: any non-empty text)",
            ErrorCode::EmptyStory => "finalize_gest needs at least one committed event",
            ErrorCode::UnknownAction => "the action does not appear in this POI's action automaton",
            ErrorCode::Pagination => "page is beyond the last page or page_size is outside 1..=100",
            ErrorCode::BadArgs => "tool arguments do not match the tool's parameter schema",
            ErrorCode::UnknownTool => "the tool name is not in the published manifest",
            ErrorCode::Busy => "another call to the same session is in progress",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected tool call. `hint` is phrased for an agent and usually lists the
/// currently valid alternatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ToolError {
    pub code: ErrorCode,
    pub message: String,
    pub hint: String,
}

impl ToolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ToolError {
            code,
            message: message.into(),
            hint: String::new(),
        }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = hint.into();
        self
    }
}
