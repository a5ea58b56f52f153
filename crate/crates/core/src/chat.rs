//! Chat-conversation primitives shared by the runner and the agents.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Merge neighboring messages that share a role, joining contents with a blank
/// line. Contexts assembled from markers plus environment turns pass through
/// this so the final list strictly alternates after the system turn.
pub fn merge_adjacent(messages: Vec<ChatMessage>) -> Vec<ChatMessage> {
    let mut merged: Vec<ChatMessage> = Vec::with_capacity(messages.len());
    for message in messages {
        match merged.last_mut() {
            Some(last) if last.role == message.role => {
                last.content.push_str("\n\n");
                last.content.push_str(&message.content);
            }
            _ => merged.push(message),
        }
    }
    merged
}

/// Canonical single-string form of a conversation, used for digests and for
/// seeding history-keyed RNGs. Role and content are length-prefixed so the
/// encoding is injective.
pub fn render_for_digest(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(m.role.name());
        out.push(':');
        out.push_str(&m.content.len().to_string());
        out.push(':');
        out.push_str(&m.content);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_joins_same_role_runs() {
        let merged = merge_adjacent(vec![
            ChatMessage::system("s"),
            ChatMessage::user("a"),
            ChatMessage::user("b"),
            ChatMessage::assistant("c"),
            ChatMessage::user("d"),
        ]);
        assert_eq!(
            merged,
            vec![
                ChatMessage::system("s"),
                ChatMessage::user("a\n\nb"),
                ChatMessage::assistant("c"),
                ChatMessage::user("d"),
            ]
        );
    }

    #[test]
    fn digest_rendering_is_injective_on_tricky_splits() {
        let a = render_for_digest(&[ChatMessage::user("ab"), ChatMessage::user("c")]);
        let b = render_for_digest(&[ChatMessage::user("a"), ChatMessage::user("bc")]);
        assert_ne!(a, b);
    }

    #[test]
    fn roles_serialize_lowercase() {
        let msg = ChatMessage::assistant("7");
        assert_eq!(
            serde_json::to_string(&msg).unwrap(),
            r#"{"role":"assistant","content":"7"}"#
        );
    }
}
