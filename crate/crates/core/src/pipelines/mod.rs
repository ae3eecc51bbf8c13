//! The translation paths between motion, action information and text.

mod motion;
mod prompt;
mod text;

pub use motion::{motion2action_step, motion2char_step, proactive_motion_step, reactive_motion_step, resolve_pose, GeneratedPose};
pub use prompt::{
    build_character_prompt, build_story_prompt, parse_character_reply, CharacterProfile, PromptPurpose, PromptSegment,
    SoftBlock, SoftPrompt, StoryContext, StorySettings, SOFT_PROMPT_ROWS, VECTORS_PLACEHOLDER,
};
pub use text::{
    build_soft_prompt, generate_sentence, text2action, text2char, CachedTokenEmbeddings, EchoGenerator,
    PseudoTokenEmbeddings, RemoteGenerator, RemoteTokenEmbeddings, ScriptedGenerator, TemplateGenerator, TextGenerator,
    TextOnly, TokenEmbeddingProvider, CHARACTER_TEMPERATURE, STORY_TEMPERATURE,
};
